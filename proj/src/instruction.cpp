#include "citl/instruction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <stdexcept>

#include "citl/rng.hpp"

namespace citl {

namespace {

constexpr std::array<std::string_view, 26> kMotionKeywords = {
    "walk",   "go",     "turn",  "head",  "move",   "exit",  "enter", "continue", "proceed",
    "stop",   "wait",   "take",  "climb", "descend", "pass", "follow", "veer",    "cross",
    "face",   "keep",   "leave", "stand", "step",   "reach", "approach", "navigate",
};

bool is_delimiter(std::string_view t) { return t == "," || t == "."; }
bool is_conjunction(std::string_view t) { return t == "and" || t == "then"; }

bool is_punct(char c) { return c == ',' || c == '.' || c == ';' || c == '!' || c == '?'; }

// A conjunction side reads as a clause when it has a motion keyword and at
// least two words that are not conjunctions.
bool reads_as_clause(std::span<const std::string> side) {
  int words = 0;
  bool verb = false;
  for (const auto& t : side) {
    if (is_conjunction(t) || is_delimiter(t)) continue;
    ++words;
    verb = verb || is_motion_keyword(t);
  }
  return verb && words >= 2;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::original_copy: return "original_copy";
    case Provenance::synonym: return "synonym";
    case Provenance::contextual: return "contextual";
    case Provenance::backtranslated: return "backtranslated";
    case Provenance::shuffled_negative: return "shuffled_negative";
    case Provenance::repeated_negative: return "repeated_negative";
  }
  return "unknown";
}

std::vector<std::string> InstructionDoc::span_tokens(std::size_t i) const {
  const Span s = sub_spans.at(i);
  return {tokens.begin() + s.start, tokens.begin() + s.end};
}

std::string InstructionDoc::text() const { return join_tokens(tokens); }

void validate(const InstructionDoc& doc) {
  if (doc.sub_spans.empty()) throw std::invalid_argument("instruction: no sub-instruction spans");
  int expect = 0;
  for (const auto& s : doc.sub_spans) {
    if (s.start != expect || s.end <= s.start)
      throw std::invalid_argument("instruction: sub-spans must be non-empty and contiguous");
    expect = s.end;
  }
  if (expect != static_cast<int>(doc.tokens.size()))
    throw std::invalid_argument("instruction: sub-spans must cover every token");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

bool is_motion_keyword(std::string_view token) {
  return std::find(kMotionKeywords.begin(), kMotionKeywords.end(), token) != kMotionKeywords.end();
}

InstructionDoc split_sub_instructions(std::vector<std::string> tokens) {
  if (tokens.empty()) throw std::invalid_argument("split_sub_instructions: empty token sequence");
  const int n = static_cast<int>(tokens.size());
  std::span<const std::string> all(tokens);

  // Boundaries are start indices of new spans.
  std::vector<int> cuts;
  for (int i = 0; i < n - 1; ++i)
    if (is_delimiter(tokens[static_cast<std::size_t>(i)])) cuts.push_back(i + 1);

  // Conjunction cuts are judged within the delimiter-bounded segment.
  std::vector<int> seg_bounds{0};
  seg_bounds.insert(seg_bounds.end(), cuts.begin(), cuts.end());
  seg_bounds.push_back(n);
  std::vector<int> conj_cuts;
  for (std::size_t s = 0; s + 1 < seg_bounds.size(); ++s) {
    int left_start = seg_bounds[s];
    const int seg_end = seg_bounds[s + 1];
    for (int i = left_start + 1; i < seg_end; ++i) {
      if (!is_conjunction(tokens[static_cast<std::size_t>(i)])) continue;
      int right_end = seg_end;
      for (int k = i + 1; k < seg_end; ++k)
        if (is_conjunction(tokens[static_cast<std::size_t>(k)])) {
          right_end = k;
          break;
        }
      const auto left = all.subspan(static_cast<std::size_t>(left_start), static_cast<std::size_t>(i - left_start));
      const auto right = all.subspan(static_cast<std::size_t>(i + 1), static_cast<std::size_t>(right_end - i - 1));
      if (reads_as_clause(left) && reads_as_clause(right)) {
        conj_cuts.push_back(i);
        left_start = i;
      }
    }
  }
  cuts.insert(cuts.end(), conj_cuts.begin(), conj_cuts.end());
  std::sort(cuts.begin(), cuts.end());

  InstructionDoc doc;
  int prev = 0;
  for (int c : cuts) {
    if (c > prev && c < n) {
      doc.sub_spans.push_back({prev, c});
      prev = c;
    }
  }
  doc.sub_spans.push_back({prev, n});
  doc.tokens = std::move(tokens);
  return doc;
}

namespace {

InstructionDoc reassemble(const InstructionDoc& doc, std::span<const int> order, Provenance prov) {
  InstructionDoc out;
  out.provenance = prov;
  for (int idx : order) {
    const Span s = doc.sub_spans[static_cast<std::size_t>(idx)];
    const int start = static_cast<int>(out.tokens.size());
    out.tokens.insert(out.tokens.end(), doc.tokens.begin() + s.start, doc.tokens.begin() + s.end);
    out.sub_spans.push_back({start, static_cast<int>(out.tokens.size())});
  }
  return out;
}

}  // namespace

InstructionDoc make_intra_negative(const InstructionDoc& doc, std::uint64_t seed, NegativeMode mode) {
  validate(doc);
  Rng rng(seed);
  const int k = static_cast<int>(doc.span_count());

  if (k == 1) {
    const std::vector<int> order{0, 0};
    return reassemble(doc, order, Provenance::repeated_negative);
  }
  if (mode == NegativeMode::random) mode = uniform01(rng) < 0.5 ? NegativeMode::repeat : NegativeMode::shuffle;

  if (mode == NegativeMode::repeat) {
    const int dup = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k)));
    std::vector<int> order;
    for (int i = 0; i < k; ++i) {
      order.push_back(i);
      if (i == dup) order.push_back(i);
    }
    return reassemble(doc, order, Provenance::repeated_negative);
  }

  std::vector<int> order(static_cast<std::size_t>(k));
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto out = reassemble(doc, order, Provenance::shuffled_negative);
    if (out.tokens != doc.tokens) return out;
  }
  // Swap the first span with the first later span whose words differ.
  std::iota(order.begin(), order.end(), 0);
  int partner = 1;
  const auto first = doc.span_tokens(0);
  for (int j = 1; j < k; ++j)
    if (doc.span_tokens(static_cast<std::size_t>(j)) != first) {
      partner = j;
      break;
    }
  std::swap(order[0], order[static_cast<std::size_t>(partner)]);
  return reassemble(doc, order, Provenance::shuffled_negative);
}

SubInstructionSets sub_instruction_sets(const InstructionDoc& doc, int query_idx) {
  const int k = static_cast<int>(doc.span_count());
  if (query_idx < 0 || query_idx >= k) throw std::out_of_range("sub_instruction_sets: query index out of range");
  SubInstructionSets out;
  out.query_idx = query_idx;
  for (int i = 0; i < k; ++i) {
    if (i == query_idx) continue;
    if (i == query_idx - 1 || i == query_idx + 1)
      out.positives.push_back(i);
    else
      out.intra_negatives.push_back(i);
  }
  return out;
}

}  // namespace citl
