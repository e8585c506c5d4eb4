#pragma once

// Instructions as token sequences with clause-level sub-instruction spans.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace citl {

enum class Provenance {
  original,
  original_copy,  // an augmentation that changed nothing
  synonym,
  contextual,
  backtranslated,
  shuffled_negative,
  repeated_negative,
};

std::string_view to_string(Provenance p);

/// Half-open token range [start, end).
struct Span {
  int start = 0;
  int end = 0;
  int size() const { return end - start; }
  bool operator==(const Span&) const = default;
};

struct InstructionDoc {
  std::vector<std::string> tokens;
  std::vector<Span> sub_spans;
  Provenance provenance = Provenance::original;

  std::size_t span_count() const { return sub_spans.size(); }
  std::vector<std::string> span_tokens(std::size_t i) const;
  std::string text() const;
};

/// Throws std::invalid_argument unless spans are non-empty and tile [0, |tokens|) in order.
void validate(const InstructionDoc& doc);

/// Lowercases and splits on whitespace; , . ; ! ? become their own tokens.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

/// Motion keywords used by the clause splitter.
bool is_motion_keyword(std::string_view token);

/// Splits after every ',' or '.' (the delimiter stays on the left) and before
/// "and"/"then" when each side of the conjunction reads as a clause: at
/// least two words, one of them a motion keyword. Never yields empty spans.
InstructionDoc split_sub_instructions(std::vector<std::string> tokens);

enum class NegativeMode { random, shuffle, repeat };

/// Intra-negative instruction: sub-instructions shuffled (never the
/// identity order) or one sub-instruction repeated in place.
InstructionDoc make_intra_negative(const InstructionDoc& doc, std::uint64_t seed,
                                   NegativeMode mode = NegativeMode::random);

struct SubInstructionSets {
  int query_idx = 0;
  std::vector<int> positives;        // immediate neighbours
  std::vector<int> intra_negatives;  // every other non-query span
};

SubInstructionSets sub_instruction_sets(const InstructionDoc& doc, int query_idx);

}  // namespace citl
