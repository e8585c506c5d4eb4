#include "citl/augment.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "citl/errors.hpp"
#include "citl/rng.hpp"

namespace citl {

void validate_lexicon(const Lexicon& lexicon) {
  for (const auto& [word, alts] : lexicon) {
    if (alts.empty()) throw ConfigError("lexicon: '" + word + "' has no synonyms");
    std::set<std::string> uniq(alts.begin(), alts.end());
    if (uniq.size() != alts.size()) throw ConfigError("lexicon: '" + word + "' lists a synonym twice");
    if (uniq.count(word) != 0) throw ConfigError("lexicon: '" + word + "' maps to itself");
  }
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon " + path.string());
  Lexicon lex = nlohmann::json::parse(in).get<Lexicon>();
  validate_lexicon(lex);
  return lex;
}

NormalizationTable load_normalization_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open normalization table " + path.string());
  return nlohmann::json::parse(in).get<NormalizationTable>();
}

TextEditResponse TableRoundTripClient::edit(const TextEditRequest& request) const {
  auto tokens = tokenize(request.text);
  for (auto& t : tokens) {
    auto it = table_.find(t);
    if (it != table_.end()) t = it->second;
  }
  return {join_tokens(tokens), true};
}

HttpTextEditClient::HttpTextEditClient(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

TextEditResponse HttpTextEditClient::edit(const TextEditRequest& request) const {
  httplib::Client cli(host_, port_);
  const auto secs = request.timeout.count() / 1000;
  const auto usecs = (request.timeout.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const nlohmann::json body = {{"text", request.text}, {"provenance", std::string(to_string(request.provenance))}};
  auto res = cli.Post(path_, body.dump(), "application/json");
  if (!res || res->status != 200) return {};
  try {
    auto j = nlohmann::json::parse(res->body);
    return {j.at("text").get<std::string>(), true};
  } catch (const std::exception&) {
    return {};
  }
}

namespace {

std::vector<std::string> synonym_tokens(const std::vector<std::string>& tokens, const AugmenterConfig& cfg, Rng& rng) {
  std::vector<std::string> out = tokens;
  for (auto& t : out) {
    auto it = cfg.synonym_lexicon.find(t);
    if (it == cfg.synonym_lexicon.end()) continue;
    if (uniform01(rng) < cfg.replace_prob) t = it->second[uniform_index(rng, it->second.size())];
  }
  return out;
}

// Sends every sub-instruction through the client and rebuilds spans. A
// failed or empty reply keeps the original sub-instruction.
InstructionDoc edit_per_span(const InstructionDoc& doc, const TextEditClient& client, Provenance prov,
                             std::chrono::milliseconds timeout) {
  InstructionDoc out;
  out.provenance = prov;
  for (std::size_t i = 0; i < doc.span_count(); ++i) {
    auto original = doc.span_tokens(i);
    auto reply = client.edit({join_tokens(original), prov, timeout});
    auto tokens = reply.ok ? tokenize(reply.text) : std::vector<std::string>{};
    if (tokens.empty()) tokens = std::move(original);
    const int start = static_cast<int>(out.tokens.size());
    out.tokens.insert(out.tokens.end(), tokens.begin(), tokens.end());
    out.sub_spans.push_back({start, static_cast<int>(out.tokens.size())});
  }
  return out;
}

}  // namespace

InstructionDoc augment_positive(const InstructionDoc& doc, const AugmenterConfig& cfg, AugmentMethod method) {
  validate(doc);
  if (doc.provenance != Provenance::original)
    throw std::invalid_argument("augment_positive: only original instructions can be augmented");

  InstructionDoc out;
  switch (method) {
    case AugmentMethod::contextual:
      if (cfg.lm_client) {
        out = edit_per_span(doc, *cfg.lm_client, Provenance::contextual, cfg.timeout);
        break;
      }
      [[fallthrough]];
    case AugmentMethod::synonym: {
      Rng rng(derive_seed(cfg.rng_seed, {static_cast<std::uint64_t>(method)}));
      out.tokens = synonym_tokens(doc.tokens, cfg, rng);
      out.sub_spans = doc.sub_spans;
      out.provenance = Provenance::synonym;
      break;
    }
    case AugmentMethod::backtranslation:
      if (cfg.mt_client) {
        out = edit_per_span(doc, *cfg.mt_client, Provenance::backtranslated, cfg.timeout);
      } else {
        const TableRoundTripClient stub(cfg.normalization_table);
        out = edit_per_span(doc, stub, Provenance::backtranslated, cfg.timeout);
      }
      break;
  }
  if (out.tokens == doc.tokens) out.provenance = Provenance::original_copy;
  return out;
}

}  // namespace citl
