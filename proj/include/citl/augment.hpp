#pragma once

// Positive instruction augmentation: synonym substitution, contextual
// rewriting and round-trip translation. The two model-backed methods go
// through TextEditClient so they can be served remotely or by offline stubs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "citl/instruction.hpp"

namespace citl {

using Lexicon = std::map<std::string, std::vector<std::string>>;
using NormalizationTable = std::map<std::string, std::string>;

/// Throws ConfigError when a word has no alternatives, maps to itself, or repeats an alternative.
void validate_lexicon(const Lexicon& lexicon);
Lexicon load_lexicon(const std::filesystem::path& path);
NormalizationTable load_normalization_table(const std::filesystem::path& path);

struct TextEditRequest {
  std::string text;
  Provenance provenance = Provenance::original;  // which augmentation is being requested
  std::chrono::milliseconds timeout{2000};
};

struct TextEditResponse {
  std::string text;
  bool ok = false;
};

/// Single request, text in / text out. Implementations must be callable
/// concurrently.
class TextEditClient {
 public:
  virtual ~TextEditClient() = default;
  virtual TextEditResponse edit(const TextEditRequest& request) const = 0;
};

/// Offline round-trip translation: maps each word through a fixed table.
class TableRoundTripClient final : public TextEditClient {
 public:
  explicit TableRoundTripClient(NormalizationTable table) : table_(std::move(table)) {}
  TextEditResponse edit(const TextEditRequest& request) const override;

 private:
  NormalizationTable table_;
};

/// Wraps a plain function; handy for tests and in-process models.
class FunctionClient final : public TextEditClient {
 public:
  using Fn = std::function<TextEditResponse(const TextEditRequest&)>;
  explicit FunctionClient(Fn fn) : fn_(std::move(fn)) {}
  TextEditResponse edit(const TextEditRequest& request) const override { return fn_(request); }

 private:
  Fn fn_;
};

/// POSTs {"text", "provenance"} as JSON to http://host:port/path and reads
/// {"text"} back. Failures and timeouts yield ok = false.
class HttpTextEditClient final : public TextEditClient {
 public:
  HttpTextEditClient(std::string host, int port, std::string path);
  TextEditResponse edit(const TextEditRequest& request) const override;

 private:
  std::string host_;
  int port_;
  std::string path_;
};

struct AugmenterConfig {
  Lexicon synonym_lexicon;
  std::shared_ptr<const TextEditClient> lm_client;
  std::shared_ptr<const TextEditClient> mt_client;
  /// Used for round-trip translation when mt_client is absent.
  NormalizationTable normalization_table;
  double replace_prob = 0.3;
  std::uint64_t rng_seed = 0;
  std::chrono::milliseconds timeout{2000};
};

enum class AugmentMethod { synonym, contextual, backtranslation };

/// The sub-span structure is preserved: model-backed methods edit each
/// sub-instruction separately and the spans are rebuilt around the results.
/// An output identical to the input is flagged Provenance::original_copy.
InstructionDoc augment_positive(const InstructionDoc& doc, const AugmenterConfig& cfg, AugmentMethod method);

}  // namespace citl
