#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "causerl/encoders.hpp"
#include "causerl/identifier.hpp"

namespace causerl {

enum class Resource { kGluSpe, kGluGen, kAtomic, kDistant, kSynth };

std::string_view to_string(Resource resource);
/// Accepts "GLU-SPE", "GLU-GEN", "ATOMIC", "DISTANT", "SYNTH".
Resource resource_from_string(std::string_view name);

struct CausalStatement {
  Resource resource = Resource::kSynth;
  std::string original;
  std::string converted;
  TokenSeq tokens;  // filled from a Vocabulary
};

/// Rewrites an external statement into the single-sentence form used for
/// self-supervision.
///
/// A relation marker ">Relation>" becomes ", "; the first alphabetic
/// character of the second clause is lowercased unless that clause's first
/// token is a placeholder containing '_'; a terminal '.' is appended when
/// missing. DISTANT text only gets the terminal-period rule. Text with no
/// marker that already ends in '.' is taken as converted and returned as is,
/// which keeps the conversion idempotent.
/// Throws MarkerNotFound / MultipleMarkers.
std::string convert_statement(std::string_view original, Resource resource);

struct SyntheticSpec {
  std::size_t vocab_size = 200;
  std::size_t n_patterns = 20;
  std::size_t n_external_statements = 400;
  std::size_t n_eci_examples = 600;
  double pattern_overlap = 0.8;
  double noise_rate = 0.05;
  std::uint64_t seed = 7;
  double positive_fraction = 1.0 / 3.0;
  std::size_t examples_per_doc = 10;
  std::size_t docs_per_topic = 6;

  void validate() const;  // throws InvalidSpec
};

struct CausalTemplate {
  std::string cause_verb;
  std::string effect_verb;
  bool external = false;  // instantiated in the external statements
};

struct SyntheticCorpus {
  std::vector<CausalStatement> external;
  std::vector<EventPairExample> examples;
  std::vector<CausalTemplate> templates;
  /// Template index behind each positive example (or -1), before noise.
  std::vector<int> example_template;
};

/// Planted-pattern corpus: each template is a (cause verb, effect verb)
/// pair. External statements instantiate templates as
/// "<agent> <cause> <object>, <agent> <effect> <object>." (a small share,
/// `noise_rate`, mixes verbs of two templates). ECI positives place a
/// template's verbs as the two events of one sentence; negatives mix two
/// templates or put the effect clause first. `pattern_overlap` is the share
/// of positives whose template also occurs externally. Label noise swaps the
/// labels of equal numbers of positives and negatives, so class counts are
/// exact. Deterministic in `spec.seed`.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::string> dev;
  std::vector<std::vector<std::string>> folds;

  nlohmann::json to_json() const;
  static FoldPlan from_json(const nlohmann::json& doc);
};

/// Topic of a document: the part of its id before the first '_', or the id.
std::string topic_of(const std::string& doc_id);

/// Holds out the documents of the last `dev_topics` topics (sorted order) as
/// the dev slice, then shuffles the remaining documents and deals them into
/// k near-equal folds. Throws TooFewDocuments.
FoldPlan make_folds(std::span<const EventPairExample> examples, std::size_t k, std::uint64_t seed,
                    std::size_t dev_topics = 2);

/// External statements recast as positive event-pair examples: the token
/// after each clause's first token is taken as that clause's predicate.
/// Statements without two usable clauses are skipped.
std::vector<EventPairExample> statements_as_examples(std::span<const CausalStatement> statements);

Vocabulary build_vocabulary(std::span<const CausalStatement> statements,
                            std::span<const EventPairExample> examples);
void assign_ids(std::vector<CausalStatement>& statements, const Vocabulary& vocab);
void assign_ids(std::vector<EventPairExample>& examples, const Vocabulary& vocab);
std::vector<TokenSeq> statement_tokens(std::span<const CausalStatement> statements);

/// Line-delimited JSON. Blank lines are skipped; malformed lines raise
/// ParseError with their 1-based line number.
std::vector<nlohmann::json> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::filesystem::path& path, std::span<const nlohmann::json> records);

nlohmann::json statement_to_json(const CausalStatement& s);
CausalStatement statement_from_json(const nlohmann::json& j);
nlohmann::json example_to_json(const EventPairExample& ex);
EventPairExample example_from_json(const nlohmann::json& j);

std::vector<CausalStatement> load_statements(const std::filesystem::path& path);
void save_statements(const std::filesystem::path& path, std::span<const CausalStatement> items);
std::vector<EventPairExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::filesystem::path& path, std::span<const EventPairExample> items);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace causerl
