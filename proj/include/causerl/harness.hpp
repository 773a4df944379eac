#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "causerl/conrt.hpp"
#include "causerl/corpus.hpp"
#include "causerl/identifier.hpp"
#include "causerl/metrics.hpp"
#include "causerl/selfrl.hpp"

namespace causerl {

enum class Mode { kGenCorpus, kTrainSelfRL, kTrainEci, kEvaluate, kGradcheck, kAblate };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

/// Training setups compared by the ablation runner.
///   baseline            identifier alone
///   full                SelfRL teacher + contrastive transfer
///   no-selfrl           untrained teacher encoder + contrastive transfer
///   no-conrt-frozen     learned teacher encoder as a frozen identifier encoder
///   no-conrt-finetune   learned teacher encoder as the identifier's initialisation
///   statements-as-data  external statements added as positive training pairs
enum class Variant {
  kBaseline,
  kFull,
  kNoSelfRL,
  kNoConRTFrozen,
  kNoConRTFinetune,
  kStatementsAsData,
};

std::string_view to_string(Variant variant);
/// Throws UnknownVariant.
Variant variant_from_string(std::string_view name);
bool needs_trained_teacher(Variant variant);

struct RunConfig {
  Mode mode = Mode::kEvaluate;
  std::string external_path;
  std::string examples_path;
  std::string folds_path;
  std::string teacher_path;
  std::string out_dir = ".";
  std::size_t folds = 5;
  std::size_t dev_topics = 2;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  Variant variant = Variant::kFull;
  std::vector<Variant> variants = {Variant::kNoSelfRL, Variant::kNoConRTFrozen,
                                   Variant::kNoConRTFinetune, Variant::kStatementsAsData};
  std::size_t gradcheck_seeds = 20;
  bool mutation = false;
  SelfRLConfig selfrl;
  IdentifierConfig identifier;
  SyntheticSpec synthetic;

  /// Flat key → value object; every field has exactly one key.
  nlohmann::json to_json() const;
  /// Starts from defaults and applies `doc`. Unknown keys and mistyped
  /// values throw InvalidConfig. A manifest document is accepted too (its
  /// "config" member is used).
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::filesystem::path& path);
};

/// Desk-scale profile used by the acceptance suite and configs/desk.json.
/// Default sizes, τ and T; higher learning rates, 300 teacher steps, 12 epochs.
RunConfig desk_config();

struct Dataset {
  std::vector<CausalStatement> external;
  std::vector<EventPairExample> examples;
  FoldPlan plan;
  Vocabulary vocab;
  std::map<std::string, std::string> checksums;  // input name → content hash

  std::vector<TokenSeq> external_tokens() const { return statement_tokens(external); }
};

/// Loads corpora named in the config or generates the synthetic corpus,
/// builds the vocabulary and the fold plan. Throws MissingArtifact.
Dataset prepare_dataset(const RunConfig& config);

struct FoldRow {
  Variant variant = Variant::kBaseline;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  ConfusionCounts counts;
  PRF metrics;
  std::size_t epochs = 0;
  double best_dev_f1 = 0.0;
};

struct VariantSummary {
  Variant variant = Variant::kBaseline;
  PRF micro;                      // tp/fp/fn pooled over folds and seeds
  std::vector<double> seed_f1;    // micro F1 per seed (pooled over folds)
  double mean_f1 = 0.0;           // mean of seed_f1
  double std_f1 = 0.0;            // population std of seed_f1
  double macro_f1 = 0.0;          // mean of per-fold F1
};

struct PredictionRecord {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::string doc_id;
  Span e1;
  Span e2;
  double prob = 0.0;
  int label = 0;
  int pred = 0;
};

struct MetricReport {
  std::vector<FoldRow> rows;
  std::vector<VariantSummary> summaries;
  std::vector<PredictionRecord> predictions;

  const VariantSummary* summary(Variant variant) const;
  nlohmann::json to_json() const;  // rows + summaries
  std::string to_csv() const;      // one line per fold × seed × variant
};

/// Summaries per variant, in first-appearance order.
std::vector<VariantSummary> summarize(const std::vector<FoldRow>& rows);

/// Trains SelfRL teachers on demand and caches one per seed.
class TeacherCache {
 public:
  TeacherCache(const RunConfig& config, const Dataset& data);

  const TeacherHandle& trained(std::uint64_t seed);
  const TeacherHandle& untrained(std::uint64_t seed);
  /// Uses this teacher for every seed instead of training.
  void set_fixed(TeacherHandle teacher);

 private:
  const RunConfig& config_;
  const Dataset& data_;
  std::optional<TeacherHandle> fixed_;
  std::map<std::uint64_t, TeacherHandle> trained_;
  std::map<std::uint64_t, TeacherHandle> untrained_;
};

/// Trains one identifier for `variant` on `train`, early-stopping on `dev`.
IdentifierModel train_variant(Variant variant, std::uint64_t seed,
                              std::span<const EventPairExample> train,
                              std::span<const EventPairExample> dev, const RunConfig& config,
                              const Dataset& data, TeacherCache& teachers,
                              TrainSummary* summary = nullptr);

/// k-fold cross-validation of one variant over every configured seed.
/// Pass `teachers` to share trained teachers across calls.
MetricReport run_cross_validation(const RunConfig& config, const Dataset& data, Variant variant,
                                  TeacherCache* teachers = nullptr);

/// Baseline, full model and each configured variant on the same folds.
MetricReport run_ablation(const RunConfig& config, const Dataset& data);

struct GradcheckEntry {
  std::string surface;
  double max_relative_error = 0.0;
  std::size_t seeds = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed() const;
  nlohmann::json to_json() const;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Central-difference checks (h = 1e-5) of the SelfRL objective, the
/// classification loss, the transfer loss and the joint loss on randomised
/// toy instances. With `mutation` a sign error is injected into the
/// distance backward rule used by the transfer loss.
GradcheckReport run_gradcheck(std::size_t seeds, bool mutation = false);

/// Ablation for Mode::kAblate, otherwise cross-validation of `config.variant`.
/// Re-running a manifest goes through here.
MetricReport run_configured(const RunConfig& config, const Dataset& data);

/// FNV-1a 64 of the compact report JSON, as stored in manifests.
std::string report_checksum(const MetricReport& report);

/// Reproducibility manifest: the full config, seeds, input checksums and
/// the checksum of the report JSON it produced.
nlohmann::json make_manifest(const RunConfig& config, const Dataset& data,
                             const MetricReport& report);

/// Teacher checkpoint: provider table and Enc_θ plus the vocabulary.
void save_teacher(const std::filesystem::path& path, const TeacherHandle& teacher,
                  const Vocabulary& vocab);
TeacherHandle load_teacher(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace causerl
