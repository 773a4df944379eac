#include "causerl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "causerl/error.hpp"
#include "causerl/gradcheck.hpp"
#include "causerl/ops.hpp"

namespace causerl {

using nlohmann::json;

namespace {

constexpr std::pair<Mode, std::string_view> kModes[] = {
    {Mode::kGenCorpus, "gen-corpus"}, {Mode::kTrainSelfRL, "train-selfrl"},
    {Mode::kTrainEci, "train-eci"},   {Mode::kEvaluate, "evaluate"},
    {Mode::kGradcheck, "gradcheck"},  {Mode::kAblate, "ablate"},
};

constexpr std::pair<Variant, std::string_view> kVariants[] = {
    {Variant::kBaseline, "baseline"},
    {Variant::kFull, "full"},
    {Variant::kNoSelfRL, "no-selfrl"},
    {Variant::kNoConRTFrozen, "no-conrt-frozen"},
    {Variant::kNoConRTFinetune, "no-conrt-finetune"},
    {Variant::kStatementsAsData, "statements-as-data"},
};

std::string fnv_hex(std::string_view bytes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string jsonl_text(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

[[noreturn]] void bad_config(const std::string& message) {
  throw Error(ErrorKind::kInvalidConfig, message);
}

template <typename T>
T read_value(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    bad_config("config key '" + key + "' has the wrong type");
  }
}

double read_number(const json& value, const std::string& key) {
  if (!value.is_number()) bad_config("config key '" + key + "' must be a number");
  return value.get<double>();
}

std::size_t read_count(const json& value, const std::string& key) {
  if (!value.is_number_unsigned()) {
    bad_config("config key '" + key + "' must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view to_string(Mode mode) {
  for (const auto& [m, name] : kModes) {
    if (m == mode) return name;
  }
  return "unknown";
}

Mode mode_from_string(std::string_view name) {
  for (const auto& [m, n] : kModes) {
    if (n == name) return m;
  }
  bad_config("unknown mode '" + std::string(name) + "'");
}

std::string_view to_string(Variant variant) {
  for (const auto& [v, name] : kVariants) {
    if (v == variant) return name;
  }
  return "unknown";
}

Variant variant_from_string(std::string_view name) {
  for (const auto& [v, n] : kVariants) {
    if (n == name) return v;
  }
  throw Error(ErrorKind::kUnknownVariant, "unknown variant '" + std::string(name) + "'");
}

bool needs_trained_teacher(Variant variant) {
  return variant == Variant::kFull || variant == Variant::kNoConRTFrozen ||
         variant == Variant::kNoConRTFinetune;
}

// ---------------------------------------------------------------- config

json RunConfig::to_json() const {
  std::vector<std::string> variant_names;
  for (auto v : variants) variant_names.emplace_back(to_string(v));
  return {
      {"mode", to_string(mode)},
      {"external_path", external_path},
      {"examples_path", examples_path},
      {"folds_path", folds_path},
      {"teacher_path", teacher_path},
      {"out_dir", out_dir},
      {"folds", folds},
      {"dev_topics", dev_topics},
      {"seeds", seeds},
      {"variant", to_string(variant)},
      {"variants", variant_names},
      {"gradcheck_seeds", gradcheck_seeds},
      {"mutation", mutation},
      {"selfrl_lr", selfrl.learning_rate},
      {"selfrl_tau", selfrl.tau},
      {"selfrl_batch_size", selfrl.batch_size},
      {"selfrl_max_steps", selfrl.max_steps},
      {"selfrl_copy_target_at_init", selfrl.copy_target_at_init},
      {"selfrl_weight_decay", selfrl.weight_decay},
      {"selfrl_head_hidden", selfrl.head_hidden},
      {"selfrl_head_dim", selfrl.head_dim},
      {"embedding_dim", selfrl.embedding_dim},
      {"hidden", selfrl.hidden},
      {"eci_lr", identifier.learning_rate},
      {"eci_batch_size", identifier.batch_size},
      {"eci_negative_keep_rate", identifier.negative_keep_rate},
      {"eci_temperature", identifier.temperature},
      {"eci_external_batch_size", identifier.external_batch_size},
      {"eci_patience", identifier.patience},
      {"eci_max_epochs", identifier.max_epochs},
      {"eci_weight_decay", identifier.weight_decay},
      {"eci_threshold", identifier.threshold},
      {"eci_classifier_hidden", identifier.classifier_hidden},
      {"eci_space_hidden", identifier.space_hidden},
      {"eci_space_dim", identifier.space_dim},
      {"eci_contrastive_form",
       identifier.contrastive_form == ContrastiveForm::kLiteral ? "literal" : "infonce"},
      {"synth_vocab_size", synthetic.vocab_size},
      {"synth_n_patterns", synthetic.n_patterns},
      {"synth_n_external", synthetic.n_external_statements},
      {"synth_n_eci", synthetic.n_eci_examples},
      {"synth_overlap", synthetic.pattern_overlap},
      {"synth_noise", synthetic.noise_rate},
      {"synth_seed", synthetic.seed},
      {"synth_positive_fraction", synthetic.positive_fraction},
      {"synth_examples_per_doc", synthetic.examples_per_doc},
      {"synth_docs_per_topic", synthetic.docs_per_topic},
  };
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) bad_config("config must be a JSON object");
  if (doc.contains("manifest_version")) {
    if (!doc.contains("config")) bad_config("manifest has no config");
    return from_json(doc.at("config"));
  }
  RunConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (key == "mode") {
      c.mode = mode_from_string(read_value<std::string>(value, key));
    } else if (key == "external_path") {
      c.external_path = read_value<std::string>(value, key);
    } else if (key == "examples_path") {
      c.examples_path = read_value<std::string>(value, key);
    } else if (key == "folds_path") {
      c.folds_path = read_value<std::string>(value, key);
    } else if (key == "teacher_path") {
      c.teacher_path = read_value<std::string>(value, key);
    } else if (key == "out_dir") {
      c.out_dir = read_value<std::string>(value, key);
    } else if (key == "folds") {
      c.folds = read_count(value, key);
    } else if (key == "dev_topics") {
      c.dev_topics = read_count(value, key);
    } else if (key == "seeds") {
      if (!value.is_array() || value.empty()) bad_config("seeds must be a non-empty array");
      c.seeds.clear();
      for (const auto& s : value) c.seeds.push_back(read_count(s, key));
    } else if (key == "variant") {
      c.variant = variant_from_string(read_value<std::string>(value, key));
    } else if (key == "variants") {
      if (!value.is_array()) bad_config("variants must be an array");
      c.variants.clear();
      for (const auto& v : value) {
        c.variants.push_back(variant_from_string(read_value<std::string>(v, key)));
      }
    } else if (key == "gradcheck_seeds") {
      c.gradcheck_seeds = read_count(value, key);
    } else if (key == "mutation") {
      c.mutation = read_value<bool>(value, key);
    } else if (key == "selfrl_lr") {
      c.selfrl.learning_rate = read_number(value, key);
    } else if (key == "selfrl_tau") {
      c.selfrl.tau = read_number(value, key);
    } else if (key == "selfrl_batch_size") {
      c.selfrl.batch_size = read_count(value, key);
    } else if (key == "selfrl_max_steps") {
      c.selfrl.max_steps = read_count(value, key);
    } else if (key == "selfrl_copy_target_at_init") {
      c.selfrl.copy_target_at_init = read_value<bool>(value, key);
    } else if (key == "selfrl_weight_decay") {
      c.selfrl.weight_decay = read_number(value, key);
    } else if (key == "selfrl_head_hidden") {
      c.selfrl.head_hidden = read_count(value, key);
    } else if (key == "selfrl_head_dim") {
      c.selfrl.head_dim = read_count(value, key);
    } else if (key == "embedding_dim") {
      c.selfrl.embedding_dim = read_count(value, key);
    } else if (key == "hidden") {
      c.selfrl.hidden = read_count(value, key);
    } else if (key == "eci_lr") {
      c.identifier.learning_rate = read_number(value, key);
    } else if (key == "eci_batch_size") {
      c.identifier.batch_size = read_count(value, key);
    } else if (key == "eci_negative_keep_rate") {
      c.identifier.negative_keep_rate = read_number(value, key);
    } else if (key == "eci_temperature") {
      c.identifier.temperature = read_number(value, key);
    } else if (key == "eci_external_batch_size") {
      c.identifier.external_batch_size = read_count(value, key);
    } else if (key == "eci_patience") {
      c.identifier.patience = read_count(value, key);
    } else if (key == "eci_max_epochs") {
      c.identifier.max_epochs = read_count(value, key);
    } else if (key == "eci_weight_decay") {
      c.identifier.weight_decay = read_number(value, key);
    } else if (key == "eci_threshold") {
      c.identifier.threshold = read_number(value, key);
    } else if (key == "eci_classifier_hidden") {
      c.identifier.classifier_hidden = read_count(value, key);
    } else if (key == "eci_space_hidden") {
      c.identifier.space_hidden = read_count(value, key);
    } else if (key == "eci_space_dim") {
      c.identifier.space_dim = read_count(value, key);
    } else if (key == "eci_contrastive_form") {
      const auto s = read_value<std::string>(value, key);
      if (s == "literal") {
        c.identifier.contrastive_form = ContrastiveForm::kLiteral;
      } else if (s == "infonce") {
        c.identifier.contrastive_form = ContrastiveForm::kInfoNce;
      } else {
        bad_config("eci_contrastive_form must be 'literal' or 'infonce'");
      }
    } else if (key == "synth_vocab_size") {
      c.synthetic.vocab_size = read_count(value, key);
    } else if (key == "synth_n_patterns") {
      c.synthetic.n_patterns = read_count(value, key);
    } else if (key == "synth_n_external") {
      c.synthetic.n_external_statements = read_count(value, key);
    } else if (key == "synth_n_eci") {
      c.synthetic.n_eci_examples = read_count(value, key);
    } else if (key == "synth_overlap") {
      c.synthetic.pattern_overlap = read_number(value, key);
    } else if (key == "synth_noise") {
      c.synthetic.noise_rate = read_number(value, key);
    } else if (key == "synth_seed") {
      c.synthetic.seed = read_count(value, key);
    } else if (key == "synth_positive_fraction") {
      c.synthetic.positive_fraction = read_number(value, key);
    } else if (key == "synth_examples_per_doc") {
      c.synthetic.examples_per_doc = read_count(value, key);
    } else if (key == "synth_docs_per_topic") {
      c.synthetic.docs_per_topic = read_count(value, key);
    } else {
      bad_config("unknown config key '" + key + "'");
    }
  }
  // The identifier shares the teacher's embedding width and hidden size so
  // teacher weights can seed it in the no-ConRT variants.
  c.identifier.embedding_dim = c.selfrl.embedding_dim;
  c.identifier.hidden = c.selfrl.hidden;
  if (c.folds < 2) bad_config("folds must be at least 2");
  if (c.seeds.empty()) bad_config("at least one seed is required");
  c.selfrl.validate();
  c.identifier.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, "config " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

RunConfig desk_config() {
  RunConfig c;
  c.selfrl.learning_rate = 1e-3;
  c.selfrl.max_steps = 300;
  c.identifier.learning_rate = 3e-3;
  c.identifier.max_epochs = 12;
  c.identifier.patience = 4;
  return c;
}

// ---------------------------------------------------------------- data

Dataset prepare_dataset(const RunConfig& config) {
  Dataset d;
  if (config.examples_path.empty()) {
    auto corpus = generate_synthetic(config.synthetic);
    d.external = std::move(corpus.external);
    d.examples = std::move(corpus.examples);
    std::vector<json> ext, exs;
    for (const auto& s : d.external) ext.push_back(statement_to_json(s));
    for (const auto& e : d.examples) exs.push_back(example_to_json(e));
    d.checksums["external"] = fnv_hex(jsonl_text(ext));
    d.checksums["examples"] = fnv_hex(jsonl_text(exs));
  } else {
    d.examples = load_examples(config.examples_path);
    d.checksums["examples"] = file_checksum(config.examples_path);
    if (!config.external_path.empty()) {
      d.external = load_statements(config.external_path);
      d.checksums["external"] = file_checksum(config.external_path);
    }
  }
  for (auto& s : d.external) {
    if (s.converted.empty()) s.converted = convert_statement(s.original, s.resource);
  }
  d.vocab = build_vocabulary(d.external, d.examples);
  assign_ids(d.external, d.vocab);
  assign_ids(d.examples, d.vocab);

  if (!config.folds_path.empty()) {
    std::ifstream in(config.folds_path);
    if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read " + config.folds_path);
    try {
      d.plan = FoldPlan::from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw ParseError(0, "folds " + config.folds_path + ": " + e.what());
    }
    d.checksums["folds"] = file_checksum(config.folds_path);
  } else {
    d.plan = make_folds(d.examples, config.folds, config.synthetic.seed, config.dev_topics);
  }
  return d;
}

// ---------------------------------------------------------------- teachers

TeacherCache::TeacherCache(const RunConfig& config, const Dataset& data)
    : config_(config), data_(data) {}

void TeacherCache::set_fixed(TeacherHandle teacher) { fixed_ = std::move(teacher); }

const TeacherHandle& TeacherCache::trained(std::uint64_t seed) {
  if (fixed_) return *fixed_;
  auto it = trained_.find(seed);
  if (it != trained_.end()) return it->second;
  SelfRLConfig sc = config_.selfrl;
  sc.seed = seed;
  const auto corpus = data_.external_tokens();
  auto result = train_selfrl(corpus, data_.vocab.size(), sc);
  return trained_.emplace(seed, TeacherHandle::from_selfrl(result.state)).first->second;
}

const TeacherHandle& TeacherCache::untrained(std::uint64_t seed) {
  auto it = untrained_.find(seed);
  if (it != untrained_.end()) return it->second;
  SelfRLConfig sc = config_.selfrl;
  sc.seed = seed;
  return untrained_.emplace(seed, TeacherHandle::untrained(data_.vocab.size(), sc))
      .first->second;
}

// ---------------------------------------------------------------- training

IdentifierModel train_variant(Variant variant, std::uint64_t seed,
                              std::span<const EventPairExample> train,
                              std::span<const EventPairExample> dev, const RunConfig& config,
                              const Dataset& data, TeacherCache& teachers,
                              TrainSummary* summary) {
  IdentifierConfig ic = config.identifier;
  ic.seed = seed;
  Rng init_rng(mix_seed(seed, 17));

  std::optional<TransferContext> transfer;
  std::vector<EventPairExample> augmented;
  std::span<const EventPairExample> train_set = train;
  IdentifierModel model;
  const TeacherHandle* used = nullptr;

  auto make_transfer = [&](const TeacherHandle& teacher) {
    used = &teacher;
    auto space = TransferSpace::random(2 * ic.hidden, teacher.encoder.output_dim(),
                                       ic.space_hidden, ic.space_dim, ic.temperature, init_rng);
    space.form = ic.contrastive_form;
    const auto external = data.external_tokens();
    return TransferContext::build(teacher, std::move(space), external);
  };

  switch (variant) {
    case Variant::kBaseline:
      model = IdentifierModel::random(data.vocab.size(), ic, init_rng);
      break;
    case Variant::kFull:
      model = IdentifierModel::random(data.vocab.size(), ic, init_rng);
      transfer = make_transfer(teachers.trained(seed));
      break;
    case Variant::kNoSelfRL:
      model = IdentifierModel::random(data.vocab.size(), ic, init_rng);
      transfer = make_transfer(teachers.untrained(seed));
      break;
    case Variant::kNoConRTFrozen:
      used = &teachers.trained(seed);
      model = IdentifierModel::from_teacher(*used, ic, init_rng, true);
      break;
    case Variant::kNoConRTFinetune:
      used = &teachers.trained(seed);
      model = IdentifierModel::from_teacher(*used, ic, init_rng, false);
      break;
    case Variant::kStatementsAsData: {
      model = IdentifierModel::random(data.vocab.size(), ic, init_rng);
      augmented.assign(train.begin(), train.end());
      auto pseudo = statements_as_examples(data.external);
      assign_ids(pseudo, data.vocab);
      augmented.insert(augmented.end(), pseudo.begin(), pseudo.end());
      train_set = augmented;
      break;
    }
  }
  const std::uint64_t teacher_before = used != nullptr ? used->checksum() : 0;
  IdentifierTrainer trainer(std::move(model), ic, std::move(transfer));
  const auto s = trainer.fit(train_set, dev);
  if (used != nullptr && used->checksum() != teacher_before) {
    throw std::logic_error("teacher parameters changed during identifier training");
  }
  if (summary != nullptr) *summary = s;
  return trainer.model().clone();
}

MetricReport run_cross_validation(const RunConfig& config, const Dataset& data, Variant variant,
                                  TeacherCache* teachers) {
  std::optional<TeacherCache> own;
  if (teachers == nullptr) {
    own.emplace(config, data);
    if (!config.teacher_path.empty()) own->set_fixed(load_teacher(config.teacher_path, data.vocab));
    teachers = &*own;
  }
  const auto& plan = data.plan;
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (const auto& doc : plan.folds[f]) fold_of[doc] = f;
  }
  const std::set<std::string> dev_docs(plan.dev.begin(), plan.dev.end());
  std::vector<EventPairExample> dev;
  for (const auto& ex : data.examples) {
    if (dev_docs.count(ex.doc_id) != 0) dev.push_back(ex);
  }

  MetricReport report;
  for (const auto seed : config.seeds) {
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      std::vector<EventPairExample> train, test;
      for (const auto& ex : data.examples) {
        auto it = fold_of.find(ex.doc_id);
        if (it == fold_of.end()) continue;
        (it->second == f ? test : train).push_back(ex);
      }
      if (test.empty() || train.empty()) continue;
      TrainSummary summary;
      const auto model = train_variant(variant, mix_seed(seed, f), train, dev, config, data,
                                       *teachers, &summary);
      FoldRow row{variant, seed, f, {}, {}, summary.epochs_run, summary.best_dev_f1};
      for (const auto& ex : test) {
        const double prob = predict_proba(ex, model);
        const int pred = prob >= config.identifier.threshold ? 1 : 0;
        row.counts.add(pred, ex.label);
        report.predictions.push_back({seed, f, ex.doc_id, ex.e1, ex.e2, prob, ex.label, pred});
      }
      row.metrics = prf1(row.counts);
      report.rows.push_back(row);
    }
  }
  report.summaries = summarize(report.rows);
  return report;
}

MetricReport run_ablation(const RunConfig& config, const Dataset& data) {
  TeacherCache teachers(config, data);
  if (!config.teacher_path.empty()) teachers.set_fixed(load_teacher(config.teacher_path, data.vocab));
  std::vector<Variant> order = {Variant::kBaseline, Variant::kFull};
  for (auto v : config.variants) {
    if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
  }
  MetricReport report;
  for (auto v : order) {
    auto part = run_cross_validation(config, data, v, &teachers);
    report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
    report.predictions.insert(report.predictions.end(), part.predictions.begin(),
                              part.predictions.end());
  }
  report.summaries = summarize(report.rows);
  return report;
}

// ---------------------------------------------------------------- reports

std::vector<VariantSummary> summarize(const std::vector<FoldRow>& rows) {
  std::vector<VariantSummary> out;
  std::vector<Variant> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  }
  for (auto v : order) {
    VariantSummary s;
    s.variant = v;
    ConfusionCounts pooled;
    std::vector<std::uint64_t> seeds;
    std::map<std::uint64_t, ConfusionCounts> per_seed;
    double fold_f1_sum = 0.0;
    std::size_t n_folds = 0;
    for (const auto& r : rows) {
      if (r.variant != v) continue;
      pooled += r.counts;
      if (per_seed.find(r.seed) == per_seed.end()) seeds.push_back(r.seed);
      per_seed[r.seed] += r.counts;
      fold_f1_sum += r.metrics.f1;
      ++n_folds;
    }
    s.micro = prf1(pooled);
    for (auto seed : seeds) s.seed_f1.push_back(prf1(per_seed[seed]).f1);
    s.mean_f1 = std::accumulate(s.seed_f1.begin(), s.seed_f1.end(), 0.0) /
                static_cast<double>(s.seed_f1.size());
    double var = 0.0;
    for (double f : s.seed_f1) var += (f - s.mean_f1) * (f - s.mean_f1);
    s.std_f1 = std::sqrt(var / static_cast<double>(s.seed_f1.size()));
    s.macro_f1 = fold_f1_sum / static_cast<double>(n_folds);
    out.push_back(std::move(s));
  }
  return out;
}

const VariantSummary* MetricReport::summary(Variant variant) const {
  for (const auto& s : summaries) {
    if (s.variant == variant) return &s;
  }
  return nullptr;
}

json MetricReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"variant", to_string(r.variant)},
                         {"seed", r.seed},
                         {"fold", r.fold},
                         {"tp", r.counts.tp},
                         {"fp", r.counts.fp},
                         {"fn", r.counts.fn},
                         {"tn", r.counts.tn},
                         {"precision", r.metrics.precision},
                         {"recall", r.metrics.recall},
                         {"f1", r.metrics.f1},
                         {"epochs", r.epochs},
                         {"best_dev_f1", r.best_dev_f1}});
  }
  json sums = json::array();
  for (const auto& s : summaries) {
    sums.push_back({{"variant", to_string(s.variant)},
                    {"micro", {{"precision", s.micro.precision},
                               {"recall", s.micro.recall},
                               {"f1", s.micro.f1}}},
                    {"seed_f1", s.seed_f1},
                    {"mean_f1", s.mean_f1},
                    {"std_f1", s.std_f1},
                    {"macro_f1", s.macro_f1}});
  }
  return {{"rows", rows_json}, {"summaries", sums}};
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "variant,seed,fold,tp,fp,fn,tn,precision,recall,f1\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", r.counts.tp, r.counts.fp,
                  r.counts.fn, r.counts.tn, r.metrics.precision, r.metrics.recall, r.metrics.f1);
    out << to_string(r.variant) << ',' << r.seed << ',' << r.fold << ',' << buf;
  }
  return out.str();
}

MetricReport run_configured(const RunConfig& config, const Dataset& data) {
  if (config.mode == Mode::kAblate) return run_ablation(config, data);
  return run_cross_validation(config, data, config.variant);
}

std::string report_checksum(const MetricReport& report) { return fnv_hex(report.to_json().dump()); }

json make_manifest(const RunConfig& config, const Dataset& data, const MetricReport& report) {
  return {{"manifest_version", 1},
          {"config", config.to_json()},
          {"seeds", config.seeds},
          {"corpus_checksums", data.checksums},
          {"vocab_size", data.vocab.size()},
          {"report_checksum", report_checksum(report)}};
}

// ---------------------------------------------------------------- teacher files

void save_teacher(const std::filesystem::path& path, const TeacherHandle& teacher,
                  const Vocabulary& vocab) {
  json doc = params_to_json(teacher.params());
  doc["vocab"] = vocab.tokens();
  doc["embedding_dim"] = teacher.provider.dim();
  doc["hidden"] = teacher.encoder.hidden();
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kMissingArtifact, "cannot write " + path.string());
  out << doc.dump() << '\n';
}

TeacherHandle load_teacher(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read teacher " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(0, "teacher " + path.string() + ": " + e.what());
  }
  if (doc.at("vocab").get<std::vector<std::string>>() != vocab.tokens()) {
    throw Error(ErrorKind::kInvalidConfig, "teacher vocabulary does not match the corpus");
  }
  const auto dim = doc.at("embedding_dim").get<std::size_t>();
  const auto hidden = doc.at("hidden").get<std::size_t>();
  TeacherHandle t{FrozenEmbeddingProvider{Tensor::zeros({vocab.size(), dim})},
                  BiLSTMEncoder::zeros(dim, hidden, false)};
  params_from_json(doc, t.params());
  return t;
}

// ---------------------------------------------------------------- gradcheck

namespace {

constexpr std::size_t kToyVocab = 10;

IdentifierConfig toy_identifier_config() {
  IdentifierConfig c;
  c.embedding_dim = 4;
  c.hidden = 4;
  c.classifier_hidden = 4;
  c.space_hidden = 4;
  c.space_dim = 4;
  return c;
}

std::vector<EventPairExample> toy_batch(Rng& rng) {
  std::uniform_int_distribution<int> token(1, static_cast<int>(kToyVocab) - 1);
  std::uniform_int_distribution<std::size_t> length(5, 8);
  std::vector<EventPairExample> batch(4);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& ex = batch[i];
    const std::size_t len = length(rng);
    for (std::size_t t = 0; t < len; ++t) {
      ex.ids.push_back(token(rng));
      ex.tokens.push_back("w" + std::to_string(ex.ids.back()));
    }
    std::uniform_int_distribution<std::size_t> first(0, len / 2 - 1);
    std::uniform_int_distribution<std::size_t> second(len / 2, len - 1);
    const std::size_t a = first(rng);
    const std::size_t b = second(rng);
    ex.e1 = {a, a + 1};
    ex.e2 = {b, b + 1};
    ex.label = i % 2 == 0 ? 1 : 0;  // two positives, two negatives
    ex.doc_id = "toy";
  }
  return batch;
}

std::vector<TokenSeq> toy_statements(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<int> token(1, static_cast<int>(kToyVocab) - 1);
  std::uniform_int_distribution<std::size_t> length(3, 7);
  std::vector<TokenSeq> out(n);
  for (auto& s : out) {
    const std::size_t len = length(rng);
    for (std::size_t t = 0; t < len; ++t) s.push_back(token(rng));
  }
  return out;
}

double check_selfrl(std::uint64_t seed) {
  SelfRLConfig c;
  c.seed = seed;
  c.embedding_dim = 4;
  c.hidden = 4;
  c.head_hidden = 4;
  c.head_dim = 4;
  c.copy_target_at_init = false;
  auto state = init_selfrl(kToyVocab, c);
  Rng rng(mix_seed(seed, 1));
  // Zero biases put the predictor output near the origin, where the
  // normalisation is sharply curved and central differences lose accuracy.
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (const auto& p : state.online.params()) {
    if (p.name.ends_with("bias")) {
      for (auto& v : p.tensor.mutable_data()) v = bias(rng);
    }
  }
  const auto s = toy_statements(rng, 2);
  auto loss = [&] { return selfrl_loss(s[0], s[1], state.provider, state.online, state.target); };
  return finite_difference_check(loss, tensors_of(state.online.params())).max_relative_error;
}

struct ToyTransfer {
  IdentifierConfig config = toy_identifier_config();
  IdentifierModel model;
  TransferSpace space;
  Tensor external;
  std::vector<EventPairExample> batch;

  explicit ToyTransfer(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 2));
    model = IdentifierModel::random(kToyVocab, config, rng);
    space = TransferSpace::random(2 * config.hidden, 2 * config.hidden, config.space_hidden,
                                  config.space_dim, config.temperature, rng);
    auto teacher_table = gaussian_tensor({kToyVocab, config.embedding_dim}, 0.5, rng, false);
    const auto teacher_encoder = BiLSTMEncoder::random(config.embedding_dim, config.hidden, rng,
                                                       false);
    std::vector<Tensor> rows;
    for (const auto& s : toy_statements(rng, 5)) {
      rows.push_back(pool_statement(encode_sequence(embed(teacher_table, s), teacher_encoder)));
    }
    external = ops::stack(rows);
    batch = toy_batch(rng);
  }

  std::vector<Tensor> params(bool with_space) const {
    auto p = tensors_of(model.params());
    if (with_space) {
      auto s = tensors_of(space.params());
      p.insert(p.end(), s.begin(), s.end());
    }
    return p;
  }
};

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

json GradcheckReport::to_json() const {
  json out = json::array();
  for (const auto& e : entries) {
    out.push_back({{"surface", e.surface},
                   {"max_relative_error", e.max_relative_error},
                   {"seeds", e.seeds},
                   {"passed", e.passed}});
  }
  return {{"tolerance", kGradcheckTolerance}, {"surfaces", out}, {"passed", passed()}};
}

GradcheckReport run_gradcheck(std::size_t seeds, bool mutation) {
  struct FaultScope {
    explicit FaultScope(bool on) { set_fault(on ? Fault::kRowDistanceSign : Fault::kNone); }
    ~FaultScope() { set_fault(Fault::kNone); }
  } fault(mutation);

  GradcheckEntry selfrl{"selfrl"}, classification{"classification"},
      contrastive{"contrastive"}, joint{"joint"};
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    selfrl.max_relative_error = std::max(selfrl.max_relative_error, check_selfrl(seed));

    ToyTransfer toy(seed);
    auto student = [&] {
      return joint_loss(toy.batch, toy.model, nullptr, nullptr, toy.config).student;
    };
    auto transfer = [&] {
      return joint_loss(toy.batch, toy.model, &toy.space, &toy.external, toy.config).contrastive;
    };
    auto total = [&] {
      return joint_loss(toy.batch, toy.model, &toy.space, &toy.external, toy.config).total;
    };
    classification.max_relative_error =
        std::max(classification.max_relative_error,
                 finite_difference_check(student, toy.params(false)).max_relative_error);
    contrastive.max_relative_error =
        std::max(contrastive.max_relative_error,
                 finite_difference_check(transfer, toy.params(true)).max_relative_error);
    joint.max_relative_error =
        std::max(joint.max_relative_error,
                 finite_difference_check(total, toy.params(true)).max_relative_error);
  }
  GradcheckReport report;
  for (auto* e : {&selfrl, &classification, &contrastive, &joint}) {
    e->seeds = seeds;
    e->passed = e->max_relative_error < kGradcheckTolerance;
    report.entries.push_back(*e);
  }
  return report;
}

}  // namespace causerl
