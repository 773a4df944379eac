// Command-line front end: corpus generation, training, evaluation,
// gradient checks and ablations.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "causerl/error.hpp"
#include "causerl/harness.hpp"

namespace fs = std::filesystem;
using namespace causerl;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run config or manifest");
  cmd->add_option("--seed", opts.seed, "run a single seed instead of the configured list");
  cmd->add_option("--out", opts.out, "output directory");
}

RunConfig resolve(const CommonOptions& opts, Mode mode) {
  RunConfig config = opts.config_path.empty() ? RunConfig{} : RunConfig::load(opts.config_path);
  config.mode = mode;
  if (opts.seed) config.seeds = {*opts.seed};
  if (!opts.out.empty()) config.out_dir = opts.out;
  fs::create_directories(config.out_dir);
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kMissingArtifact, "cannot write " + path.string());
  out << text;
}

void write_report(const RunConfig& config, const Dataset& data, const MetricReport& report) {
  const fs::path dir = config.out_dir;
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text(dir / "metrics.csv", report.to_csv());
  std::string lines;
  for (const auto& p : report.predictions) {
    lines += nlohmann::json{{"doc_id", p.doc_id},
                            {"e1", {p.e1.begin, p.e1.end}},
                            {"e2", {p.e2.begin, p.e2.end}},
                            {"prob", p.prob},
                            {"label", p.label},
                            {"pred", p.pred}}
                 .dump();
    lines += '\n';
  }
  write_text(dir / "predictions.jsonl", lines);
  write_text(dir / "manifest.json", make_manifest(config, data, report).dump(2) + "\n");
  for (const auto& s : report.summaries) {
    std::printf("%-20s P=%.4f R=%.4f F1=%.4f (mean over seeds %.4f ± %.4f)\n",
                std::string(to_string(s.variant)).c_str(), s.micro.precision, s.micro.recall,
                s.micro.f1, s.mean_f1, s.std_f1);
  }
}

int gen_corpus(const RunConfig& config) {
  const auto corpus = generate_synthetic(config.synthetic);
  const fs::path dir = config.out_dir;
  save_statements(dir / "external.jsonl", corpus.external);
  save_examples(dir / "examples.jsonl", corpus.examples);
  const auto plan = make_folds(corpus.examples, config.folds, config.synthetic.seed,
                               config.dev_topics);
  write_text(dir / "folds.json", plan.to_json().dump(2) + "\n");
  std::printf("%zu external statements, %zu examples, %zu folds\n", corpus.external.size(),
              corpus.examples.size(), plan.folds.size());
  return 0;
}

int train_selfrl_cmd(const RunConfig& config) {
  const auto data = prepare_dataset(config);
  SelfRLConfig sc = config.selfrl;
  sc.seed = config.seeds.front();
  const auto corpus = data.external_tokens();
  auto result = train_selfrl(corpus, data.vocab.size(), sc);
  const fs::path dir = config.out_dir;
  save_teacher(dir / "teacher.json", TeacherHandle::from_selfrl(result.state), data.vocab);
  write_text(dir / "selfrl_stats.jsonl", result.stats.to_jsonl());
  const auto& last = result.stats.steps.back();
  std::printf("selfrl: %zu steps, final loss %.4f, proj std %.4f\n", last.step, last.loss,
              last.proj_std);
  return 0;
}

int train_eci_cmd(const RunConfig& config) {
  const auto data = prepare_dataset(config);
  TeacherCache teachers(config, data);
  if (!config.teacher_path.empty()) {
    teachers.set_fixed(load_teacher(config.teacher_path, data.vocab));
  }
  std::set<std::string> dev_docs(data.plan.dev.begin(), data.plan.dev.end());
  std::vector<EventPairExample> train, dev;
  for (const auto& ex : data.examples) (dev_docs.count(ex.doc_id) ? dev : train).push_back(ex);
  TrainSummary summary;
  const auto model = train_variant(config.variant, config.seeds.front(), train, dev, config, data,
                                   teachers, &summary);
  save_checkpoint(fs::path(config.out_dir) / "identifier.json", model.params());
  std::printf("train-eci (%s): %zu epochs, best dev F1 %.4f at epoch %zu\n",
              std::string(to_string(config.variant)).c_str(), summary.epochs_run,
              summary.best_dev_f1, summary.best_epoch);
  return 0;
}

int evaluate_cmd(const RunConfig& config) {
  const auto data = prepare_dataset(config);
  const auto start = std::chrono::steady_clock::now();
  const auto report = run_cross_validation(config, data, config.variant);
  write_report(config, data, report);
  std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  std::fprintf(stderr, "evaluate took %.1fs\n", elapsed.count());
  return 0;
}

int ablate_cmd(const RunConfig& config) {
  const auto data = prepare_dataset(config);
  const auto start = std::chrono::steady_clock::now();
  const auto report = run_ablation(config, data);
  write_report(config, data, report);
  std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  std::fprintf(stderr, "ablate took %.1fs\n", elapsed.count());
  return 0;
}

int gradcheck_cmd(const RunConfig& config) {
  const auto report = run_gradcheck(config.gradcheck_seeds, config.mutation);
  write_text(fs::path(config.out_dir) / "gradcheck.json", report.to_json().dump(2) + "\n");
  for (const auto& e : report.entries) {
    std::printf("%-15s max rel err %.3e over %zu seeds: %s\n", e.surface.c_str(),
                e.max_relative_error, e.seeds, e.passed ? "ok" : "FAIL");
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causerl: causal-statement transfer for event causality identification"};
  app.require_subcommand(1);

  CommonOptions gen_opts, selfrl_opts, eci_opts, eval_opts, grad_opts, ablate_opts;
  std::string eci_variant, eval_variant;
  bool mutation = false;

  auto* gen = app.add_subcommand("gen-corpus", "write the synthetic corpus and fold plan");
  add_common(gen, gen_opts);
  auto* selfrl = app.add_subcommand("train-selfrl", "train the teacher encoder");
  add_common(selfrl, selfrl_opts);
  auto* eci = app.add_subcommand("train-eci", "train one identifier on all non-dev documents");
  add_common(eci, eci_opts);
  eci->add_option("--variant", eci_variant, "training setup");
  auto* eval = app.add_subcommand("evaluate", "cross-validate one variant");
  add_common(eval, eval_opts);
  eval->add_option("--variant", eval_variant, "training setup");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of every loss");
  add_common(grad, grad_opts);
  grad->add_flag("--mutation", mutation, "inject a backward-rule fault first");
  auto* ablate = app.add_subcommand("ablate", "cross-validate baseline, full and ablations");
  add_common(ablate, ablate_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return gen_corpus(resolve(gen_opts, Mode::kGenCorpus));
    if (selfrl->parsed()) return train_selfrl_cmd(resolve(selfrl_opts, Mode::kTrainSelfRL));
    if (eci->parsed()) {
      auto config = resolve(eci_opts, Mode::kTrainEci);
      if (!eci_variant.empty()) config.variant = variant_from_string(eci_variant);
      return train_eci_cmd(config);
    }
    if (eval->parsed()) {
      auto config = resolve(eval_opts, Mode::kEvaluate);
      if (!eval_variant.empty()) config.variant = variant_from_string(eval_variant);
      return evaluate_cmd(config);
    }
    if (grad->parsed()) {
      auto config = resolve(grad_opts, Mode::kGradcheck);
      if (mutation) config.mutation = true;
      return gradcheck_cmd(config);
    }
    if (ablate->parsed()) return ablate_cmd(resolve(ablate_opts, Mode::kAblate));
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return 2;
  }
  return 0;
}
