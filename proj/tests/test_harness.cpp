#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "causerl/error.hpp"
#include "causerl/harness.hpp"
#include "test_util.hpp"

using namespace causerl;
using causerl::testing::kind_of;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.folds = 2;
  c.dev_topics = 1;
  c.seeds = {1};
  c.synthetic.vocab_size = 60;
  c.synthetic.n_patterns = 8;
  c.synthetic.n_external_statements = 20;
  c.synthetic.n_eci_examples = 40;
  c.synthetic.examples_per_doc = 5;
  c.synthetic.docs_per_topic = 2;
  c.selfrl.embedding_dim = 6;
  c.selfrl.hidden = 3;
  c.selfrl.head_hidden = 4;
  c.selfrl.head_dim = 3;
  c.selfrl.batch_size = 8;
  c.selfrl.max_steps = 3;
  c.identifier.embedding_dim = 6;
  c.identifier.hidden = 3;
  c.identifier.classifier_hidden = 4;
  c.identifier.space_hidden = 4;
  c.identifier.space_dim = 3;
  c.identifier.external_batch_size = 8;
  c.identifier.max_epochs = 2;
  c.identifier.learning_rate = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("prf1") {
  const auto p = prf1(3, 1, 2);
  CHECK(p.precision == doctest::Approx(0.75));
  CHECK(p.recall == doctest::Approx(0.6));
  CHECK(p.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
  const auto zero = prf1(0, 0, 0);
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f1 == 0.0);
  CHECK(prf1(0, 4, 0).f1 == 0.0);
}

TEST_CASE("prf1 ignores example order") {
  Rng rng(3);
  std::vector<std::pair<int, int>> pairs;
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < 200; ++i) pairs.push_back({coin(rng), coin(rng)});
  ConfusionCounts a;
  for (auto [p, l] : pairs) a.add(p, l);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  ConfusionCounts b;
  for (auto [p, l] : pairs) b.add(p, l);
  CHECK(prf1(a).f1 == prf1(b).f1);
  CHECK(a.tp + a.fp + a.fn + a.tn == 200);
}

TEST_CASE("config round trip and rejection") {
  const auto desk = desk_config();
  const auto back = RunConfig::from_json(desk.to_json());
  CHECK(back.to_json() == desk.to_json());
  CHECK(kind_of([] { RunConfig::from_json({{"learning_rate_typo", 1.0}}); }) ==
        ErrorKind::kInvalidConfig);
  CHECK(kind_of([] { RunConfig::from_json({{"folds", "five"}}); }) == ErrorKind::kInvalidConfig);
  CHECK(kind_of([] { RunConfig::from_json({{"folds", 1}}); }) == ErrorKind::kInvalidConfig);
  CHECK(kind_of([] { RunConfig::from_json({{"variant", "teacher-only"}}); }) ==
        ErrorKind::kUnknownVariant);
  const auto manifest_like =
      RunConfig::from_json(nlohmann::json::parse(R"({"manifest_version": 1, "config": {"folds": 3}})"));
  CHECK(manifest_like.folds == 3);
  CHECK(variant_from_string("no-conrt-finetune") == Variant::kNoConRTFinetune);
  CHECK(to_string(Variant::kStatementsAsData) == "statements-as-data");
}

TEST_CASE("missing inputs are reported") {
  auto c = tiny_config();
  c.examples_path = "/nonexistent/examples.jsonl";
  CHECK(kind_of([&] { prepare_dataset(c); }) == ErrorKind::kMissingArtifact);
  CHECK(kind_of([] { RunConfig::load("/nonexistent/config.json"); }) ==
        ErrorKind::kMissingArtifact);
}

TEST_CASE("two-fold cross-validation smoke run") {
  const auto c = tiny_config();
  const auto data = prepare_dataset(c);
  CHECK(data.plan.folds.size() == 2);
  CHECK(!data.plan.dev.empty());
  const auto report = run_cross_validation(c, data, Variant::kFull);
  CHECK(report.rows.size() == 2);
  REQUIRE(report.summary(Variant::kFull) != nullptr);
  const double f1 = report.summary(Variant::kFull)->micro.f1;
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 1.0);

  std::size_t test_examples = 0;
  for (const auto& r : report.rows) {
    test_examples += r.counts.tp + r.counts.fp + r.counts.fn + r.counts.tn;
  }
  CHECK(report.predictions.size() == test_examples);

  const auto again = run_cross_validation(c, data, Variant::kFull);
  CHECK(again.to_json().dump() == report.to_json().dump());

  std::istringstream csv(report.to_csv());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 1 + report.rows.size());

  const auto manifest = make_manifest(c, data, report);
  CHECK(manifest.contains("config"));
  CHECK(RunConfig::from_json(manifest).to_json() == c.to_json());
}

TEST_CASE("ablation covers every setup") {
  auto c = tiny_config();
  c.variants = {Variant::kNoSelfRL, Variant::kNoConRTFrozen, Variant::kNoConRTFinetune,
                Variant::kStatementsAsData};
  const auto data = prepare_dataset(c);
  const auto report = run_ablation(c, data);
  for (auto v : {Variant::kBaseline, Variant::kFull, Variant::kNoSelfRL, Variant::kNoConRTFrozen,
                 Variant::kNoConRTFinetune, Variant::kStatementsAsData}) {
    CHECK(report.summary(v) != nullptr);
  }
  CHECK(report.rows.size() == 6 * 2);
}

TEST_CASE("summaries pool counts across folds") {
  std::vector<FoldRow> rows(2);
  rows[0].counts = {2, 1, 1, 5};
  rows[0].seed = 1;
  rows[1].counts = {1, 0, 2, 4};
  rows[1].seed = 1;
  for (auto& r : rows) r.metrics = prf1(r.counts);
  const auto s = summarize(rows);
  REQUIRE(s.size() == 1);
  CHECK(s[0].micro.f1 == prf1(3, 1, 3).f1);
  CHECK(s[0].macro_f1 == doctest::Approx(0.5 * (rows[0].metrics.f1 + rows[1].metrics.f1)));
  CHECK(s[0].seed_f1.size() == 1);
  CHECK(s[0].std_f1 == 0.0);
}

TEST_CASE("gradcheck report") {
  const auto ok = run_gradcheck(2, false);
  CHECK(ok.entries.size() == 4);
  CHECK(ok.passed());
  const auto broken = run_gradcheck(2, true);
  CHECK_FALSE(broken.passed());
  CHECK(ok.to_json().at("surfaces").size() == 4);
}

TEST_CASE("teacher checkpoint round trip") {
  const auto c = tiny_config();
  const auto data = prepare_dataset(c);
  const auto teacher = TeacherHandle::untrained(data.vocab.size(), c.selfrl);
  const auto path = fs::temp_directory_path() / "causerl_teacher_test.json";
  save_teacher(path, teacher, data.vocab);
  const auto loaded = load_teacher(path, data.vocab);
  CHECK(loaded.checksum() == teacher.checksum());
  CHECK(kind_of([] { load_teacher("/nonexistent/teacher.json", Vocabulary{}); }) ==
        ErrorKind::kMissingArtifact);
}
