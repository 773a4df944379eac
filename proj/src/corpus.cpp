#include "causerl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "causerl/error.hpp"

namespace causerl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string with_period(std::string_view s) {
  std::string out(trim(s));
  if (out.empty() || out.back() != '.') out.push_back('.');
  return out;
}

std::string word(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%02zu", prefix, i);
  return buf;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

}  // namespace

std::string_view to_string(Resource resource) {
  switch (resource) {
    case Resource::kGluSpe: return "GLU-SPE";
    case Resource::kGluGen: return "GLU-GEN";
    case Resource::kAtomic: return "ATOMIC";
    case Resource::kDistant: return "DISTANT";
    case Resource::kSynth: return "SYNTH";
  }
  return "SYNTH";
}

Resource resource_from_string(std::string_view name) {
  for (auto r : {Resource::kGluSpe, Resource::kGluGen, Resource::kAtomic, Resource::kDistant,
                 Resource::kSynth}) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorKind::kInvalidSpec, "unknown resource " + std::string(name));
}

std::string convert_statement(std::string_view original, Resource resource) {
  if (resource == Resource::kDistant) return with_period(original);

  static const std::regex marker(R"(>[^<>\s]+>)");
  const std::string text(original);
  auto it = std::sregex_iterator(text.begin(), text.end(), marker);
  const auto count = std::distance(it, std::sregex_iterator());
  if (count > 1) {
    throw Error(ErrorKind::kMultipleMarkers, std::to_string(count) + " relation markers in \"" +
                                                 text + "\"");
  }
  if (count == 0) {
    const auto t = trim(original);
    if (!t.empty() && t.back() == '.') return std::string(t);
    throw Error(ErrorKind::kMarkerNotFound, "no relation marker in \"" + text + "\"");
  }
  const auto& m = *it;
  const auto cause = trim(std::string_view(text).substr(0, static_cast<std::size_t>(m.position())));
  std::string effect(trim(std::string_view(text).substr(
      static_cast<std::size_t>(m.position() + m.length()))));
  const auto first_token = effect.substr(0, effect.find(' '));
  if (first_token.find('_') == std::string::npos) {
    auto alpha = std::find_if(effect.begin(), effect.end(),
                              [](unsigned char c) { return std::isalpha(c) != 0; });
    if (alpha != effect.end()) *alpha = static_cast<char>(std::tolower(static_cast<unsigned char>(*alpha)));
  }
  return with_period(std::string(cause) + ", " + effect);
}

void SyntheticSpec::validate() const {
  if (n_patterns < 4) throw Error(ErrorKind::kInvalidSpec, "need at least 4 patterns");
  if (vocab_size < 2 * n_patterns + 6) {
    throw Error(ErrorKind::kInvalidSpec, "vocab_size too small for the pattern count");
  }
  if (n_external_statements == 0 || n_eci_examples < 2) {
    throw Error(ErrorKind::kInvalidSpec, "counts must be positive");
  }
  if (!(pattern_overlap >= 0.0 && pattern_overlap <= 1.0)) {
    throw Error(ErrorKind::kInvalidSpec, "pattern_overlap must lie in [0,1]");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 0.5)) {
    throw Error(ErrorKind::kInvalidSpec, "noise_rate must lie in [0,0.5)");
  }
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidSpec, "positive_fraction must lie in (0,1)");
  }
  if (examples_per_doc == 0 || docs_per_topic == 0) {
    throw Error(ErrorKind::kInvalidSpec, "document sizes must be positive");
  }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Word pools. Verb names carry no hint of their role.
  const std::size_t n_verbs = 2 * spec.n_patterns;
  const std::size_t rest = spec.vocab_size - n_verbs - 2;  // ',' and '.'
  const std::size_t n_agents = std::max<std::size_t>(2, rest / 5);
  const std::size_t n_objects = std::max<std::size_t>(2, 2 * rest / 5);
  const std::size_t n_fillers = std::max<std::size_t>(2, rest - n_agents - n_objects);
  std::vector<std::string> verbs, agents, objects, fillers;
  for (std::size_t i = 0; i < n_verbs; ++i) verbs.push_back(word('v', i));
  for (std::size_t i = 0; i < n_agents; ++i) agents.push_back(word('a', i));
  for (std::size_t i = 0; i < n_objects; ++i) objects.push_back(word('o', i));
  for (std::size_t i = 0; i < n_fillers; ++i) fillers.push_back(word('f', i));
  std::shuffle(verbs.begin(), verbs.end(), rng);

  SyntheticCorpus corpus;
  for (std::size_t t = 0; t < spec.n_patterns; ++t) {
    corpus.templates.push_back({verbs[2 * t], verbs[2 * t + 1], false});
  }

  // Template roles: shared (external + ECI), ECI-only, external-only.
  const std::size_t n_external_only = spec.n_patterns / 4;
  const std::size_t pool = spec.n_patterns - n_external_only;
  std::size_t n_eci_only = 0;
  if (spec.pattern_overlap <= 0.0) {
    n_eci_only = pool;
  } else if (spec.pattern_overlap < 1.0) {
    n_eci_only = static_cast<std::size_t>(
        std::lround(static_cast<double>(pool) * (1.0 - spec.pattern_overlap)));
    n_eci_only = std::clamp<std::size_t>(n_eci_only, 1, pool - 1);
  }
  const std::size_t n_shared = pool - n_eci_only;
  std::vector<std::size_t> shared, eci_only, external_set;
  for (std::size_t t = 0; t < spec.n_patterns; ++t) {
    if (t < n_shared) {
      shared.push_back(t);
    } else if (t < pool) {
      eci_only.push_back(t);
      continue;
    }
    external_set.push_back(t);
    corpus.templates[t].external = true;
  }

  std::bernoulli_distribution noisy(spec.noise_rate);
  for (std::size_t i = 0; i < spec.n_external_statements; ++i) {
    const auto& tpl = corpus.templates[pick(external_set, rng)];
    std::string effect = tpl.effect_verb;
    if (noisy(rng)) effect = pick(corpus.templates, rng).effect_verb;
    const std::string original = pick(agents, rng) + " " + tpl.cause_verb + " " +
                                 pick(objects, rng) + " >Cause/Enable> " + pick(agents, rng) +
                                 " " + effect + " " + pick(objects, rng);
    corpus.external.push_back(
        {Resource::kSynth, original, convert_statement(original, Resource::kSynth), {}});
  }

  const auto n_pos = static_cast<std::size_t>(
      std::lround(static_cast<double>(spec.n_eci_examples) * spec.positive_fraction));
  const std::size_t n_neg = spec.n_eci_examples - n_pos;
  const auto n_pos_shared =
      shared.empty() ? std::size_t{0}
      : eci_only.empty()
          ? n_pos
          : static_cast<std::size_t>(std::lround(static_cast<double>(n_pos) * spec.pattern_overlap));

  std::bernoulli_distribution coin(0.5);
  auto sentence = [&](const std::string& first_verb, const std::string& second_verb, int label) {
    EventPairExample ex;
    if (coin(rng)) ex.tokens.push_back(pick(fillers, rng));
    ex.tokens.push_back(pick(agents, rng));
    ex.e1 = {ex.tokens.size(), ex.tokens.size() + 1};
    ex.tokens.push_back(first_verb);
    ex.tokens.push_back(pick(objects, rng));
    ex.tokens.push_back(pick(fillers, rng));
    ex.tokens.push_back(pick(agents, rng));
    ex.e2 = {ex.tokens.size(), ex.tokens.size() + 1};
    ex.tokens.push_back(second_verb);
    ex.tokens.push_back(pick(objects, rng));
    if (coin(rng)) ex.tokens.push_back(pick(fillers, rng));
    ex.tokens.push_back(".");
    ex.label = label;
    return ex;
  };

  std::vector<EventPairExample> examples;
  std::vector<int> origin;
  for (std::size_t i = 0; i < n_pos; ++i) {
    const std::size_t t = i < n_pos_shared ? pick(shared, rng) : pick(eci_only, rng);
    examples.push_back(sentence(corpus.templates[t].cause_verb, corpus.templates[t].effect_verb, 1));
    origin.push_back(static_cast<int>(t));
  }
  std::uniform_int_distribution<std::size_t> any_template(0, spec.n_patterns - 1);
  for (std::size_t i = 0; i < n_neg; ++i) {
    if (i % 2 == 0) {
      const std::size_t a = any_template(rng);
      std::size_t b = any_template(rng);
      while (b == a) b = any_template(rng);
      examples.push_back(
          sentence(corpus.templates[a].cause_verb, corpus.templates[b].effect_verb, 0));
    } else {
      const auto& tpl = corpus.templates[any_template(rng)];
      examples.push_back(sentence(tpl.effect_verb, tpl.cause_verb, 0));
    }
    origin.push_back(-1);
  }

  // Count-preserving label noise.
  const auto n_swap = static_cast<std::size_t>(
      std::lround(spec.noise_rate * static_cast<double>(std::min(n_pos, n_neg))));
  if (n_swap > 0) {
    std::vector<std::size_t> pos_idx(n_pos), neg_idx(n_neg);
    std::iota(pos_idx.begin(), pos_idx.end(), 0);
    std::iota(neg_idx.begin(), neg_idx.end(), n_pos);
    std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
    std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
    for (std::size_t i = 0; i < n_swap; ++i) {
      examples[pos_idx[i]].label = 0;
      examples[neg_idx[i]].label = 1;
    }
  }

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto ex = std::move(examples[order[i]]);
    const std::size_t doc = i / spec.examples_per_doc;
    const std::size_t topic = doc / spec.docs_per_topic;
    char buf[64];
    std::snprintf(buf, sizeof buf, "t%02zu_d%03zu", topic, doc);
    ex.doc_id = buf;
    corpus.examples.push_back(std::move(ex));
    corpus.example_template.push_back(origin[order[i]]);
  }
  return corpus;
}

nlohmann::json FoldPlan::to_json() const {
  return {{"k", k}, {"dev", dev}, {"folds", folds}};
}

FoldPlan FoldPlan::from_json(const nlohmann::json& doc) {
  try {
    FoldPlan plan;
    plan.k = doc.at("k").get<std::size_t>();
    plan.dev = doc.at("dev").get<std::vector<std::string>>();
    plan.folds = doc.at("folds").get<std::vector<std::vector<std::string>>>();
    if (plan.folds.size() != plan.k) throw Error(ErrorKind::kParseError, "fold count != k");
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, std::string("fold plan: ") + e.what());
  }
}

std::string topic_of(const std::string& doc_id) { return doc_id.substr(0, doc_id.find('_')); }

FoldPlan make_folds(std::span<const EventPairExample> examples, std::size_t k, std::uint64_t seed,
                    std::size_t dev_topics) {
  if (k < 2) throw Error(ErrorKind::kInvalidConfig, "need k >= 2 folds");
  std::set<std::string> docs;
  std::set<std::string> topics;
  for (const auto& ex : examples) {
    docs.insert(ex.doc_id);
    topics.insert(topic_of(ex.doc_id));
  }
  std::set<std::string> dev_topic_set;
  for (auto it = topics.rbegin(); it != topics.rend() && dev_topic_set.size() < dev_topics; ++it) {
    dev_topic_set.insert(*it);
  }
  FoldPlan plan;
  plan.k = k;
  std::vector<std::string> pool;
  for (const auto& d : docs) {
    if (dev_topic_set.count(topic_of(d)) != 0) {
      plan.dev.push_back(d);
    } else {
      pool.push_back(d);
    }
  }
  if (pool.size() < k) {
    throw Error(ErrorKind::kTooFewDocuments, std::to_string(pool.size()) +
                                                 " documents outside dev for k=" +
                                                 std::to_string(k));
  }
  Rng rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  plan.folds.resize(k);
  for (std::size_t i = 0; i < pool.size(); ++i) plan.folds[i % k].push_back(pool[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

std::vector<EventPairExample> statements_as_examples(std::span<const CausalStatement> statements) {
  std::vector<EventPairExample> out;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    const auto tokens = tokenize(statements[i].converted);
    const auto comma = std::find(tokens.begin(), tokens.end(), ",");
    if (comma == tokens.end()) continue;
    const std::size_t cut = static_cast<std::size_t>(comma - tokens.begin());
    // Predicate ≈ second token of each clause.
    const std::size_t p1 = 1;
    const std::size_t p2 = cut + 2;
    if (p1 >= cut || p2 >= tokens.size() || tokens[p2] == ".") continue;
    EventPairExample ex;
    ex.doc_id = "ext_" + std::to_string(i);
    ex.tokens = tokens;
    ex.e1 = {p1, p1 + 1};
    ex.e2 = {p2, p2 + 1};
    ex.label = 1;
    out.push_back(std::move(ex));
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const CausalStatement> statements,
                            std::span<const EventPairExample> examples) {
  std::set<std::string> words;
  for (const auto& s : statements) {
    for (auto& t : tokenize(s.converted)) words.insert(std::move(t));
  }
  for (const auto& ex : examples) words.insert(ex.tokens.begin(), ex.tokens.end());
  Vocabulary vocab;
  for (const auto& w : words) vocab.add(w);
  return vocab;
}

void assign_ids(std::vector<CausalStatement>& statements, const Vocabulary& vocab) {
  for (auto& s : statements) {
    const auto tokens = tokenize(s.converted);
    s.tokens = vocab.encode(tokens);
  }
}

void assign_ids(std::vector<EventPairExample>& examples, const Vocabulary& vocab) {
  for (auto& ex : examples) ex.ids = vocab.encode(ex.tokens);
}

std::vector<TokenSeq> statement_tokens(std::span<const CausalStatement> statements) {
  std::vector<TokenSeq> out;
  out.reserve(statements.size());
  for (const auto& s : statements) out.push_back(s.tokens);
  return out;
}

std::vector<nlohmann::json> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read " + path.string());
  std::vector<nlohmann::json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return records;
}

void save_jsonl(const std::filesystem::path& path, std::span<const nlohmann::json> records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kMissingArtifact, "cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

nlohmann::json statement_to_json(const CausalStatement& s) {
  return {{"resource", to_string(s.resource)}, {"original", s.original}, {"converted", s.converted}};
}

CausalStatement statement_from_json(const nlohmann::json& j) {
  CausalStatement s;
  s.resource = resource_from_string(j.at("resource").get<std::string>());
  s.original = j.at("original").get<std::string>();
  s.converted = j.at("converted").get<std::string>();
  return s;
}

nlohmann::json example_to_json(const EventPairExample& ex) {
  return {{"doc_id", ex.doc_id},
          {"tokens", ex.tokens},
          {"e1", {ex.e1.begin, ex.e1.end}},
          {"e2", {ex.e2.begin, ex.e2.end}},
          {"label", ex.label}};
}

EventPairExample example_from_json(const nlohmann::json& j) {
  EventPairExample ex;
  ex.doc_id = j.at("doc_id").get<std::string>();
  ex.tokens = j.at("tokens").get<std::vector<std::string>>();
  const auto e1 = j.at("e1").get<std::vector<std::size_t>>();
  const auto e2 = j.at("e2").get<std::vector<std::size_t>>();
  if (e1.size() != 2 || e2.size() != 2) {
    throw Error(ErrorKind::kSpanOutOfRange, "spans must be [start,end]");
  }
  ex.e1 = {e1[0], e1[1]};
  ex.e2 = {e2[0], e2[1]};
  ex.label = j.at("label").get<int>();
  ex.validate();
  return ex;
}

namespace {

template <typename T, typename F>
std::vector<T> load_typed(const std::filesystem::path& path, F&& parse) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<CausalStatement> load_statements(const std::filesystem::path& path) {
  return load_typed<CausalStatement>(path, statement_from_json);
}

void save_statements(const std::filesystem::path& path, std::span<const CausalStatement> items) {
  std::vector<nlohmann::json> records;
  for (const auto& s : items) records.push_back(statement_to_json(s));
  save_jsonl(path, records);
}

std::vector<EventPairExample> load_examples(const std::filesystem::path& path) {
  return load_typed<EventPairExample>(path, example_from_json);
}

void save_examples(const std::filesystem::path& path, std::span<const EventPairExample> items) {
  std::vector<nlohmann::json> records;
  for (const auto& ex : items) records.push_back(example_to_json(ex));
  save_jsonl(path, records);
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read " + path.string());
  std::uint64_t hash = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace causerl
