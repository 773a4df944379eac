#include "causerl/selfrl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "causerl/error.hpp"
#include "causerl/ops.hpp"

namespace causerl {

namespace {

void blend(Tensor target, const Tensor& online, double tau) {
  if (target.shape() != online.shape()) {
    throw Error(ErrorKind::kShapeMismatch, "EMA between differently shaped parameters");
  }
  auto t = target.mutable_data();
  const auto o = online.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * t[i] + (1.0 - tau) * o[i];
}

ParamList shared_online_params(const OnlineNetwork& online) {
  ParamList p = online.encoder.params("encoder");
  auto proj = online.projector.params("projector");
  p.insert(p.end(), proj.begin(), proj.end());
  return p;
}

}  // namespace

void SelfRLConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorKind::kInvalidConfig, "tau must lie in [0,1]");
  if (batch_size < 2) throw Error(ErrorKind::kInvalidConfig, "SelfRL batch size must be >= 2");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kInvalidConfig, "learning rate must be > 0");
  if (embedding_dim == 0 || hidden == 0 || head_hidden == 0 || head_dim == 0) {
    throw Error(ErrorKind::kInvalidConfig, "network sizes must be positive");
  }
}

ParamList OnlineNetwork::params() const {
  ParamList p = shared_online_params(*this);
  auto pred = predictor.params("predictor");
  p.insert(p.end(), pred.begin(), pred.end());
  return p;
}

ParamList TargetNetwork::params() const {
  ParamList p = encoder.params("encoder");
  auto proj = projector.params("projector");
  p.insert(p.end(), proj.begin(), proj.end());
  return p;
}

OnlineNetwork make_online_network(std::size_t embedding_dim, const SelfRLConfig& config, Rng& rng) {
  OnlineNetwork net;
  net.encoder = BiLSTMEncoder::random(embedding_dim, config.hidden, rng, true);
  net.projector =
      MLPHead::random(2 * config.hidden, config.head_hidden, config.head_dim, rng, true);
  net.predictor = MLPHead::random(config.head_dim, config.head_hidden, config.head_dim, rng, true);
  return net;
}

TargetNetwork copy_as_target(const OnlineNetwork& online) {
  return {online.encoder.clone(false), online.projector.clone(false)};
}

TargetNetwork make_target_network(std::size_t embedding_dim, const SelfRLConfig& config, Rng& rng) {
  TargetNetwork net;
  net.encoder = BiLSTMEncoder::random(embedding_dim, config.hidden, rng, false);
  net.projector =
      MLPHead::random(2 * config.hidden, config.head_hidden, config.head_dim, rng, false);
  return net;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_statements(std::size_t batch_size, Rng& rng) {
  if (batch_size < 2) {
    throw Error(ErrorKind::kBatchTooSmall, "pairing needs at least two statements");
  }
  std::vector<std::size_t> order(batch_size);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i + 1 < batch_size; i += 2) pairs.emplace_back(order[i], order[i + 1]);
  return pairs;
}

Tensor online_projection(const TokenSeq& tokens, const FrozenEmbeddingProvider& provider,
                         const OnlineNetwork& online) {
  const Tensor states = encode_sequence(provider.embed(tokens), online.encoder);
  return apply_head(pool_statement(states), online.projector);
}

Tensor target_projection(const TokenSeq& tokens, const FrozenEmbeddingProvider& provider,
                         const TargetNetwork& target) {
  const Tensor states = encode_sequence(provider.embed(tokens), target.encoder);
  return apply_head(pool_statement(states), target.projector);
}

Tensor selfrl_loss(const TokenSeq& a, const TokenSeq& b, const FrozenEmbeddingProvider& provider,
                   const OnlineNetwork& online, const TargetNetwork& target) {
  const Tensor y_a = apply_head(online_projection(a, provider, online), online.predictor);
  const Tensor y_b = apply_head(online_projection(b, provider, online), online.predictor);
  const Tensor z_a = ops::stop_gradient(target_projection(a, provider, target));
  const Tensor z_b = ops::stop_gradient(target_projection(b, provider, target));
  return ops::add(normalized_mse(y_a, z_b), normalized_mse(y_b, z_a));
}

void ema_update(TargetNetwork& target, const OnlineNetwork& online, double tau) {
  const ParamList t = target.params();
  const ParamList o = shared_online_params(online);
  if (t.size() != o.size()) throw Error(ErrorKind::kShapeMismatch, "network layouts differ");
  for (std::size_t i = 0; i < t.size(); ++i) blend(t[i].tensor, o[i].tensor, tau);
}

double parameter_distance(const OnlineNetwork& online, const TargetNetwork& target) {
  const ParamList t = target.params();
  const ParamList o = shared_online_params(online);
  double sq = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto td = t[i].tensor.data();
    const auto od = o[i].tensor.data();
    for (std::size_t j = 0; j < td.size(); ++j) sq += (od[j] - td[j]) * (od[j] - td[j]);
  }
  return std::sqrt(sq);
}

double collapse_diagnostic(const Tensor& projections) {
  if (projections.rank() != 2 || projections.rows() < 2) {
    throw Error(ErrorKind::kBatchTooSmall, "collapse diagnostic needs at least two projections");
  }
  NoGradGuard no_grad;
  const Tensor unit = ops::l2_normalize(projections);
  const std::size_t n = unit.rows();
  const std::size_t d = unit.cols();
  double total = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += unit.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (unit.at(r, c) - mean) * (unit.at(r, c) - mean);
    total += std::sqrt(var / static_cast<double>(n));
  }
  return total / static_cast<double>(d);
}

std::string SelfRLStats::to_jsonl() const {
  std::ostringstream out;
  for (const auto& r : steps) {
    out << nlohmann::json{{"step", r.step},
                          {"loss", r.loss},
                          {"proj_std", r.proj_std},
                          {"theta_delta_dist", r.theta_delta_dist}}
               .dump()
        << '\n';
  }
  return out.str();
}

ParamList SelfRLState::teacher_params() const {
  ParamList p{{"provider.table", provider.table}};
  auto enc = online.encoder.params("encoder");
  p.insert(p.end(), enc.begin(), enc.end());
  return p;
}

SelfRLState init_selfrl(std::size_t vocab_size, const SelfRLConfig& config) {
  config.validate();
  Rng rng(config.seed);
  auto provider = FrozenEmbeddingProvider::random(vocab_size, config.embedding_dim,
                                                  config.seed ^ 0x9e3779b97f4a7c15ULL);
  OnlineNetwork online = make_online_network(config.embedding_dim, config, rng);
  TargetNetwork target = config.copy_target_at_init
                             ? copy_as_target(online)
                             : make_target_network(config.embedding_dim, config, rng);
  AdamWConfig opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.weight_decay;
  AdamW optimizer(tensors_of(online.params()), opt);
  return {config, std::move(provider), std::move(online), std::move(target), std::move(optimizer)};
}

SelfRLStepRecord selfrl_step(SelfRLState& state, std::span<const TokenSeq> batch, Rng& rng) {
  const auto pairs = pair_statements(batch.size(), rng);
  state.optimizer.zero_grad();

  SelfRLStepRecord record;
  {
    Tape tape;
    std::vector<Tensor> z_a, z_b, t_a, t_b;
    for (const auto& [ia, ib] : pairs) {
      z_a.push_back(online_projection(batch[ia], state.provider, state.online));
      z_b.push_back(online_projection(batch[ib], state.provider, state.online));
      t_a.push_back(target_projection(batch[ia], state.provider, state.target));
      t_b.push_back(target_projection(batch[ib], state.provider, state.target));
    }
    const Tensor proj_a = ops::stack(z_a);
    const Tensor proj_b = ops::stack(z_b);
    const Tensor pred_a = apply_head(proj_a, state.online.predictor);
    const Tensor pred_b = apply_head(proj_b, state.online.predictor);
    // Row-averaged normalised MSE over stacked pairs == batch mean of L + L̃.
    const Tensor loss = ops::add(normalized_mse(pred_a, ops::stack(t_b)),
                                 normalized_mse(pred_b, ops::stack(t_a)));
    record.loss = loss.item();

    std::vector<Tensor> all(z_a);
    all.insert(all.end(), z_b.begin(), z_b.end());
    {
      NoGradGuard no_grad;
      record.proj_std = collapse_diagnostic(ops::stack(all));
    }
    tape.backward(loss);
  }

  for (const auto& p : state.target.params()) {
    if (p.tensor.requires_grad() || state.optimizer.owns(p.tensor)) {
      throw Error(ErrorKind::kInvalidConfig, "target parameter " + p.name + " is trainable");
    }
  }
  state.optimizer.step();
  ema_update(state.target, state.online, state.config.tau);
  record.step = state.optimizer.state().step;
  record.theta_delta_dist = parameter_distance(state.online, state.target);
  return record;
}

double evaluate_selfrl_loss(const SelfRLState& state, std::span<const TokenSeq> statements,
                            std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::kBatchTooSmall, "no pairs to evaluate");
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& [a, b] : pairs) {
    total += selfrl_loss(statements[a], statements[b], state.provider, state.online, state.target)
                 .item();
  }
  return total / static_cast<double>(pairs.size());
}

SelfRLResult train_selfrl(std::span<const TokenSeq> corpus, std::size_t vocab_size,
                          const SelfRLConfig& config, const SelfRLStepCallback& on_step) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyCorpus, "no statements to learn from");
  if (corpus.size() < 2) throw Error(ErrorKind::kBatchTooSmall, "corpus holds one statement");
  SelfRLResult result{init_selfrl(vocab_size, config), {}};
  Rng rng(config.seed + 1);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<TokenSeq> batch;
  while (result.stats.steps.size() < config.max_steps) {
    if (cursor + 2 > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + config.batch_size);
    batch.clear();
    for (std::size_t i = cursor; i < end; ++i) batch.push_back(corpus[order[i]]);
    cursor = end;
    const auto record = selfrl_step(result.state, batch, rng);
    result.stats.steps.push_back(record);
    if (on_step) on_step(result.state, record);
  }
  return result;
}

}  // namespace causerl
