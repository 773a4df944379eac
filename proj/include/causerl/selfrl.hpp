#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "causerl/adamw.hpp"
#include "causerl/encoders.hpp"

namespace causerl {

using TokenSeq = std::vector<int>;

struct SelfRLConfig {
  double learning_rate = 1e-5;  // η_tea
  double tau = 0.996;           // EMA decay of the target network
  std::size_t batch_size = 48;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  bool copy_target_at_init = true;
  std::size_t embedding_dim = 32;
  std::size_t hidden = 50;  // per LSTM direction
  std::size_t head_hidden = 50;
  std::size_t head_dim = 50;
  double weight_decay = 0.01;

  /// Throws InvalidConfig.
  void validate() const;
};

/// θ: encoder, projector and predictor, all trainable.
struct OnlineNetwork {
  BiLSTMEncoder encoder;
  MLPHead projector;
  MLPHead predictor;

  ParamList params() const;
};

/// δ: same encoder and projector shapes as the online network, no predictor.
/// Its tensors never require grad; they only move through ema_update.
struct TargetNetwork {
  BiLSTMEncoder encoder;
  MLPHead projector;

  ParamList params() const;
};

OnlineNetwork make_online_network(std::size_t embedding_dim, const SelfRLConfig& config, Rng& rng);
TargetNetwork copy_as_target(const OnlineNetwork& online);
TargetNetwork make_target_network(std::size_t embedding_dim, const SelfRLConfig& config, Rng& rng);

/// Random disjoint pairing of `batch_size` statements; with an odd count the
/// leftover index is dropped for this step. Throws BatchTooSmall below 2.
std::vector<std::pair<std::size_t, std::size_t>> pair_statements(std::size_t batch_size, Rng& rng);

/// z: pooled encoding passed through the projector.
Tensor online_projection(const TokenSeq& tokens, const FrozenEmbeddingProvider& provider,
                         const OnlineNetwork& online);
Tensor target_projection(const TokenSeq& tokens, const FrozenEmbeddingProvider& provider,
                         const TargetNetwork& target);

/// Symmetrised objective for one statement pair:
///   L(pred(z_θ(a)), z′_δ(b)) + L(pred(z_θ(b)), z′_δ(a)),
/// each term the normalised MSE with the target side detached. Range [0, 8].
Tensor selfrl_loss(const TokenSeq& a, const TokenSeq& b, const FrozenEmbeddingProvider& provider,
                   const OnlineNetwork& online, const TargetNetwork& target);

/// δ ← τ·δ + (1 − τ)·θ over encoder and projector. Throws ShapeMismatch.
void ema_update(TargetNetwork& target, const OnlineNetwork& online, double tau);

/// ‖θ − δ‖₂ over the parameters the two networks share.
double parameter_distance(const OnlineNetwork& online, const TargetNetwork& target);

/// Mean over dimensions of the across-batch population standard deviation of
/// the ℓ2-normalised rows of `projections` (n, d). Zero means collapse.
double collapse_diagnostic(const Tensor& projections);

struct SelfRLStepRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double proj_std = 0.0;
  double theta_delta_dist = 0.0;
};

struct SelfRLStats {
  std::vector<SelfRLStepRecord> steps;

  /// One JSON object per step: {step, loss, proj_std, theta_delta_dist}.
  std::string to_jsonl() const;
};

struct SelfRLState {
  SelfRLConfig config;
  FrozenEmbeddingProvider provider;
  OnlineNetwork online;
  TargetNetwork target;
  AdamW optimizer;

  /// Enc_θ plus the provider, as a named list (used for teacher checkpoints).
  ParamList teacher_params() const;
};

SelfRLState init_selfrl(std::size_t vocab_size, const SelfRLConfig& config);

/// One optimisation step on `batch`: symmetrised loss averaged over the
/// pairs, AdamW on θ, then the EMA update of δ.
SelfRLStepRecord selfrl_step(SelfRLState& state, std::span<const TokenSeq> batch, Rng& rng);

/// Mean symmetrised loss over a fixed pairing, without touching any state.
double evaluate_selfrl_loss(const SelfRLState& state, std::span<const TokenSeq> statements,
                            std::span<const std::pair<std::size_t, std::size_t>> pairs);

using SelfRLStepCallback = std::function<void(const SelfRLState&, const SelfRLStepRecord&)>;

struct SelfRLResult {
  SelfRLState state;
  SelfRLStats stats;
};

/// Shuffles the corpus each epoch (no replacement within an epoch) and
/// steps through batches until `max_steps`. Throws EmptyCorpus.
SelfRLResult train_selfrl(std::span<const TokenSeq> corpus, std::size_t vocab_size,
                          const SelfRLConfig& config, const SelfRLStepCallback& on_step = {});

}  // namespace causerl
