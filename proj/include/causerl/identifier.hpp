#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causerl/adamw.hpp"
#include "causerl/conrt.hpp"
#include "causerl/encoders.hpp"
#include "causerl/metrics.hpp"

namespace causerl {

struct EventPairExample {
  std::string doc_id;
  std::vector<std::string> tokens;
  Span e1;
  Span e2;
  int label = 0;
  TokenSeq ids;  // tokens mapped through a Vocabulary

  /// Throws SpanOutOfRange for empty, out-of-range or overlapping spans and
  /// InvalidSpec for a non-binary label.
  void validate() const;
};

struct IdentifierConfig {
  double learning_rate = 2e-5;  // η_stu
  std::size_t batch_size = 16;
  double negative_keep_rate = 0.6;
  double temperature = 0.1;
  std::size_t external_batch_size = 48;
  std::size_t patience = 5;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 1;
  std::size_t embedding_dim = 32;
  std::size_t hidden = 50;
  std::size_t classifier_hidden = 50;
  std::size_t space_hidden = 50;
  std::size_t space_dim = 50;
  double weight_decay = 0.01;
  double threshold = 0.5;
  ContrastiveForm contrastive_form = ContrastiveForm::kLiteral;

  void validate() const;
};

/// λ: trainable embedding table and BiLSTM (the contextual encoder) plus the
/// classifier over [r_event ; r_event_state].
struct IdentifierModel {
  Tensor embedding;  // (vocab, dim)
  BiLSTMEncoder encoder;
  MLPHead classifier;  // 6h → hidden → 1
  bool encoder_frozen = false;

  static IdentifierModel random(std::size_t vocab_size, const IdentifierConfig& config, Rng& rng);
  /// Encoder initialised from a teacher (its provider table and Enc_θ).
  /// With `freeze` the encoder half never trains.
  static IdentifierModel from_teacher(const TeacherHandle& teacher, const IdentifierConfig& config,
                                      Rng& rng, bool freeze);

  ParamList params() const;
  ParamList trainable_params() const;
  IdentifierModel clone() const;
};

struct PairEncoding {
  Tensor r_event;        // (4h) = [pool(e1) ; pool(e2)]
  Tensor r_event_state;  // (2h) = pool over all tokens
};

PairEncoding encode_pair(const EventPairExample& example, const IdentifierModel& model);

/// Probability sigmoid(MLP([r_event ; r_event_state])).
double classify_pair(const Tensor& r_event, const Tensor& r_event_state,
                     const IdentifierModel& model);
double predict_proba(const EventPairExample& example, const IdentifierModel& model);
/// 1 iff the probability is >= threshold. Uses the identifier alone.
int predict(const EventPairExample& example, const IdentifierModel& model,
            double threshold = 0.5);

ConfusionCounts evaluate(std::span<const EventPairExample> examples, const IdentifierModel& model,
                         double threshold = 0.5);

/// Indices of the examples kept for one training pass: every positive, and
/// each negative independently with probability `keep_rate`.
std::vector<std::size_t> negative_sampling(std::span<const EventPairExample> examples,
                                           double keep_rate, Rng& rng);

/// ConRT inputs for identifier training. The teacher is frozen, so its
/// pooled encodings of all external statements are computed once.
struct TransferContext {
  const TeacherHandle* teacher = nullptr;
  TransferSpace space;
  Tensor teacher_encodings;  // (n_external, 2h_teacher)

  static TransferContext build(const TeacherHandle& teacher, TransferSpace space,
                               std::span<const TokenSeq> external);
  Tensor external_batch(std::span<const std::size_t> rows) const;
};

struct JointLoss {
  Tensor total;        // L^stu + L^con, or L^stu alone when transfer is skipped
  Tensor student;      // L^stu
  Tensor contrastive;  // undefined when skipped
};

/// Forward pass of the joint objective on one batch. `external_encodings`
/// is null for identifier-only training; the contrastive term is also
/// skipped for a batch with no causal pair.
JointLoss joint_loss(std::span<const EventPairExample> batch, const IdentifierModel& model,
                     const TransferSpace* space, const Tensor* external_encodings,
                     const IdentifierConfig& config);

struct JointStepResult {
  double loss = 0.0;
  double student_loss = 0.0;
  double contrastive_loss = 0.0;
  bool transfer_applied = false;
};

/// L_λ = L^stu + L^con, one backward pass, AdamW on the optimizer's params.
JointStepResult joint_step(std::span<const EventPairExample> batch, IdentifierModel& model,
                           TransferSpace* space, const Tensor* external_encodings, AdamW& optimizer,
                           const IdentifierConfig& config);

struct TrainSummary {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_dev_f1 = -1.0;
  std::size_t steps = 0;
};

/// Trains λ (and the transfer heads when `transfer` is given), early-stopping
/// on dev F1 with the configured patience and restoring the best epoch.
class IdentifierTrainer {
 public:
  IdentifierTrainer(IdentifierModel model, IdentifierConfig config,
                    std::optional<TransferContext> transfer);

  JointStepResult step(std::span<const EventPairExample> batch);
  TrainSummary fit(std::span<const EventPairExample> train, std::span<const EventPairExample> dev);

  const IdentifierModel& model() const { return model_; }
  const std::optional<TransferContext>& transfer() const { return transfer_; }

 private:
  IdentifierModel model_;
  IdentifierConfig config_;
  std::optional<TransferContext> transfer_;
  AdamW optimizer_;
  Rng rng_;
};

}  // namespace causerl
