#include "causerl/identifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causerl/error.hpp"
#include "causerl/ops.hpp"

namespace causerl {

namespace {

std::vector<Tensor> optimizer_params(const IdentifierModel& model,
                                     const std::optional<TransferContext>& transfer) {
  auto params = tensors_of(model.trainable_params());
  if (transfer) {
    auto space = tensors_of(transfer->space.params());
    params.insert(params.end(), space.begin(), space.end());
  }
  return params;
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void restore(const std::vector<Tensor>& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i];
    std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
  }
}

}  // namespace

void EventPairExample::validate() const {
  const std::size_t len = ids.empty() ? tokens.size() : ids.size();
  for (const Span* s : {&e1, &e2}) {
    if (s->begin >= s->end || s->end > len) {
      throw Error(ErrorKind::kSpanOutOfRange,
                  doc_id + ": span [" + std::to_string(s->begin) + "," + std::to_string(s->end) +
                      ") outside " + std::to_string(len) + " tokens");
    }
  }
  if (e1.begin < e2.end && e2.begin < e1.end) {
    throw Error(ErrorKind::kSpanOutOfRange, doc_id + ": event spans overlap");
  }
  if (label != 0 && label != 1) throw Error(ErrorKind::kInvalidSpec, doc_id + ": label not binary");
}

void IdentifierConfig::validate() const {
  if (!(negative_keep_rate > 0.0 && negative_keep_rate <= 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "negative keep rate must lie in (0,1]");
  }
  if (!(learning_rate > 0.0) || !(temperature > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "rates must be positive");
  }
  if (batch_size == 0 || external_batch_size == 0 || max_epochs == 0) {
    throw Error(ErrorKind::kInvalidConfig, "batch sizes and epochs must be positive");
  }
}

IdentifierModel IdentifierModel::random(std::size_t vocab_size, const IdentifierConfig& config,
                                        Rng& rng) {
  config.validate();
  IdentifierModel m;
  m.embedding = gaussian_tensor({vocab_size, config.embedding_dim}, 0.1, rng, true);
  m.encoder = BiLSTMEncoder::random(config.embedding_dim, config.hidden, rng, true);
  m.classifier = MLPHead::random(6 * config.hidden, config.classifier_hidden, 1, rng, true);
  return m;
}

IdentifierModel IdentifierModel::from_teacher(const TeacherHandle& teacher,
                                              const IdentifierConfig& config, Rng& rng,
                                              bool freeze) {
  config.validate();
  IdentifierModel m;
  m.embedding = Tensor(teacher.provider.table.shape(),
                       std::vector<double>(teacher.provider.table.data().begin(),
                                           teacher.provider.table.data().end()),
                       !freeze);
  m.encoder = teacher.encoder.clone(!freeze);
  m.classifier =
      MLPHead::random(6 * teacher.encoder.hidden(), config.classifier_hidden, 1, rng, true);
  m.encoder_frozen = freeze;
  return m;
}

ParamList IdentifierModel::params() const {
  ParamList p{{"embedding", embedding}};
  auto enc = encoder.params("encoder");
  auto cls = classifier.params("classifier");
  p.insert(p.end(), enc.begin(), enc.end());
  p.insert(p.end(), cls.begin(), cls.end());
  return p;
}

ParamList IdentifierModel::trainable_params() const {
  if (!encoder_frozen) return params();
  return classifier.params("classifier");
}

IdentifierModel IdentifierModel::clone() const {
  IdentifierModel m;
  m.embedding = embedding.clone();
  m.encoder = encoder.clone(!encoder_frozen);
  m.classifier = classifier.clone(true);
  m.encoder_frozen = encoder_frozen;
  return m;
}

PairEncoding encode_pair(const EventPairExample& example, const IdentifierModel& model) {
  example.validate();
  const Tensor states = encode_sequence(embed(model.embedding, example.ids), model.encoder);
  const Tensor spans[] = {pool_event_span(states, example.e1), pool_event_span(states, example.e2)};
  return {ops::concat(spans), pool_statement(states)};
}

double classify_pair(const Tensor& r_event, const Tensor& r_event_state,
                     const IdentifierModel& model) {
  NoGradGuard no_grad;
  const Tensor parts[] = {r_event, r_event_state};
  const Tensor logit = apply_head(ops::concat(parts), model.classifier);
  return ops::sigmoid(logit).item();
}

double predict_proba(const EventPairExample& example, const IdentifierModel& model) {
  NoGradGuard no_grad;
  const auto enc = encode_pair(example, model);
  return classify_pair(enc.r_event, enc.r_event_state, model);
}

int predict(const EventPairExample& example, const IdentifierModel& model, double threshold) {
  return predict_proba(example, model) >= threshold ? 1 : 0;
}

ConfusionCounts evaluate(std::span<const EventPairExample> examples, const IdentifierModel& model,
                         double threshold) {
  ConfusionCounts counts;
  for (const auto& ex : examples) counts.add(predict(ex, model, threshold), ex.label);
  return counts;
}

std::vector<std::size_t> negative_sampling(std::span<const EventPairExample> examples,
                                           double keep_rate, Rng& rng) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "negative keep rate must lie in (0,1]");
  }
  std::bernoulli_distribution keep(keep_rate);
  std::vector<std::size_t> kept;
  kept.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].label == 1 || keep_rate == 1.0 || keep(rng)) kept.push_back(i);
  }
  return kept;
}

TransferContext TransferContext::build(const TeacherHandle& teacher, TransferSpace space,
                                       std::span<const TokenSeq> external) {
  if (external.empty()) throw Error(ErrorKind::kEmptyBatch, "no external statements");
  std::vector<Tensor> rows;
  rows.reserve(external.size());
  for (const auto& s : external) rows.push_back(teacher.encode(s));
  return {&teacher, std::move(space), ops::stack(rows)};
}

Tensor TransferContext::external_batch(std::span<const std::size_t> rows) const {
  NoGradGuard no_grad;
  return ops::select_rows(teacher_encodings, rows);
}

JointLoss joint_loss(std::span<const EventPairExample> batch, const IdentifierModel& model,
                     const TransferSpace* space, const Tensor* external_encodings,
                     const IdentifierConfig& config) {
  if (batch.empty()) throw Error(ErrorKind::kEmptyBatch, "identifier batch is empty");
  std::vector<Tensor> features;
  std::vector<Tensor> statements;
  std::vector<double> labels;
  std::vector<int> label_ints;
  features.reserve(batch.size());
  for (const auto& ex : batch) {
    auto enc = encode_pair(ex, model);
    const Tensor parts[] = {enc.r_event, enc.r_event_state};
    features.push_back(ops::concat(parts));
    statements.push_back(enc.r_event_state);
    labels.push_back(static_cast<double>(ex.label));
    label_ints.push_back(ex.label);
  }
  JointLoss out;
  out.student = binary_cross_entropy(apply_head(ops::stack(features), model.classifier), labels);
  out.total = out.student;

  const bool any_positive = std::find(label_ints.begin(), label_ints.end(), 1) != label_ints.end();
  if (space != nullptr && external_encodings != nullptr && any_positive) {
    const Tensor anchor = compute_anchor_from_encodings(*external_encodings, *space);
    const auto projected = project_student(ops::stack(statements), label_ints, *space);
    out.contrastive =
        contrastive_loss(projected.positives, projected.all, anchor, config.temperature, space->form);
    out.total = ops::add(out.student, out.contrastive);
  }
  return out;
}

JointStepResult joint_step(std::span<const EventPairExample> batch, IdentifierModel& model,
                           TransferSpace* space, const Tensor* external_encodings, AdamW& optimizer,
                           const IdentifierConfig& config) {
  optimizer.zero_grad();
  JointStepResult result;
  {
    Tape tape;
    const JointLoss loss = joint_loss(batch, model, space, external_encodings, config);
    result.loss = loss.total.item();
    result.student_loss = loss.student.item();
    result.transfer_applied = loss.contrastive.defined();
    if (result.transfer_applied) result.contrastive_loss = loss.contrastive.item();
    tape.backward(loss.total);
  }
  optimizer.step();
  return result;
}

IdentifierTrainer::IdentifierTrainer(IdentifierModel model, IdentifierConfig config,
                                     std::optional<TransferContext> transfer)
    : model_(std::move(model)),
      config_(config),
      transfer_(std::move(transfer)),
      optimizer_(optimizer_params(model_, transfer_),
                 AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay}),
      rng_(config.seed) {
  config_.validate();
}

JointStepResult IdentifierTrainer::step(std::span<const EventPairExample> batch) {
  if (!transfer_) {
    return joint_step(batch, model_, nullptr, nullptr, optimizer_, config_);
  }
  // Fresh external batch every step.
  const std::size_t n_ext = transfer_->teacher_encodings.rows();
  std::vector<std::size_t> rows(n_ext);
  std::iota(rows.begin(), rows.end(), 0);
  const std::size_t take = std::min(config_.external_batch_size, n_ext);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_ext - 1);
    std::swap(rows[i], rows[pick(rng_)]);
  }
  rows.resize(take);
  const Tensor external = transfer_->external_batch(rows);
  return joint_step(batch, model_, &transfer_->space, &external, optimizer_, config_);
}

TrainSummary IdentifierTrainer::fit(std::span<const EventPairExample> train,
                                    std::span<const EventPairExample> dev) {
  if (train.empty()) throw Error(ErrorKind::kEmptyBatch, "no training examples");
  TrainSummary summary;
  const auto& params = optimizer_.params();
  auto best = snapshot(params);
  std::size_t since_best = 0;
  std::vector<EventPairExample> batch;
  for (std::size_t epoch = 1; epoch <= config_.max_epochs; ++epoch) {
    auto kept = negative_sampling(train, config_.negative_keep_rate, rng_);
    std::shuffle(kept.begin(), kept.end(), rng_);
    for (std::size_t start = 0; start < kept.size(); start += config_.batch_size) {
      const std::size_t end = std::min(kept.size(), start + config_.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[kept[i]]);
      step(batch);
      ++summary.steps;
    }
    summary.epochs_run = epoch;
    if (dev.empty()) continue;
    const double f1 = prf1(evaluate(dev, model_, config_.threshold)).f1;
    if (f1 > summary.best_dev_f1) {
      summary.best_dev_f1 = f1;
      summary.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (++since_best >= config_.patience) {
      break;
    }
  }
  if (!dev.empty()) restore(params, best);
  return summary;
}

}  // namespace causerl
