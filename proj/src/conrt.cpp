#include "causerl/conrt.hpp"

#include "causerl/error.hpp"
#include "causerl/ops.hpp"

namespace causerl {

TeacherHandle TeacherHandle::from_selfrl(const SelfRLState& state) {
  return {FrozenEmbeddingProvider{state.provider.table.clone()}, state.online.encoder.clone(false)};
}

TeacherHandle TeacherHandle::untrained(std::size_t vocab_size, const SelfRLConfig& config) {
  const SelfRLState fresh = init_selfrl(vocab_size, config);
  return from_selfrl(fresh);
}

Tensor TeacherHandle::encode(const TokenSeq& tokens) const {
  NoGradGuard no_grad;
  return pool_statement(encode_sequence(provider.embed(tokens), encoder));
}

ParamList TeacherHandle::params() const {
  ParamList p{{"provider.table", provider.table}};
  auto enc = encoder.params("encoder");
  p.insert(p.end(), enc.begin(), enc.end());
  return p;
}

std::uint64_t TeacherHandle::checksum() const { return causerl::checksum(params()); }

TransferSpace TransferSpace::random(std::size_t student_dim, std::size_t teacher_dim,
                                    std::size_t head_hidden, std::size_t space_dim,
                                    double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidConfig, "temperature must be > 0");
  TransferSpace space;
  space.student_head = MLPHead::random(student_dim, head_hidden, space_dim, rng, true);
  space.teacher_head = MLPHead::random(teacher_dim, head_hidden, space_dim, rng, true);
  space.temperature = temperature;
  return space;
}

ParamList TransferSpace::params() const {
  ParamList p = student_head.params("space.student");
  auto t = teacher_head.params("space.teacher");
  p.insert(p.end(), t.begin(), t.end());
  return p;
}

Tensor compute_anchor(std::span<const TokenSeq> external_batch, const TeacherHandle& teacher,
                      const TransferSpace& space) {
  if (external_batch.empty()) throw Error(ErrorKind::kEmptyBatch, "no external statements");
  std::vector<Tensor> encodings;
  encodings.reserve(external_batch.size());
  for (const auto& s : external_batch) encodings.push_back(teacher.encode(s));
  return compute_anchor_from_encodings(ops::stack(encodings), space);
}

Tensor compute_anchor_from_encodings(const Tensor& teacher_encodings, const TransferSpace& space) {
  if (!teacher_encodings.defined() || teacher_encodings.rank() != 2) {
    throw Error(ErrorKind::kEmptyBatch, "no external statements");
  }
  return ops::mean_rows(apply_head(teacher_encodings, space.teacher_head));
}

StudentProjection project_student(const Tensor& statement_reps, std::span<const int> labels,
                                  const TransferSpace& space) {
  if (!statement_reps.defined() || statement_reps.rank() != 2 ||
      statement_reps.rows() != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "one label per statement representation");
  }
  StudentProjection out;
  out.all = apply_head(statement_reps, space.student_head);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error(ErrorKind::kShapeMismatch, "labels must be 0 or 1");
    }
    if (labels[i] == 1) out.positive_rows.push_back(i);
  }
  if (!out.positive_rows.empty()) out.positives = ops::select_rows(out.all, out.positive_rows);
  return out;
}

Tensor contrastive_loss(const Tensor& positives, const Tensor& all, const Tensor& anchor,
                        double temperature, ContrastiveForm form) {
  if (!positives.defined()) throw Error(ErrorKind::kNoPositives, "no causal pair in the batch");
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidConfig, "temperature must be > 0");
  if (form == ContrastiveForm::kLiteral) {
    const Tensor pos_logits = ops::scale(ops::row_distances(positives, anchor), 1.0 / temperature);
    const Tensor all_logits = ops::scale(ops::row_distances(all, anchor), 1.0 / temperature);
    return ops::sub(ops::mean(pos_logits), ops::logsumexp(all_logits));
  }
  const Tensor pos_logits = ops::scale(ops::row_distances(positives, anchor), -1.0 / temperature);
  const Tensor all_logits = ops::scale(ops::row_distances(all, anchor), -1.0 / temperature);
  return ops::sub(ops::logsumexp(all_logits), ops::mean(pos_logits));
}

}  // namespace causerl
