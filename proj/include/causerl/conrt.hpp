#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "causerl/encoders.hpp"
#include "causerl/selfrl.hpp"

namespace causerl {

/// Form of the transfer loss.
///   kLiteral  (1/|P⁺|) Σ log softmax(+D/T)[p⁺], distances inside the exponent
///   kInfoNce  −(1/|P⁺|) Σ log softmax(−D/T)[p⁺], the usual similarity form
/// kLiteral is unbounded below: it keeps decreasing as negatives move away
/// from the anchor. kInfoNce is bounded below by log |P⁺|.
enum class ContrastiveForm { kLiteral, kInfoNce };

/// Frozen teacher: the learned online encoder with its embedding provider.
struct TeacherHandle {
  FrozenEmbeddingProvider provider;
  BiLSTMEncoder encoder;  // never requires grad

  static TeacherHandle from_selfrl(const SelfRLState& state);
  /// Untrained encoder, as the no-SelfRL ablation uses.
  static TeacherHandle untrained(std::size_t vocab_size, const SelfRLConfig& config);

  /// Pooled per-statement encoding (2h); no gradient is recorded.
  Tensor encode(const TokenSeq& tokens) const;
  ParamList params() const;
  std::uint64_t checksum() const;
};

/// Shared space for teacher and student representations.
struct TransferSpace {
  MLPHead student_head;
  MLPHead teacher_head;
  double temperature = 0.1;
  ContrastiveForm form = ContrastiveForm::kLiteral;

  static TransferSpace random(std::size_t student_dim, std::size_t teacher_dim,
                              std::size_t head_hidden, std::size_t space_dim, double temperature,
                              Rng& rng);
  ParamList params() const;
};

/// Teacher-encodes each statement, maps it through the teacher head and
/// mean-pools the batch into r_ext. Throws EmptyBatch.
Tensor compute_anchor(std::span<const TokenSeq> external_batch, const TeacherHandle& teacher,
                      const TransferSpace& space);
/// Same, from precomputed teacher encodings (n, 2h). Encodings are constant
/// because the teacher is frozen.
Tensor compute_anchor_from_encodings(const Tensor& teacher_encodings, const TransferSpace& space);

struct StudentProjection {
  Tensor all;                               // (n, space_dim)
  Tensor positives;                         // undefined when no label is 1
  std::vector<std::size_t> positive_rows;   // indices into `all`
};

/// Maps statement representations (n, 2h) through the student head and
/// splits out the causal rows.
StudentProjection project_student(const Tensor& statement_reps, std::span<const int> labels,
                                  const TransferSpace& space);

/// (1/|P⁺|) Σ_{p⁺} log( e^{D(p⁺)/T} / Σ_{p∈P} e^{D(p)/T} ) with D the ℓ2
/// distance to `anchor`, or its InfoNCE counterpart per `form`. The log-sum-exp is shifted by
/// its maximum. Throws NoPositives when `positives` is undefined.
Tensor contrastive_loss(const Tensor& positives, const Tensor& all, const Tensor& anchor,
                        double temperature, ContrastiveForm form = ContrastiveForm::kLiteral);

}  // namespace causerl
