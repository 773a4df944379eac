#include "causerl/metrics.hpp"

namespace causerl {

void ConfusionCounts::add(int prediction, int label) {
  if (prediction == 1 && label == 1) ++tp;
  else if (prediction == 1) ++fp;
  else if (label == 1) ++fn;
  else ++tn;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

PRF prf1(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF out;
  if (tp + fp > 0) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

}  // namespace causerl
