#pragma once

#include <cstddef>

namespace causerl {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(int prediction, int label);
  ConfusionCounts& operator+=(const ConfusionCounts& other);
};

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators give zero, so the degenerate cases never divide by 0.
PRF prf1(std::size_t tp, std::size_t fp, std::size_t fn);
inline PRF prf1(const ConfusionCounts& c) { return prf1(c.tp, c.fp, c.fn); }

}  // namespace causerl
