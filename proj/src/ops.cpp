#include "causerl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "causerl/error.hpp"

namespace causerl {

namespace {

thread_local Fault g_fault = Fault::kNone;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record(std::function<void()> rule) { Tape::active()->record(std::move(rule)); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::kShapeMismatch, std::string(op) + ": operand shapes differ");
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw Error(ErrorKind::kShapeMismatch,
                std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                    std::to_string(a.rank()));
  }
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void set_fault(Fault fault) { g_fault = fault; }
Fault current_fault() { return g_fault; }

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  const bool track = tracking({&a, &b});
  Tensor y(a.shape(), std::move(out), track);
  if (track) {
    record([y, a, b]() mutable {
      auto dy = y.grad();
      if (a.requires_grad()) {
        auto da = a.mutable_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  const bool track = tracking({&a, &b});
  Tensor y(a.shape(), std::move(out), track);
  if (track) {
    record([y, a, b]() mutable {
      auto dy = y.grad();
      if (a.requires_grad()) {
        auto da = a.mutable_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  const bool track = tracking({&a, &b});
  Tensor y(a.shape(), std::move(out), track);
  if (track) {
    record([y, a, b]() mutable {
      auto dy = y.grad();
      if (a.requires_grad()) {
        auto da = a.mutable_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b.at(i);
      }
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a.at(i);
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  const bool track = tracking({&a});
  Tensor y(a.shape(), std::move(out), track);
  if (track) {
    record([y, a, factor]() mutable {
      auto dy = y.grad();
      auto da = a.mutable_grad();
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * factor;
    });
  }
  return y;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const bool track = tracking({&a});
  Tensor y({}, {total}, track);
  if (track) {
    record([y, a]() mutable {
      const double g = y.grad()[0];
      for (double& d : a.mutable_grad()) d += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.at(i));
  const bool track = tracking({&a});
  Tensor y(a.shape(), std::move(out), track);
  if (track) {
    record([y, a]() mutable {
      auto dy = y.grad();
      auto da = a.mutable_grad();
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double t = y.at(i);
        da[i] += dy[i] * (1.0 - t * t);
      }
    });
  }
  return y;
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_value(a.at(i));
  const bool track = tracking({&a});
  Tensor y(a.shape(), std::move(out), track);
  if (track) {
    record([y, a]() mutable {
      auto dy = y.grad();
      auto da = a.mutable_grad();
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double s = y.at(i);
        da[i] += dy[i] * s * (1.0 - s);
      }
    });
  }
  return y;
}

Tensor stop_gradient(const Tensor& a) {
  return Tensor(a.shape(), std::vector<double>(a.data().begin(), a.data().end()), false);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear");
  if (x.rank() != 1 && x.rank() != 2) {
    throw Error(ErrorKind::kShapeMismatch, "linear: input must be rank 1 or 2");
  }
  const std::size_t n = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out_dim = weight.rows();
  if (weight.cols() != in) {
    throw Error(ErrorKind::kShapeMismatch,
                "linear: input width " + std::to_string(in) + " vs weight width " +
                    std::to_string(weight.cols()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.numel() != out_dim)) {
    throw Error(ErrorKind::kShapeMismatch, "linear: bias size mismatch");
  }
  std::vector<double> out(n * out_dim);
  const auto xd = x.data();
  const auto wd = weight.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = xd.data() + r * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wd.data() + o * in;
      double acc = bias.defined() ? bias.at(o) : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      out[r * out_dim + o] = acc;
    }
  }
  const bool track = tracking({&x, &weight, &bias});
  Shape shape = x.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim};
  Tensor y(std::move(shape), std::move(out), track);
  if (track) {
    record([y, x, weight, bias, n, in, out_dim]() mutable {
      const auto dy = y.grad();
      const auto xd = x.data();
      const auto wd = weight.data();
      if (x.requires_grad()) {
        auto dx = x.mutable_grad();
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = dy[r * out_dim + o];
            if (g == 0.0) continue;
            const double* wr = wd.data() + o * in;
            double* dxr = dx.data() + r * in;
            for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
          }
        }
      }
      if (weight.requires_grad()) {
        auto dw = weight.mutable_grad();
        for (std::size_t r = 0; r < n; ++r) {
          const double* xr = xd.data() + r * in;
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = dy[r * out_dim + o];
            if (g == 0.0) continue;
            double* dwr = dw.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) dwr[i] += g * xr[i];
          }
        }
      }
      if (bias.defined() && bias.requires_grad()) {
        auto db = bias.mutable_grad();
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t o = 0; o < out_dim; ++o) db[o] += dy[r * out_dim + o];
        }
      }
    });
  }
  return y;
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorKind::kShapeMismatch, "concat: no inputs");
  std::vector<double> out;
  bool track = false;
  for (const auto& p : parts) {
    require_rank(p, 1, "concat");
    out.insert(out.end(), p.data().begin(), p.data().end());
    track = track || tracking({&p});
  }
  const auto total = out.size();
  Tensor y({total}, std::move(out), track);
  if (track) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record([y, inputs]() mutable {
      const auto dy = y.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto dp = p.mutable_grad();
          for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += dy[offset + i];
        }
        offset += p.numel();
      }
    });
  }
  return y;
}

Tensor concat_cols(const Tensor& left, const Tensor& right) {
  require_rank(left, 2, "concat_cols");
  require_rank(right, 2, "concat_cols");
  if (left.rows() != right.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "concat_cols: row counts differ");
  }
  const std::size_t n = left.rows();
  const std::size_t lc = left.cols();
  const std::size_t rc = right.cols();
  std::vector<double> out(n * (lc + rc));
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(left.data().data() + r * lc, lc, out.data() + r * (lc + rc));
    std::copy_n(right.data().data() + r * rc, rc, out.data() + r * (lc + rc) + lc);
  }
  const bool track = tracking({&left, &right});
  Tensor y({n, lc + rc}, std::move(out), track);
  if (track) {
    record([y, left, right, n, lc, rc]() mutable {
      const auto dy = y.grad();
      for (std::size_t r = 0; r < n; ++r) {
        if (left.requires_grad()) {
          auto dl = left.mutable_grad();
          for (std::size_t c = 0; c < lc; ++c) dl[r * lc + c] += dy[r * (lc + rc) + c];
        }
        if (right.requires_grad()) {
          auto dr = right.mutable_grad();
          for (std::size_t c = 0; c < rc; ++c) dr[r * rc + c] += dy[r * (lc + rc) + lc + c];
        }
      }
    });
  }
  return y;
}

Tensor stack(std::span<const Tensor> rows) {
  if (rows.empty()) throw Error(ErrorKind::kShapeMismatch, "stack: no inputs");
  const std::size_t d = rows.front().numel();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  bool track = false;
  for (const auto& r : rows) {
    require_rank(r, 1, "stack");
    if (r.numel() != d) throw Error(ErrorKind::kShapeMismatch, "stack: row sizes differ");
    out.insert(out.end(), r.data().begin(), r.data().end());
    track = track || tracking({&r});
  }
  Tensor y({rows.size(), d}, std::move(out), track);
  if (track) {
    std::vector<Tensor> inputs(rows.begin(), rows.end());
    record([y, inputs, d]() mutable {
      const auto dy = y.grad();
      for (std::size_t r = 0; r < inputs.size(); ++r) {
        if (!inputs[r].requires_grad()) continue;
        auto dr = inputs[r].mutable_grad();
        for (std::size_t c = 0; c < d; ++c) dr[c] += dy[r * d + c];
      }
    });
  }
  return y;
}

Tensor select_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_rank(x, 2, "select_rows");
  if (indices.empty()) throw Error(ErrorKind::kShapeMismatch, "select_rows: no indices");
  const std::size_t d = x.cols();
  std::vector<double> out;
  out.reserve(indices.size() * d);
  for (auto idx : indices) {
    if (idx >= x.rows()) throw Error(ErrorKind::kShapeMismatch, "select_rows: index out of range");
    const double* src = x.data().data() + idx * d;
    out.insert(out.end(), src, src + d);
  }
  const bool track = tracking({&x});
  Tensor y({indices.size(), d}, std::move(out), track);
  if (track) {
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    record([y, x, idx, d]() mutable {
      const auto dy = y.grad();
      auto dx = x.mutable_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) dx[idx[r] * d + c] += dy[r * d + c];
      }
    });
  }
  return y;
}

Tensor mean_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "mean_rows");
  if (begin >= end || end > x.rows()) {
    throw Error(ErrorKind::kSpanOutOfRange,
                "rows [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                    std::to_string(x.rows()));
  }
  const std::size_t d = x.cols();
  const double inv = 1.0 / static_cast<double>(end - begin);
  std::vector<double> out(d, 0.0);
  for (std::size_t r = begin; r < end; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[c] += x.data()[r * d + c];
  }
  for (double& v : out) v *= inv;
  const bool track = tracking({&x});
  Tensor y({d}, std::move(out), track);
  if (track) {
    record([y, x, begin, end, d, inv]() mutable {
      const auto dy = y.grad();
      auto dx = x.mutable_grad();
      for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t c = 0; c < d; ++c) dx[r * d + c] += dy[c] * inv;
      }
    });
  }
  return y;
}

Tensor mean_rows(const Tensor& x) { return mean_rows(x, 0, x.rows()); }

Tensor gather_rows(const Tensor& table, std::span<const int> indices) {
  require_rank(table, 2, "gather_rows");
  if (indices.empty()) throw Error(ErrorKind::kEmptySequence, "gather_rows: no indices");
  const std::size_t d = table.cols();
  std::vector<double> out;
  out.reserve(indices.size() * d);
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= table.rows()) {
      throw Error(ErrorKind::kOutOfVocab, "index " + std::to_string(idx) + " outside table of " +
                                              std::to_string(table.rows()));
    }
    const double* src = table.data().data() + static_cast<std::size_t>(idx) * d;
    out.insert(out.end(), src, src + d);
  }
  const bool track = tracking({&table});
  Tensor y({indices.size(), d}, std::move(out), track);
  if (track) {
    std::vector<int> idx(indices.begin(), indices.end());
    record([y, table, idx, d]() mutable {
      const auto dy = y.grad();
      auto dt = table.mutable_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        double* dst = dt.data() + static_cast<std::size_t>(idx[r]) * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += dy[r * d + c];
      }
    });
  }
  return y;
}

Tensor lstm_sequence(const Tensor& x, const Tensor& input_weight, const Tensor& recurrent_weight,
                     const Tensor& bias, bool reverse) {
  require_rank(x, 2, "lstm_sequence");
  require_rank(input_weight, 2, "lstm_sequence");
  require_rank(recurrent_weight, 2, "lstm_sequence");
  require_rank(bias, 1, "lstm_sequence");
  const std::size_t len = x.rows();
  const std::size_t d_in = x.cols();
  const std::size_t h = recurrent_weight.cols();
  const std::size_t g4 = 4 * h;
  if (input_weight.rows() != g4 || input_weight.cols() != d_in || recurrent_weight.rows() != g4 ||
      bias.numel() != g4) {
    throw Error(ErrorKind::kShapeMismatch, "lstm_sequence: parameter shapes do not match input");
  }

  // Per-step activations, indexed by processing order.
  struct Trace {
    std::vector<double> gates;   // (len, 4h) post-activation i,f,g,o
    std::vector<double> cell;    // (len, h)
    std::vector<double> tanh_c;  // (len, h)
  };
  auto trace = std::make_shared<Trace>();
  trace->gates.resize(len * g4);
  trace->cell.resize(len * h);
  trace->tanh_c.resize(len * h);

  const auto xd = x.data();
  const auto wd = input_weight.data();
  const auto ud = recurrent_weight.data();
  const auto bd = bias.data();

  std::vector<double> out(len * h, 0.0);
  std::vector<double> h_prev(h, 0.0);
  std::vector<double> c_prev(h, 0.0);
  for (std::size_t step = 0; step < len; ++step) {
    const std::size_t t = reverse ? len - 1 - step : step;
    const double* xt = xd.data() + t * d_in;
    double* gates = trace->gates.data() + step * g4;
    for (std::size_t j = 0; j < g4; ++j) {
      double acc = bd[j];
      const double* wr = wd.data() + j * d_in;
      for (std::size_t i = 0; i < d_in; ++i) acc += wr[i] * xt[i];
      const double* ur = ud.data() + j * h;
      for (std::size_t i = 0; i < h; ++i) acc += ur[i] * h_prev[i];
      gates[j] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid_value(gates[j]);
      const double fg = sigmoid_value(gates[h + j]);
      const double gg = std::tanh(gates[2 * h + j]);
      const double og = sigmoid_value(gates[3 * h + j]);
      gates[j] = ig;
      gates[h + j] = fg;
      gates[2 * h + j] = gg;
      gates[3 * h + j] = og;
      const double c = fg * c_prev[j] + ig * gg;
      const double tc = std::tanh(c);
      trace->cell[step * h + j] = c;
      trace->tanh_c[step * h + j] = tc;
      out[t * h + j] = og * tc;
    }
    std::copy_n(out.data() + t * h, h, h_prev.data());
    std::copy_n(trace->cell.data() + step * h, h, c_prev.data());
  }

  const bool track = tracking({&x, &input_weight, &recurrent_weight, &bias});
  Tensor y({len, h}, std::move(out), track);
  if (track) {
    record([y, x, input_weight, recurrent_weight, bias, trace, len, d_in, h, g4,
            reverse]() mutable {
      const auto dy = y.grad();
      const auto xd = x.data();
      const auto yd = y.data();
      const auto wd = input_weight.data();
      const auto ud = recurrent_weight.data();
      std::vector<double> dh_next(h, 0.0);
      std::vector<double> dc_next(h, 0.0);
      std::vector<double> da(g4);
      for (std::size_t s = len; s-- > 0;) {
        const std::size_t t = reverse ? len - 1 - s : s;
        const double* gates = trace->gates.data() + s * g4;
        const double* tanh_c = trace->tanh_c.data() + s * h;
        for (std::size_t j = 0; j < h; ++j) {
          const double ig = gates[j];
          const double fg = gates[h + j];
          const double gg = gates[2 * h + j];
          const double og = gates[3 * h + j];
          const double c_prev = s > 0 ? trace->cell[(s - 1) * h + j] : 0.0;
          const double dh = dy[t * h + j] + dh_next[j];
          const double dc = dh * og * (1.0 - tanh_c[j] * tanh_c[j]) + dc_next[j];
          da[j] = dc * gg * ig * (1.0 - ig);
          da[h + j] = dc * c_prev * fg * (1.0 - fg);
          da[2 * h + j] = dc * ig * (1.0 - gg * gg);
          da[3 * h + j] = dh * tanh_c[j] * og * (1.0 - og);
          dc_next[j] = dc * fg;
        }
        // h_{s-1} in processing order.
        const double* h_prev = nullptr;
        if (s > 0) {
          const std::size_t t_prev = reverse ? len - s : s - 1;
          h_prev = yd.data() + t_prev * h;
        }
        const double* xt = xd.data() + t * d_in;
        if (input_weight.requires_grad()) {
          auto dw = input_weight.mutable_grad();
          for (std::size_t j = 0; j < g4; ++j) {
            double* row = dw.data() + j * d_in;
            for (std::size_t i = 0; i < d_in; ++i) row[i] += da[j] * xt[i];
          }
        }
        if (recurrent_weight.requires_grad() && h_prev != nullptr) {
          auto du = recurrent_weight.mutable_grad();
          for (std::size_t j = 0; j < g4; ++j) {
            double* row = du.data() + j * h;
            for (std::size_t i = 0; i < h; ++i) row[i] += da[j] * h_prev[i];
          }
        }
        if (bias.requires_grad()) {
          auto db = bias.mutable_grad();
          for (std::size_t j = 0; j < g4; ++j) db[j] += da[j];
        }
        if (x.requires_grad()) {
          auto dx = x.mutable_grad();
          double* dxt = dx.data() + t * d_in;
          for (std::size_t j = 0; j < g4; ++j) {
            const double* wr = wd.data() + j * d_in;
            for (std::size_t i = 0; i < d_in; ++i) dxt[i] += da[j] * wr[i];
          }
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (std::size_t j = 0; j < g4; ++j) {
          const double* ur = ud.data() + j * h;
          for (std::size_t i = 0; i < h; ++i) dh_next[i] += da[j] * ur[i];
        }
      }
    });
  }
  return y;
}

Tensor l2_normalize(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw Error(ErrorKind::kShapeMismatch, "l2_normalize: input must be rank 1 or 2");
  }
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> norms(n);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += x.data()[r * d + c] * x.data()[r * d + c];
    const double norm = std::sqrt(sq);
    if (!(norm > kNormEpsilon)) {
      throw Error(ErrorKind::kZeroNorm, "row " + std::to_string(r) + " has norm " +
                                            std::to_string(norm));
    }
    norms[r] = norm;
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = x.data()[r * d + c] / norm;
  }
  const bool track = tracking({&x});
  Tensor y(x.shape(), std::move(out), track);
  if (track) {
    record([y, x, norms, n, d]() mutable {
      const auto dy = y.grad();
      const auto yd = y.data();
      auto dx = x.mutable_grad();
      for (std::size_t r = 0; r < n; ++r) {
        double proj = 0.0;
        for (std::size_t c = 0; c < d; ++c) proj += yd[r * d + c] * dy[r * d + c];
        for (std::size_t c = 0; c < d; ++c) {
          dx[r * d + c] += (dy[r * d + c] - yd[r * d + c] * proj) / norms[r];
        }
      }
    });
  }
  return y;
}

Tensor row_distances(const Tensor& x, const Tensor& anchor) {
  require_rank(x, 2, "row_distances");
  require_rank(anchor, 1, "row_distances");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (anchor.numel() != d) throw Error(ErrorKind::kShapeMismatch, "row_distances: width mismatch");
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = x.data()[r * d + c] - anchor.at(c);
      sq += diff * diff;
    }
    out[r] = std::sqrt(sq);
  }
  const bool track = tracking({&x, &anchor});
  Tensor y({n}, std::move(out), track);
  if (track) {
    const double sign = g_fault == Fault::kRowDistanceSign ? -1.0 : 1.0;
    record([y, x, anchor, n, d, sign]() mutable {
      const auto dy = y.grad();
      for (std::size_t r = 0; r < n; ++r) {
        const double dist = y.at(r);
        if (dist == 0.0) continue;  // subgradient 0 at coincidence
        for (std::size_t c = 0; c < d; ++c) {
          const double g = dy[r] * (x.data()[r * d + c] - anchor.at(c)) / dist;
          if (x.requires_grad()) x.mutable_grad()[r * d + c] += sign * g;
          if (anchor.requires_grad()) anchor.mutable_grad()[c] -= g;
        }
      }
    });
  }
  return y;
}

Tensor logsumexp(const Tensor& v) {
  require_rank(v, 1, "logsumexp");
  const double m = *std::max_element(v.data().begin(), v.data().end());
  double s = 0.0;
  for (double x : v.data()) s += std::exp(x - m);
  const bool track = tracking({&v});
  Tensor y({}, {m + std::log(s)}, track);
  if (track) {
    record([y, v]() mutable {
      const double g = y.grad()[0];
      const double lse = y.item();
      auto dv = v.mutable_grad();
      for (std::size_t i = 0; i < dv.size(); ++i) dv[i] += g * std::exp(v.at(i) - lse);
    });
  }
  return y;
}

}  // namespace ops

Tensor normalized_mse(const Tensor& y, const Tensor& z) {
  if (y.shape() != z.shape()) {
    throw Error(ErrorKind::kShapeMismatch, "normalized_mse: operand shapes differ");
  }
  const Tensor y_bar = ops::l2_normalize(y);
  const Tensor z_bar = ops::l2_normalize(ops::stop_gradient(z));
  const Tensor diff = ops::sub(y_bar, z_bar);
  return ops::scale(ops::sum(ops::mul(diff, diff)), 1.0 / static_cast<double>(y.rows()));
}

Tensor binary_cross_entropy(const Tensor& logits, std::span<const double> labels) {
  if (logits.numel() != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "binary_cross_entropy: one label per logit");
  }
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits.at(i);
    if (!std::isfinite(x)) throw Error(ErrorKind::kNonFinite, "binary_cross_entropy: logit");
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw Error(ErrorKind::kInvalidSpec, "binary_cross_entropy: labels must be 0 or 1");
    }
    // softplus(x) - y·x, written to stay finite for large |x|
    total += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - labels[i] * x;
  }
  const double inv = 1.0 / static_cast<double>(n);
  const bool track = tracking({&logits});
  Tensor y({}, {total * inv}, track);
  if (track) {
    std::vector<double> lab(labels.begin(), labels.end());
    record([y, logits, lab, inv]() mutable {
      const double g = y.grad()[0];
      auto dl = logits.mutable_grad();
      for (std::size_t i = 0; i < lab.size(); ++i) {
        dl[i] += g * (sigmoid_value(logits.at(i)) - lab[i]) * inv;
      }
    });
  }
  return y;
}

}  // namespace causerl
