#pragma once

// Vectorized elementary functions shared by every model path. All exp-based
// activations route through Eigen's packet exp on fixed-size 4-lane blocks,
// so scalar and batched evaluations of the same quantity produce identical
// bits within one build.

#include <Eigen/Dense>

#include <cstddef>

namespace rcaux {

inline void exp_inplace(double* p, Eigen::Index n) {
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    Eigen::Map<Eigen::Array4d> blk(p + i);
    blk = blk.exp();
  }
  if (i < n) {
    Eigen::Array4d tail = Eigen::Array4d::Zero();
    for (Eigen::Index j = i; j < n; ++j) tail[j - i] = p[j];
    tail = tail.exp();
    for (Eigen::Index j = i; j < n; ++j) p[j] = tail[j - i];
  }
}

inline double exp_s(double x) {
  double buf[4] = {x, 0.0, 0.0, 0.0};
  exp_inplace(buf, 4);
  return buf[0];
}

// tanh(x) = (1 - e^{-2x}) / (1 + e^{-2x}); |x| clamped to 19 where tanh is
// already 1 to double precision, keeping the exp argument in range.
inline void tanh_inplace(double* p, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = p[i];
    x = x > 19.0 ? 19.0 : (x < -19.0 ? -19.0 : x);
    p[i] = -2.0 * x;
  }
  exp_inplace(p, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = p[i];
    p[i] = (1.0 - t) / (1.0 + t);
  }
}

inline double tanh_s(double x) {
  double buf[4] = {x, 0.0, 0.0, 0.0};
  tanh_inplace(buf, 4);
  return buf[0];
}

template <typename Derived>
inline void tanh_inplace(Eigen::MatrixBase<Derived>& m) {
  tanh_inplace(m.derived().data(), m.size());
}

// sigmoid(x) = 1 / (1 + e^{-x}), clamped at |x| = 40 (saturated in double).
inline void sigmoid_inplace(double* p, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = p[i];
    x = x > 40.0 ? 40.0 : (x < -40.0 ? -40.0 : x);
    p[i] = -x;
  }
  exp_inplace(p, n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = 1.0 / (1.0 + p[i]);
}

inline double sigmoid_s(double x) {
  double buf[4] = {x, 0.0, 0.0, 0.0};
  sigmoid_inplace(buf, 4);
  return buf[0];
}

inline double dtanh_from_t(double t) { return 1.0 - t * t; }

}  // namespace rcaux
