#pragma once

// Encoder, action-conditioned residual latent dynamics with open-loop
// rollout, and the budget-conditioned reachability head, together with a
// specialized reverse-mode gradient engine (per-op traces, fixed-order
// accumulation) and checkpoint IO.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rcaux/binio.hpp"
#include "rcaux/numerics.hpp"
#include "rcaux/rng.hpp"

namespace rcaux {

using Latent = Eigen::VectorXd;

struct ModelConfig {
  int obs_dim = 81;
  int d_z = 16;
  int enc_hidden = 64;
  int dyn_hidden = 64;
  int head_hidden = 16;
  int n_actions = 5;
  int L = 1;
  int H_max = 12;
  bool budget_onehot = false;

  int budget_dim() const { return budget_onehot ? H_max + 1 : 1; }
  int dyn_in() const { return d_z + n_actions; }
  int head_in() const { return 2 * d_z + budget_dim(); }

  void validate() const {
    if (obs_dim < 1 || d_z < 1 || enc_hidden < 1 || dyn_hidden < 1 ||
        head_hidden < 1 || n_actions < 1 || L < 1 || H_max < 1)
      throw std::invalid_argument("ModelConfig: non-positive dimension");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorRef {
  const char* name;
  double* data;
  int rows, cols;
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(rows) * cols;
  }
};

// Holds every named tensor of the model. The same layout serves as the
// parameter store, the gradient store, and the optimizer moment stores;
// iteration order is fixed so reductions are bitwise deterministic.
struct ParameterStore {
  ModelConfig cfg;

  Eigen::MatrixXd enc_W1, enc_W2, dyn_W1, dyn_W2, head_W1;
  Eigen::VectorXd enc_b1, enc_b2, dyn_b1, dyn_b2, head_b1, head_w2;
  double head_b2 = 0.0;

  ParameterStore() = default;

  explicit ParameterStore(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    enc_W1.setZero(cfg.enc_hidden, cfg.obs_dim);
    enc_b1.setZero(cfg.enc_hidden);
    enc_W2.setZero(cfg.d_z, cfg.enc_hidden);
    enc_b2.setZero(cfg.d_z);
    dyn_W1.setZero(cfg.dyn_hidden, cfg.dyn_in());
    dyn_b1.setZero(cfg.dyn_hidden);
    dyn_W2.setZero(cfg.d_z, cfg.dyn_hidden);
    dyn_b2.setZero(cfg.d_z);
    head_W1.setZero(cfg.head_hidden, cfg.head_in());
    head_b1.setZero(cfg.head_hidden);
    head_w2.setZero(cfg.head_hidden);
    head_b2 = 0.0;
  }

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer, fixed draw order.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& W, Eigen::VectorXd& b, int fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < W.size(); ++i)
        W.data()[i] = rng.uniform(-bound, bound);
      for (Eigen::Index i = 0; i < b.size(); ++i)
        b[i] = rng.uniform(-bound, bound);
    };
    fill(enc_W1, enc_b1, cfg.obs_dim);
    fill(enc_W2, enc_b2, cfg.enc_hidden);
    fill(dyn_W1, dyn_b1, cfg.dyn_in());
    fill(dyn_W2, dyn_b2, cfg.dyn_hidden);
    fill(head_W1, head_b1, cfg.head_in());
    {
      const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.head_hidden));
      for (Eigen::Index i = 0; i < head_w2.size(); ++i)
        head_w2[i] = rng.uniform(-bound, bound);
      head_b2 = rng.uniform(-bound, bound);
    }
  }

  template <typename F>
  void for_each_tensor(F&& f) {
    auto m = [&f](const char* name, Eigen::MatrixXd& W) {
      f(TensorRef{name, W.data(), static_cast<int>(W.rows()),
                  static_cast<int>(W.cols())});
    };
    auto v = [&f](const char* name, Eigen::VectorXd& b) {
      f(TensorRef{name, b.data(), static_cast<int>(b.size()), 1});
    };
    m("enc.W1", enc_W1);
    v("enc.b1", enc_b1);
    m("enc.W2", enc_W2);
    v("enc.b2", enc_b2);
    m("dyn.W1", dyn_W1);
    v("dyn.b1", dyn_b1);
    m("dyn.W2", dyn_W2);
    v("dyn.b2", dyn_b2);
    m("head.W1", head_W1);
    v("head.b1", head_b1);
    v("head.w2", head_w2);
    f(TensorRef{"head.b2", &head_b2, 1, 1});
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ParameterStore*>(this)->for_each_tensor(
        [&f](const TensorRef& t) { f(t); });
  }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for_each_tensor([&n](const TensorRef& t) { n += t.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&ok](const TensorRef& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i)
        if (!std::isfinite(t.data[i])) ok = false;
    });
    return ok;
  }

  void set_zero() {
    for_each_tensor([](const TensorRef& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = 0.0;
    });
  }

  static ParameterStore zeros_like(const ParameterStore& other) {
    return ParameterStore(other.cfg);
  }
};

using GradStore = ParameterStore;

// ---------------------------------------------------------------------------
// Forward passes. Each optionally records the intermediates its backward
// pass needs.

struct EncTrace {
  Eigen::VectorXd obs;
  Eigen::VectorXd h;  // post-tanh hidden
};

inline Latent encode(const ParameterStore& p, const Eigen::VectorXd& obs,
                     EncTrace* trace = nullptr) {
  if (obs.size() != p.cfg.obs_dim)
    throw std::invalid_argument("encode: observation dimension mismatch");
  Eigen::VectorXd h = p.enc_W1 * obs + p.enc_b1;
  tanh_inplace(h.data(), h.size());
  Latent z = p.enc_W2 * h + p.enc_b2;
  if (trace) {
    trace->obs = obs;
    trace->h = std::move(h);
  }
  return z;
}

struct StepTrace {
  Eigen::VectorXd z_in;
  int action = 0;
  Eigen::VectorXd h;  // post-tanh hidden
};

inline Latent predict_step(const ParameterStore& p, const Latent& z, int action,
                           StepTrace* trace = nullptr) {
  if (z.size() != p.cfg.d_z)
    throw std::invalid_argument("predict_step: latent dimension mismatch");
  if (action < 0 || action >= p.cfg.n_actions)
    throw std::invalid_argument("predict_step: invalid action");
  Eigen::VectorXd h = p.dyn_W1.leftCols(p.cfg.d_z) * z +
                      p.dyn_W1.col(p.cfg.d_z + action) + p.dyn_b1;
  tanh_inplace(h.data(), h.size());
  Latent out = z + p.dyn_W2 * h + p.dyn_b2;  // residual prediction
  if (trace) {
    trace->z_in = z;
    trace->action = action;
    trace->h = std::move(h);
  }
  return out;
}

// Context-validating form: the backbone's history is absorbed into the
// context window, of which only the most recent latent feeds the dynamics.
inline Latent predict_step(const ParameterStore& p,
                           std::span<const Latent> context, int action,
                           StepTrace* trace = nullptr) {
  if (static_cast<int>(context.size()) != p.cfg.L)
    throw std::invalid_argument("predict_step: context length != L");
  return predict_step(p, context.back(), action, trace);
}

struct RolloutTrace {
  std::vector<StepTrace> steps;
};

// Open-loop rollout: step k > 1 consumes the model's own prediction; encoded
// targets never enter.
inline std::vector<Latent> rollout_open_loop(const ParameterStore& p,
                                             std::span<const Latent> context,
                                             std::span<const std::uint8_t> actions,
                                             RolloutTrace* trace = nullptr) {
  if (static_cast<int>(context.size()) != p.cfg.L)
    throw std::invalid_argument("rollout_open_loop: context length != L");
  if (actions.empty())
    throw std::invalid_argument("rollout_open_loop: K must be >= 1");
  std::vector<Latent> out;
  out.reserve(actions.size());
  if (trace) trace->steps.resize(actions.size());
  Latent z = context.back();
  for (std::size_t k = 0; k < actions.size(); ++k) {
    z = predict_step(p, z, static_cast<int>(actions[k]),
                     trace ? &trace->steps[k] : nullptr);
    out.push_back(z);
  }
  return out;
}

struct HeadTrace {
  Eigen::VectorXd in;
  Eigen::VectorXd h;  // post-tanh hidden
};

inline Eigen::VectorXd budget_feature(const ModelConfig& cfg, int h) {
  if (h < 0) throw std::invalid_argument("reachability: negative budget");
  if (cfg.budget_onehot) {
    if (h > cfg.H_max)
      throw std::out_of_range("reachability: budget above H_max in one-hot mode");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(cfg.H_max + 1);
    f[h] = 1.0;
    return f;
  }
  return Eigen::VectorXd::Constant(1, static_cast<double>(h) / cfg.H_max);
}

inline double reachability_logit(const ParameterStore& p, const Latent& z,
                                 const Latent& z_tgt, int h,
                                 HeadTrace* trace = nullptr) {
  if (z.size() != p.cfg.d_z || z_tgt.size() != p.cfg.d_z)
    throw std::invalid_argument("reachability: latent dimension mismatch");
  Eigen::VectorXd in(p.cfg.head_in());
  in << z, z_tgt, budget_feature(p.cfg, h);
  Eigen::VectorXd hid = p.head_W1 * in + p.head_b1;
  tanh_inplace(hid.data(), hid.size());
  const double logit = p.head_w2.dot(hid) + p.head_b2;
  if (trace) {
    trace->in = std::move(in);
    trace->h = std::move(hid);
  }
  return logit;
}

inline double reachability_score(const ParameterStore& p, const Latent& z,
                                 const Latent& z_tgt, int h,
                                 HeadTrace* trace = nullptr) {
  return sigmoid_s(reachability_logit(p, z, z_tgt, h, trace));
}

// ---------------------------------------------------------------------------
// Backward passes. Each accumulates into `g` and returns/accumulates input
// gradients; callers control the accumulation order.

inline void encode_backward(const ParameterStore& p, const EncTrace& tr,
                            const Eigen::VectorXd& d_z, GradStore& g) {
  g.enc_W2.noalias() += d_z * tr.h.transpose();
  g.enc_b2 += d_z;
  Eigen::VectorXd d_pre = p.enc_W2.transpose() * d_z;
  d_pre.array() *= (1.0 - tr.h.array().square());
  g.enc_W1.noalias() += d_pre * tr.obs.transpose();
  g.enc_b1 += d_pre;
}

inline Eigen::VectorXd step_backward(const ParameterStore& p,
                                     const StepTrace& tr,
                                     const Eigen::VectorXd& d_out,
                                     GradStore& g) {
  g.dyn_W2.noalias() += d_out * tr.h.transpose();
  g.dyn_b2 += d_out;
  Eigen::VectorXd d_pre = p.dyn_W2.transpose() * d_out;
  d_pre.array() *= (1.0 - tr.h.array().square());
  g.dyn_W1.leftCols(p.cfg.d_z).noalias() += d_pre * tr.z_in.transpose();
  g.dyn_W1.col(p.cfg.d_z + tr.action) += d_pre;
  g.dyn_b1 += d_pre;
  Eigen::VectorXd d_z_in = d_out;  // residual connection
  d_z_in.noalias() += p.dyn_W1.leftCols(p.cfg.d_z).transpose() * d_pre;
  return d_z_in;
}

// d_outs[k] is the gradient arriving at predicted latent k+1; returns the
// gradient w.r.t. the context latent.
inline Eigen::VectorXd rollout_backward(const ParameterStore& p,
                                        const RolloutTrace& tr,
                                        const std::vector<Eigen::VectorXd>& d_outs,
                                        GradStore& g) {
  if (d_outs.size() != tr.steps.size())
    throw std::invalid_argument("rollout_backward: gradient count mismatch");
  Eigen::VectorXd d_carry = Eigen::VectorXd::Zero(p.cfg.d_z);
  for (int k = static_cast<int>(tr.steps.size()) - 1; k >= 0; --k) {
    d_carry += d_outs[static_cast<std::size_t>(k)];
    d_carry = step_backward(p, tr.steps[static_cast<std::size_t>(k)], d_carry, g);
  }
  return d_carry;
}

// Source/target latent gradients accumulate into the given pointers; pass
// nullptr to stop the gradient on that side.
inline void head_backward(const ParameterStore& p, const HeadTrace& tr,
                          double d_logit, GradStore& g,
                          Eigen::VectorXd* d_src, Eigen::VectorXd* d_tgt) {
  g.head_w2.noalias() += d_logit * tr.h;
  g.head_b2 += d_logit;
  Eigen::VectorXd d_pre = d_logit * p.head_w2;
  d_pre.array() *= (1.0 - tr.h.array().square());
  g.head_W1.noalias() += d_pre * tr.in.transpose();
  g.head_b1 += d_pre;
  if (d_src || d_tgt) {
    const Eigen::VectorXd d_in = p.head_W1.transpose() * d_pre;
    if (d_src) *d_src += d_in.head(p.cfg.d_z);
    if (d_tgt) *d_tgt += d_in.segment(p.cfg.d_z, p.cfg.d_z);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint IO: magic "RCXP", hyperparameter block, string metadata, then
// the named-tensor table as little-endian f32.

inline constexpr char kCheckpointMagic[4] = {'R', 'C', 'X', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ParameterStore& p,
                            const std::map<std::string, std::string>& meta = {}) {
  auto os = binio::open_out(path);
  binio::write_magic(os, kCheckpointMagic);
  binio::write_u32(os, kCheckpointVersion);

  const std::vector<std::pair<std::string, std::int32_t>> hypers = {
      {"obs_dim", p.cfg.obs_dim},     {"d_z", p.cfg.d_z},
      {"enc_hidden", p.cfg.enc_hidden}, {"dyn_hidden", p.cfg.dyn_hidden},
      {"head_hidden", p.cfg.head_hidden}, {"n_actions", p.cfg.n_actions},
      {"L", p.cfg.L},                 {"H_max", p.cfg.H_max},
      {"budget_onehot", p.cfg.budget_onehot ? 1 : 0},
  };
  binio::write_u32(os, static_cast<std::uint32_t>(hypers.size()));
  for (const auto& [name, value] : hypers) {
    binio::write_string(os, name);
    binio::write_i32(os, value);
  }

  binio::write_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [key, value] : meta) {
    binio::write_string(os, key);
    binio::write_string(os, value);
  }

  std::uint32_t n_tensors = 0;
  p.for_each_tensor([&n_tensors](const TensorRef&) { ++n_tensors; });
  binio::write_u32(os, n_tensors);
  p.for_each_tensor([&os](const TensorRef& t) {
    binio::write_string(os, t.name);
    binio::write_u32(os, static_cast<std::uint32_t>(t.rows));
    binio::write_u32(os, static_cast<std::uint32_t>(t.cols));
    for (Eigen::Index i = 0; i < t.size(); ++i)
      binio::write_f32(os, static_cast<float>(t.data[i]));
  });
  if (!os) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

struct Checkpoint {
  ParameterStore params;
  std::map<std::string, std::string> meta;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, kCheckpointMagic, "load_checkpoint");
  const std::uint32_t version = binio::read_u32(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));

  std::map<std::string, std::int32_t> hypers;
  const std::uint32_t n_hypers = binio::read_u32(is);
  for (std::uint32_t i = 0; i < n_hypers; ++i) {
    const std::string name = binio::read_string(is);
    hypers[name] = binio::read_i32(is);
  }
  auto hyper = [&hypers](const std::string& name) {
    const auto it = hypers.find(name);
    if (it == hypers.end())
      throw std::runtime_error("load_checkpoint: missing hyperparameter " + name);
    return it->second;
  };
  ModelConfig cfg;
  cfg.obs_dim = hyper("obs_dim");
  cfg.d_z = hyper("d_z");
  cfg.enc_hidden = hyper("enc_hidden");
  cfg.dyn_hidden = hyper("dyn_hidden");
  cfg.head_hidden = hyper("head_hidden");
  cfg.n_actions = hyper("n_actions");
  cfg.L = hyper("L");
  cfg.H_max = hyper("H_max");
  cfg.budget_onehot = hyper("budget_onehot") != 0;

  Checkpoint ck{ParameterStore(cfg), {}};
  const std::uint32_t n_meta = binio::read_u32(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    const std::string key = binio::read_string(is);
    ck.meta[key] = binio::read_string(is);
  }

  const std::uint32_t n_tensors = binio::read_u32(is);
  std::map<std::string, TensorRef> refs;
  ck.params.for_each_tensor([&refs](const TensorRef& t) { refs.emplace(t.name, t); });
  if (n_tensors != refs.size())
    throw std::runtime_error("load_checkpoint: tensor count mismatch");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = binio::read_string(is);
    const auto it = refs.find(name);
    if (it == refs.end())
      throw std::runtime_error("load_checkpoint: unknown tensor " + name);
    const TensorRef& t = it->second;
    const std::uint32_t rows = binio::read_u32(is);
    const std::uint32_t cols = binio::read_u32(is);
    if (rows != static_cast<std::uint32_t>(t.rows) ||
        cols != static_cast<std::uint32_t>(t.cols))
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    for (Eigen::Index k = 0; k < t.size(); ++k)
      t.data[k] = binio::read_f32(is);
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Central finite differences against analytic gradients.

struct FdTensorReport {
  std::string name;
  double max_rel_err = 0.0;
  int worst_index = -1;
};

struct FdReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  int worst_index = -1;
  Eigen::Index n_checked = 0;
  bool pass = false;
  std::vector<FdTensorReport> tensors;
};

// Relative error uses max(|fd|, |analytic|, floor) in the denominator so
// near-zero coordinates compare on an absolute scale.
inline FdReport finite_difference_check(
    ParameterStore& params, const std::function<double(const ParameterStore&)>& loss_fn,
    const GradStore& analytic, double step = 1e-4, double tolerance = 1e-4,
    double denom_floor = 1e-3, int max_per_tensor = 0) {
  FdReport report;
  std::vector<TensorRef> prefs, grefs;
  params.for_each_tensor([&prefs](const TensorRef& t) { prefs.push_back(t); });
  const_cast<GradStore&>(analytic).for_each_tensor(
      [&grefs](const TensorRef& t) { grefs.push_back(t); });

  for (std::size_t ti = 0; ti < prefs.size(); ++ti) {
    const TensorRef& pt = prefs[ti];
    const TensorRef& gt = grefs[ti];
    FdTensorReport tr;
    tr.name = pt.name;
    const Eigen::Index n = pt.size();
    const Eigen::Index stride =
        (max_per_tensor > 0 && n > max_per_tensor) ? n / max_per_tensor : 1;
    for (Eigen::Index i = 0; i < n; i += stride) {
      const double saved = pt.data[i];
      pt.data[i] = saved + step;
      const double fp = loss_fn(params);
      pt.data[i] = saved - step;
      const double fm = loss_fn(params);
      pt.data[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = gt.data[i];
      const double denom =
          std::max({std::abs(fd), std::abs(an), denom_floor});
      const double rel = std::abs(fd - an) / denom;
      ++report.n_checked;
      if (rel > tr.max_rel_err) {
        tr.max_rel_err = rel;
        tr.worst_index = static_cast<int>(i);
      }
    }
    if (tr.max_rel_err > report.max_rel_err) {
      report.max_rel_err = tr.max_rel_err;
      report.worst_tensor = tr.name;
      report.worst_index = tr.worst_index;
    }
    report.tensors.push_back(std::move(tr));
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace rcaux
