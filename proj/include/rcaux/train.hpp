#pragma once

// Training loop: seeded batch assembly, Adam/SGD updates over the total
// objective, per-epoch metrics, and divergence detection. The one-step
// baseline mode is the same loop with K forced to 1 and the reachability
// term removed.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcaux/csv.hpp"
#include "rcaux/losses.hpp"
#include "rcaux/model.hpp"
#include "rcaux/pairs.hpp"

namespace rcaux {

struct TrainConfig {
  int K = 6;
  int L = 1;
  int H_max = 12;
  int batch_size = 64;
  double lr = 1e-3;
  std::string optimizer = "adam";
  int epochs = 30;
  int steps_per_epoch = 50;
  std::uint64_t seed = 0;
  std::string mode = "rc_aux";  // or "one_step_baseline"
  double alpha = 0.1;
  double beta = 1.0;
  double omega0 = 1.0;
  double omega1 = 1.0;
  double rho_pred = 0.5;
  PairCounts pair_counts;
  bool hard_negatives = true;

  // The baseline is the un-replaced one-step objective: K=1 and no
  // reachability term, everything else shared.
  TrainConfig resolved() const {
    TrainConfig c = *this;
    if (c.mode == "one_step_baseline") {
      c.K = 1;
      c.beta = 0.0;
    } else if (c.mode != "rc_aux") {
      throw std::invalid_argument("TrainConfig: unknown mode " + c.mode);
    }
    if (c.K < 1 || c.L < 1 || c.H_max < 1 || c.batch_size < 1 ||
        c.epochs < 1 || c.steps_per_epoch < 1)
      throw std::invalid_argument("TrainConfig: non-positive field");
    if (c.optimizer != "adam" && c.optimizer != "sgd")
      throw std::invalid_argument("TrainConfig: unknown optimizer " +
                                  c.optimizer);
    return c;
  }

  LossWeights weights() const {
    LossWeights w = LossWeights::defaults(K);
    w.alpha = alpha;
    w.beta = beta;
    w.omega0 = omega0;
    w.omega1 = omega1;
    w.rho_pred = rho_pred;
    return w;
  }
};

// Settled per-environment training profile used by the pipeline and the
// acceptance runs. TrainConfig defaults keep the paper's values; at
// alpha=0.1 the Wall encoder collapses to a single latent (the residual
// dynamics approximates identity and the multi-horizon loss is satisfied
// trivially), so the profiles raise alpha and train longer, and upweight
// positives (~15-20% of reach pairs under uniform budgets) via omega1.
inline TrainConfig train_profile(const std::string& env_name) {
  if (env_name != "wall" && env_name != "tworoom" && env_name != "open")
    throw std::invalid_argument("train_profile: unknown environment " +
                                env_name);
  TrainConfig cfg;
  cfg.alpha = 1.0;
  cfg.epochs = 200;
  cfg.omega1 = 3.0;
  return cfg;
}

class Adam {
 public:
  Adam(const ModelConfig& cfg, double lr)
      : lr_(lr), m_(cfg), v_(cfg) {}

  void step(ParameterStore& p, const GradStore& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    std::vector<TensorRef> pr, gr, mr, vr;
    p.for_each_tensor([&pr](const TensorRef& t) { pr.push_back(t); });
    g.for_each_tensor([&gr](const TensorRef& t) { gr.push_back(t); });
    m_.for_each_tensor([&mr](const TensorRef& t) { mr.push_back(t); });
    v_.for_each_tensor([&vr](const TensorRef& t) { vr.push_back(t); });
    for (std::size_t i = 0; i < pr.size(); ++i) {
      for (Eigen::Index k = 0; k < pr[i].size(); ++k) {
        const double grad = gr[i].data[k];
        double& m = mr[i].data[k];
        double& v = vr[i].data[k];
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
        pr[i].data[k] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  GradStore m_, v_;
};

inline void sgd_step(ParameterStore& p, const GradStore& g, double lr) {
  std::vector<TensorRef> pr, gr;
  p.for_each_tensor([&pr](const TensorRef& t) { pr.push_back(t); });
  g.for_each_tensor([&gr](const TensorRef& t) { gr.push_back(t); });
  for (std::size_t i = 0; i < pr.size(); ++i)
    for (Eigen::Index k = 0; k < pr[i].size(); ++k)
      pr[i].data[k] -= lr * gr[i].data[k];
}

inline double grad_norm(const GradStore& g) {
  double sum = 0.0;
  g.for_each_tensor([&sum](const TensorRef& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i)
      sum += t.data[i] * t.data[i];
  });
  return std::sqrt(sum);
}

struct EpochMetrics {
  int epoch = 0;
  double total = 0.0, mh = 0.0, reach_enc = 0.0, reach_pred = 0.0, reg = 0.0;
  double grad_norm = 0.0;
};

struct FitResult {
  ParameterStore params;
  std::vector<EpochMetrics> log;
};

class TrainDivergence : public std::runtime_error {
 public:
  explicit TrainDivergence(const std::string& what)
      : std::runtime_error(what) {}
};

inline FitResult fit(const Dataset& ds, const ModelConfig& arch,
                     const TrainConfig& config) {
  const TrainConfig cfg = config.resolved();
  ModelConfig mc = arch;
  mc.obs_dim = ds.obs_dim;
  mc.L = cfg.L;
  mc.H_max = cfg.H_max;

  FitResult out{ParameterStore(mc), {}};
  out.params.init(mix_seed({cfg.seed, 0x696e6974ull}));  // "init"
  SegmentSampler sampler(ds, cfg.L, cfg.K,
                         mix_seed({cfg.seed, 0x73656773ull}));  // "segs"
  Rng pair_rng(mix_seed({cfg.seed, 0x70616972ull}));            // "pair"
  const LossWeights w = cfg.weights();
  Adam adam(mc, cfg.lr);

  PairCounts counts = cfg.pair_counts;
  counts.hard_negatives = cfg.hard_negatives;
  const bool use_reach = cfg.mode == "rc_aux" && cfg.beta > 0.0;
  const bool use_pred = use_reach && cfg.rho_pred > 0.0 && cfg.K >= 2 &&
                        counts.pred_per_segment > 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMetrics em;
    em.epoch = epoch;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const std::vector<Segment> batch = sampler.sample_batch(cfg.batch_size);
      std::vector<ReachPair> enc_pairs;
      if (use_reach)
        enc_pairs =
            make_reachability_pairs(batch, ds, cfg.H_max, counts, pair_rng)
                .pairs;
      std::vector<std::vector<ReachPair>> pred_pairs;
      if (use_pred) {
        pred_pairs.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
          pred_pairs.push_back(
              make_predicted_pairs(cfg.K, cfg.H_max, counts.pred_per_segment,
                                   pair_rng, cfg.hard_negatives));
      }

      const TotalLossResult res =
          total_loss(out.params, ds, batch, enc_pairs, pred_pairs, w);
      if (!std::isfinite(res.total))
        throw TrainDivergence(
            "training diverged at epoch " + std::to_string(epoch) + " step " +
            std::to_string(step) + ": total=" + format_double(res.total) +
            " mh=" + format_double(res.mh) +
            " reach_enc=" + format_double(res.reach_enc) +
            " reach_pred=" + format_double(res.reach_pred) +
            " reg=" + format_double(res.reg));
      const GradStore g = backprop(*res.tape);
      if (cfg.optimizer == "adam") adam.step(out.params, g);
      else sgd_step(out.params, g, cfg.lr);

      em.total += res.total;
      em.mh += res.mh;
      em.reach_enc += res.reach_enc;
      em.reach_pred += res.reach_pred;
      em.reg += res.reg;
      em.grad_norm += grad_norm(g);
    }
    const double inv = 1.0 / cfg.steps_per_epoch;
    em.total *= inv;
    em.mh *= inv;
    em.reach_enc *= inv;
    em.reach_pred *= inv;
    em.reg *= inv;
    em.grad_norm *= inv;
    out.log.push_back(em);
  }
  return out;
}

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpochMetrics>& log) {
  CsvWriter csv(path, {"epoch", "loss_total", "loss_mh", "loss_reach_enc",
                       "loss_reach_pred", "loss_reg", "grad_norm"});
  for (const EpochMetrics& em : log)
    csv.row()
        .add(em.epoch)
        .add(em.total)
        .add(em.mh)
        .add(em.reach_enc)
        .add(em.reach_pred)
        .add(em.reg)
        .add(em.grad_norm)
        .done();
}

}  // namespace rcaux
