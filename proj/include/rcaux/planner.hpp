#pragma once

// Reachability-gated CEM planner: batched candidate scoring in latent space,
// per-timestep categorical distributions with elite-frequency refit, and the
// closed-loop MPC executor. The gating-disabled base planner and the
// lambda=0 gated planner run the same sampling/scoring/diagnostics code, so
// their outputs agree byte for byte.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcaux/grid.hpp"
#include "rcaux/model.hpp"
#include "rcaux/numerics.hpp"
#include "rcaux/rng.hpp"

namespace rcaux {

struct PlannerConfig {
  int H = 6;              // planning horizon
  int n_samples = 300;    // candidates per CEM iteration
  int n_iters = 10;
  int top_k = 30;         // elite count
  double lambda_plan = 0.35;
  double m = 0.05;        // gate floor
  int budget = 50;        // max environment steps per episode
  int replan_every = 1;
  std::string base_cost_mode = "terminal";  // terminal | min | mean
  bool gated = true;      // false: never evaluate the head, cost = base
  double smoothing = 0.05;  // Laplace smoothing added per action at refit

  void validate() const {
    if (H < 1) throw std::invalid_argument("PlannerConfig: H must be >= 1");
    if (n_samples < 1 || n_iters < 1)
      throw std::invalid_argument("PlannerConfig: non-positive CEM sizes");
    if (top_k < 1 || top_k > n_samples)
      throw std::invalid_argument("PlannerConfig: top_k must be in [1, n_samples]");
    if (lambda_plan < 0.0 || lambda_plan > 1.0)
      throw std::invalid_argument("PlannerConfig: lambda_plan must be in [0, 1]");
    if (m <= 0.0 || m >= 1.0)
      throw std::invalid_argument("PlannerConfig: m must be in (0, 1)");
    if (budget < 0) throw std::invalid_argument("PlannerConfig: negative budget");
    if (replan_every < 1)
      throw std::invalid_argument("PlannerConfig: replan_every must be >= 1");
    if (base_cost_mode != "terminal" && base_cost_mode != "min" &&
        base_cost_mode != "mean")
      throw std::invalid_argument("PlannerConfig: unknown base_cost_mode " +
                                  base_cost_mode);
    if (smoothing < 0.0)
      throw std::invalid_argument("PlannerConfig: negative smoothing");
  }
};

// Table-5-style profiles scaled to the local environments.
inline PlannerConfig planner_profile(const std::string& env_name) {
  PlannerConfig cfg;
  if (env_name == "wall") {
    cfg.H = 8;
    cfg.n_samples = 600;
    cfg.top_k = 60;
    cfg.lambda_plan = 0.85;
    cfg.budget = 60;
    // Settled empirically: step-wise replanning livelocks on terminal-cost
    // ties, while executing whole plans open-loop erases the gate's edge.
    cfg.replan_every = 2;
  } else if (env_name == "tworoom") {
    cfg.budget = 50;
  } else if (env_name == "open") {
    cfg.budget = 40;
  } else {
    throw std::invalid_argument("planner_profile: unknown environment " +
                                env_name);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Scalar cost pieces (reference path, also used for per-plan diagnostics).

inline double base_cost(std::span<const Latent> rollout, const Latent& z_g,
                        const std::string& mode) {
  if (rollout.empty())
    throw std::invalid_argument("base_cost: empty rollout");
  if (mode == "terminal") return (rollout.back() - z_g).squaredNorm();
  double acc = mode == "min" ? std::numeric_limits<double>::infinity() : 0.0;
  for (const Latent& z : rollout) {
    const double d = (z - z_g).squaredNorm();
    if (mode == "min")
      acc = std::min(acc, d);
    else
      acc += d;
  }
  if (mode == "min") return acc;
  if (mode == "mean") return acc / static_cast<double>(rollout.size());
  throw std::invalid_argument("base_cost: unknown mode " + mode);
}

// Eq.-19 trajectory-level reachability: max over intermediate rollout steps
// of the head score with the remaining budget. H=1 has an empty index set
// and returns 0 (gate inactive).
inline double trajectory_reachability(const ParameterStore& p,
                                      std::span<const Latent> rollout,
                                      const Latent& z_g) {
  const int H = static_cast<int>(rollout.size());
  double r = 0.0;
  for (int k = 1; k < H; ++k)
    r = std::max(r, reachability_score(
                        p, rollout[static_cast<std::size_t>(k - 1)], z_g, H - k));
  return r;
}

inline double rc_cost(double base, double R, double lambda_plan, double m) {
  return base * std::max(m, 1.0 - lambda_plan * R);
}

// ---------------------------------------------------------------------------
// Batched candidate scoring.

struct ScoreBatch {
  Eigen::VectorXd base;  // per-candidate base cost
  Eigen::VectorXd R;     // per-candidate Eq.-19 score; zeros when ungated/H=1
  Eigen::VectorXd cost;  // gated cost = base * max(m, 1 - lambda*R)
};

// Scores n candidates of horizon H against one current latent and one goal
// latent. `actions` is candidate-major: actions[i*H + t]. All reductions run
// in fixed order, so equal inputs give bitwise-equal outputs; with
// cfg.gated=false the head is never evaluated and cost equals base.
inline ScoreBatch score_candidates(const ParameterStore& p, const Latent& z0,
                                   const Latent& z_g,
                                   std::span<const std::uint8_t> actions, int n,
                                   const PlannerConfig& cfg) {
  if (z0.size() != p.cfg.d_z || z_g.size() != p.cfg.d_z)
    throw std::invalid_argument("score_candidates: latent dimension mismatch");
  if (static_cast<int>(actions.size()) != n * cfg.H)
    throw std::invalid_argument("score_candidates: action buffer size mismatch");
  const int H = cfg.H;
  const Eigen::Index d = p.cfg.d_z;
  const bool gate = cfg.gated && H > 1;

  // Per-action dynamics bias rows: dyn_W1[:, d+a] + dyn_b1.
  Eigen::MatrixXd abias(p.cfg.dyn_hidden, p.cfg.n_actions);
  for (int a = 0; a < p.cfg.n_actions; ++a)
    abias.col(a) = p.dyn_W1.col(d + a) + p.dyn_b1;
  const auto W1z = p.dyn_W1.leftCols(d);

  // Head blocks and the per-step goal/budget contribution c_k (candidate
  // independent, so hoisted out of the batch).
  const auto A_src = p.head_W1.leftCols(d);
  std::vector<Eigen::VectorXd> c_k;
  if (gate) {
    const auto A_tgt = p.head_W1.middleCols(d, d);
    const auto A_bud = p.head_W1.rightCols(p.cfg.budget_dim());
    c_k.reserve(static_cast<std::size_t>(H - 1));
    for (int k = 1; k < H; ++k)
      c_k.push_back(A_tgt * z_g + A_bud * budget_feature(p.cfg, H - k) +
                    p.head_b1);
  }

  ScoreBatch out;
  out.R = Eigen::VectorXd::Zero(n);
  const bool terminal = cfg.base_cost_mode == "terminal";
  const bool want_min = cfg.base_cost_mode == "min";
  if (!terminal)
    out.base = want_min
                   ? Eigen::VectorXd::Constant(
                         n, std::numeric_limits<double>::infinity())
                   : Eigen::VectorXd::Zero(n);

  // The gate reads the intermediate latents but is evaluated after the
  // rollout as one fused pass over all steps: the dynamics loop stays
  // identical whether or not the gate runs (gated lambda=0 and ungated
  // scoring must produce bitwise-equal rollouts), and one big GEMM plus a
  // single deferred sigmoid beats per-step head dispatches.
  Eigen::MatrixXd Z = z0.replicate(1, n);
  Eigen::MatrixXd h1(p.cfg.dyn_hidden, n), Zs;
  if (gate) Zs.resize(d, static_cast<Eigen::Index>(n) * (H - 1));
  for (int t = 0; t < H; ++t) {
    h1.noalias() = W1z * Z;
    for (int i = 0; i < n; ++i)
      h1.col(i) += abias.col(actions[static_cast<std::size_t>(i) *
                                         static_cast<std::size_t>(H) +
                                     static_cast<std::size_t>(t)]);
    tanh_inplace(h1.data(), h1.size());
    Z.noalias() += p.dyn_W2 * h1;
    Z.colwise() += p.dyn_b2;

    const int k = t + 1;  // rollout step index, 1-based
    if (gate && k < H) Zs.middleCols(static_cast<Eigen::Index>(k - 1) * n, n) = Z;
    if (!terminal) {
      for (int i = 0; i < n; ++i) {
        const double dist = (Z.col(i) - z_g).squaredNorm();
        if (want_min)
          out.base[i] = std::min(out.base[i], dist);
        else
          out.base[i] += dist;
      }
    }
  }
  if (gate) {
    Eigen::MatrixXd G(p.cfg.head_hidden, Zs.cols());
    G.noalias() = A_src * Zs;
    for (int k = 1; k < H; ++k)
      G.middleCols(static_cast<Eigen::Index>(k - 1) * n, n).colwise() +=
          c_k[static_cast<std::size_t>(k - 1)];
    tanh_inplace(G.data(), G.size());
    Eigen::RowVectorXd logits(Zs.cols());
    logits.noalias() = p.head_w2.transpose() * G;
    // R = max_k sigma(logit_k) = sigma(max_k logit_k): take the max first so
    // the sigmoid runs once per candidate instead of once per step.
    Eigen::VectorXd max_logit =
        logits.segment(0, n).transpose().array() + p.head_b2;
    for (int k = 2; k < H; ++k)
      for (int i = 0; i < n; ++i)
        max_logit[i] = std::max(
            max_logit[i],
            logits[static_cast<Eigen::Index>(k - 1) * n + i] + p.head_b2);
    sigmoid_inplace(max_logit.data(), max_logit.size());
    out.R = max_logit;
  }
  if (terminal) {
    out.base.resize(n);
    for (int i = 0; i < n; ++i) out.base[i] = (Z.col(i) - z_g).squaredNorm();
  } else if (!want_min) {
    out.base /= static_cast<double>(H);
  }

  out.cost.resize(n);
  if (cfg.gated) {
    for (int i = 0; i < n; ++i)
      out.cost[i] = rc_cost(out.base[i], out.R[i], cfg.lambda_plan, cfg.m);
  } else {
    out.cost = out.base;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CEM.

struct CandidateScore {
  std::vector<std::uint8_t> actions;
  std::vector<Latent> latents;  // ẑ_{t+1..t+H}
  double base = 0.0;
  double R = 0.0;     // scalar-path Eq. 19 diagnostic (computed in all modes)
  double cost = 0.0;
};

struct CemIterDiag {
  int iter = 0;
  double best_cost = 0.0;  // batched cost of the iteration's best candidate
  double best_base = 0.0;
  double best_R = 0.0;     // scalar-path diagnostic, uniform across modes
  double elite_mean_cost = 0.0;
};

struct CemResult {
  CandidateScore best;
  std::vector<CemIterDiag> iters;
};

// Samples candidate-major action sequences from per-step categoricals, scores
// them, refits on the top_k elites with Laplace smoothing, and returns the
// best candidate seen across all iterations (ties: earlier iteration, then
// lower candidate index). Diagnostics R comes from the scalar head path in
// every mode so gated and ungated runs log identical bytes.
// `fixed_pool` (tests) bypasses sampling and scores the given pool each
// iteration.
inline CemResult cem_plan(const ParameterStore& p,
                          std::span<const Latent> context, const Latent& z_g,
                          const PlannerConfig& cfg, std::uint64_t seed,
                          const std::vector<std::uint8_t>* fixed_pool = nullptr) {
  cfg.validate();
  if (static_cast<int>(context.size()) != p.cfg.L)
    throw std::invalid_argument("cem_plan: context length != L");
  const Latent z0 = context.back();
  const int H = cfg.H;
  const int A = p.cfg.n_actions;
  int n = cfg.n_samples;
  if (fixed_pool != nullptr) {
    if (fixed_pool->size() % static_cast<std::size_t>(H) != 0)
      throw std::invalid_argument("cem_plan: fixed pool size not divisible by H");
    n = static_cast<int>(fixed_pool->size()) / H;
  }

  Rng rng(seed);
  Eigen::MatrixXd probs =
      Eigen::MatrixXd::Constant(H, A, 1.0 / static_cast<double>(A));
  std::vector<std::uint8_t> actions(static_cast<std::size_t>(n) *
                                    static_cast<std::size_t>(H));
  std::vector<int> order(static_cast<std::size_t>(n));

  CemResult res;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> best_actions;

  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    if (fixed_pool != nullptr) {
      actions = *fixed_pool;
    } else {
      for (int i = 0; i < n; ++i) {
        for (int t = 0; t < H; ++t) {
          const double u = rng.uniform();
          double cum = 0.0;
          int a = A - 1;
          for (int c = 0; c < A; ++c) {
            cum += probs(t, c);
            if (u < cum) {
              a = c;
              break;
            }
          }
          actions[static_cast<std::size_t>(i) * static_cast<std::size_t>(H) +
                  static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(a);
        }
      }
    }

    const ScoreBatch scores = score_candidates(p, z0, z_g, actions, n, cfg);

    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](int a, int b) {
      if (scores.cost[a] != scores.cost[b])
        return scores.cost[a] < scores.cost[b];
      return a < b;
    });
    // Strict improvement keeps the earliest (iteration, index) among ties.
    const int top = order[0];
    if (scores.cost[top] < best_cost) {
      best_cost = scores.cost[top];
      best_actions.assign(
          actions.begin() + static_cast<std::ptrdiff_t>(top) * H,
          actions.begin() + static_cast<std::ptrdiff_t>(top + 1) * H);
    }

    CemIterDiag diag;
    diag.iter = iter;
    diag.best_cost = scores.cost[top];
    diag.best_base = scores.base[top];
    {
      const std::span<const std::uint8_t> seq(
          actions.data() + static_cast<std::ptrdiff_t>(top) * H,
          static_cast<std::size_t>(H));
      const std::vector<Latent> roll = rollout_open_loop(p, context, seq);
      diag.best_R = trajectory_reachability(p, roll, z_g);
    }
    double elite_sum = 0.0;
    for (int e = 0; e < cfg.top_k; ++e)
      elite_sum += scores.cost[order[static_cast<std::size_t>(e)]];
    diag.elite_mean_cost = elite_sum / static_cast<double>(cfg.top_k);
    res.iters.push_back(diag);

    // Elite-frequency refit with additive smoothing.
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(H, A);
    for (int e = 0; e < cfg.top_k; ++e) {
      const int i = order[static_cast<std::size_t>(e)];
      for (int t = 0; t < H; ++t)
        counts(t, actions[static_cast<std::size_t>(i) *
                              static_cast<std::size_t>(H) +
                          static_cast<std::size_t>(t)]) += 1.0;
    }
    probs = (counts.array() + cfg.smoothing) /
            (static_cast<double>(cfg.top_k) +
             cfg.smoothing * static_cast<double>(A));
  }

  // The returned candidate is reported entirely through the scalar path so
  // its fields satisfy cost = base * max(m, 1 - lambda*R) exactly and match
  // byte for byte between the lambda=0 and gating-disabled planners.
  res.best.actions = std::move(best_actions);
  res.best.latents = rollout_open_loop(p, context, res.best.actions);
  res.best.base = base_cost(res.best.latents, z_g, cfg.base_cost_mode);
  res.best.R = trajectory_reachability(p, res.best.latents, z_g);
  res.best.cost = cfg.gated
                      ? rc_cost(res.best.base, res.best.R, cfg.lambda_plan, cfg.m)
                      : res.best.base;
  return res;
}

// ---------------------------------------------------------------------------
// Closed-loop MPC.

struct MpcStepDiag {
  int step = 0;  // environment step at which the plan was made
  int iter = 0;
  double best_cost = 0.0;
  double best_base = 0.0;
  double best_R = 0.0;
  int selected_action = 0;  // first action of the plan active at this step
};

struct MpcResult {
  bool success = false;
  int steps = 0;  // environment steps executed
  double final_base_cost = 0.0;  // scalar-path diagnostics of the last plan,
  double final_R = 0.0;          // identical across gated/ungated modes
  std::vector<State> states;     // visited states, start first
  std::vector<std::uint8_t> actions_taken;
  std::vector<MpcStepDiag> diag;
};

// Replans every `replan_every` steps, executes the plan prefix, and stops at
// the goal state or when the step budget runs out. Success is ground-truth
// state equality with the goal.
inline MpcResult mpc_execute(const GridSpec& spec, const ParameterStore& p,
                             const PlannerConfig& cfg, const EpisodeSpec& ep,
                             std::uint64_t seed,
                             bool include_wall_mask = false) {
  cfg.validate();
  MpcResult res;
  State s = ep.start;
  res.states.push_back(s);
  if (s == ep.goal) {
    res.success = true;
    return res;
  }
  const Latent z_g = encode(p, observe(spec, ep.goal, include_wall_mask));

  std::vector<std::uint8_t> plan;
  std::size_t plan_pos = 0;
  CemResult last_plan;
  int replans = 0;
  while (res.steps < cfg.budget) {
    if (plan_pos >= plan.size() || res.steps % cfg.replan_every == 0) {
      const std::vector<Latent> ctx = {
          encode(p, observe(spec, s, include_wall_mask))};
      last_plan = cem_plan(p, ctx, z_g, cfg,
                           mix_seed({seed, 0x706c616eull,
                                     static_cast<std::uint64_t>(replans)}));
      ++replans;
      plan = last_plan.best.actions;
      plan_pos = 0;
      for (const CemIterDiag& it : last_plan.iters)
        res.diag.push_back({res.steps, it.iter, it.best_cost, it.best_base,
                            it.best_R, static_cast<int>(plan.front())});
    }
    const auto a = static_cast<Action>(plan[plan_pos++]);
    s = step(spec, s, a);
    res.states.push_back(s);
    res.actions_taken.push_back(static_cast<std::uint8_t>(a));
    ++res.steps;
    if (s == ep.goal) {
      res.success = true;
      break;
    }
  }
  res.final_base_cost = last_plan.best.base;
  res.final_R = last_plan.best.R;
  return res;
}

}  // namespace rcaux
