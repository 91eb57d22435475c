#pragma once

// Episode-level evaluation: seeded episode groups, MPC success rates with
// per-group statistics, paired outcome counts for method comparisons, and a
// wall-clock benchmark of the gated versus base cost evaluation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcaux/csv.hpp"
#include "rcaux/grid.hpp"
#include "rcaux/planner.hpp"
#include "rcaux/rng.hpp"

namespace rcaux {

struct EvalEpisode {
  int group = 0;
  int index = 0;  // position within the group
  EpisodeSpec spec;
  std::uint64_t seed = 0;  // planner seed for this episode
};

// `n_groups` x `per_group` episodes with BFS-feasible start/goal pairs and
// disjoint per-episode seed streams, deterministic in `base_seed`.
inline std::vector<EvalEpisode> build_groups(const GridSpec& spec, int n_groups,
                                             int per_group,
                                             std::uint64_t base_seed) {
  if (n_groups < 1 || per_group < 1)
    throw std::invalid_argument("build_groups: non-positive sizes");
  std::vector<EvalEpisode> out;
  out.reserve(static_cast<std::size_t>(n_groups) *
              static_cast<std::size_t>(per_group));
  for (int g = 0; g < n_groups; ++g)
    for (int i = 0; i < per_group; ++i) {
      const std::uint64_t ep_seed =
          mix_seed({base_seed, 0x65706973ull, static_cast<std::uint64_t>(g),
                    static_cast<std::uint64_t>(i)});
      Rng rng(ep_seed);
      out.push_back(
          {g, i, sample_episode_spec(spec, rng),
           mix_seed({base_seed, 0x706c616eull, static_cast<std::uint64_t>(g),
                     static_cast<std::uint64_t>(i)})});
    }
  return out;
}

struct EpisodeResult {
  int group = 0;
  int index = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  double final_base_cost = 0.0;
  double final_R = 0.0;
};

struct SuccessReport {
  std::vector<EpisodeResult> episodes;
  std::vector<double> group_rates;
  double mean = 0.0;  // mean of the group rates
  double stddev = 0.0;  // sample standard deviation over groups
};

inline SuccessReport summarize_success(std::vector<EpisodeResult> episodes,
                                       int n_groups) {
  SuccessReport rep;
  rep.episodes = std::move(episodes);
  rep.group_rates.assign(static_cast<std::size_t>(n_groups), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(n_groups), 0);
  for (const EpisodeResult& er : rep.episodes) {
    if (er.group < 0 || er.group >= n_groups)
      throw std::invalid_argument("summarize_success: group out of range");
    rep.group_rates[static_cast<std::size_t>(er.group)] += er.success ? 1.0 : 0.0;
    ++counts[static_cast<std::size_t>(er.group)];
  }
  for (int g = 0; g < n_groups; ++g) {
    if (counts[static_cast<std::size_t>(g)] == 0)
      throw std::invalid_argument("summarize_success: empty group");
    rep.group_rates[static_cast<std::size_t>(g)] /=
        counts[static_cast<std::size_t>(g)];
    rep.mean += rep.group_rates[static_cast<std::size_t>(g)];
  }
  rep.mean /= n_groups;
  if (n_groups > 1) {
    double ss = 0.0;
    for (double r : rep.group_rates) ss += (r - rep.mean) * (r - rep.mean);
    rep.stddev = std::sqrt(ss / (n_groups - 1));
  }
  return rep;
}

// Runs the MPC loop on every episode and aggregates per-group success.
inline SuccessReport evaluate_success(const GridSpec& spec,
                                      const ParameterStore& p,
                                      const PlannerConfig& cfg,
                                      std::span<const EvalEpisode> episodes,
                                      bool include_wall_mask = false) {
  std::vector<EpisodeResult> results;
  results.reserve(episodes.size());
  int n_groups = 0;
  for (const EvalEpisode& ep : episodes) {
    const MpcResult mr =
        mpc_execute(spec, p, cfg, ep.spec, ep.seed, include_wall_mask);
    results.push_back({ep.group, ep.index, ep.seed, mr.success, mr.steps,
                       mr.final_base_cost, mr.final_R});
    n_groups = std::max(n_groups, ep.group + 1);
  }
  return summarize_success(std::move(results), n_groups);
}

inline void write_results_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, const SuccessReport*>>& methods) {
  CsvWriter csv(path, {"method", "group", "episode", "seed", "success", "steps",
                       "final_base_cost", "final_R"});
  for (const auto& [method, rep] : methods)
    for (const EpisodeResult& er : rep->episodes)
      csv.row()
          .add(method)
          .add(er.group)
          .add(er.index)
          .add(static_cast<unsigned long long>(er.seed))
          .add(er.success)
          .add(er.steps)
          .add(er.final_base_cost)
          .add(er.final_R)
          .done();
}

inline void write_results_csv(const std::string& path,
                              const std::string& method,
                              const SuccessReport& rep) {
  write_results_csv(path, {{method, &rep}});
}

// Per-episode 2x2 outcome counts for two methods on the same episode list.
struct PairedOutcome {
  int both_fail = 0;
  int only_a = 0;  // a succeeded, b failed
  int only_b = 0;
  int both_succeed = 0;
};

inline PairedOutcome paired_outcomes(const SuccessReport& a,
                                     const SuccessReport& b) {
  if (a.episodes.size() != b.episodes.size())
    throw std::invalid_argument("paired_outcomes: episode count mismatch");
  PairedOutcome po;
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    const EpisodeResult& ea = a.episodes[i];
    const EpisodeResult& eb = b.episodes[i];
    if (ea.group != eb.group || ea.index != eb.index)
      throw std::invalid_argument("paired_outcomes: episode identity mismatch");
    if (ea.success && eb.success) ++po.both_succeed;
    else if (ea.success) ++po.only_a;
    else if (eb.success) ++po.only_b;
    else ++po.both_fail;
  }
  return po;
}

// Wall-clock cost of candidate scoring with and without the reachability
// gate, on identical inputs. Base and gated calls are interleaved and the
// overhead is the median of per-pair ratios, so clock-frequency drift over
// the measurement window cancels instead of biasing one mode.
struct CostBenchmark {
  double base_ms_per_call = 0.0;   // median over pairs
  double gated_ms_per_call = 0.0;  // median over pairs
  double overhead_fraction = 0.0;  // median of per-pair gated/base, minus 1
};

inline CostBenchmark cost_call_benchmark(const ParameterStore& p,
                                         const PlannerConfig& config,
                                         std::uint64_t seed, int n_warmup = 5,
                                         int n_measured = 20) {
  PlannerConfig cfg = config;
  Rng rng(mix_seed({seed, 0x62656e63ull}));
  Latent z0(p.cfg.d_z), z_g(p.cfg.d_z);
  for (int d = 0; d < p.cfg.d_z; ++d) {
    z0[d] = rng.uniform(-1.0, 1.0);
    z_g[d] = rng.uniform(-1.0, 1.0);
  }
  std::vector<std::uint8_t> actions(
      static_cast<std::size_t>(cfg.n_samples) * cfg.H);
  for (auto& a : actions)
    a = static_cast<std::uint8_t>(rng.uniform_int(p.cfg.n_actions));

  const auto time_once = [&](bool gated) {
    cfg.gated = gated;
    const auto t0 = std::chrono::steady_clock::now();
    const ScoreBatch sb =
        score_candidates(p, z0, z_g, actions, cfg.n_samples, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    if (sb.cost.size() != cfg.n_samples)
      throw std::logic_error("cost_call_benchmark: bad batch");
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };

  std::vector<double> base_ms, gated_ms, ratio;
  for (int it = 0; it < n_warmup + n_measured; ++it) {
    const double b = time_once(false);
    const double g = time_once(true);
    if (it < n_warmup) continue;
    base_ms.push_back(b);
    gated_ms.push_back(g);
    ratio.push_back(g / b);
  }
  CostBenchmark bench;
  bench.base_ms_per_call = median(base_ms);
  bench.gated_ms_per_call = median(gated_ms);
  bench.overhead_fraction = median(ratio) - 1.0;
  return bench;
}

}  // namespace rcaux
