#pragma once

// Pipeline commands behind the CLI subcommands. Each command reads a
// RunConfig, writes its artifacts plus the resolved config into the run
// output directory, and returns the artifact paths for callers/tests.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rcaux/analysis.hpp"
#include "rcaux/config.hpp"
#include "rcaux/dataset.hpp"
#include "rcaux/eval.hpp"
#include "rcaux/train.hpp"

namespace rcaux {

namespace detail {

inline void require_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw MissingFileError("missing input file: " + path);
}

// load_dataset/load_checkpoint signal format problems via runtime_error;
// reclassify the format messages so the CLI can map them to the version
// exit code while real I/O errors keep their class.
template <typename F>
auto with_version_check(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    if (msg.find("unsupported version") != std::string::npos ||
        msg.find("bad magic") != std::string::npos)
      throw VersionError(msg);
    throw;
  }
}

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg,
                                             const std::string& command) {
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  write_config((dir / (command + ".config.txt")).string(), cfg);
  return dir;
}

}  // namespace detail

// Stage tags keep the per-command seed streams disjoint under one global seed.
inline constexpr std::uint64_t kSeedStageData = 0x64617461ull;     // "data"
inline constexpr std::uint64_t kSeedStageTrain = 0x7472616eull;    // "tran"
inline constexpr std::uint64_t kSeedStageEval = 0x6576616cull;     // "eval"
inline constexpr std::uint64_t kSeedStageAnalyze = 0x616e6c79ull;  // "anly"
inline constexpr std::uint64_t kSeedStageBench = 0x626e6368ull;    // "bnch"

inline std::string cmd_gen_data(const RunConfig& cfg) {
  const auto dir = detail::prepare_out_dir(cfg, "gen-data");
  const GridSpec spec = make_env(cfg.env);
  const Dataset ds = generate_trajectories(
      spec, policy_from_string(cfg.policy), cfg.n_traj, cfg.traj_len,
      mix_seed({cfg.seed, kSeedStageData}), cfg.include_wall_mask);
  const std::string path = (dir / "dataset.rcax").string();
  save_dataset(path, ds);
  return path;
}

struct TrainOutput {
  std::string checkpoint_path;
  std::string metrics_csv;
  FitResult result;
};

inline TrainOutput cmd_train(const RunConfig& cfg,
                             const std::string& dataset_path) {
  detail::require_file(dataset_path);
  const Dataset ds =
      detail::with_version_check([&] { return load_dataset(dataset_path); });
  const auto dir = detail::prepare_out_dir(cfg, "train");
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed({cfg.seed, kSeedStageTrain});
  TrainOutput out{(dir / "model.rcxp").string(), (dir / "metrics.csv").string(),
                  fit(ds, cfg.model, tc)};
  write_metrics_csv(out.metrics_csv, out.result.log);
  save_checkpoint(out.checkpoint_path, out.result.params,
                  {{"mode", tc.mode}, {"env", cfg.env}});
  return out;
}

namespace detail {

inline Checkpoint load_matching_checkpoint(const RunConfig& cfg,
                                           const GridSpec& spec,
                                           const std::string& path) {
  require_file(path);
  Checkpoint ck = with_version_check([&] { return load_checkpoint(path); });
  const int expect = obs_dim(spec, cfg.include_wall_mask);
  if (ck.params.cfg.obs_dim != expect)
    throw ConfigError("checkpoint " + path + " has obs_dim " +
                      std::to_string(ck.params.cfg.obs_dim) +
                      " but env/include_wall_mask expects " +
                      std::to_string(expect));
  return ck;
}

inline std::string method_label(const Checkpoint& ck,
                                const std::string& fallback) {
  const auto it = ck.meta.find("mode");
  return it != ck.meta.end() && !it->second.empty() ? it->second : fallback;
}

}  // namespace detail

struct EvalOutput {
  std::string results_csv;
  std::string paired_csv;  // empty when a single checkpoint was given
  std::string method_a, method_b;
  SuccessReport report_a, report_b;
  PairedOutcome paired;
};

inline EvalOutput cmd_eval(const RunConfig& cfg, const std::string& ckpt_a,
                           const std::string& ckpt_b = "") {
  const GridSpec spec = make_env(cfg.env);
  const Checkpoint a = detail::load_matching_checkpoint(cfg, spec, ckpt_a);
  const auto dir = detail::prepare_out_dir(cfg, "eval");
  const auto episodes = build_groups(spec, cfg.n_groups, cfg.per_group,
                                     mix_seed({cfg.seed, kSeedStageEval}));

  EvalOutput out;
  out.results_csv = (dir / "results.csv").string();
  out.method_a = detail::method_label(a, "model_a");
  out.report_a = evaluate_success(spec, a.params, cfg.planner, episodes,
                                  cfg.include_wall_mask);
  if (ckpt_b.empty()) {
    write_results_csv(out.results_csv, out.method_a, out.report_a);
    return out;
  }

  const Checkpoint b = detail::load_matching_checkpoint(cfg, spec, ckpt_b);
  out.method_b = detail::method_label(b, "model_b");
  if (out.method_b == out.method_a) {
    out.method_a += "_a";
    out.method_b += "_b";
  }
  out.report_b = evaluate_success(spec, b.params, cfg.planner, episodes,
                                  cfg.include_wall_mask);
  write_results_csv(out.results_csv,
                    {{out.method_a, &out.report_a}, {out.method_b, &out.report_b}});
  out.paired = paired_outcomes(out.report_a, out.report_b);
  out.paired_csv = (dir / "paired.csv").string();
  CsvWriter csv(out.paired_csv,
                {"method_a", "method_b", "n_both_fail", "n_only_a", "n_only_b",
                 "n_both_succeed"});
  csv.row()
      .add(out.method_a)
      .add(out.method_b)
      .add(out.paired.both_fail)
      .add(out.paired.only_a)
      .add(out.paired.only_b)
      .add(out.paired.both_succeed)
      .done();
  return out;
}

struct AnalyzeOutput {
  std::vector<std::pair<std::string, BoundReport>> checks;  // (csv path, report)
  bool all_pass = true;
};

// Runs every analysis check that needs one model; the budget-identifiability
// contrast additionally needs the no-hard-negative checkpoint and runs only
// when `ckpt_no_hn` is given.
inline AnalyzeOutput cmd_analyze(const RunConfig& cfg, const std::string& ckpt,
                                 const std::string& dataset_path,
                                 const std::string& ckpt_no_hn = "") {
  const GridSpec spec = make_env(cfg.env);
  const Checkpoint a = detail::load_matching_checkpoint(cfg, spec, ckpt);
  detail::require_file(dataset_path);
  const Dataset ds =
      detail::with_version_check([&] { return load_dataset(dataset_path); });
  const auto dir = detail::prepare_out_dir(cfg, "analyze");
  const std::uint64_t seed = mix_seed({cfg.seed, kSeedStageAnalyze});

  AnalyzeOutput out;
  const auto push = [&](BoundReport rep) {
    const std::string path = (dir / ("check_" + rep.name + ".csv")).string();
    write_bound_report_csv(path, rep);
    out.all_pass = out.all_pass && rep.pass;
    out.checks.emplace_back(path, std::move(rep));
  };

  const int K = cfg.train.resolved().K;
  push(check_compounding(a.params, ds, K, mix_seed({seed, 1})));
  push(check_cost_distortion(a.params, ds, cfg.planner.H, mix_seed({seed, 2})));
  push(check_margin_robustness(a.params, ds, K, mix_seed({seed, 3})));
  BfsOracle oracle(spec);
  push(check_data_competitiveness(ds, oracle));
  push(check_bayes_reach(mix_seed({seed, 4})));
  push(check_preference_inequality(mix_seed({seed, 5})));
  if (!ckpt_no_hn.empty()) {
    const Checkpoint b = detail::load_matching_checkpoint(cfg, spec, ckpt_no_hn);
    push(check_budget_identifiability(ds, a.params, b.params,
                                      a.params.cfg.H_max, mix_seed({seed, 6})));
  }
  return out;
}

struct BenchOutput {
  std::string timing_csv;
  CostBenchmark bench;
};

inline BenchOutput cmd_bench(const RunConfig& cfg, const std::string& ckpt) {
  const GridSpec spec = make_env(cfg.env);
  const Checkpoint a = detail::load_matching_checkpoint(cfg, spec, ckpt);
  const auto dir = detail::prepare_out_dir(cfg, "bench");
  BenchOutput out;
  out.bench = cost_call_benchmark(a.params, cfg.planner,
                                  mix_seed({cfg.seed, kSeedStageBench}),
                                  cfg.bench_warmup, cfg.bench_measured);
  out.timing_csv = (dir / "timing.csv").string();
  CsvWriter csv(out.timing_csv, {"metric", "value"});
  csv.row().add("base_ms_per_call").add(out.bench.base_ms_per_call).done();
  csv.row().add("gated_ms_per_call").add(out.bench.gated_ms_per_call).done();
  csv.row().add("overhead_fraction").add(out.bench.overhead_fraction).done();
  return out;
}

}  // namespace rcaux
