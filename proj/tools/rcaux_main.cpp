// Command-line entry point: gen-data / train / eval / analyze / bench.
// Every RunConfig field is exposed as a kebab-case flag; flags override the
// --config file, which overrides the per-environment profile defaults.
// Exit codes: 0 success, 1 runtime failure, 2 config/usage error,
// 3 missing input file, 4 dataset/checkpoint version mismatch.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rcaux/pipeline.hpp"

namespace {

using namespace rcaux;

struct CommandArgs {
  std::string config_path;
  std::vector<FlagOverride> overrides;
};

void attach_config_options(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "Config file (flat key=value with [section] headers)");
  cmd->add_option_function<std::vector<std::string>>(
      "--set",
      [&args](const std::vector<std::string>& kvs) {
        for (const std::string& kv : kvs) {
          const std::size_t eq = kv.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects section.key=value, got '" +
                                       kv + "'");
          args.overrides.push_back({kv.substr(0, eq), kv.substr(eq + 1)});
        }
      },
      "Override any field as section.key=value (repeatable)");

  RunConfig probe;
  visit_config_fields(probe, [&](const char* section, const char* key, auto&) {
    std::string flag = "--";
    for (const char* p = key; *p; ++p) flag += *p == '_' ? '-' : *p;
    cmd->add_option_function<std::string>(
        flag,
        [&args, k = std::string(key)](const std::string& v) {
          args.overrides.push_back({k, v});
        },
        std::string("[") + section + "] " + key);
  });
}

void print_report(const char* method, const SuccessReport& rep) {
  std::printf("%s: success %.3f (sd %.3f over %zu groups, %zu episodes)\n",
              method, rep.mean, rep.stddev, rep.group_rates.size(),
              rep.episodes.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rcaux: grid datasets, RC-aux training, reachability-gated planning"};
  app.require_subcommand(1);

  CommandArgs gen_args, train_args, eval_args, analyze_args, bench_args;
  std::string train_dataset, eval_ckpt_a, eval_ckpt_b;
  std::string analyze_ckpt, analyze_dataset, analyze_ckpt_no_hn, bench_ckpt;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a trajectory dataset");
  attach_config_options(gen, gen_args);

  CLI::App* train = app.add_subcommand("train", "Train a model on a dataset");
  train->add_option("dataset", train_dataset, "Dataset file (.rcax)")
      ->required();
  attach_config_options(train, train_args);

  CLI::App* eval = app.add_subcommand("eval", "Run MPC episodes and report success");
  eval->add_option("checkpoint", eval_ckpt_a, "Checkpoint file (.rcxp)")
      ->required();
  eval->add_option("checkpoint_b", eval_ckpt_b,
                   "Second checkpoint: adds its rows plus a paired CSV");
  attach_config_options(eval, eval_args);

  CLI::App* analyze = app.add_subcommand("analyze", "Run the bound/consistency checks");
  analyze->add_option("checkpoint", analyze_ckpt, "Checkpoint file (.rcxp)")
      ->required();
  analyze->add_option("dataset", analyze_dataset, "Dataset file (.rcax)")
      ->required();
  analyze->add_option("--no-hn-checkpoint", analyze_ckpt_no_hn,
                      "No-hard-negative checkpoint: adds the budget "
                      "identifiability contrast");
  attach_config_options(analyze, analyze_args);

  CLI::App* bench = app.add_subcommand("bench", "Time gated vs base scoring");
  bench->add_option("checkpoint", bench_ckpt, "Checkpoint file (.rcxp)")
      ->required();
  attach_config_options(bench, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::fprintf(stderr, "rcaux: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen) {
      const RunConfig cfg =
          load_run_config(gen_args.config_path, gen_args.overrides);
      std::printf("dataset: %s\n", cmd_gen_data(cfg).c_str());
    } else if (*train) {
      const RunConfig cfg =
          load_run_config(train_args.config_path, train_args.overrides);
      const TrainOutput out = cmd_train(cfg, train_dataset);
      std::printf("checkpoint: %s\nmetrics: %s\nfinal loss_total: %s\n",
                  out.checkpoint_path.c_str(), out.metrics_csv.c_str(),
                  format_double(out.result.log.back().total).c_str());
    } else if (*eval) {
      const RunConfig cfg =
          load_run_config(eval_args.config_path, eval_args.overrides);
      const EvalOutput out = cmd_eval(cfg, eval_ckpt_a, eval_ckpt_b);
      print_report(out.method_a.c_str(), out.report_a);
      if (!out.paired_csv.empty()) {
        print_report(out.method_b.c_str(), out.report_b);
        std::printf("paired (%s vs %s): both_fail %d only_a %d only_b %d "
                    "both_succeed %d\n",
                    out.method_a.c_str(), out.method_b.c_str(),
                    out.paired.both_fail, out.paired.only_a, out.paired.only_b,
                    out.paired.both_succeed);
        std::printf("paired csv: %s\n", out.paired_csv.c_str());
      }
      std::printf("results: %s\n", out.results_csv.c_str());
    } else if (*analyze) {
      const RunConfig cfg =
          load_run_config(analyze_args.config_path, analyze_args.overrides);
      const AnalyzeOutput out =
          cmd_analyze(cfg, analyze_ckpt, analyze_dataset, analyze_ckpt_no_hn);
      for (const auto& [path, rep] : out.checks)
        std::printf("%s %s (violations %d, worst_ratio %s) -> %s\n",
                    rep.pass ? "PASS" : "FAIL", rep.name.c_str(),
                    rep.violations, format_double(rep.worst_ratio).c_str(),
                    path.c_str());
      if (!out.all_pass) {
        std::fprintf(stderr, "rcaux: analysis checks failed\n");
        return 1;
      }
    } else if (*bench) {
      const RunConfig cfg =
          load_run_config(bench_args.config_path, bench_args.overrides);
      const BenchOutput out = cmd_bench(cfg, bench_ckpt);
      std::printf("base %.4f ms/call, gated %.4f ms/call, overhead %.1f%%\n",
                  out.bench.base_ms_per_call, out.bench.gated_ms_per_call,
                  100.0 * out.bench.overhead_fraction);
      std::printf("timing: %s\n", out.timing_csv.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "rcaux: config error: %s\n", e.what());
    return 2;
  } catch (const MissingFileError& e) {
    std::fprintf(stderr, "rcaux: %s\n", e.what());
    return 3;
  } catch (const VersionError& e) {
    std::fprintf(stderr, "rcaux: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rcaux: %s\n", e.what());
    return 1;
  }
  return 0;
}
