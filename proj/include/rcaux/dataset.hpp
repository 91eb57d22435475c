#pragma once

// Offline trajectory datasets: behavior policies, binary IO, replay
// validation, and the observed-offset table used for the competitiveness
// audit against the BFS oracle.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rcaux/binio.hpp"
#include "rcaux/grid.hpp"
#include "rcaux/rng.hpp"

namespace rcaux {

struct Trajectory {
  Eigen::MatrixXd obs;            // obs_dim x T, column per step
  std::vector<std::uint8_t> actions;  // T-1 entries
  std::vector<State> states;      // T entries

  int length() const { return static_cast<int>(states.size()); }
};

struct Dataset {
  int obs_dim = 0;
  std::vector<Trajectory> trajectories;

  int n_traj() const { return static_cast<int>(trajectories.size()); }
};

enum class PolicyId { UniformRandom, GoalSeek, Mixed };

inline PolicyId policy_from_string(const std::string& s) {
  if (s == "random") return PolicyId::UniformRandom;
  if (s == "goalseek") return PolicyId::GoalSeek;
  if (s == "mixed") return PolicyId::Mixed;
  throw std::invalid_argument("unknown policy: " + s);
}

inline std::string to_string(PolicyId p) {
  switch (p) {
    case PolicyId::UniformRandom: return "random";
    case PolicyId::GoalSeek: return "goalseek";
    case PolicyId::Mixed: return "mixed";
  }
  throw std::logic_error("bad policy id");
}

namespace detail {

inline constexpr double kEpsGreedy = 0.3;

// Greedy step toward the waypoint: of the five actions, the one whose
// successor minimizes the exact hitting time, ties broken by action id.
inline int greedy_action(const GridSpec& spec, BfsOracle& oracle,
                         const State& s, const State& waypoint) {
  int best_a = 0;
  int best_d = INT32_MAX;
  for (int a = 0; a < kNumActions; ++a) {
    const State next = step(spec, s, static_cast<Action>(a));
    const auto d = oracle.hitting_time(next, waypoint);
    const int dv = d.has_value() ? *d : INT32_MAX - 1;
    if (dv < best_d) {
      best_d = dv;
      best_a = a;
    }
  }
  return best_a;
}

inline Trajectory roll_policy(const GridSpec& spec, BfsOracle& oracle,
                              PolicyId policy, int T, bool include_wall_mask,
                              Rng& rng) {
  const std::vector<State> free = spec.free_cells();
  Trajectory tr;
  tr.states.reserve(static_cast<std::size_t>(T));
  tr.actions.reserve(static_cast<std::size_t>(T - 1));
  tr.obs.resize(obs_dim(spec, include_wall_mask), T);

  State s = rng.pick(free);
  State waypoint = s;
  auto resample_waypoint = [&] {
    do {
      waypoint = rng.pick(free);
    } while (waypoint == s);
  };
  if (policy == PolicyId::GoalSeek) resample_waypoint();

  for (int t = 0; t < T; ++t) {
    tr.states.push_back(s);
    tr.obs.col(t) = observe(spec, s, include_wall_mask);
    if (t == T - 1) break;
    int a;
    if (policy == PolicyId::UniformRandom) {
      a = rng.uniform_int(kNumActions);
    } else {
      if (s == waypoint) resample_waypoint();
      a = rng.uniform() < kEpsGreedy ? rng.uniform_int(kNumActions)
                                     : greedy_action(spec, oracle, s, waypoint);
    }
    tr.actions.push_back(static_cast<std::uint8_t>(a));
    s = step(spec, s, static_cast<Action>(a));
  }
  return tr;
}

}  // namespace detail

// n trajectories of length T under the requested behavior policy. `Mixed`
// alternates uniform-random and goal-seeking trajectories. Deterministic per
// seed; each trajectory draws from its own derived stream.
inline Dataset generate_trajectories(const GridSpec& spec, PolicyId policy,
                                     int n, int T, std::uint64_t seed,
                                     bool include_wall_mask = false) {
  if (n < 1 || T < 1)
    throw std::invalid_argument("generate_trajectories: n, T must be >= 1");
  Dataset ds;
  ds.obs_dim = obs_dim(spec, include_wall_mask);
  ds.trajectories.reserve(static_cast<std::size_t>(n));
  BfsOracle oracle(spec);
  for (int i = 0; i < n; ++i) {
    PolicyId p = policy;
    if (policy == PolicyId::Mixed)
      p = (i % 2 == 0) ? PolicyId::GoalSeek : PolicyId::UniformRandom;
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(i), 0x7261770aull}));
    ds.trajectories.push_back(
        detail::roll_policy(spec, oracle, p, T, include_wall_mask, rng));
  }
  return ds;
}

// Every recorded transition must replay through step() and every stored
// observation must match observe(); throws with a location on mismatch.
inline void validate_replay(const Dataset& ds, const GridSpec& spec,
                            bool include_wall_mask = false) {
  if (ds.obs_dim != obs_dim(spec, include_wall_mask))
    throw std::runtime_error("validate_replay: obs_dim mismatch");
  for (int i = 0; i < ds.n_traj(); ++i) {
    const Trajectory& tr = ds.trajectories[i];
    const int T = tr.length();
    if (static_cast<int>(tr.actions.size()) != T - 1 || tr.obs.cols() != T)
      throw std::runtime_error("validate_replay: ragged trajectory " +
                               std::to_string(i));
    for (int t = 0; t < T; ++t) {
      if (tr.obs.col(t) != observe(spec, tr.states[t], include_wall_mask))
        throw std::runtime_error("validate_replay: observation mismatch at (" +
                                 std::to_string(i) + "," + std::to_string(t) +
                                 ")");
      if (t + 1 < T) {
        const State next =
            step(spec, tr.states[t], action_from_int(tr.actions[t]));
        if (next != tr.states[t + 1])
          throw std::runtime_error("validate_replay: transition mismatch at (" +
                                   std::to_string(i) + "," + std::to_string(t) +
                                   ")");
      }
    }
  }
}

inline bool passes_through(const Trajectory& tr, const State& cell) {
  for (const State& s : tr.states)
    if (s == cell) return true;
  return false;
}

// Minimum observed offset D_D per ordered ground-truth state pair, taken
// across all trajectories.
struct OffsetTable {
  std::map<std::pair<State, State>, int> min_offset;

  std::optional<int> lookup(const State& s, const State& g) const {
    const auto it = min_offset.find({s, g});
    if (it == min_offset.end()) return std::nullopt;
    return it->second;
  }
};

inline OffsetTable observed_offset_table(const Dataset& ds) {
  if (ds.trajectories.empty())
    throw std::invalid_argument("observed_offset_table: empty dataset");
  OffsetTable table;
  for (const Trajectory& tr : ds.trajectories) {
    const int T = tr.length();
    for (int i = 0; i < T; ++i) {
      for (int j = i + 1; j < T; ++j) {
        const auto key = std::make_pair(tr.states[i], tr.states[j]);
        const int off = j - i;
        auto [it, inserted] = table.min_offset.try_emplace(key, off);
        if (!inserted && off < it->second) it->second = off;
      }
    }
  }
  return table;
}

struct CompetitivenessReport {
  double c = 0.0;        // max D_D / D* over entries with D* >= 1
  int n_entries = 0;
  int n_violations = 0;  // entries where D* is absent or D* > D_D
};

inline CompetitivenessReport audit_competitiveness(const OffsetTable& table,
                                                   BfsOracle& oracle) {
  CompetitivenessReport rep;
  for (const auto& [key, dd] : table.min_offset) {
    ++rep.n_entries;
    const auto dstar = oracle.hitting_time(key.first, key.second);
    if (!dstar.has_value() || *dstar > dd) {
      ++rep.n_violations;
      continue;
    }
    if (*dstar >= 1)
      rep.c = std::max(rep.c, static_cast<double>(dd) / *dstar);
  }
  return rep;
}

inline constexpr char kDatasetMagic[4] = {'R', 'C', 'A', 'X'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const std::string& path, const Dataset& ds) {
  auto os = binio::open_out(path);
  binio::write_magic(os, kDatasetMagic);
  binio::write_u32(os, kDatasetVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(ds.n_traj()));
  for (const Trajectory& tr : ds.trajectories) {
    const int T = tr.length();
    binio::write_u32(os, static_cast<std::uint32_t>(T));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.obs_dim));
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < ds.obs_dim; ++d)
        binio::write_f32(os, static_cast<float>(tr.obs(d, t)));
    for (std::uint8_t a : tr.actions) binio::write_u8(os, a);
    for (const State& s : tr.states) {
      binio::write_u16(os, static_cast<std::uint16_t>(s.row));
      binio::write_u16(os, static_cast<std::uint16_t>(s.col));
    }
  }
  if (!os) throw std::runtime_error("save_dataset: write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, kDatasetMagic, "load_dataset");
  const std::uint32_t version = binio::read_u32(is);
  if (version != kDatasetVersion)
    throw std::runtime_error("load_dataset: unsupported version " +
                             std::to_string(version));
  const std::uint32_t n = binio::read_u32(is);
  Dataset ds;
  ds.trajectories.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const int T = static_cast<int>(binio::read_u32(is));
    const int dim = static_cast<int>(binio::read_u32(is));
    if (i == 0)
      ds.obs_dim = dim;
    else if (dim != ds.obs_dim)
      throw std::runtime_error("load_dataset: inconsistent obs_dim");
    Trajectory tr;
    tr.obs.resize(dim, T);
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < dim; ++d) tr.obs(d, t) = binio::read_f32(is);
    tr.actions.resize(static_cast<std::size_t>(T - 1));
    for (auto& a : tr.actions) a = binio::read_u8(is);
    tr.states.resize(static_cast<std::size_t>(T));
    for (auto& s : tr.states) {
      s.row = binio::read_u16(is);
      s.col = binio::read_u16(is);
    }
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

}  // namespace rcaux
