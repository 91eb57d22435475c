#pragma once

// Deterministic gridworlds with blocked cells, plus an exact BFS
// shortest-hitting-time oracle over the action graph. The oracle is the
// ground truth against which learned reachability scores are audited.

#include <Eigen/Dense>

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcaux/rng.hpp"

namespace rcaux {

struct State {
  int row = 0;
  int col = 0;
  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

inline constexpr int kNumActions = 5;

inline Action action_from_int(int a) {
  if (a < 0 || a >= kNumActions)
    throw std::invalid_argument("invalid action id: " + std::to_string(a));
  return static_cast<Action>(a);
}

struct GridSpec {
  int width = 0;
  int height = 0;
  std::set<State> blocked;
  std::set<State> doors;  // free gap cells punched through a wall line
  std::string name;

  bool in_bounds(const State& s) const {
    return s.row >= 0 && s.row < height && s.col >= 0 && s.col < width;
  }
  bool free(const State& s) const {
    return in_bounds(s) && !blocked.contains(s);
  }
  int cell_index(const State& s) const { return s.row * width + s.col; }
  State cell_at(int idx) const { return State{idx / width, idx % width}; }
  int n_cells() const { return width * height; }

  std::vector<State> free_cells() const {
    std::vector<State> out;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (State s{r, c}; free(s)) out.push_back(s);
    return out;
  }

  // Checks bounds, door/blocked disjointness, and free-cell connectivity.
  void validate() const;
};

inline State step(const GridSpec& spec, const State& s, Action a) {
  if (!spec.free(s))
    throw std::invalid_argument("step: state off grid or blocked at (" +
                                std::to_string(s.row) + "," +
                                std::to_string(s.col) + ")");
  State t = s;
  switch (a) {
    case Action::Up: t.row -= 1; break;
    case Action::Down: t.row += 1; break;
    case Action::Left: t.col -= 1; break;
    case Action::Right: t.col += 1; break;
    case Action::Stay: break;
    default: throw std::invalid_argument("step: invalid action");
  }
  return spec.free(t) ? t : s;  // bumping a wall or the boundary is a no-op
}

// One-hot of the agent cell, optionally concatenated with the fixed wall
// layout mask (1 on blocked cells).
inline Eigen::VectorXd observe(const GridSpec& spec, const State& s,
                               bool include_wall_mask = false) {
  if (!spec.free(s))
    throw std::invalid_argument("observe: state off grid or blocked");
  const int n = spec.n_cells();
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(include_wall_mask ? 2 * n : n);
  obs[spec.cell_index(s)] = 1.0;
  if (include_wall_mask)
    for (const State& b : spec.blocked) obs[n + spec.cell_index(b)] = 1.0;
  return obs;
}

inline int obs_dim(const GridSpec& spec, bool include_wall_mask) {
  return spec.n_cells() * (include_wall_mask ? 2 : 1);
}

// Exact shortest hitting times on the action graph. One BFS per queried
// source, memoized; reads of a warmed cache are safe from multiple threads.
class BfsOracle {
 public:
  explicit BfsOracle(const GridSpec& spec) : spec_(spec) {}

  static constexpr int kUnreachable = -1;

  // Distance vector from `s` to every cell (kUnreachable where none).
  const std::vector<int>& distances_from(const State& s) {
    if (!spec_.free(s))
      throw std::invalid_argument("BfsOracle: source off grid or blocked");
    const int si = spec_.cell_index(s);
    auto it = cache_.find(si);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(si, run_bfs(s)).first->second;
  }

  std::optional<int> hitting_time(const State& s, const State& g) {
    if (!spec_.free(g))
      throw std::invalid_argument("BfsOracle: goal off grid or blocked");
    const int d = distances_from(s)[spec_.cell_index(g)];
    if (d == kUnreachable) return std::nullopt;
    return d;
  }

  bool reachable(const State& s, const State& g, int h) {
    if (h < 0) throw std::invalid_argument("oracle_reachable: negative budget");
    const auto d = hitting_time(s, g);
    return d.has_value() && *d <= h;
  }

  void warm_all() {
    for (const State& s : spec_.free_cells()) distances_from(s);
  }

  const GridSpec& spec() const { return spec_; }

 private:
  std::vector<int> run_bfs(const State& src) const {
    std::vector<int> dist(static_cast<std::size_t>(spec_.n_cells()),
                          kUnreachable);
    std::deque<State> q;
    dist[spec_.cell_index(src)] = 0;
    q.push_back(src);
    while (!q.empty()) {
      const State u = q.front();
      q.pop_front();
      const int du = dist[spec_.cell_index(u)];
      for (int a = 0; a < kNumActions; ++a) {
        const State v = step(spec_, u, static_cast<Action>(a));
        int& dv = dist[spec_.cell_index(v)];
        if (dv == kUnreachable) {
          dv = du + 1;
          q.push_back(v);
        }
      }
    }
    return dist;
  }

  const GridSpec& spec_;
  std::map<int, std::vector<int>> cache_;
};

inline std::optional<int> shortest_hitting_time(const GridSpec& spec,
                                                const State& s,
                                                const State& g) {
  BfsOracle oracle(spec);
  return oracle.hitting_time(s, g);
}

inline bool oracle_reachable(const GridSpec& spec, const State& s,
                             const State& g, int h) {
  BfsOracle oracle(spec);
  return oracle.reachable(s, g, h);
}

inline void GridSpec::validate() const {
  if (width <= 0 || height <= 0)
    throw std::runtime_error("GridSpec: non-positive dimensions");
  for (const State& b : blocked)
    if (!in_bounds(b)) throw std::runtime_error("GridSpec: blocked cell out of bounds");
  for (const State& d : doors) {
    if (!in_bounds(d)) throw std::runtime_error("GridSpec: door cell out of bounds");
    if (blocked.contains(d))
      throw std::runtime_error("GridSpec: door cell is blocked");
  }
  const std::vector<State> free = free_cells();
  if (free.size() < 2)
    throw std::runtime_error("GridSpec: fewer than two free cells");
  BfsOracle oracle(*this);
  const std::vector<int>& dist = oracle.distances_from(free.front());
  for (const State& s : free)
    if (dist[cell_index(s)] == BfsOracle::kUnreachable)
      throw std::runtime_error("GridSpec: free cells are not connected");
}

// 9x9, vertical wall at column 4 with a central door at (4,4).
inline GridSpec make_tworoom() {
  GridSpec g;
  g.width = 9;
  g.height = 9;
  g.name = "tworoom";
  for (int r = 0; r < 9; ++r)
    if (r != 4) g.blocked.insert(State{r, 4});
  g.doors.insert(State{4, 4});
  g.validate();
  return g;
}

// 9x9, horizontal wall at row 4 with an off-center door at (4,7); straight-line
// distance badly underestimates the detour for most cell pairs.
inline GridSpec make_wall() {
  GridSpec g;
  g.width = 9;
  g.height = 9;
  g.name = "wall";
  for (int c = 0; c < 9; ++c)
    if (c != 7) g.blocked.insert(State{4, c});
  g.doors.insert(State{4, 7});
  g.validate();
  return g;
}

inline GridSpec make_open(int width, int height) {
  GridSpec g;
  g.width = width;
  g.height = height;
  g.name = "open";
  g.validate();
  return g;
}

inline GridSpec make_env(const std::string& name) {
  if (name == "tworoom") return make_tworoom();
  if (name == "wall") return make_wall();
  if (name == "open") return make_open(9, 9);
  throw std::invalid_argument("unknown environment: " + name);
}

struct EpisodeSpec {
  State start;
  State goal;
};

// Start and goal drawn uniformly from free cells, distinct and mutually
// reachable (always true on a validated connected grid).
inline EpisodeSpec sample_episode_spec(const GridSpec& spec, Rng& rng) {
  const std::vector<State> free = spec.free_cells();
  BfsOracle oracle(spec);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const State start = rng.pick(free);
    const State goal = rng.pick(free);
    if (start == goal) continue;
    if (oracle.hitting_time(start, goal).has_value())
      return EpisodeSpec{start, goal};
  }
  throw std::runtime_error("sample_episode_spec: no start/goal pair found");
}

namespace detail {
inline std::string cells_to_text(const std::set<State>& cells) {
  std::string out;
  for (const State& s : cells) {
    if (!out.empty()) out += ' ';
    out += std::to_string(s.row) + "," + std::to_string(s.col);
  }
  return out;
}

inline std::set<State> cells_from_text(const std::string& text) {
  std::set<State> out;
  std::istringstream iss(text);
  std::string tok;
  while (iss >> tok) {
    const auto comma = tok.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("GridSpec: malformed cell '" + tok + "'");
    out.insert(State{std::stoi(tok.substr(0, comma)),
                     std::stoi(tok.substr(comma + 1))});
  }
  return out;
}
}  // namespace detail

inline std::string to_text(const GridSpec& spec) {
  std::string out;
  out += "name=" + spec.name + "\n";
  out += "width=" + std::to_string(spec.width) + "\n";
  out += "height=" + std::to_string(spec.height) + "\n";
  out += "blocked=" + detail::cells_to_text(spec.blocked) + "\n";
  out += "doors=" + detail::cells_to_text(spec.doors) + "\n";
  return out;
}

inline GridSpec grid_from_text(const std::string& text) {
  GridSpec g;
  bool saw_width = false, saw_height = false;
  std::istringstream iss(text);
  std::string line;
  while (std::getline(iss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("GridSpec: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "name") {
      g.name = val;
    } else if (key == "width") {
      g.width = std::stoi(val);
      saw_width = true;
    } else if (key == "height") {
      g.height = std::stoi(val);
      saw_height = true;
    } else if (key == "blocked") {
      g.blocked = detail::cells_from_text(val);
    } else if (key == "doors") {
      g.doors = detail::cells_from_text(val);
    } else {
      throw std::runtime_error("GridSpec: unknown key '" + key + "'");
    }
  }
  if (!saw_width || !saw_height)
    throw std::runtime_error("GridSpec: missing width/height");
  g.validate();
  return g;
}

}  // namespace rcaux
