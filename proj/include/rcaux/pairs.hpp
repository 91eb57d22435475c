#pragma once

// Segment sampling and reachability-pair construction: positives, temporal
// hard negatives, cross-trajectory batch negatives, and predicted-latent
// pairs with their remaining-budget labels.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcaux/dataset.hpp"
#include "rcaux/rng.hpp"

namespace rcaux {

// Window [t-L+1, t] of context observations plus K future actions/targets.
struct Segment {
  int traj = 0;
  int t = 0;
  int L = 1;
  int K = 1;
};

class SegmentSampler {
 public:
  SegmentSampler(const Dataset& ds, int L, int K, std::uint64_t seed)
      : ds_(ds), L_(L), K_(K), rng_(seed) {
    if (L < 1 || K < 1)
      throw std::invalid_argument("SegmentSampler: L, K must be >= 1");
    total_ = 0;
    prefix_.reserve(static_cast<std::size_t>(ds.n_traj()));
    for (const Trajectory& tr : ds.trajectories) {
      // valid anchors t satisfy t >= L-1 and t + K <= T-1
      const int nv = std::max(0, tr.length() - K - (L - 1));
      total_ += nv;
      prefix_.push_back(total_);
    }
    if (total_ == 0) throw std::runtime_error("segment infeasible");
  }

  Segment sample() {
    const int u = rng_.uniform_int(total_);
    int traj = 0;
    while (prefix_[static_cast<std::size_t>(traj)] <= u) ++traj;
    const int base = traj == 0 ? 0 : prefix_[static_cast<std::size_t>(traj - 1)];
    return Segment{traj, L_ - 1 + (u - base), L_, K_};
  }

  std::vector<Segment> sample_batch(int n) {
    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample());
    return out;
  }

  int n_valid() const { return total_; }

 private:
  const Dataset& ds_;
  int L_, K_;
  Rng rng_;
  int total_ = 0;
  std::vector<int> prefix_;
};

inline Segment sample_segment(const Dataset& ds, int L, int K,
                              std::uint64_t seed) {
  return SegmentSampler(ds, L, K, seed).sample();
}

// Budget label rule: reachable iff the budget covers the observed offset.
inline int reach_label(int h, int delta) { return h >= delta ? 1 : 0; }

enum class PairOrigin { POS, HARD_NEG, BATCH_NEG, PRED };

inline std::string to_string(PairOrigin o) {
  switch (o) {
    case PairOrigin::POS: return "POS";
    case PairOrigin::HARD_NEG: return "HARD_NEG";
    case PairOrigin::BATCH_NEG: return "BATCH_NEG";
    case PairOrigin::PRED: return "PRED";
  }
  throw std::logic_error("bad pair origin");
}

// For encoded origins, (src_traj, src_idx) / (tgt_traj, tgt_idx) reference
// observations. For PRED, src_idx = rollout step k and tgt_idx = target
// step l within one segment (traj fields unused, set to -1).
struct ReachPair {
  PairOrigin origin = PairOrigin::POS;
  int src_traj = -1;
  int src_idx = 0;
  int tgt_traj = -1;
  int tgt_idx = 0;
  int h = 0;       // budget
  int y = 0;       // label
  int delta = -1;  // offset; -1 when absent (BATCH_NEG)
};

struct PairCounts {
  int pos_or_hard = 2;      // same-trajectory pairs, budget sampled freely
  int forced_hard = 1;      // same-trajectory pairs with h < delta
  int batch_neg = 1;        // cross-trajectory negatives
  int pred_per_segment = 2; // PRED pairs attached to each rollout
  // Ablation switch: when false, same-trajectory pairs are always sampled
  // with h >= delta (and no forced hard negatives), so the only negatives
  // are cross-trajectory ones and the budget carries no signal.
  bool hard_negatives = true;
};

struct PairBatch {
  std::vector<ReachPair> pairs;
  bool batch_negatives_available = true;
};

// Builds encoded reachability pairs for a batch of segment anchors. Budgets
// are uniform over {0..H_max}; each anchor gets `pos_or_hard` freely labeled
// pairs, `forced_hard` pairs with the budget resampled below the offset, and
// `batch_neg` pairs targeting a different trajectory in the batch. Offsets of
// zero are excluded from same-trajectory sampling.
inline PairBatch make_reachability_pairs(const std::vector<Segment>& batch,
                                         const Dataset& ds, int H_max,
                                         const PairCounts& counts, Rng& rng) {
  if (H_max < 1)
    throw std::invalid_argument("make_reachability_pairs: H_max must be >= 1");
  PairBatch out;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Segment& seg = batch[b];
    const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(seg.traj)];
    const int T = tr.length();
    const int i = seg.t;

    const bool has_later = i + 1 <= T - 1;
    if (has_later) {
      if (counts.hard_negatives) {
        for (int p = 0; p < counts.pos_or_hard; ++p) {
          const int j = i + 1 + rng.uniform_int(T - 1 - i);
          const int delta = j - i;
          const int h = rng.uniform_int(H_max + 1);
          const int y = reach_label(h, delta);
          out.pairs.push_back(ReachPair{
              y ? PairOrigin::POS : PairOrigin::HARD_NEG, seg.traj, i,
              seg.traj, j, h, y, delta});
        }
        for (int p = 0; p < counts.forced_hard; ++p) {
          const int j = i + 1 + rng.uniform_int(T - 1 - i);
          const int delta = j - i;  // >= 1, so a budget below it always exists
          const int h = rng.uniform_int(delta);
          out.pairs.push_back(ReachPair{PairOrigin::HARD_NEG, seg.traj, i,
                                        seg.traj, j, h, 0, delta});
        }
      } else {
        // Offsets capped at H_max so a covering budget h >= delta exists.
        const int span = std::min(H_max, T - 1 - i);
        for (int p = 0; p < counts.pos_or_hard + counts.forced_hard; ++p) {
          const int j = i + 1 + rng.uniform_int(span);
          const int delta = j - i;
          const int h = delta + rng.uniform_int(H_max + 1 - delta);
          out.pairs.push_back(ReachPair{PairOrigin::POS, seg.traj, i, seg.traj,
                                        j, h, 1, delta});
        }
      }
    }

    // Cross-trajectory negatives: any other trajectory present in the batch.
    std::vector<int> other;
    for (std::size_t o = 0; o < batch.size(); ++o)
      if (batch[o].traj != seg.traj) other.push_back(batch[o].traj);
    if (other.empty()) {
      out.batch_negatives_available = false;
      continue;
    }
    for (int p = 0; p < counts.batch_neg; ++p) {
      const int tgt_traj = other[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(other.size())))];
      const int tgt_len =
          ds.trajectories[static_cast<std::size_t>(tgt_traj)].length();
      const int j = rng.uniform_int(tgt_len);
      // The budget must follow the same law as the same-trajectory pairs of
      // this branch, or its marginal alone separates the classes and the
      // no-hard-negative ablation would still carry budget signal.
      int h;
      if (counts.hard_negatives || !has_later) {
        h = rng.uniform_int(H_max + 1);
      } else {
        const int span = std::min(H_max, T - 1 - i);
        const int delta = 1 + rng.uniform_int(span);
        h = delta + rng.uniform_int(H_max + 1 - delta);
      }
      out.pairs.push_back(
          ReachPair{PairOrigin::BATCH_NEG, seg.traj, i, tgt_traj, j, h, 0, -1});
    }
  }
  return out;
}

// PRED pairs: rollout step k as source, later step l as target, labeled by
// the remaining budget rule y = 1[h >= l - k] with 0 < k < l <= K. These are
// same-trajectory pairs, so the hard-negative ablation applies to them too:
// without hard negatives the budget is resampled to cover the offset.
inline std::vector<ReachPair> make_predicted_pairs(int K, int H_max,
                                                   int n_pairs, Rng& rng,
                                                   bool hard_negatives = true) {
  std::vector<ReachPair> out;
  if (K < 2) return out;
  for (int p = 0; p < n_pairs; ++p) {
    const int k = 1 + rng.uniform_int(K - 1);
    const int l = k + 1 + rng.uniform_int(K - k);
    const int delta = l - k;
    if (delta > H_max)
      throw std::logic_error("make_predicted_pairs: K exceeds H_max");
    const int h = hard_negatives ? rng.uniform_int(H_max + 1)
                                 : delta + rng.uniform_int(H_max + 1 - delta);
    out.push_back(
        ReachPair{PairOrigin::PRED, -1, k, -1, l, h, reach_label(h, delta), delta});
  }
  return out;
}

struct PairAuditReport {
  int n_checked = 0;
  int n_violations = 0;
  std::vector<std::string> messages;
};

// Checks every origin/label invariant of ReachPair against the dataset.
inline PairAuditReport audit_pairs(const std::vector<ReachPair>& pairs,
                                   const Dataset& ds) {
  PairAuditReport rep;
  auto fail = [&rep](int idx, const std::string& what) {
    ++rep.n_violations;
    if (rep.messages.size() < 20)
      rep.messages.push_back("pair " + std::to_string(idx) + ": " + what);
  };
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const ReachPair& rp = pairs[p];
    const int idx = static_cast<int>(p);
    ++rep.n_checked;
    if (rp.h < 0) fail(idx, "negative budget");
    switch (rp.origin) {
      case PairOrigin::POS:
      case PairOrigin::HARD_NEG: {
        if (rp.src_traj != rp.tgt_traj) {
          fail(idx, "same-trajectory origin spans trajectories");
          break;
        }
        const int T =
            ds.trajectories[static_cast<std::size_t>(rp.src_traj)].length();
        if (rp.src_idx < 0 || rp.tgt_idx >= T || rp.tgt_idx <= rp.src_idx)
          fail(idx, "bad indices");
        if (rp.delta != rp.tgt_idx - rp.src_idx) fail(idx, "wrong offset");
        if (rp.origin == PairOrigin::POS && !(rp.h >= rp.delta && rp.y == 1))
          fail(idx, "POS must have h >= delta and y = 1");
        if (rp.origin == PairOrigin::HARD_NEG &&
            !(rp.h < rp.delta && rp.y == 0))
          fail(idx, "HARD_NEG must have h < delta and y = 0");
        break;
      }
      case PairOrigin::BATCH_NEG:
        if (rp.src_traj == rp.tgt_traj) fail(idx, "BATCH_NEG within trajectory");
        if (rp.y != 0) fail(idx, "BATCH_NEG must have y = 0");
        if (rp.delta != -1) fail(idx, "BATCH_NEG carries an offset");
        break;
      case PairOrigin::PRED:
        if (!(0 < rp.src_idx && rp.src_idx < rp.tgt_idx))
          fail(idx, "PRED requires 0 < k < l");
        if (rp.delta != rp.tgt_idx - rp.src_idx) fail(idx, "wrong offset");
        if (rp.y != reach_label(rp.h, rp.delta)) fail(idx, "PRED label rule");
        break;
    }
  }
  return rep;
}

}  // namespace rcaux
