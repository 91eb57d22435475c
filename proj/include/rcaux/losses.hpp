#pragma once

// The training objective: multi-horizon open-loop prediction loss,
// budget-conditioned reachability BCE over encoded and predicted pairs, the
// substitute latent regularizer, and their combination with a gradient tape
// whose backward pass runs in a fixed order.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rcaux/dataset.hpp"
#include "rcaux/model.hpp"
#include "rcaux/pairs.hpp"

namespace rcaux {

struct LossWeights {
  Eigen::VectorXd w_k;  // horizon weights, length K
  double alpha = 0.1;
  double beta = 1.0;
  double omega0 = 1.0;  // class-balance weight for y=0
  double omega1 = 1.0;  // class-balance weight for y=1
  double rho_pred = 0.5;

  static LossWeights defaults(int K) {
    LossWeights w;
    w.w_k = Eigen::VectorXd::Constant(K, 1.0 / K);
    return w;
  }

  void validate() const {
    if (w_k.size() < 1) throw std::invalid_argument("LossWeights: empty w_k");
    if (w_k.minCoeff() < 0 || alpha < 0 || beta < 0 || omega0 < 0 ||
        omega1 < 0 || rho_pred < 0)
      throw std::invalid_argument("LossWeights: negative weight");
  }
};

// ---------------------------------------------------------------------------
// Standalone loss values (the gradient path lives in total_loss below).

inline double loss_mh(std::span<const Latent> pred, std::span<const Latent> tgt,
                      const Eigen::VectorXd& w) {
  if (pred.size() != tgt.size() ||
      static_cast<Eigen::Index>(pred.size()) != w.size())
    throw std::invalid_argument("loss_mh: length mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    loss += w[static_cast<Eigen::Index>(k)] * (pred[k] - tgt[k]).squaredNorm();
  return loss;
}

inline constexpr double kBceClip = 1e-7;

inline double bce(double score, int label) {
  const double s = std::clamp(score, kBceClip, 1.0 - kBceClip);
  return label ? -std::log(s) : -std::log(1.0 - s);
}

// Class-weighted mean BCE; the mean divides by the pair count, weights scale
// individual terms.
inline double weighted_bce_mean(std::span<const double> scores,
                                std::span<const int> labels, double omega0,
                                double omega1) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("weighted_bce_mean: length mismatch");
  if (scores.empty())
    throw std::invalid_argument("weighted_bce_mean: empty pair set");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    sum += (labels[i] ? omega1 : omega0) * bce(scores[i], labels[i]);
  return sum / static_cast<double>(scores.size());
}

// Encoded-pair term plus rho_pred times the predicted-pair term. An empty
// predicted set contributes zero; an empty encoded set is an error.
inline double loss_reach(std::span<const double> scores_enc,
                         std::span<const int> labels_enc,
                         std::span<const double> scores_pred,
                         std::span<const int> labels_pred,
                         const LossWeights& w) {
  double loss =
      weighted_bce_mean(scores_enc, labels_enc, w.omega0, w.omega1);
  if (!scores_pred.empty())
    loss += w.rho_pred *
            weighted_bce_mean(scores_pred, labels_pred, w.omega0, w.omega1);
  return loss;
}

// Substitute latent regularizer: mean squared per-dimension batch mean plus
// mean squared deviation of the per-dimension (population) variance from 1.
inline double loss_reg(const Eigen::MatrixXd& Z) {  // d_z x N, column per latent
  const Eigen::Index N = Z.cols();
  if (N < 2) throw std::invalid_argument("loss_reg: batch of fewer than 2");
  const Eigen::VectorXd mu = Z.rowwise().mean();
  const Eigen::VectorXd var =
      (Z.colwise() - mu).array().square().rowwise().mean();
  return mu.array().square().mean() + (var.array() - 1.0).square().mean();
}

inline double loss_reg(std::span<const Latent> latents) {
  if (latents.size() < 2)
    throw std::invalid_argument("loss_reg: batch of fewer than 2");
  Eigen::MatrixXd Z(latents[0].size(), static_cast<Eigen::Index>(latents.size()));
  for (std::size_t i = 0; i < latents.size(); ++i)
    Z.col(static_cast<Eigen::Index>(i)) = latents[i];
  return loss_reg(Z);
}

// ---------------------------------------------------------------------------
// Total objective with tape.

// Records one total_loss evaluation: deduplicated encoded observation slots,
// per-segment rollouts, and per-pair head traces, plus the upstream gradients
// of the scalar loss so backprop() only has to run the network backward
// passes in a fixed order.
struct GradientTape {
  struct Slot {
    int traj, idx;
    EncTrace trace;
    Latent z;
    Eigen::VectorXd d_z;
  };
  struct EncPairRecord {
    int src_slot, tgt_slot;
    HeadTrace trace;
    double d_logit;
  };
  struct PredPairRecord {
    HeadTrace trace;
    double d_logit;  // parameters only; both latent inputs are stop-gradient
  };
  struct SegmentRecord {
    Segment seg;
    std::vector<int> ctx_slots;  // L context slots, oldest first
    std::vector<int> tgt_slots;  // K target slots
    RolloutTrace rollout;
    std::vector<Eigen::VectorXd> d_pred;  // gradient at each predicted latent
    std::vector<PredPairRecord> pred_pairs;
  };

  const ParameterStore* params = nullptr;
  bool recorded = false;
  std::vector<Slot> slots;
  std::vector<EncPairRecord> enc_pairs;
  std::vector<SegmentRecord> segments;
  double d_reg_scale = 0.0;  // alpha
};

struct TotalLossResult {
  double total = 0.0;
  double mh = 0.0;
  double reach_enc = 0.0;
  double reach_pred = 0.0;
  double reg = 0.0;
  std::shared_ptr<GradientTape> tape;
};

// Computes Eq.-15-style total = mh + alpha*reg + beta*reach over a segment
// batch. `pred_pairs` holds the PRED pairs attached to each segment (may be
// empty). Encoded observations are deduplicated into slots; the regularizer
// runs over the unique encoded latents of the batch.
inline TotalLossResult total_loss(
    const ParameterStore& p, const Dataset& ds,
    const std::vector<Segment>& segments,
    const std::vector<ReachPair>& enc_pairs,
    const std::vector<std::vector<ReachPair>>& pred_pairs,
    const LossWeights& w) {
  w.validate();
  if (segments.empty()) throw std::invalid_argument("total_loss: empty batch");
  if (!pred_pairs.empty() && pred_pairs.size() != segments.size())
    throw std::invalid_argument("total_loss: pred_pairs/segment count mismatch");

  auto tape = std::make_shared<GradientTape>();
  tape->params = &p;

  std::map<std::pair<int, int>, int> slot_of;
  auto slot_for = [&](int traj, int idx) {
    const auto key = std::make_pair(traj, idx);
    if (const auto it = slot_of.find(key); it != slot_of.end())
      return it->second;
    GradientTape::Slot slot;
    slot.traj = traj;
    slot.idx = idx;
    slot.z = encode(
        p, ds.trajectories[static_cast<std::size_t>(traj)].obs.col(idx),
        &slot.trace);
    slot.d_z = Eigen::VectorXd::Zero(p.cfg.d_z);
    tape->slots.push_back(std::move(slot));
    const int id = static_cast<int>(tape->slots.size()) - 1;
    slot_of.emplace(key, id);
    return id;
  };

  // Slot registration order: segment contexts and targets first, then any
  // extra pair endpoints; first appearance wins.
  const double S = static_cast<double>(segments.size());
  for (const Segment& seg : segments) {
    GradientTape::SegmentRecord rec;
    rec.seg = seg;
    for (int l = seg.t - seg.L + 1; l <= seg.t; ++l)
      rec.ctx_slots.push_back(slot_for(seg.traj, l));
    for (int k = 1; k <= seg.K; ++k)
      rec.tgt_slots.push_back(slot_for(seg.traj, seg.t + k));
    tape->segments.push_back(std::move(rec));
  }
  for (const ReachPair& rp : enc_pairs) {
    slot_for(rp.src_traj, rp.src_idx);
    slot_for(rp.tgt_traj, rp.tgt_idx);
  }

  TotalLossResult res;
  res.tape = tape;

  // Multi-horizon rollout loss, averaged over segments.
  for (std::size_t si = 0; si < segments.size(); ++si) {
    GradientTape::SegmentRecord& rec = tape->segments[si];
    const Segment& seg = rec.seg;
    if (static_cast<Eigen::Index>(seg.K) != w.w_k.size())
      throw std::invalid_argument("total_loss: w_k length != K");
    const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(seg.traj)];
    std::vector<Latent> ctx;
    ctx.reserve(rec.ctx_slots.size());
    for (int slot : rec.ctx_slots)
      ctx.push_back(tape->slots[static_cast<std::size_t>(slot)].z);
    const std::span<const std::uint8_t> acts(
        tr.actions.data() + seg.t, static_cast<std::size_t>(seg.K));
    const std::vector<Latent> pred =
        rollout_open_loop(p, ctx, acts, &rec.rollout);
    rec.d_pred.assign(static_cast<std::size_t>(seg.K),
                      Eigen::VectorXd::Zero(p.cfg.d_z));
    for (int k = 0; k < seg.K; ++k) {
      const Latent& tgt =
          tape->slots[static_cast<std::size_t>(rec.tgt_slots[k])].z;
      const Eigen::VectorXd diff = pred[static_cast<std::size_t>(k)] - tgt;
      res.mh += w.w_k[k] * diff.squaredNorm() / S;
      const Eigen::VectorXd d = (2.0 * w.w_k[k] / S) * diff;
      rec.d_pred[static_cast<std::size_t>(k)] += d;
      tape->slots[static_cast<std::size_t>(rec.tgt_slots[k])].d_z -= d;
    }

    // PRED pairs: predicted source, encoded target, both stop-gradient.
    if (!pred_pairs.empty()) {
      for (const ReachPair& rp : pred_pairs[si]) {
        if (rp.origin != PairOrigin::PRED)
          throw std::invalid_argument("total_loss: non-PRED pair in pred set");
        if (rp.tgt_idx > seg.K)
          throw std::invalid_argument("total_loss: PRED pair beyond K");
        GradientTape::PredPairRecord pr;
        const Latent& src = pred[static_cast<std::size_t>(rp.src_idx - 1)];
        const Latent& tgt =
            tape->slots[static_cast<std::size_t>(rec.tgt_slots[rp.tgt_idx - 1])]
                .z;
        const double logit = reachability_logit(p, src, tgt, rp.h, &pr.trace);
        const double score = sigmoid_s(logit);
        const double omega = rp.y ? w.omega1 : w.omega0;
        res.reach_pred += omega * bce(score, rp.y);
        pr.d_logit = omega * (score - rp.y);  // scaled later by the mean
        rec.pred_pairs.push_back(std::move(pr));
      }
    }
  }

  // Finish the predicted-pair mean over all PRED pairs in the batch.
  std::size_t n_pred = 0;
  for (const auto& rec : tape->segments) n_pred += rec.pred_pairs.size();
  if (n_pred > 0) {
    res.reach_pred /= static_cast<double>(n_pred);
    const double scale = w.beta * w.rho_pred / static_cast<double>(n_pred);
    for (auto& rec : tape->segments)
      for (auto& pr : rec.pred_pairs) pr.d_logit *= scale;
  }

  // Encoded reachability pairs.
  if (!enc_pairs.empty()) {
    const double N = static_cast<double>(enc_pairs.size());
    for (const ReachPair& rp : enc_pairs) {
      GradientTape::EncPairRecord rec;
      rec.src_slot = slot_of.at({rp.src_traj, rp.src_idx});
      rec.tgt_slot = slot_of.at({rp.tgt_traj, rp.tgt_idx});
      const double logit = reachability_logit(
          p, tape->slots[static_cast<std::size_t>(rec.src_slot)].z,
          tape->slots[static_cast<std::size_t>(rec.tgt_slot)].z, rp.h,
          &rec.trace);
      const double score = sigmoid_s(logit);
      const double omega = rp.y ? w.omega1 : w.omega0;
      res.reach_enc += omega * bce(score, rp.y) / N;
      rec.d_logit = w.beta * omega * (score - rp.y) / N;
      tape->enc_pairs.push_back(std::move(rec));
    }
  }

  // Latent regularizer over the unique encoded latents.
  if (w.alpha > 0.0) {
    const Eigen::Index d = p.cfg.d_z;
    const Eigen::Index N = static_cast<Eigen::Index>(tape->slots.size());
    if (N < 2) throw std::invalid_argument("total_loss: regularizer batch < 2");
    Eigen::MatrixXd Z(d, N);
    for (Eigen::Index i = 0; i < N; ++i)
      Z.col(i) = tape->slots[static_cast<std::size_t>(i)].z;
    const Eigen::VectorXd mu = Z.rowwise().mean();
    const Eigen::VectorXd var =
        (Z.colwise() - mu).array().square().rowwise().mean();
    res.reg = mu.array().square().mean() + (var.array() - 1.0).square().mean();
    // d reg / d z_id = (2/(d*N)) * (mu_d + 2*(var_d - 1)*(z_id - mu_d)).
    const double inv = 2.0 / (static_cast<double>(d) * static_cast<double>(N));
    for (Eigen::Index i = 0; i < N; ++i) {
      auto& slot = tape->slots[static_cast<std::size_t>(i)];
      slot.d_z.array() +=
          w.alpha * inv *
          (mu.array() + 2.0 * (var.array() - 1.0) * (Z.col(i) - mu).array());
    }
    tape->d_reg_scale = w.alpha;
  }

  res.total = res.mh + w.alpha * res.reg +
              w.beta * (res.reach_enc + w.rho_pred * res.reach_pred);
  tape->recorded = true;
  return res;
}

// Reverse pass over a recorded tape: head backward for every pair, BPTT
// through each segment rollout, then encoder backward per slot — all in
// fixed order so accumulation is bitwise deterministic.
inline GradStore backprop(const GradientTape& tape) {
  if (!tape.recorded || tape.params == nullptr)
    throw std::runtime_error("backprop: tape has no recorded loss");
  const ParameterStore& p = *tape.params;
  GradStore g(p.cfg);

  // Local copies of the slot gradients keep the tape const and the pass
  // repeatable.
  std::vector<Eigen::VectorXd> d_slot;
  d_slot.reserve(tape.slots.size());
  for (const auto& slot : tape.slots) d_slot.push_back(slot.d_z);

  for (const auto& rec : tape.enc_pairs)
    head_backward(p, rec.trace, rec.d_logit, g,
                  &d_slot[static_cast<std::size_t>(rec.src_slot)],
                  &d_slot[static_cast<std::size_t>(rec.tgt_slot)]);

  for (const auto& seg : tape.segments)
    for (const auto& pr : seg.pred_pairs)
      head_backward(p, pr.trace, pr.d_logit, g, nullptr, nullptr);

  for (const auto& seg : tape.segments) {
    const Eigen::VectorXd d_ctx =
        rollout_backward(p, seg.rollout, seg.d_pred, g);
    // Only the most recent context latent feeds the dynamics.
    d_slot[static_cast<std::size_t>(seg.ctx_slots.back())] += d_ctx;
  }

  for (std::size_t i = 0; i < tape.slots.size(); ++i)
    encode_backward(p, tape.slots[i].trace, d_slot[i], g);

  return g;
}

}  // namespace rcaux
