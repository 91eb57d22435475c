#include "rcaux/train.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

using namespace rcaux;

ModelConfig tiny_arch() {
  ModelConfig cfg;
  cfg.d_z = 4;
  cfg.enc_hidden = 8;
  cfg.dyn_hidden = 8;
  cfg.head_hidden = 6;
  return cfg;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.K = 3;
  cfg.H_max = 6;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 5;
  cfg.seed = 17;
  return cfg;
}

TEST(TrainConfig, ResolvedNormalizesBaseline) {
  TrainConfig cfg = small_config();
  cfg.mode = "one_step_baseline";
  const TrainConfig r = cfg.resolved();
  EXPECT_EQ(r.K, 1);
  EXPECT_EQ(r.beta, 0.0);
  EXPECT_EQ(r.weights().w_k.size(), 1);

  cfg.mode = "rc_aux";
  EXPECT_EQ(cfg.resolved().K, 3);

  cfg.mode = "mystery";
  EXPECT_THROW(cfg.resolved(), std::invalid_argument);
  cfg.mode = "rc_aux";
  cfg.optimizer = "rmsprop";
  EXPECT_THROW(cfg.resolved(), std::invalid_argument);
  cfg.optimizer = "adam";
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.resolved(), std::invalid_argument);
}

TEST(TrainConfig, ProfileOverridesCollapseKnobs) {
  const TrainConfig wall = train_profile("wall");
  EXPECT_EQ(wall.alpha, 1.0);
  EXPECT_EQ(wall.epochs, 200);
  EXPECT_EQ(wall.omega1, 3.0);
  EXPECT_EQ(wall.mode, "rc_aux");
  EXPECT_NO_THROW(wall.resolved());
  EXPECT_NO_THROW(train_profile("tworoom"));
  EXPECT_NO_THROW(train_profile("open"));
  EXPECT_THROW(train_profile("maze"), std::invalid_argument);
}

TEST(Optimizers, SgdAndAdamStepDirections) {
  ModelConfig mc = tiny_arch();
  mc.obs_dim = 9;
  ParameterStore p(mc);
  p.init(1);
  GradStore g(mc);
  g.set_zero();
  g.enc_b1[0] = 2.0;

  ParameterStore q = p;
  sgd_step(q, g, 0.5);
  EXPECT_DOUBLE_EQ(q.enc_b1[0], p.enc_b1[0] - 1.0);
  EXPECT_EQ(q.enc_b1[1], p.enc_b1[1]);
  EXPECT_EQ(q.enc_W1, p.enc_W1);

  // First Adam step moves by ~lr / (1 + eps/|g|) against the gradient sign.
  ParameterStore r = p;
  Adam adam(mc, 1e-3);
  adam.step(r, g);
  EXPECT_NEAR(r.enc_b1[0], p.enc_b1[0] - 1e-3, 1e-8);
  EXPECT_EQ(r.enc_b1[1], p.enc_b1[1]);

  EXPECT_DOUBLE_EQ(grad_norm(g), 2.0);
}

TEST(Fit, SeedDeterminismBitwise) {
  const GridSpec grid = make_open(3, 3);
  const Dataset ds = generate_trajectories(grid, PolicyId::UniformRandom, 4, 12, 5);
  const TrainConfig cfg = small_config();

  const FitResult a = fit(ds, tiny_arch(), cfg);
  const FitResult b = fit(ds, tiny_arch(), cfg);
  EXPECT_EQ(a.params.enc_W1, b.params.enc_W1);
  EXPECT_EQ(a.params.dyn_W1, b.params.dyn_W1);
  EXPECT_EQ(a.params.head_W1, b.params.head_W1);
  EXPECT_EQ(a.params.head_b2, b.params.head_b2);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].total, b.log[i].total);
    EXPECT_EQ(a.log[i].grad_norm, b.log[i].grad_norm);
  }

  TrainConfig other = cfg;
  other.seed = 18;
  const FitResult c = fit(ds, tiny_arch(), other);
  EXPECT_NE(a.params.enc_W1, c.params.enc_W1);
}

TEST(Fit, SingleSegmentOverfitDrivesMhDown) {
  // One trajectory with exactly one valid (L=1, K=3) anchor: every batch is
  // the same segment, and 2000 Adam steps should crush the prediction loss.
  const GridSpec grid = make_open(3, 3);
  const Dataset ds = generate_trajectories(grid, PolicyId::UniformRandom, 1, 4, 9);

  TrainConfig cfg;
  cfg.K = 3;
  cfg.H_max = 6;
  cfg.batch_size = 2;
  cfg.epochs = 20;
  cfg.steps_per_epoch = 100;
  cfg.seed = 3;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  const FitResult res = fit(ds, tiny_arch(), cfg);
  EXPECT_LT(res.log.back().mh, 1e-3)
      << "final mh " << res.log.back().mh << " after 2000 steps";
  EXPECT_EQ(res.log.back().reach_enc, 0.0);
  EXPECT_EQ(res.log.back().reach_pred, 0.0);
}

TEST(Fit, TabularHeadOverfitOnFourPairFixture) {
  // Four handcrafted pairs with distinct inputs and consistent labels; the
  // head (plus encoder) must drive every score to within 0.05 of its label.
  // Pairs A/B share endpoints and differ only in budget, so the head has to
  // use the budget feature.
  const GridSpec grid = make_open(3, 3);
  const Dataset ds = generate_trajectories(grid, PolicyId::UniformRandom, 2, 10, 21);
  ModelConfig mc = tiny_arch();
  mc.obs_dim = ds.obs_dim;
  mc.H_max = 6;
  ParameterStore p(mc);
  p.init(4);

  const std::vector<Segment> segments = {{0, 0, 1, 3}, {1, 0, 1, 3}};
  std::vector<ReachPair> pairs(4);
  pairs[0] = {PairOrigin::POS, 0, 0, 0, 3, 5, 1, 3};
  pairs[1] = {PairOrigin::HARD_NEG, 0, 0, 0, 3, 1, 0, 3};
  pairs[2] = {PairOrigin::POS, 1, 0, 1, 2, 4, 1, 2};
  pairs[3] = {PairOrigin::HARD_NEG, 1, 1, 1, 4, 0, 0, 3};

  LossWeights w = LossWeights::defaults(3);
  w.w_k.setZero();
  w.alpha = 0.0;
  w.beta = 1.0;
  w.rho_pred = 0.0;

  Adam adam(mc, 3e-3);
  for (int step = 0; step < 2000; ++step) {
    const TotalLossResult res = total_loss(p, ds, segments, pairs, {}, w);
    adam.step(p, backprop(*res.tape));
  }
  for (const ReachPair& rp : pairs) {
    const Latent src = encode(
        p, ds.trajectories[static_cast<std::size_t>(rp.src_traj)].obs.col(rp.src_idx));
    const Latent tgt = encode(
        p, ds.trajectories[static_cast<std::size_t>(rp.tgt_traj)].obs.col(rp.tgt_idx));
    const double score = reachability_score(p, src, tgt, rp.h);
    EXPECT_NEAR(score, rp.y, 0.05) << "pair (" << rp.src_idx << "->"
                                   << rp.tgt_idx << ", h=" << rp.h << ")";
  }
}

TEST(Fit, LossDecreasesOnWallSmoke) {
  const GridSpec grid = make_wall();
  const Dataset ds = generate_trajectories(grid, PolicyId::Mixed, 20, 30, 11);

  TrainConfig cfg;
  cfg.K = 6;
  cfg.H_max = 12;
  cfg.batch_size = 16;
  cfg.epochs = 10;
  cfg.steps_per_epoch = 20;
  cfg.seed = 2;
  const FitResult res = fit(ds, ModelConfig{}, cfg);
  ASSERT_EQ(res.log.size(), 10u);
  EXPECT_GT(res.log.front().total, res.log.back().total);
  for (const EpochMetrics& em : res.log) {
    EXPECT_GT(em.reach_enc, 0.0);
    EXPECT_GT(em.reach_pred, 0.0);
    EXPECT_GT(em.grad_norm, 0.0);
  }
}

TEST(Fit, BaselineModeProducesNoReachSignal) {
  const GridSpec grid = make_open(3, 3);
  const Dataset ds = generate_trajectories(grid, PolicyId::UniformRandom, 4, 12, 5);
  TrainConfig cfg = small_config();
  cfg.mode = "one_step_baseline";
  const FitResult res = fit(ds, tiny_arch(), cfg);
  for (const EpochMetrics& em : res.log) {
    EXPECT_EQ(em.reach_enc, 0.0);
    EXPECT_EQ(em.reach_pred, 0.0);
    EXPECT_GT(em.mh, 0.0);
  }
  EXPECT_EQ(res.params.cfg.H_max, cfg.H_max);
}

TEST(Fit, DivergenceAborts) {
  const GridSpec grid = make_open(3, 3);
  const Dataset ds = generate_trajectories(grid, PolicyId::UniformRandom, 2, 10, 7);
  TrainConfig cfg = small_config();
  cfg.optimizer = "sgd";
  cfg.lr = 1e6;
  cfg.epochs = 1;
  cfg.steps_per_epoch = 50;
  try {
    fit(ds, tiny_arch(), cfg);
    FAIL() << "expected TrainDivergence";
  } catch (const TrainDivergence& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(MetricsCsv, RoundTripThroughDisk) {
  std::vector<EpochMetrics> log(2);
  log[0] = {0, 1.5, 1.0, 0.25, 0.125, 0.5, 2.0};
  log[1] = {1, 0.75, 0.5, 0.125, 0.0625, 0.25, 1.0};
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "rcaux_metrics_test.csv";
  write_metrics_csv(path.string(), log);

  std::ifstream in(path);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line,
            "epoch,loss_total,loss_mh,loss_reach_enc,loss_reach_pred,"
            "loss_reg,grad_norm");
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "0,1.5,1,0.25,0.125,0.5,2");
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "1,0.75,0.5,0.125,0.0625,0.25,1");
  EXPECT_FALSE(std::getline(in, line));
  std::filesystem::remove(path);
}

}  // namespace
