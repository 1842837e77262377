#include <random>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "fmc/error.hpp"
#include "fmc/ptrnn.hpp"
#include "oracles.hpp"

using namespace fmc;

namespace {

Grid random_grid(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Grid g(h, w, c);
  for (double& v : g.values()) v = n(rng);
  return g;
}

FlowPair still(int h, int w) { return {Grid(h, w, 2), Grid(h, w, 2)}; }

const PtrnnVariant kVariants[] = {PtrnnVariant::standard, PtrnnVariant::conv, PtrnnVariant::conv_gru};

}  // namespace

TEST(PtrnnInit, BackgroundGivesZeroState) {
  for (PtrnnVariant v : kVariants) {
    const PtrnnParams p = PtrnnParams::random(v, 3, 1);
    const PtrnnState s = ptrnn_init(random_grid(5, 5, 3, 2), Grid(5, 5, 1), p);
    for (double x : s.h.values()) EXPECT_EQ(x, 0.0);
    for (double x : s.weight.values()) EXPECT_EQ(x, 0.0);
    EXPECT_TRUE(finalize_all(s, p).entries.empty());
  }
}

TEST(PtrnnInit, ForcedUnitWeight) {
  PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::conv, 3);
  p.forced_weight = 1.0;
  Grid m(4, 4, 1);
  m(1, 2) = 1.0;
  const Grid x = random_grid(4, 4, 3, 3);
  const PtrnnState s = ptrnn_init(x, m, p);
  for (int ch = 0; ch < 3; ++ch) {
    EXPECT_EQ(s.h(1, 2, ch), x(1, 2, ch));
    EXPECT_EQ(s.weight(1, 2, ch), 1.0);
  }
  EXPECT_TRUE(s.live(1, 2));
  EXPECT_FALSE(s.live(0, 0));
}

TEST(PtrnnInit, Deterministic) {
  const PtrnnParams p = PtrnnParams::random(PtrnnVariant::conv_gru, 3, 4);
  const Grid x = random_grid(6, 6, 3, 5);
  const Grid m(6, 6, 1, 1.0);
  const PtrnnState a = ptrnn_init(x, m, p), b = ptrnn_init(x, m, p);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.weight, b.weight);
  EXPECT_EQ(a.memory, b.memory);
}

TEST(PtrnnStep, ConstantEmbeddingsKeepTheirValue) {
  PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::standard, 2);
  p.forced_weight = 1.0;
  Grid x(3, 3, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      x(r, c, 0) = 0.6;
      x(r, c, 1) = -0.8;
    }
  const Grid m(3, 3, 1, 1.0);
  const FlowPair pair = still(3, 3);
  PtrnnState s = ptrnn_init(x, m, p);
  for (int t = 1; t < 5; ++t) {
    const LinkMask link = link_mask(pair, m, m, t);
    EXPECT_TRUE(ptrnn_step(s, x, pair, link, m, p).entries.empty());
  }
  const auto out = finalize_all(s, p);
  ASSERT_EQ(out.entries.size(), 9u);
  for (const auto& e : out.entries) {
    EXPECT_EQ(e.length, 5);
    EXPECT_NEAR(e.raw[0], 0.6, 1e-15);
    EXPECT_NEAR(e.raw[1], -0.8, 1e-15);
  }
}

TEST(PtrnnStep, LengthOneTrajectoryEmitsItsEmbedding) {
  for (PtrnnVariant v : kVariants) {
    const PtrnnParams p = PtrnnParams::random(v, 3, 6);
    Grid m0(4, 4, 1);
    m0(2, 1) = 1.0;
    const Grid x0 = random_grid(4, 4, 3, 7);
    PtrnnState s = ptrnn_init(x0, m0, p);
    const Grid m1(4, 4, 1);
    const FlowPair pair = still(4, 4);
    const auto ended = ptrnn_step(s, random_grid(4, 4, 3, 8), pair, link_mask(pair, m0, m1, 1), m1, p);
    ASSERT_EQ(ended.entries.size(), 1u);
    const auto& e = ended.entries[0];
    EXPECT_EQ(e.end_frame, 0);
    EXPECT_EQ(e.end_row, 2);
    EXPECT_EQ(e.end_col, 1);
    EXPECT_EQ(e.length, 1);
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(e.raw[ch], x0(2, 1, ch), 1e-14);
  }
}

TEST(PtrnnStep, MatchesDirectSummation) {
  const checks::Report rep = checks::ptrnn_equivalence(8, 17);
  EXPECT_TRUE(rep.passed) << rep.lines.back();
  EXPECT_LT(rep.measured, 1e-9);
}

TEST(PtrnnStep, RandomSequencesContainSharedSources) {
  // The oracle's sequences must exercise the branch rule.
  oracle::Rng rng(18);
  int shared = 0;
  for (int i = 0; i < 10; ++i) {
    const auto seq = oracle::random_sequence(16, 16, 3, 2, rng);
    for (std::size_t t = 1; t < seq.x.size(); ++t) {
      const LinkMask link = link_mask(seq.pairs[t - 1], seq.fg[t - 1], seq.fg[t], static_cast<int>(t));
      std::map<std::array<int, 2>, int> claims;
      for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
          if (link.grid(r, c) > 0.5) ++claims[*rounded_source(seq.pairs[t - 1].backward, r, c)];
      for (const auto& [src, n] : claims) shared += n > 1;
    }
  }
  EXPECT_GT(shared, 0);
}

TEST(PtrnnWeights, InUnitInterval) {
  for (PtrnnVariant v : kVariants) {
    const PtrnnParams p = PtrnnParams::random(v, 4, 9, 2.0);
    Grid memory = v == PtrnnVariant::conv_gru ? Grid(6, 6, 4) : Grid();
    const Grid w = ptrnn_weights(random_grid(6, 6, 4, 10), random_grid(6, 6, 4, 11), memory, p);
    for (double x : w.values()) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(PtrnnWeights, StandardIsScalarPerPixel) {
  const PtrnnParams p = PtrnnParams::random(PtrnnVariant::standard, 4, 12);
  Grid memory;
  const Grid w = ptrnn_weights(random_grid(3, 3, 4, 13), random_grid(3, 3, 4, 14), memory, p);
  for (int ch = 1; ch < 4; ++ch) EXPECT_EQ(w(1, 1, ch), w(1, 1, 0));
}

TEST(PtrnnWeights, ReceptiveField) {
  const Grid ratio = random_grid(5, 5, 3, 15);
  const Grid x = random_grid(5, 5, 3, 16);
  Grid nudged = x;
  nudged(2, 3, 0) += 1.0;  // neighbour of (2, 2)
  for (PtrnnVariant v : kVariants) {
    const PtrnnParams p = PtrnnParams::random(v, 3, 17, 1.0);
    Grid m1 = v == PtrnnVariant::conv_gru ? Grid(5, 5, 3) : Grid();
    Grid m2 = m1;
    const Grid a = ptrnn_weights(ratio, x, m1, p);
    const Grid b = ptrnn_weights(ratio, nudged, m2, p);
    if (v == PtrnnVariant::standard) {
      EXPECT_EQ(a(2, 2, 0), b(2, 2, 0));
    } else {
      EXPECT_NE(a(2, 2, 0), b(2, 2, 0)) << variant_name(v);
    }
  }
}

TEST(PtrnnStep, ConstantWeightScaleCancels) {
  oracle::Rng rng(19);
  const auto seq = oracle::random_sequence(10, 10, 4, 3, rng);
  std::vector<std::vector<TrajectoryEmbedding>> runs;
  for (double k : {0.25, 0.9}) {
    PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::conv, 3);
    p.forced_weight = k;
    TrajectoryEmbeddingSet out;
    PtrnnState s = ptrnn_init(seq.x[0], seq.fg[0], p);
    for (int t = 1; t < 4; ++t) {
      out.append(ptrnn_step(s, seq.x[t], seq.pairs[t - 1], link_mask(seq.pairs[t - 1], seq.fg[t - 1], seq.fg[t], t),
                            seq.fg[t], p));
    }
    out.append(finalize_all(s, p));
    runs.push_back(out.entries);
  }
  ASSERT_EQ(runs[0].size(), runs[1].size());
  for (std::size_t i = 0; i < runs[0].size(); ++i) {
    EXPECT_NEAR((runs[0][i].raw - runs[1][i].raw).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(PtrnnStep, EmittedEmbeddingsAreUnit) {
  oracle::Rng rng(20);
  const auto seq = oracle::random_sequence(12, 12, 5, 4, rng);
  for (PtrnnVariant v : kVariants) {
    const PtrnnParams p = PtrnnParams::random(v, 4, 21);
    TrajectoryEmbeddingSet out;
    PtrnnState s = ptrnn_init(seq.x[0], seq.fg[0], p);
    for (int t = 1; t < 5; ++t) {
      out.append(ptrnn_step(s, seq.x[t], seq.pairs[t - 1], link_mask(seq.pairs[t - 1], seq.fg[t - 1], seq.fg[t], t),
                            seq.fg[t], p));
    }
    out.append(finalize_all(s, p));
    ASSERT_FALSE(out.entries.empty());
    for (const auto& e : out.entries) EXPECT_NEAR(e.embedding.norm(), 1.0, 1e-9);
  }
}

TEST(Scm, ZeroWeightsPassRawThrough) {
  const Vector raw = Vector::LinSpaced(5, -1.0, 1.0);
  EXPECT_EQ(scm_apply(raw, {0.3, -0.2, 0.1, 0.0}, ScmParams::zeros(5)), raw);
}

TEST(Scm, StationaryCentrePixel) {
  const auto stats = scm_stats(4.0, 3.0, 0.0, 0.0, 7, 9);
  for (double s : stats) EXPECT_EQ(s, 0.0);
  ScmParams scm = ScmParams::zeros(3);
  scm.fc1 = Eigen::MatrixXd::Constant(3, 4, 5.0);
  scm.b1 << 1.0, -1.0, 2.0;
  scm.fc2 = Eigen::MatrixXd::Identity(3, 3);
  scm.b2 << 0.5, 0.5, 0.5;
  const Vector raw = Vector::Zero(3);
  const Vector out = scm_apply(raw, stats, scm);
  EXPECT_DOUBLE_EQ(out[0], 1.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
  EXPECT_DOUBLE_EQ(out[2], 2.5);
}

TEST(Scm, StatsRange) {
  const auto corner = scm_stats(0.0, 10.0, 10.0, -10.0, 11, 11);
  EXPECT_DOUBLE_EQ(corner[0], -1.0);
  EXPECT_DOUBLE_EQ(corner[1], 1.0);
  EXPECT_DOUBLE_EQ(corner[2], 1.0);
  EXPECT_DOUBLE_EQ(corner[3], -1.0);
}

TEST(Scm, LengthOneHasNoDisplacement) {
  PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::conv, 2);
  Grid m(5, 5, 1);
  m(0, 4) = 1.0;
  const auto out = finalize_all(ptrnn_init(random_grid(5, 5, 2, 22), m, p), p);
  ASSERT_EQ(out.entries.size(), 1u);
  EXPECT_EQ(out.entries[0].stats[2], 0.0);
  EXPECT_EQ(out.entries[0].stats[3], 0.0);
  EXPECT_DOUBLE_EQ(out.entries[0].stats[0], 1.0);
  EXPECT_DOUBLE_EQ(out.entries[0].stats[1], -1.0);
}

TEST(Finalize, WeightedMeanNormalises) {
  PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::conv, 3);
  p.forced_weight = 2.0;
  Grid m(2, 2, 1);
  m(1, 1) = 1.0;
  Grid x(2, 2, 3);
  x(1, 1, 0) = 0.0;
  x(1, 1, 1) = 0.6;
  x(1, 1, 2) = 0.8;
  const PtrnnState s = ptrnn_init(x, m, p);
  EXPECT_DOUBLE_EQ(s.h(1, 1, 2), 1.6);
  EXPECT_DOUBLE_EQ(s.weight(1, 1, 2), 2.0);
  const auto out = finalize_all(s, p);
  ASSERT_EQ(out.entries.size(), 1u);
  EXPECT_NEAR(out.entries[0].embedding[1], 0.6, 1e-15);
  EXPECT_NEAR(out.entries[0].embedding[2], 0.8, 1e-15);
}

TEST(Finalize, CountEqualsLiveForeground) {
  oracle::Rng rng(23);
  const auto seq = oracle::random_sequence(10, 12, 3, 2, rng);
  const PtrnnParams p = PtrnnParams::random(PtrnnVariant::standard, 2, 24);
  PtrnnState s = ptrnn_init(seq.x[0], seq.fg[0], p);
  for (int t = 1; t < 3; ++t) {
    ptrnn_step(s, seq.x[t], seq.pairs[t - 1], link_mask(seq.pairs[t - 1], seq.fg[t - 1], seq.fg[t], t), seq.fg[t], p);
  }
  const auto out = finalize_all(s, p);
  std::size_t live = 0;
  for (double v : seq.fg[2].values()) live += v > 0.5;
  EXPECT_EQ(out.entries.size() + out.rejected.size(), live);
}

TEST(Finalize, ZeroEmbeddingRejected) {
  const PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::conv, 2);
  Grid m(2, 2, 1);
  m(0, 0) = 1.0;
  const auto out = finalize_all(ptrnn_init(Grid(2, 2, 2), m, p), p);
  EXPECT_TRUE(out.entries.empty());
  ASSERT_EQ(out.rejected.size(), 1u);
  EXPECT_EQ(out.rejected[0].end_row, 0);
}

TEST(PtrnnParams, RoundTripAndVariantDetection) {
  for (PtrnnVariant v : kVariants) {
    const PtrnnParams p = PtrnnParams::random(v, 3, 25);
    io::ParamSet set;
    p.to_params(set);
    const PtrnnParams back = PtrnnParams::from_params(set);
    EXPECT_EQ(back.variant, v);
    EXPECT_EQ(back.channels, 3);
    EXPECT_NEAR((back.scm.fc2 - p.scm.fc2).cwiseAbs().maxCoeff(), 0.0, 1e-6);
  }
}

TEST(PtrnnParams, ParseVariant) {
  EXPECT_EQ(parse_variant("convGRU"), PtrnnVariant::conv_gru);
  EXPECT_EQ(parse_variant("standard"), PtrnnVariant::standard);
  EXPECT_THROW(parse_variant("lstm"), ConfigError);
}

TEST(PtrnnStep, ChannelMismatchThrows) {
  const PtrnnParams p = PtrnnParams::zeros(PtrnnVariant::conv, 3);
  EXPECT_THROW(ptrnn_init(Grid(4, 4, 2), Grid(4, 4, 1), p), ShapeError);
}
