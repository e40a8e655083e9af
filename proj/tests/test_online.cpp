#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "aobtm/online.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aobtm;

namespace {

TopicMatrix random_phi(std::size_t k, std::size_t w, Rng& rng) {
  TopicMatrix phi(k, w);
  for (std::size_t r = 0; r < k; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < w; ++c) total += (phi(r, c) = 0.05 + rng.uniform());
    for (std::size_t c = 0; c < w; ++c) phi(r, c) /= total;
  }
  return phi;
}

// Three slices with a vocabulary growing 3 -> 4 -> 5 words, K = 2.
struct ThreeSliceFixture {
  PhiHistory history;
  std::vector<TopicMatrix> phis;  // oldest first
  Matrix<Count> counts{2, 5};
  Matrix<double> beta_prev{2, 5};

  ThreeSliceFixture() {
    Rng rng(2024);
    for (std::size_t i = 0; i < 3; ++i) {
      phis.push_back(random_phi(2, 3 + i, rng));
      history.push({i + 1, phis.back(), Matrix<double>(2, 3 + i, 0.01)});
    }
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t w = 0; w < 5; ++w) {
        counts(k, w) = static_cast<Count>(rng.below(6));
        beta_prev(k, w) = 0.01 + 3.0 * rng.uniform();
      }
    counts(1, 4) = 0;  // exercises the mixture-only path
  }

  oracle::Mat oracle_beta(std::size_t win) const {
    std::vector<oracle::Mat> recent;
    for (std::size_t i = 0; i < win; ++i) {
      const auto& p = phis[phis.size() - 1 - i];
      oracle::Mat m;
      for (std::size_t r = 0; r < p.rows(); ++r) m.emplace_back(p.row(r).begin(), p.row(r).end());
      recent.push_back(m);
    }
    std::vector<std::vector<long long>> c(2, std::vector<long long>(5));
    oracle::Mat b(2, oracle::Row(5));
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t w = 0; w < 5; ++w) {
        c[k][w] = counts(k, w);
        b[k][w] = beta_prev(k, w);
      }
    return oracle::adapt_beta(recent, c, b, win, 1e-9L);
  }
};

}  // namespace

TEST(AdaptiveWeights, SingletonWindowIsOne) {
  ThreeSliceFixture f;
  EXPECT_EQ(adaptive_weights(0, f.history, f.beta_prev.row(0), 1), std::vector<double>{1.0});
}

TEST(AdaptiveWeights, EqualSimilaritiesGiveEqualWeights) {
  PhiHistory h;
  TopicMatrix phi(1, 2, 0.5);
  h.push({1, phi, {}});
  h.push({2, phi, {}});
  const std::vector<double> beta{3.0, 1.0};
  const auto g = adaptive_weights(0, h, beta, 2);
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
}

TEST(AdaptiveWeights, LogTwoGapGivesOneThirdTwoThirds) {
  // With beta = (1, 0) the dot product picks out phi[0].
  for (double d : {0.0, 0.3, 0.05}) {
    PhiHistory h;
    TopicMatrix older(1, 2), newer(1, 2);
    older(0, 0) = d + std::log(2.0);
    older(0, 1) = 1.0 - older(0, 0);
    newer(0, 0) = d;
    newer(0, 1) = 1.0 - d;
    h.push({1, older, {}});
    h.push({2, newer, {}});
    const std::vector<double> beta{1.0, 0.0};
    const auto g = adaptive_weights(0, h, beta, 2);  // (newest, older)
    EXPECT_NEAR(g[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(g[1], 2.0 / 3.0, 1e-12);
  }
}

TEST(AdaptiveWeights, ShiftInvariantAndOnSimplex) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> sims(1 + rng.below(6));
    for (auto& s : sims) s = 20.0 * rng.uniform() - 10.0;
    const auto base = softmax(sims);
    EXPECT_NEAR(std::accumulate(base.begin(), base.end(), 0.0), 1.0, 1e-12);
    for (double c : {-700.0, 3.5, 800.0}) {
      auto shifted = sims;
      for (auto& s : shifted) s += c;
      const auto g = softmax(shifted);
      for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_GE(g[i], 0.0);
        EXPECT_NEAR(g[i], base[i], 1e-12);
      }
    }
  }
}

TEST(AdaptiveWeights, HistoryTooShortThrows) {
  ThreeSliceFixture f;
  EXPECT_THROW(adaptive_weights(0, f.history, f.beta_prev.row(0), 4), Error);
  EXPECT_THROW(adaptive_weights(0, f.history, f.beta_prev.row(0), 0), Error);
}

TEST(AdaptBeta, WindowOneAddsLatestPhi) {
  ThreeSliceFixture f;
  const auto beta = adapt_beta(f.history, f.counts, f.beta_prev, 1);
  const auto& latest = f.phis.back();
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t w = 0; w < 5; ++w)
      EXPECT_DOUBLE_EQ(beta(k, w), std::max(1e-9, static_cast<double>(f.counts(k, w)) + latest(k, w)));
}

TEST(AdaptBeta, ZeroCountsEqualWeightsGiveMean) {
  PhiHistory h;
  TopicMatrix a(1, 2), b(1, 2);
  a(0, 0) = 0.2;
  a(0, 1) = 0.8;
  b(0, 0) = 0.8;
  b(0, 1) = 0.2;
  h.push({1, a, {}});
  h.push({2, b, {}});
  const Matrix<double> beta_prev(1, 2, 1.0);  // equal dot products
  const auto beta = adapt_beta(h, Matrix<Count>(1, 2, 0), beta_prev, 2);
  EXPECT_NEAR(beta(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(beta(0, 1), 0.5, 1e-15);
}

TEST(AdaptBeta, MatchesOracleForEveryWindow) {
  ThreeSliceFixture f;
  for (std::size_t win = 1; win <= 3; ++win) {
    const auto got = adapt_beta(f.history, f.counts, f.beta_prev, win);
    const auto want = f.oracle_beta(win);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t w = 0; w < 5; ++w)
        EXPECT_NEAR(got(k, w), static_cast<double>(want[k][w]), 1e-12) << "win=" << win;
  }
}

TEST(AdaptBeta, FloorsUnseenWords) {
  PhiHistory h;
  TopicMatrix narrow(1, 2, 0.5);
  h.push({1, narrow, {}});
  const auto beta = adapt_beta(h, Matrix<Count>(1, 4, 0), Matrix<double>(1, 2, 1.0), 1);
  EXPECT_EQ(beta(0, 2), 1e-9);
  EXPECT_EQ(beta(0, 3), 1e-9);
  for (double v : beta.data()) EXPECT_GT(v, 0.0);
}

TEST(AdaptBeta, WindowLongerThanHistoryThrows) {
  ThreeSliceFixture f;
  EXPECT_THROW(adapt_beta(f.history, f.counts, f.beta_prev, 4), Error);
  EXPECT_THROW(adapt_beta(PhiHistory{}, f.counts, f.beta_prev, 1), Error);
}

TEST(PhiHistory, CapacityAndOrdering) {
  PhiHistory h(2);
  for (std::size_t t = 1; t <= 4; ++t) h.push({t, TopicMatrix(1, 1, 1.0), {}});
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h.recent(1).slice_index, 4u);
  EXPECT_EQ(h.recent(2).slice_index, 3u);
  EXPECT_THROW(h.push({4, TopicMatrix(1, 1, 1.0), {}}), Error);
  EXPECT_THROW(h.push({5, TopicMatrix(2, 1, 0.5), {}}), Error);
}

TEST(UpdateAlpha, ElementwiseSum) {
  const std::vector<double> a{0.05, 0.05};
  const std::vector<Count> n{10, 20};
  const auto out = update_alpha(a, n);
  EXPECT_DOUBLE_EQ(out[0], 10.05);
  EXPECT_DOUBLE_EQ(out[1], 20.05);
  const std::vector<Count> zero{0, 0};
  EXPECT_EQ(update_alpha(a, zero), a);
  EXPECT_DOUBLE_EQ(HyperParams::for_topics(10).alpha0, 5.0);
  const std::vector<Count> three{1, 2, 3};
  EXPECT_THROW(update_alpha(a, three), Error);
}

TEST(Obtm, SingleSliceEqualsBtm) {
  const auto s = fixtures::random_slice(1, 20, 30, 6, 1);
  const auto hp = HyperParams::for_topics(3, 20, 99);
  const auto chain = run_obtm(std::span(&s, 1), hp);
  const auto btm = run_btm(s, hp);
  EXPECT_EQ(chain[0].phi, btm.phi);
  EXPECT_EQ(chain[0].theta, btm.theta);
}

TEST(Obtm, EmptySecondSliceKeepsPhi) {
  std::vector<TimeSlice> slices{fixtures::random_slice(1, 15, 20, 5, 2)};
  TimeSlice empty;
  empty.index = 2;
  empty.vocab_size = 15;
  slices.push_back(empty);
  const auto hp = HyperParams::for_topics(3, 10, 4);
  const auto out = run_obtm(slices, hp);
  const auto& first = out[0].model;
  const auto& second = out[1].model;
  EXPECT_EQ(second.alpha, update_alpha(first.alpha, first.topic_counts));
  EXPECT_EQ(second.beta, accumulate_beta(first.beta, first.word_counts));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t w = 0; w < 15; ++w) EXPECT_NEAR(out[1].phi(k, w), out[0].phi(k, w), 1e-12);
}

TEST(Obtm, PriorsNondecreasingAcrossSlices) {
  std::vector<TimeSlice> slices;
  for (std::size_t t = 1; t <= 3; ++t) slices.push_back(fixtures::random_slice(t, 10 + 3 * t, 25, 5, t));
  const auto out = run_obtm(slices, HyperParams::for_topics(4, 10, 6));
  for (std::size_t t = 1; t < out.size(); ++t) {
    const auto& prev = out[t - 1].model.beta;
    const auto& cur = out[t].model.beta;
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t w = 0; w < prev.cols(); ++w) EXPECT_GE(cur(k, w), prev(k, w));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_GE(out[t].model.alpha[k], out[t - 1].model.alpha[k]);
  }
}

TEST(Aobtm, OversizedWindowClampsToAvailableHistory) {
  std::vector<TimeSlice> slices{fixtures::random_slice(1, 12, 20, 5, 1),
                                fixtures::random_slice(2, 12, 20, 5, 2)};
  const auto hp = HyperParams::for_topics(3, 10, 8);
  const auto wide = run_aobtm(slices, hp, 5);
  const auto one = run_aobtm(slices, hp, 1);
  EXPECT_EQ(wide[1].model.beta, one[1].model.beta);
  EXPECT_EQ(wide[1].phi, one[1].phi);
}

TEST(Aobtm, WindowOnePriorIsCountsPlusPhi) {
  std::vector<TimeSlice> slices{fixtures::random_slice(1, 12, 20, 5, 1),
                                fixtures::random_slice(2, 12, 20, 5, 2)};
  const auto hp = HyperParams::for_topics(3, 10, 8);
  const auto a = run_aobtm(slices, hp, 1);
  const auto o = run_obtm(slices, hp);
  // Slice 1 is identical; slice 2's priors differ only in the phi-vs-beta term.
  EXPECT_EQ(a[0].phi, o[0].phi);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t w = 0; w < 12; ++w) {
      const double counts = static_cast<double>(a[0].model.word_counts(k, w));
      EXPECT_DOUBLE_EQ(a[1].model.beta(k, w), std::max(1e-9, counts + a[0].phi(k, w)));
      EXPECT_DOUBLE_EQ(o[1].model.beta(k, w), a[0].model.beta(k, w) + counts);
    }
}

TEST(Aobtm, DeterministicReplayAndSimplex) {
  std::vector<TimeSlice> slices;
  for (std::size_t t = 1; t <= 5; ++t) slices.push_back(fixtures::random_slice(t, 10 + 2 * t, 20, 5, 40 + t));
  const auto hp = HyperParams::for_topics(3, 10, 21);
  const auto a = run_aobtm(slices, hp, 3);
  const auto b = run_aobtm(slices, hp, 3);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(a[t].phi, b[t].phi);
    EXPECT_EQ(a[t].model.assignments, b[t].model.assignments);
    EXPECT_EQ(a[t].seed, slice_seed(21, t + 1));
    for (std::size_t k = 0; k < 3; ++k) {
      const auto row = a[t].phi.row(k);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
    }
    for (double v : a[t].model.beta.data()) EXPECT_GT(v, 0.0);
  }
}

TEST(Aobtm, BoundedHistoryMatchesFullHistory) {
  std::vector<TimeSlice> slices;
  for (std::size_t t = 1; t <= 5; ++t) slices.push_back(fixtures::random_slice(t, 14, 15, 5, 70 + t));
  const auto hp = HyperParams::for_topics(2, 8, 3);
  const auto full = run_chain(slices, hp, {.mode = ChainMode::aobtm, .win = 2});
  OnlineChain bounded(hp, {.mode = ChainMode::aobtm, .win = 2, .history_capacity = 2});
  for (std::size_t t = 0; t < slices.size(); ++t) {
    EXPECT_EQ(bounded.step(slices[t]).phi, full[t].phi);
    EXPECT_LE(bounded.history().size(), 2u);
  }
}

TEST(OnlineChain, AbsorbReproducesStep) {
  std::vector<TimeSlice> slices;
  for (std::size_t t = 1; t <= 4; ++t) slices.push_back(fixtures::random_slice(t, 9 + t, 15, 5, 90 + t));
  const auto hp = HyperParams::for_topics(3, 6, 12);
  const ChainOptions opts{.mode = ChainMode::aobtm, .win = 2};
  const auto full = run_chain(slices, hp, opts);
  OnlineChain resumed(hp, opts);
  resumed.absorb(full[0].model, full[0].phi);
  resumed.absorb(full[1].model, full[1].phi);
  EXPECT_EQ(resumed.step(slices[2]).phi, full[2].phi);
  EXPECT_EQ(resumed.step(slices[3]).phi, full[3].phi);
}

TEST(OnlineChain, OutOfOrderSlicesRejected) {
  const auto s = fixtures::random_slice(2, 5, 3, 4, 1);
  OnlineChain chain(HyperParams::for_topics(2, 2, 0), {});
  chain.step(s);
  EXPECT_THROW(chain.step(s), Error);
}

TEST(OnlineChain, BtmModeResetsPriors) {
  std::vector<TimeSlice> slices{fixtures::random_slice(1, 8, 10, 4, 1),
                                fixtures::random_slice(2, 8, 10, 4, 2)};
  const auto hp = HyperParams::for_topics(2, 5, 1);
  const auto out = run_chain(slices, hp, {.mode = ChainMode::btm});
  EXPECT_EQ(out[1].model.beta, Matrix<double>(2, 8, 0.01));
  EXPECT_EQ(out[1].model.alpha, std::vector<double>(2, 25.0));
}
