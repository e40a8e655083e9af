#pragma once

// Collapsed Gibbs sampling over the biterms of one time slice, with
// per-topic Dirichlet prior vectors so the online variants can feed their
// updated priors straight back into inference.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aobtm/corpus.hpp"
#include "aobtm/types.hpp"

namespace aobtm {

struct HyperParams {
  std::size_t num_topics = 1;
  double alpha0 = 50.0;
  double beta0 = 0.01;
  std::size_t num_iters = 100;
  std::uint64_t seed = 0;

  // alpha = 50 / K, beta = 0.01.
  static HyperParams for_topics(std::size_t k, std::size_t iters = 100,
                                std::uint64_t seed = 0) {
    if (k == 0) throw Error("number of topics must be >= 1");
    return {k, 50.0 / static_cast<double>(k), 0.01, iters, seed};
  }

  void validate() const {
    if (num_topics < 1) throw Error("number of topics must be >= 1");
    if (!(alpha0 > 0.0)) throw Error("alpha must be > 0");
    if (!(beta0 > 0.0)) throw Error("beta must be > 0");
    if (num_iters < 1) throw Error("number of Gibbs iterations must be >= 1");
  }
};

struct SliceModel {
  std::size_t slice_index = 1;
  std::size_t num_topics = 0;
  std::size_t vocab_size = 0;
  std::vector<double> alpha;           // K
  Matrix<double> beta;                 // K x W
  std::vector<double> beta_row_sum;    // K, cached sums of beta rows
  std::vector<Count> topic_counts;     // K, biterms per topic
  Matrix<Count> word_counts;           // K x W, word slots per topic
  std::vector<Count> word_totals;      // K, cached sums of word_counts rows
  std::vector<std::uint32_t> assignments;  // one topic per biterm

  Count num_biterms() const { return static_cast<Count>(assignments.size()); }

  // Recomputes the cached row sums after the matrices were set directly.
  void refresh_totals() {
    beta_row_sum.assign(num_topics, 0.0);
    word_totals.assign(num_topics, 0);
    for (std::size_t k = 0; k < num_topics; ++k) {
      for (double v : beta.row(k)) beta_row_sum[k] += v;
      for (Count c : word_counts.row(k)) word_totals[k] += c;
    }
  }
};

namespace detail {

// Unnormalized conditional for every topic. `held` is the topic whose counts
// still include the biterm being resampled; its contribution is removed on
// the fly so callers can evaluate without mutating the model.
inline void topic_scores(const SliceModel& m, Biterm b,
                         std::optional<std::uint32_t> held,
                         std::span<double> out) {
  for (std::size_t k = 0; k < m.num_topics; ++k) {
    const Count h = (held && *held == k) ? 1 : 0;
    const double nk = static_cast<double>(m.topic_counts[k] - h);
    const double n1 = static_cast<double>(m.word_counts(k, b.w1) - h);
    const double n2 = static_cast<double>(m.word_counts(k, b.w2) - h);
    const double denom = static_cast<double>(m.word_totals[k] - 2 * h) + m.beta_row_sum[k];
    out[k] = (nk + m.alpha[k]) * (n1 + m.beta(k, b.w1)) * (n2 + m.beta(k, b.w2)) /
             (denom * denom);
  }
}

inline double checked_total(std::span<const double> scores) {
  double total = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw Error("invalid topic score; sampler counts are corrupted");
    total += s;
  }
  if (!(total > 0.0)) throw Error("all topic scores are zero; sampler counts are corrupted");
  return total;
}

inline void add_biterm(SliceModel& m, Biterm b, std::uint32_t k, Count delta) {
  m.topic_counts[k] += delta;
  m.word_counts(k, b.w1) += delta;
  m.word_counts(k, b.w2) += delta;
  m.word_totals[k] += 2 * delta;
}

}  // namespace detail

// Normalized topic distribution for biterm `b`, which currently holds
// assignment `exclude`; that assignment is left out of the counts.
inline std::vector<double> conditional_distribution(Biterm b, const SliceModel& m,
                                                    std::size_t exclude) {
  if (exclude >= m.assignments.size()) throw Error("assignment index out of range");
  std::vector<double> p(m.num_topics);
  detail::topic_scores(m, b, m.assignments[exclude], p);
  const double total = detail::checked_total(p);
  for (auto& v : p) v /= total;
  return p;
}

// Same, for counts that already exclude the biterm.
inline std::vector<double> conditional_distribution(Biterm b, const SliceModel& m) {
  std::vector<double> p(m.num_topics);
  detail::topic_scores(m, b, std::nullopt, p);
  const double total = detail::checked_total(p);
  for (auto& v : p) v /= total;
  return p;
}

inline SliceModel init_assignments(const TimeSlice& slice, const HyperParams& hp,
                                   std::vector<double> alpha, Matrix<double> beta,
                                   Rng& rng) {
  hp.validate();
  const std::size_t k_count = hp.num_topics;
  if (alpha.size() != k_count) throw Error("alpha length does not match K");
  if (beta.rows() != k_count || beta.cols() != slice.vocab_size)
    throw Error("beta shape does not match K x W");
  for (double a : alpha)
    if (!(a > 0.0)) throw Error("alpha entries must be positive");
  for (double v : beta.data())
    if (!(v > 0.0)) throw Error("beta entries must be positive");

  SliceModel m;
  m.slice_index = slice.index;
  m.num_topics = k_count;
  m.vocab_size = slice.vocab_size;
  m.alpha = std::move(alpha);
  m.beta = std::move(beta);
  m.topic_counts.assign(k_count, 0);
  m.word_counts = Matrix<Count>(k_count, slice.vocab_size, 0);
  m.refresh_totals();
  m.assignments.resize(slice.biterms.size());
  for (std::size_t i = 0; i < slice.biterms.size(); ++i) {
    const auto b = slice.biterms[i];
    if (b.w1 >= slice.vocab_size || b.w2 >= slice.vocab_size)
      throw Error("biterm references a term outside the slice vocabulary");
    const auto k = static_cast<std::uint32_t>(rng.below(k_count));
    m.assignments[i] = k;
    detail::add_biterm(m, b, k, 1);
  }
  return m;
}

// One pass over every biterm: remove its assignment, draw a new topic by
// inverse CDF over the conditional, add it back.
inline void gibbs_sweep(std::span<const Biterm> biterms, SliceModel& m, Rng& rng) {
  if (biterms.size() != m.assignments.size())
    throw Error("biterm count does not match model assignments");
  std::vector<double> scores(m.num_topics);
  const std::size_t last = m.num_topics - 1;
  for (std::size_t i = 0; i < biterms.size(); ++i) {
    const auto b = biterms[i];
    detail::add_biterm(m, b, m.assignments[i], -1);
    detail::topic_scores(m, b, std::nullopt, scores);
    const double total = detail::checked_total(scores);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::uint32_t k = 0;
    for (; k < last; ++k) {
      acc += scores[k];
      if (u < acc) break;
    }
    m.assignments[i] = k;
    detail::add_biterm(m, b, k, 1);
  }
}

inline TopicMatrix compute_phi(const SliceModel& m) {
  TopicMatrix phi(m.num_topics, m.vocab_size, 0.0);
  for (std::size_t k = 0; k < m.num_topics; ++k) {
    const double denom = static_cast<double>(m.word_totals[k]) + m.beta_row_sum[k];
    for (std::size_t w = 0; w < m.vocab_size; ++w)
      phi(k, w) = (static_cast<double>(m.word_counts(k, w)) + m.beta(k, w)) / denom;
  }
  return phi;
}

inline ThetaVec compute_theta(const SliceModel& m, Count num_biterms) {
  double alpha_sum = 0.0;
  for (double a : m.alpha) alpha_sum += a;
  const double denom = static_cast<double>(num_biterms) + alpha_sum;
  ThetaVec theta(m.num_topics);
  for (std::size_t k = 0; k < m.num_topics; ++k)
    theta[k] = (static_cast<double>(m.topic_counts[k]) + m.alpha[k]) / denom;
  return theta;
}

struct SliceFit {
  TopicMatrix phi;
  ThetaVec theta;
  SliceModel model;
  double sweep_seconds = 0.0;  // wall time of the Gibbs sweeps only
};

// Random init followed by hp.num_iters sweeps, seeded with hp.seed.
inline SliceFit fit_slice(const TimeSlice& slice, const HyperParams& hp,
                          std::vector<double> alpha, Matrix<double> beta) {
  Rng rng(hp.seed);
  SliceFit fit;
  fit.model = init_assignments(slice, hp, std::move(alpha), std::move(beta), rng);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < hp.num_iters; ++it) gibbs_sweep(slice.biterms, fit.model, rng);
  fit.sweep_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fit.phi = compute_phi(fit.model);
  fit.theta = compute_theta(fit.model, fit.model.num_biterms());
  return fit;
}

// Batch BTM: symmetric priors alpha0 and beta0.
inline SliceFit run_btm(const TimeSlice& slice, const HyperParams& hp) {
  hp.validate();
  return fit_slice(slice, hp, std::vector<double>(hp.num_topics, hp.alpha0),
                   Matrix<double>(hp.num_topics, slice.vocab_size, hp.beta0));
}

}  // namespace aobtm
