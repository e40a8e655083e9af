#pragma once

// Online chaining of slice models. OBTM carries counts forward into the next
// slice's prior; AOBTM mixes the topic-word distributions of the last `win`
// slices with softmax weights and adds the current counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "aobtm/gibbs.hpp"
#include "aobtm/types.hpp"

namespace aobtm {

struct PhiEntry {
  std::size_t slice_index = 0;
  TopicMatrix phi;
  Matrix<double> beta;  // prior the slice was sampled with
};

// Most recent slices' topic-word matrices. Capacity 0 keeps everything.
class PhiHistory {
 public:
  explicit PhiHistory(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(PhiEntry entry) {
    if (!entries_.empty()) {
      if (entry.slice_index <= entries_.back().slice_index)
        throw Error("PhiHistory slice indices must increase");
      if (entry.phi.rows() != entries_.back().phi.rows())
        throw Error("PhiHistory topic count changed");
    }
    entries_.push_back(std::move(entry));
    if (capacity_ > 0)
      while (entries_.size() > capacity_) entries_.pop_front();
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }

  // i = 1 is the latest entry.
  const PhiEntry& recent(std::size_t i) const {
    if (i < 1 || i > entries_.size()) throw Error("PhiHistory index out of range");
    return entries_[entries_.size() - i];
  }

  const std::deque<PhiEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<PhiEntry> entries_;
};

// Dot product over the shared prefix; the shorter vector is implicitly
// zero-padded.
inline double padded_dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) return {};
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

// gamma[i-1] weights the i-th most recent slice's row k, by softmax of its
// similarity (dot product) to `beta_prev_row`.
inline std::vector<double> adaptive_weights(std::size_t k, const PhiHistory& history,
                                            std::span<const double> beta_prev_row,
                                            std::size_t win) {
  if (win < 1) throw Error("window must be >= 1");
  if (history.size() < win) throw Error("history shorter than window");
  std::vector<double> sims(win);
  for (std::size_t i = 1; i <= win; ++i) {
    const auto& phi = history.recent(i).phi;
    if (k >= phi.rows()) throw Error("topic index out of range");
    sims[i - 1] = padded_dot(phi.row(k), beta_prev_row);
  }
  return softmax(sims);
}

struct AdaptOptions {
  double epsilon = 1e-9;   // floor for every prior entry
  double phi_scale = 1.0;  // multiplier on the mixed topic-word term
};

// Next slice's word prior: counts plus the gamma-weighted mixture of the last
// `win` topic-word rows, zero-padded to the count matrix width.
inline Matrix<double> adapt_beta(const PhiHistory& history, const Matrix<Count>& counts,
                                 const Matrix<double>& beta_prev, std::size_t win,
                                 const AdaptOptions& opts = {}) {
  if (history.empty()) throw Error("adapt_beta requires a nonempty history");
  if (win < 1 || win > history.size()) throw Error("window exceeds history length");
  if (beta_prev.rows() != counts.rows()) throw Error("beta and counts disagree on K");
  const std::size_t k_count = counts.rows();
  const std::size_t w_count = counts.cols();
  Matrix<double> next(k_count, w_count, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto gamma = adaptive_weights(k, history, beta_prev.row(k), win);
    auto out = next.row(k);
    for (std::size_t w = 0; w < w_count; ++w) out[w] = static_cast<double>(counts(k, w));
    for (std::size_t i = 1; i <= win; ++i) {
      const auto row = history.recent(i).phi.row(k);
      const std::size_t n = std::min(row.size(), w_count);
      const double g = opts.phi_scale * gamma[i - 1];
      for (std::size_t w = 0; w < n; ++w) out[w] += g * row[w];
    }
    for (auto& v : out) v = std::max(v, opts.epsilon);
  }
  return next;
}

inline std::vector<double> update_alpha(std::span<const double> alpha,
                                        std::span<const Count> topic_counts) {
  if (alpha.size() != topic_counts.size()) throw Error("alpha and counts lengths differ");
  std::vector<double> out(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k)
    out[k] = alpha[k] + static_cast<double>(topic_counts[k]);
  return out;
}

// OBTM prior propagation: beta + counts.
inline Matrix<double> accumulate_beta(const Matrix<double>& beta, const Matrix<Count>& counts) {
  if (beta.rows() != counts.rows() || beta.cols() != counts.cols())
    throw Error("beta and counts shapes differ");
  Matrix<double> out = beta;
  for (std::size_t k = 0; k < beta.rows(); ++k)
    for (std::size_t w = 0; w < beta.cols(); ++w) out(k, w) += static_cast<double>(counts(k, w));
  return out;
}

enum class ChainMode { btm, obtm, aobtm };

inline std::string to_string(ChainMode m) {
  switch (m) {
    case ChainMode::btm: return "btm";
    case ChainMode::obtm: return "obtm";
    case ChainMode::aobtm: return "aobtm";
  }
  return "?";
}

inline ChainMode parse_chain_mode(const std::string& s) {
  if (s == "btm") return ChainMode::btm;
  if (s == "obtm") return ChainMode::obtm;
  if (s == "aobtm") return ChainMode::aobtm;
  throw Error("unknown mode '" + s + "'");
}

struct ChainOptions {
  ChainMode mode = ChainMode::aobtm;
  std::size_t win = 1;
  AdaptOptions adapt;
  // 0 retains every slice; otherwise only the latest `history_capacity`.
  std::size_t history_capacity = 0;
};

struct SliceResult {
  std::size_t slice_index = 0;
  std::uint64_t seed = 0;
  TopicMatrix phi;
  ThetaVec theta;
  SliceModel model;
  double sweep_seconds = 0.0;
};

// Slice t is sampled with seed base + (t - 1), so the first slice matches a
// batch run with the same seed and any slice can be replayed on its own.
inline std::uint64_t slice_seed(std::uint64_t base, std::size_t slice_index) {
  return base + static_cast<std::uint64_t>(slice_index - 1);
}

// Sequential slice driver. Slices must arrive in increasing index order.
// btm mode resets to symmetric priors for every slice.
class OnlineChain {
 public:
  OnlineChain(HyperParams hp, ChainOptions opts)
      : hp_(hp),
        opts_(opts),
        history_(opts.mode == ChainMode::aobtm
                     ? (opts.history_capacity == 0 ? 0 : std::max(opts.history_capacity, opts.win))
                     : 1) {
    hp_.validate();
    if (opts_.win < 1) throw Error("window must be >= 1");
    if (!(opts_.adapt.epsilon > 0.0)) throw Error("beta floor must be > 0");
    alpha_.assign(hp_.num_topics, hp_.alpha0);
  }

  SliceResult step(const TimeSlice& slice) {
    if (slice.index <= last_index_) throw Error("slices must be processed in order");
    HyperParams hp = hp_;
    hp.seed = slice_seed(hp_.seed, slice.index);
    SliceFit fit = fit_slice(slice, hp, alpha_, prior_for(slice.vocab_size));
    absorb(fit.model, fit.phi);
    return {slice.index, hp.seed, std::move(fit.phi), std::move(fit.theta),
            std::move(fit.model), fit.sweep_seconds};
  }

  // Folds a finished slice into the priors of the next one. Used by step()
  // and to rebuild state from saved snapshots.
  void absorb(const SliceModel& m, const TopicMatrix& phi) {
    if (m.num_topics != hp_.num_topics) throw Error("snapshot topic count differs");
    last_index_ = m.slice_index;
    switch (opts_.mode) {
      case ChainMode::btm:
        return;
      case ChainMode::obtm:
        alpha_ = update_alpha(m.alpha, m.topic_counts);
        beta_ = accumulate_beta(m.beta, m.word_counts);
        has_prior_ = true;
        return;
      case ChainMode::aobtm: {
        alpha_ = update_alpha(m.alpha, m.topic_counts);
        history_.push({m.slice_index, phi, m.beta});
        const std::size_t eff = std::min(opts_.win, history_.size());
        beta_ = adapt_beta(history_, m.word_counts, m.beta, eff, opts_.adapt);
        has_prior_ = true;
        return;
      }
    }
  }

  const std::vector<double>& next_alpha() const { return alpha_; }
  const Matrix<double>& next_beta() const { return beta_; }
  const PhiHistory& history() const { return history_; }
  const HyperParams& hyper_params() const { return hp_; }
  const ChainOptions& options() const { return opts_; }

 private:
  Matrix<double> prior_for(std::size_t vocab_size) {
    if (opts_.mode == ChainMode::btm || !has_prior_) {
      alpha_.assign(hp_.num_topics, hp_.alpha0);
      return Matrix<double>(hp_.num_topics, vocab_size, hp_.beta0);
    }
    // New vocabulary: OBTM starts new words at the base prior, AOBTM at the floor.
    const double fill = opts_.mode == ChainMode::obtm ? hp_.beta0 : opts_.adapt.epsilon;
    return beta_.padded(vocab_size, fill);
  }

  HyperParams hp_;
  ChainOptions opts_;
  PhiHistory history_;
  std::vector<double> alpha_;
  Matrix<double> beta_;
  std::size_t last_index_ = 0;
  bool has_prior_ = false;
};

inline std::vector<SliceResult> run_chain(std::span<const TimeSlice> slices,
                                          const HyperParams& hp, const ChainOptions& opts) {
  if (slices.empty()) throw Error("at least one slice is required");
  OnlineChain chain(hp, opts);
  std::vector<SliceResult> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.push_back(chain.step(s));
  return out;
}

inline std::vector<SliceResult> run_obtm(std::span<const TimeSlice> slices,
                                         const HyperParams& hp) {
  return run_chain(slices, hp, {.mode = ChainMode::obtm});
}

inline std::vector<SliceResult> run_aobtm(std::span<const TimeSlice> slices,
                                          const HyperParams& hp, std::size_t win,
                                          const AdaptOptions& adapt = {}) {
  return run_chain(slices, hp, {.mode = ChainMode::aobtm, .win = win, .adapt = adapt});
}

}  // namespace aobtm
