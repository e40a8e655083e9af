#pragma once

// Parallel grid searches for the number of topics and the AOBTM window.
// Scoring is a pure function of (candidate, seeds), so results do not depend
// on how candidates are scheduled across workers; the max-reduction runs
// after all workers join.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "aobtm/evaluation.hpp"
#include "aobtm/online.hpp"

namespace aobtm {

inline std::size_t default_worker_count() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls fn(i) for i in [0, n) on up to `workers` threads. workers <= 1 runs
// inline. The first exception thrown by any call is rethrown after joining.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

// Everything a candidate evaluation needs besides the candidate itself.
// Shared read-only across workers.
struct ScoringSetup {
  std::span<const TimeSlice> slices;
  const Vocabulary* vocab = nullptr;
  const RefStats* ref = nullptr;
  std::size_t num_topics = 10;  // fixed K for window searches
  std::size_t num_iters = 100;
  double beta0 = 0.01;
  std::optional<double> alpha0;  // unset: 50 / K
  std::size_t top_t = 10;
  PmiOptions pmi;
  AdaptOptions adapt;
};

struct CandidateScore {
  std::size_t value = 0;
  double score = 0.0;
  std::vector<double> rep_scores;
  std::vector<std::uint64_t> seeds;
  int phase = 1;
};

struct SearchResult {
  std::size_t best_value = 0;
  double best_score = 0.0;
  std::vector<CandidateScore> trace;
};

// Scores one (K, win) setting: `reps` AOBTM runs with seeds base_seed + r,
// PMI of the final slice each time, averaged. The result's value is K.
inline CandidateScore evaluate_candidate(std::size_t k, std::size_t win, std::size_t reps,
                                         const ScoringSetup& setup, std::uint64_t base_seed) {
  if (k < 1) throw Error("number of topics must be >= 1");
  if (reps < 1) throw Error("repetitions must be >= 1");
  if (!setup.vocab || !setup.ref) throw Error("scoring setup is missing vocabulary or reference");
  if (setup.slices.empty()) throw Error("scoring needs at least one slice");
  HyperParams hp = HyperParams::for_topics(k, setup.num_iters);
  hp.beta0 = setup.beta0;
  if (setup.alpha0) hp.alpha0 = *setup.alpha0;
  CandidateScore out;
  out.value = k;
  double sum = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    hp.seed = base_seed + r;
    OnlineChain chain(hp, {.mode = ChainMode::aobtm, .win = win, .adapt = setup.adapt,
                           .history_capacity = win});
    std::optional<SliceResult> last;
    for (const auto& s : setup.slices) last = chain.step(s);
    const double score = pmi_score_model(last->phi, setup.top_t, *setup.ref, *setup.vocab, setup.pmi);
    out.rep_scores.push_back(score);
    out.seeds.push_back(hp.seed);
    sum += score;
  }
  out.score = sum / static_cast<double>(reps);
  return out;
}

inline CandidateScore evaluate_candidate_k(std::size_t k, std::size_t reps,
                                           const ScoringSetup& setup, std::size_t win,
                                           std::uint64_t base_seed) {
  return evaluate_candidate(k, win, reps, setup, base_seed);
}

// Candidate c, repetition r runs with seed base + c * reps + r.
inline std::uint64_t candidate_base_seed(std::uint64_t base, std::size_t candidate,
                                         std::size_t reps) {
  return base + static_cast<std::uint64_t>(candidate) * reps;
}

// Lexicographic max of (score, -value): ties go to the smaller value.
inline const CandidateScore& best_of(std::span<const CandidateScore> trace) {
  if (trace.empty()) throw Error("empty search trace");
  const CandidateScore* best = &trace[0];
  for (const auto& c : trace)
    if (c.score > best->score || (c.score == best->score && c.value < best->value)) best = &c;
  return *best;
}

struct SearchConfig {
  std::vector<std::size_t> candidates;
  std::size_t reps = 1;
  std::optional<std::size_t> span;  // unset: workers - 1
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  // Drops duplicates (keeping first occurrence) and checks ranges.
  void normalize() {
    if (candidates.empty()) throw Error("candidate list is empty");
    std::vector<std::size_t> uniq;
    std::set<std::size_t> seen;
    for (auto c : candidates) {
      if (c < 1) throw Error("candidates must be >= 1");
      if (seen.insert(c).second) uniq.push_back(c);
    }
    candidates = std::move(uniq);
    if (reps < 1) throw Error("repetitions must be >= 1");
    if (workers < 1) workers = 1;
  }

  std::size_t effective_span() const { return span ? *span : workers - 1; }
};

namespace detail {

inline std::vector<CandidateScore> score_all(std::span<const std::size_t> values,
                                             std::size_t workers, const auto& score_one) {
  std::vector<CandidateScore> out(values.size());
  parallel_for(values.size(), workers, [&](std::size_t i) { out[i] = score_one(values[i]); });
  return out;
}

}  // namespace detail

// Phase 1 scores every candidate; phase 2 scores each integer within
// ceil(span / 2) of the phase-1 winner that has not been scored yet.
inline SearchResult search_topic_num(SearchConfig cfg, const ScoringSetup& setup,
                                     std::size_t win) {
  cfg.normalize();
  auto score_one = [&](std::size_t k) {
    return evaluate_candidate(k, win, cfg.reps, setup,
                              candidate_base_seed(cfg.seed, k, cfg.reps));
  };

  SearchResult result;
  result.trace = detail::score_all(cfg.candidates, cfg.workers, score_one);
  const std::size_t opt = best_of(result.trace).value;

  const auto half = static_cast<std::size_t>((cfg.effective_span() + 1) / 2);
  std::set<std::size_t> probed(cfg.candidates.begin(), cfg.candidates.end());
  std::vector<std::size_t> fine;
  for (std::size_t v = opt > half ? opt - half : 1; v <= opt + half; ++v)
    if (v >= 1 && !probed.contains(v)) fine.push_back(v);
  auto phase2 = detail::score_all(fine, cfg.workers, score_one);
  for (auto& c : phase2) {
    c.phase = 2;
    result.trace.push_back(std::move(c));
  }

  const auto& best = best_of(result.trace);
  result.best_value = best.value;
  result.best_score = best.score;
  return result;
}

// Scores win = 1 .. v - 1 with K fixed at setup.num_topics.
inline SearchResult search_win(const ScoringSetup& setup, std::size_t reps,
                               std::size_t workers, std::uint64_t seed) {
  const std::size_t v = setup.slices.size();
  if (v < 2) throw Error("window search needs at least two slices");
  std::vector<std::size_t> wins;
  for (std::size_t w = 1; w < v; ++w) wins.push_back(w);
  SearchResult result;
  result.trace = detail::score_all(wins, workers, [&](std::size_t w) {
    auto c = evaluate_candidate(setup.num_topics, w, reps, setup,
                                candidate_base_seed(seed, w, reps));
    c.value = w;
    return c;
  });
  const auto& best = best_of(result.trace);
  result.best_value = best.value;
  result.best_score = best.score;
  return result;
}

// Start of the final non-increasing run of scores: the point after which
// PMI dropped and did not rise again. Returns the candidate value there.
inline std::size_t decline_cutoff(std::span<const CandidateScore> trace) {
  if (trace.empty()) throw Error("empty search trace");
  std::vector<const CandidateScore*> sorted;
  for (const auto& c : trace) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(),
            [](auto* a, auto* b) { return a->value < b->value; });
  std::size_t i = sorted.size() - 1;
  while (i > 0 && sorted[i - 1]->score >= sorted[i]->score) --i;
  return sorted[i]->value;
}

}  // namespace aobtm
