#pragma once

// Topic quality metrics: PMI coherence against document-level statistics of
// an external reference corpus, and discreteness as the mean pairwise
// Jensen-Shannon divergence between topic rows. Natural log throughout.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aobtm/corpus.hpp"
#include "aobtm/types.hpp"

namespace aobtm {

using TermPair = std::pair<std::string, std::string>;

inline TermPair canonical_pair(std::string a, std::string b) {
  return a < b ? TermPair{std::move(a), std::move(b)} : TermPair{std::move(b), std::move(a)};
}

struct RefStats {
  Count doc_count = 0;
  std::unordered_map<std::string, Count> word_df;
  std::map<TermPair, Count> pair_df;  // keys canonical (first < second)

  Count df(const std::string& w) const {
    auto it = word_df.find(w);
    return it == word_df.end() ? 0 : it->second;
  }
  Count co_df(const std::string& a, const std::string& b) const {
    if (a == b) return df(a);
    auto it = pair_df.find(canonical_pair(a, b));
    return it == pair_df.end() ? 0 : it->second;
  }
};

// Document frequencies: a term counts once per document however often it
// repeats, and so does each unordered pair of distinct terms.
inline RefStats build_ref_stats(std::span<const std::vector<std::string>> docs) {
  RefStats ref;
  for (const auto& doc : docs) {
    ++ref.doc_count;
    std::set<std::string> uniq(doc.begin(), doc.end());
    for (const auto& w : uniq) ++ref.word_df[w];
    for (auto a = uniq.begin(); a != uniq.end(); ++a)
      for (auto b = std::next(a); b != uniq.end(); ++b) ++ref.pair_df[{*a, *b}];
  }
  return ref;
}

// TSV layout: "D\t<count>", then "W\t<term>\t<df>" rows (sorted by term),
// then "P\t<a>\t<b>\t<df>" rows (a < b).
inline void write_ref_stats(std::ostream& out, const RefStats& ref) {
  out << "D\t" << ref.doc_count << '\n';
  std::vector<std::pair<std::string, Count>> words(ref.word_df.begin(), ref.word_df.end());
  std::sort(words.begin(), words.end());
  for (const auto& [w, df] : words) out << "W\t" << w << '\t' << df << '\n';
  for (const auto& [p, df] : ref.pair_df)
    out << "P\t" << p.first << '\t' << p.second << '\t' << df << '\n';
}

inline RefStats read_ref_stats(std::istream& in) {
  RefStats ref;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  auto bad = [&](const std::string& why) {
    return ParseError(lineno, "ref stats: " + why);
  };
  auto parse_count = [&](const std::string& s) -> Count {
    std::size_t pos = 0;
    Count v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      throw bad("bad count '" + s + "'");
    }
    if (pos != s.size() || v < 0) throw bad("bad count '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.empty()) continue;
    if (f[0] == "D" && f.size() == 2) {
      ref.doc_count = parse_count(f[1]);
      have_header = true;
    } else if (f[0] == "W" && f.size() == 3) {
      ref.word_df[f[1]] = parse_count(f[2]);
    } else if (f[0] == "P" && f.size() == 4) {
      if (f[1] == f[2]) throw bad("pair of identical terms");
      ref.pair_df[canonical_pair(f[1], f[2])] = parse_count(f[3]);
    } else {
      throw bad("unrecognized row");
    }
  }
  if (!have_header) throw ParseError(lineno, "ref stats: missing D header");
  return ref;
}

// Top-T term ids of a topic row by descending probability; ties go to the
// lower id. T is clamped to the row width.
inline std::vector<TermId> top_words(std::span<const double> row, std::size_t t) {
  std::vector<TermId> ids(row.size());
  std::iota(ids.begin(), ids.end(), TermId{0});
  const std::size_t n = std::min(t, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](TermId a, TermId b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return a < b;
                    });
  ids.resize(n);
  return ids;
}

struct PmiOptions {
  double pair_smoothing = 1.0;  // added to every pair co-document count
};

namespace detail {

// Terms the reference knows directly, or phrase terms "a_b" resolved through
// their constituents when both constituents co-occur in the reference.
struct ResolvedTerm {
  std::vector<std::string> parts;
  double df = 0.0;
};

inline std::optional<ResolvedTerm> resolve_term(const std::string& w, const RefStats& ref) {
  if (Count df = ref.df(w); df > 0) return ResolvedTerm{{w}, static_cast<double>(df)};
  const auto us = w.find('_');
  if (us == std::string::npos || w.find('_', us + 1) != std::string::npos) return std::nullopt;
  std::string a = w.substr(0, us), b = w.substr(us + 1);
  if (a.empty() || b.empty() || ref.df(a) == 0 || ref.df(b) == 0) return std::nullopt;
  const Count both = ref.co_df(a, b);
  if (both == 0) return std::nullopt;
  return ResolvedTerm{{std::move(a), std::move(b)}, static_cast<double>(both)};
}

// Joint document count of two resolved terms, bounded by each constituent
// pairing (a phrase occurs at most where all its parts occur).
inline double joint_df(const ResolvedTerm& u, const ResolvedTerm& v, const RefStats& ref) {
  double joint = std::min(u.df, v.df);
  for (const auto& x : u.parts)
    for (const auto& y : v.parts) joint = std::min(joint, static_cast<double>(ref.co_df(x, y)));
  return joint;
}

}  // namespace detail

// (1 / (T (T - 1))) * sum over i < j of log[P(wi, wj) / (P(wi) P(wj))], with
// P(w) = df / D and P(wi, wj) = (co-df + smoothing) / D. A pair involving a
// term the reference cannot resolve contributes log(smoothing / D), the
// lowest value any smoothed pair can reach. Pairs are summed in sorted word
// order, so any permutation of the same words gives a bit-identical score.
inline double pmi_score_topic(std::span<const std::string> top, const RefStats& ref,
                              const PmiOptions& opts = {}) {
  if (ref.doc_count <= 0) throw Error("reference statistics are empty (D = 0)");
  if (top.size() < 2) throw Error("PMI needs at least two top words");
  std::vector<std::string> words(top.begin(), top.end());
  std::sort(words.begin(), words.end());
  const double d = static_cast<double>(ref.doc_count);
  const double eps = opts.pair_smoothing;

  std::vector<std::optional<detail::ResolvedTerm>> resolved;
  resolved.reserve(words.size());
  for (const auto& w : words) {
    resolved.push_back(detail::resolve_term(w, ref));
    if (!resolved.back() && eps <= 0.0)
      throw Error("top word '" + w + "' is absent from the reference and smoothing is disabled");
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (!resolved[i] || !resolved[j]) {
        sum += std::log(eps / d);
        continue;
      }
      const double joint = detail::joint_df(*resolved[i], *resolved[j], ref) + eps;
      if (joint <= 0.0)
        throw Error("pair never co-occurs in the reference and smoothing is disabled");
      const double p_ij = joint / d;
      const double p_i = resolved[i]->df / d;
      const double p_j = resolved[j]->df / d;
      sum += std::log(p_ij / (p_i * p_j));
    }
  }
  const double t = static_cast<double>(words.size());
  return sum / (t * (t - 1.0));
}

struct ModelPmi {
  double mean = 0.0;
  std::vector<double> per_topic;
};

inline ModelPmi pmi_score_model_detail(const TopicMatrix& phi, std::size_t top_t,
                                       const RefStats& ref, const Vocabulary& vocab,
                                       const PmiOptions& opts = {}) {
  if (top_t < 2) throw Error("top T must be >= 2");
  if (phi.cols() > vocab.size()) throw Error("topic matrix is wider than the vocabulary");
  ModelPmi out;
  for (std::size_t k = 0; k < phi.rows(); ++k) {
    std::vector<std::string> words;
    for (TermId id : top_words(phi.row(k), top_t)) words.push_back(vocab.term(id));
    out.per_topic.push_back(pmi_score_topic(words, ref, opts));
  }
  // Sorted summation: relabelling topics cannot change the mean.
  std::vector<double> sorted = out.per_topic;
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty())
    out.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
               static_cast<double>(sorted.size());
  return out;
}

// Mean of per-topic PMI over the top-T words of every row.
inline double pmi_score_model(const TopicMatrix& phi, std::size_t top_t, const RefStats& ref,
                              const Vocabulary& vocab, const PmiOptions& opts = {}) {
  return pmi_score_model_detail(phi, top_t, ref, vocab, opts).mean;
}

inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("KL divergence needs equal lengths");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw Error("KL divergence undefined: Q(i) = 0 where P(i) > 0");
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

inline double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("JS divergence needs equal lengths");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m);
}

// Sum over k of (sum over j != k of JS(k, j)) / K, all divided by K.
inline double dis_score(const TopicMatrix& phi) {
  const std::size_t k_count = phi.rows();
  if (k_count <= 1) return 0.0;
  const double kd = static_cast<double>(k_count);
  std::vector<double> js(k_count * k_count, 0.0);
  for (std::size_t a = 0; a < k_count; ++a)
    for (std::size_t b = a + 1; b < k_count; ++b)
      js[a * k_count + b] = js[b * k_count + a] = js_divergence(phi.row(a), phi.row(b));
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    double inner = 0.0;
    for (std::size_t j = 0; j < k_count; ++j)
      if (j != k) inner += js[k * k_count + j];
    total += inner / kd;
  }
  return total / kd;
}

}  // namespace aobtm
