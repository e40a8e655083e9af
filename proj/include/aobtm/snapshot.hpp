#pragma once

// JSON forms of slice snapshots and of the reports built from them.

#include <string>
#include <vector>

#include <json.hpp>

#include "aobtm/evaluation.hpp"
#include "aobtm/online.hpp"
#include "aobtm/tuning.hpp"

namespace aobtm {

using nlohmann::json;

template <typename T>
json matrix_to_json(const Matrix<T>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<T>(row.begin(), row.end()));
  }
  return rows;
}

template <typename T>
Matrix<T> matrix_from_json(const json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) throw Error("matrix has wrong row count");
  Matrix<T> m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols) throw Error("matrix has wrong column count");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c].get<T>();
  }
  return m;
}

struct SliceSnapshot {
  std::size_t slice_index = 0;
  std::string label;
  std::uint64_t seed = 0;
  std::size_t num_iters = 0;
  SliceModel model;  // assignments only present when saved with them
  TopicMatrix phi;
  ThetaVec theta;
};

inline json snapshot_to_json(const SliceSnapshot& s, bool include_assignments = false) {
  const auto& m = s.model;
  json j;
  j["t"] = s.slice_index;
  j["label"] = s.label;
  j["K"] = m.num_topics;
  j["W"] = m.vocab_size;
  j["alpha"] = m.alpha;
  j["beta"] = matrix_to_json(m.beta);
  j["n_k"] = m.topic_counts;
  j["n_wk"] = matrix_to_json(m.word_counts);
  j["phi"] = matrix_to_json(s.phi);
  j["theta"] = s.theta;
  j["seed"] = s.seed;
  j["n_iter"] = s.num_iters;
  if (include_assignments) j["z"] = m.assignments;
  return j;
}

inline SliceSnapshot snapshot_from_json(const json& j) {
  try {
    SliceSnapshot s;
    s.slice_index = j.at("t").get<std::size_t>();
    s.label = j.value("label", std::string{});
    s.seed = j.at("seed").get<std::uint64_t>();
    s.num_iters = j.at("n_iter").get<std::size_t>();
    auto& m = s.model;
    m.slice_index = s.slice_index;
    m.num_topics = j.at("K").get<std::size_t>();
    m.vocab_size = j.at("W").get<std::size_t>();
    const auto k = m.num_topics, w = m.vocab_size;
    m.alpha = j.at("alpha").get<std::vector<double>>();
    m.topic_counts = j.at("n_k").get<std::vector<Count>>();
    if (m.alpha.size() != k || m.topic_counts.size() != k)
      throw Error("alpha/n_k length differs from K");
    m.beta = matrix_from_json<double>(j.at("beta"), k, w);
    m.word_counts = matrix_from_json<Count>(j.at("n_wk"), k, w);
    m.refresh_totals();
    if (j.contains("z")) m.assignments = j["z"].get<std::vector<std::uint32_t>>();
    s.phi = matrix_from_json<double>(j.at("phi"), k, w);
    s.theta = j.at("theta").get<std::vector<double>>();
    if (s.theta.size() != k) throw Error("theta length differs from K");
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed snapshot: ") + e.what());
  }
}

struct TopicReportOptions {
  std::size_t top_t = 10;
  const RefStats* ref = nullptr;
  PmiOptions pmi;
};

// Per topic: top terms with their probabilities and theta; PMI when
// reference statistics are supplied; Dis_Score for the whole slice.
inline json topic_report(const TopicMatrix& phi, const ThetaVec& theta, const Vocabulary& vocab,
                         const TopicReportOptions& opts) {
  json topics = json::array();
  std::optional<ModelPmi> pmi;
  if (opts.ref) pmi = pmi_score_model_detail(phi, opts.top_t, *opts.ref, vocab, opts.pmi);
  for (std::size_t k = 0; k < phi.rows(); ++k) {
    json terms = json::array();
    for (TermId id : top_words(phi.row(k), opts.top_t))
      terms.push_back({{"term", vocab.term(id)}, {"phi", phi(k, id)}});
    json topic = {{"k", k}, {"theta", theta.at(k)}, {"top_terms", std::move(terms)}};
    if (pmi) topic["pmi"] = pmi->per_topic[k];
    topics.push_back(std::move(topic));
  }
  json out = {{"topics", std::move(topics)}, {"dis_score", dis_score(phi)}};
  if (pmi) out["pmi_score"] = pmi->mean;
  return out;
}

inline json candidate_to_json(const CandidateScore& c) {
  return {{"value", c.value},   {"score", c.score}, {"rep_scores", c.rep_scores},
          {"seeds", c.seeds},   {"phase", c.phase}};
}

inline json search_result_to_json(const SearchResult& r) {
  json trace = json::array();
  for (const auto& c : r.trace) trace.push_back(candidate_to_json(c));
  return {{"best_value", r.best_value}, {"best_score", r.best_score}, {"trace", std::move(trace)}};
}

}  // namespace aobtm
