#pragma once

// Synthetic corpora and hand-built sampler states shared by the unit and
// acceptance suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aobtm/aobtm.hpp"

namespace fixtures {

// Letter-only words so the tokenizer keeps them intact: "apa".."apt" and
// "zoa".."zot" for the two halves.
inline std::string half_word(int half, int i) {
  std::string w = half == 0 ? "ap" : "zo";
  w.push_back(static_cast<char>('a' + i));
  return w;
}

struct TwoTopicShape {
  std::size_t docs = 200;
  int words_per_half = 20;
  std::size_t doc_len = 8;
  std::uint64_t seed = 7;
  std::size_t slices = 1;  // documents split round-robin over slice labels
};

// Each document draws all of its words from one of two disjoint vocabularies.
inline std::vector<aobtm::RawDocument> two_topic_docs(const TwoTopicShape& shape) {
  aobtm::Rng rng(shape.seed);
  std::vector<aobtm::RawDocument> docs;
  for (std::size_t d = 0; d < shape.docs; ++d) {
    const int half = static_cast<int>(d % 2);
    std::string text;
    for (std::size_t i = 0; i < shape.doc_len; ++i) {
      if (!text.empty()) text += ' ';
      text += half_word(half, static_cast<int>(rng.below(shape.words_per_half)));
    }
    docs.push_back({"v" + std::to_string(1 + d % shape.slices), text});
  }
  return docs;
}

inline aobtm::CorpusOptions plain_options() {
  aobtm::CorpusOptions opts;
  opts.phrases = false;
  return opts;
}

inline aobtm::RefStats two_topic_reference(std::uint64_t seed = 99, std::size_t docs = 1000) {
  TwoTopicShape shape;
  shape.docs = docs;
  shape.seed = seed;
  std::vector<std::vector<std::string>> toks;
  for (const auto& d : two_topic_docs(shape))
    toks.push_back(aobtm::preprocess(d.text, aobtm::default_stopwords()));
  return aobtm::build_ref_stats(toks);
}

// A slice over term ids 0..w-1 with random documents.
inline aobtm::TimeSlice random_slice(std::size_t index, std::size_t w, std::size_t docs,
                                     std::size_t len, std::uint64_t seed) {
  aobtm::Rng rng(seed);
  aobtm::TimeSlice s;
  s.index = index;
  s.label = "s" + std::to_string(index);
  s.vocab_size = w;
  for (std::size_t d = 0; d < docs; ++d) {
    std::vector<aobtm::TermId> ids;
    for (std::size_t i = 0; i < len; ++i) ids.push_back(static_cast<aobtm::TermId>(rng.below(w)));
    auto bs = aobtm::extract_biterms(ids, 0);
    s.biterms.insert(s.biterms.end(), bs.begin(), bs.end());
    s.documents.push_back(std::move(ids));
  }
  return s;
}

// Sampler state with arbitrary (consistent) counts and random positive priors.
inline aobtm::SliceModel random_state(std::size_t k, std::size_t w, std::size_t n_biterms,
                                      std::uint64_t seed, std::vector<aobtm::Biterm>* biterms) {
  aobtm::Rng rng(seed);
  aobtm::TimeSlice s;
  s.index = 1;
  s.vocab_size = w;
  for (std::size_t i = 0; i < n_biterms; ++i) {
    auto a = static_cast<aobtm::TermId>(rng.below(w));
    auto b = static_cast<aobtm::TermId>(rng.below(w - 1));
    if (b >= a) ++b;
    s.biterms.push_back(aobtm::make_biterm(a, b));
  }
  std::vector<double> alpha(k);
  for (auto& a : alpha) a = 0.05 + 3.0 * rng.uniform();
  aobtm::Matrix<double> beta(k, w);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < w; ++c) beta(r, c) = 0.01 + 2.0 * rng.uniform();
  aobtm::HyperParams hp{k, 1.0, 0.01, 1, seed};
  auto m = aobtm::init_assignments(s, hp, alpha, beta, rng);
  if (biterms) *biterms = s.biterms;
  return m;
}

}  // namespace fixtures
