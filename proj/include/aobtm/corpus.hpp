#pragma once

// Corpus ingestion. Every slice is sealed into a list of biterms over a
// vocabulary that only grows.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aobtm/types.hpp"

namespace aobtm {

struct RawDocument {
  std::string slice_label;
  std::string text;
};

// Unordered pair of distinct terms, stored with w1 < w2.
struct Biterm {
  TermId w1 = 0;
  TermId w2 = 0;

  friend auto operator<=>(const Biterm&, const Biterm&) = default;
};

inline Biterm make_biterm(TermId a, TermId b) {
  return a < b ? Biterm{a, b} : Biterm{b, a};
}

inline constexpr std::string_view kDigitToken = "<digit>";

class Vocabulary {
 public:
  // Returns the id of `term`, issuing the next dense id if it is new.
  TermId add(std::string_view term) {
    auto it = term_to_id_.find(std::string(term));
    if (it != term_to_id_.end()) return it->second;
    const auto id = static_cast<TermId>(id_to_term_.size());
    id_to_term_.emplace_back(term);
    term_to_id_.emplace(id_to_term_.back(), id);
    return id;
  }

  std::optional<TermId> find(std::string_view term) const {
    auto it = term_to_id_.find(std::string(term));
    if (it == term_to_id_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& term(TermId id) const {
    if (id >= id_to_term_.size()) throw Error("term id out of range");
    return id_to_term_[id];
  }

  void mark_phrase(std::string_view term) { phrases_.emplace(term); }
  bool is_phrase(std::string_view term) const {
    return phrases_.contains(std::string(term));
  }
  const std::set<std::string>& phrases() const { return phrases_; }

  std::size_t size() const { return id_to_term_.size(); }
  const std::vector<std::string>& terms() const { return id_to_term_; }

 private:
  std::unordered_map<std::string, TermId> term_to_id_;
  std::vector<std::string> id_to_term_;
  std::set<std::string> phrases_;
};

struct TimeSlice {
  std::size_t index = 1;  // 1-based position in the chain
  std::string label;
  std::vector<std::vector<TermId>> documents;
  std::vector<Biterm> biterms;
  std::size_t vocab_size = 0;  // W when the slice was sealed

  std::size_t num_biterms() const { return biterms.size(); }
};

using Normalizer = std::function<std::string(std::string)>;

// English stopword list (the common NLTK set).
inline const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
      "you're", "you've", "you'll", "you'd", "your", "yours", "yourself",
      "yourselves", "he", "him", "his", "himself", "she", "she's", "her",
      "hers", "herself", "it", "it's", "its", "itself", "they", "them",
      "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
      "that", "that'll", "these", "those", "am", "is", "are", "was", "were",
      "be", "been", "being", "have", "has", "had", "having", "do", "does",
      "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because",
      "as", "until", "while", "of", "at", "by", "for", "with", "about",
      "against", "between", "into", "through", "during", "before", "after",
      "above", "below", "to", "from", "up", "down", "in", "out", "on", "off",
      "over", "under", "again", "further", "then", "once", "here", "there",
      "when", "where", "why", "how", "all", "any", "both", "each", "few",
      "more", "most", "other", "some", "such", "no", "nor", "not", "only",
      "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
      "just", "don", "don't", "should", "should've", "now", "d", "ll", "m",
      "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't",
      "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
      "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn",
      "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
      "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won",
      "won't", "wouldn", "wouldn't"};
  return words;
}

inline std::unordered_set<std::string> read_stopwords(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    std::size_t start = 0;
    while (start < line.size() &&
           std::isspace(static_cast<unsigned char>(line[start])))
      ++start;
    if (start < line.size()) {
      std::string w = line.substr(start);
      std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
      });
      words.insert(std::move(w));
    }
  }
  return words;
}

namespace detail {

inline bool is_word_byte(unsigned char c) {
  return std::isalpha(c) || c >= 0x80;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Lowercased word runs, each digit run replaced by "<digit>". The normalizer
// runs on words before the stopword check. Apostrophes between letters stay
// inside the word so contractions can match the stopword list.
inline std::vector<std::string> preprocess(
    std::string_view text, const std::unordered_set<std::string>& stopwords,
    const Normalizer& normalizer = {}) {
  std::vector<std::string> raw;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isdigit(c)) {
      while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      raw.emplace_back(kDigitToken);
    } else if (detail::is_word_byte(c)) {
      std::string word;
      while (i < n) {
        const auto d = static_cast<unsigned char>(text[i]);
        if (detail::is_word_byte(d)) {
          word.push_back(static_cast<char>(std::tolower(d)));
          ++i;
        } else if (d == '\'' && i + 1 < n &&
                   detail::is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
          word.push_back('\'');
          ++i;
        } else {
          break;
        }
      }
      raw.push_back(std::move(word));
    } else {
      ++i;
    }
  }

  std::vector<std::string> out;
  out.reserve(raw.size());
  for (auto& tok : raw) {
    if (tok != kDigitToken && normalizer) tok = normalizer(std::move(tok));
    if (tok.empty() || stopwords.contains(tok)) continue;
    out.push_back(std::move(tok));
  }
  return out;
}

inline std::string join_phrase(std::string_view a, std::string_view b) {
  std::string s;
  s.reserve(a.size() + b.size() + 1);
  s.append(a).append("_").append(b);
  return s;
}

// Adjacent bigrams that occur at least `freq_threshold` times and whose PMI
// log[P(a,b) / (P(a) P(b))] reaches `pmi_cutoff`. Unigram probabilities are
// over all tokens, bigram probabilities over all adjacent positions. Bigrams
// of a repeated word or involving the digit placeholder never qualify.
inline std::set<std::string> extract_phrases(
    std::span<const std::vector<std::string>> docs, std::size_t freq_threshold,
    double pmi_cutoff) {
  if (freq_threshold < 1) throw Error("phrase frequency threshold must be >= 1");
  std::unordered_map<std::string, std::size_t> unigram;
  std::map<std::pair<std::string, std::string>, std::size_t> bigram;
  std::size_t total_uni = 0, total_bi = 0;
  for (const auto& doc : docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      ++unigram[doc[i]];
      ++total_uni;
      if (i + 1 < doc.size()) {
        ++bigram[{doc[i], doc[i + 1]}];
        ++total_bi;
      }
    }
  }
  std::set<std::string> phrases;
  for (const auto& [pair, count] : bigram) {
    const auto& [a, b] = pair;
    if (count < freq_threshold || a == b) continue;
    if (a == kDigitToken || b == kDigitToken) continue;
    const double p_ab = static_cast<double>(count) / static_cast<double>(total_bi);
    const double p_a = static_cast<double>(unigram[a]) / static_cast<double>(total_uni);
    const double p_b = static_cast<double>(unigram[b]) / static_cast<double>(total_uni);
    if (std::log(p_ab / (p_a * p_b)) >= pmi_cutoff) phrases.insert(join_phrase(a, b));
  }
  return phrases;
}

// Left-to-right greedy merge of phrase bigrams into single terms.
inline std::vector<std::string> apply_phrases(std::span<const std::string> tokens,
                                              const std::set<std::string>& phrases) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (i + 1 < tokens.size()) {
      auto joined = join_phrase(tokens[i], tokens[i + 1]);
      if (phrases.contains(joined)) {
        out.push_back(std::move(joined));
        i += 2;
        continue;
      }
    }
    out.push_back(tokens[i]);
    ++i;
  }
  return out;
}

// All pairs (i < j) with j - i < window, or every pair when window == 0.
// Pairs of identical ids are skipped; repeats are kept with multiplicity.
inline std::vector<Biterm> extract_biterms(std::span<const TermId> tokens,
                                           std::size_t window) {
  if (window == 1) throw Error("biterm window must be 0 or >= 2");
  std::vector<Biterm> out;
  const std::size_t n = tokens.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t end = window == 0 ? n : std::min(n, i + window);
    for (std::size_t j = i + 1; j < end; ++j) {
      if (tokens[i] == tokens[j]) continue;
      out.push_back(make_biterm(tokens[i], tokens[j]));
    }
  }
  return out;
}

struct CorpusOptions {
  const std::unordered_set<std::string>* stopwords = nullptr;  // null: default list
  Normalizer normalizer;
  bool phrases = true;
  std::size_t phrase_threshold = 24;
  double phrase_pmi_cutoff = 0.0;
  std::size_t window = 0;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<TimeSlice> slices;
};

// Groups documents by slice label (ordered by first appearance), cleans them,
// runs phrase extraction once over all slices, then seals each slice in order
// so term ids are issued monotonically.
inline Corpus build_corpus(std::span<const RawDocument> docs,
                           const CorpusOptions& opts = {}) {
  const auto& stopwords = opts.stopwords ? *opts.stopwords : default_stopwords();

  std::vector<std::string> labels;
  std::unordered_map<std::string, std::size_t> label_index;
  std::vector<std::vector<std::vector<std::string>>> grouped;
  for (const auto& doc : docs) {
    auto [it, inserted] = label_index.try_emplace(doc.slice_label, labels.size());
    if (inserted) {
      labels.push_back(doc.slice_label);
      grouped.emplace_back();
    }
    grouped[it->second].push_back(preprocess(doc.text, stopwords, opts.normalizer));
  }

  std::set<std::string> phrases;
  if (opts.phrases) {
    std::vector<std::vector<std::string>> all;
    for (const auto& g : grouped)
      for (const auto& d : g)
        if (d.size() > 1) all.push_back(d);
    phrases = extract_phrases(all, opts.phrase_threshold, opts.phrase_pmi_cutoff);
  }

  Corpus corpus;
  for (const auto& p : phrases) corpus.vocab.mark_phrase(p);
  for (std::size_t s = 0; s < grouped.size(); ++s) {
    TimeSlice slice;
    slice.index = s + 1;
    slice.label = labels[s];
    std::set<std::vector<std::string>> seen;
    for (const auto& tokens : grouped[s]) {
      auto merged = phrases.empty() ? tokens : apply_phrases(tokens, phrases);
      if (merged.size() <= 1) continue;
      if (!seen.insert(merged).second) continue;
      std::vector<TermId> ids;
      ids.reserve(merged.size());
      for (const auto& t : merged) ids.push_back(corpus.vocab.add(t));
      auto bs = extract_biterms(ids, opts.window);
      slice.biterms.insert(slice.biterms.end(), bs.begin(), bs.end());
      slice.documents.push_back(std::move(ids));
    }
    slice.vocab_size = corpus.vocab.size();
    corpus.slices.push_back(std::move(slice));
  }
  return corpus;
}

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// One {"slice": ..., "text": ...} object per line. Blank lines and documents
// whose text is blank are skipped; anything else malformed throws.
inline std::vector<RawDocument> read_jsonl(std::istream& in) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
    auto slice = j.find("slice");
    auto text = j.find("text");
    if (slice == j.end() || text == j.end() || !text->is_string())
      throw ParseError(lineno, "expected string fields \"slice\" and \"text\"");
    std::string label;
    if (slice->is_string())
      label = slice->get<std::string>();
    else if (slice->is_number_integer())
      label = std::to_string(slice->get<long long>());
    else
      throw ParseError(lineno, "\"slice\" must be a string or integer");
    auto body = text->get<std::string>();
    if (detail::trim(body).empty()) continue;
    docs.push_back({std::move(label), std::move(body)});
  }
  return docs;
}

}  // namespace aobtm
