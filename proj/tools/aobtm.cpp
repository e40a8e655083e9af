// aobtm: command-line driver over the library, one subcommand per task.
//
// Exit codes: 0 success, 1 unexpected failure, 2 malformed input,
// 3 invalid configuration.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aobtm/aobtm.hpp"

namespace fs = std::filesystem;
using aobtm::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;

struct InputError : aobtm::Error {
  using aobtm::Error::Error;
};
struct ConfigError : aobtm::Error {
  using aobtm::Error::Error;
};

struct RunConfig {
  std::string mode = "aobtm";
  std::size_t k = 10;
  std::size_t win = 1;
  std::size_t iters = 100;
  std::optional<double> alpha;  // default 50 / K
  double beta = 0.01;
  std::size_t window_size = 0;
  std::size_t phrase_threshold = 24;
  double phrase_pmi = 0.0;
  bool no_phrases = false;
  std::size_t top = 10;
  std::uint64_t seed = 1;
  std::size_t workers = aobtm::default_worker_count();
  std::vector<std::size_t> candidates;
  std::optional<std::size_t> span;
  std::size_t iter_reps = 1;
  std::string input;
  std::string stopwords;
  std::string ref_stats;
  std::string out;
  std::string snapshot;
  std::string vocab;
  bool include_assignments = false;
  bool resume = false;

  void validate() const {
    aobtm::parse_chain_mode(mode);
    if (k < 1) throw ConfigError("--k must be >= 1");
    if (win < 1) throw ConfigError("--win must be >= 1");
    if (iters < 1) throw ConfigError("--iters must be >= 1");
    if (alpha && !(*alpha > 0.0)) throw ConfigError("--alpha must be > 0");
    if (!(beta > 0.0)) throw ConfigError("--beta must be > 0");
    if (window_size == 1) throw ConfigError("--window-size must be 0 or >= 2");
    if (phrase_threshold < 1) throw ConfigError("--phrase-threshold must be >= 1");
    if (top < 2) throw ConfigError("--top must be >= 2");
    if (iter_reps < 1) throw ConfigError("--iter-reps must be >= 1");
  }

  aobtm::HyperParams hyper_params() const {
    auto hp = aobtm::HyperParams::for_topics(k, iters, seed);
    if (alpha) hp.alpha0 = *alpha;
    hp.beta0 = beta;
    return hp;
  }
};

// Everything loaded from disk, parsed before any artifact is written.
struct Workspace {
  std::unordered_set<std::string> stopwords;
  aobtm::Corpus corpus;
  std::optional<aobtm::RefStats> ref;
};

std::unordered_set<std::string> load_stopwords(const RunConfig& cfg) {
  if (cfg.stopwords.empty()) return aobtm::default_stopwords();
  std::ifstream in(cfg.stopwords);
  if (!in) throw InputError("cannot open stopwords file " + cfg.stopwords);
  return aobtm::read_stopwords(in);
}

std::vector<aobtm::RawDocument> load_documents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file " + path);
  try {
    return aobtm::read_jsonl(in);
  } catch (const aobtm::ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// A prebuilt TSV (first line "D\t...") or a raw JSONL reference corpus.
aobtm::RefStats load_ref_stats(const std::string& path,
                               const std::unordered_set<std::string>& stopwords) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open reference file " + path);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  try {
    if (first.rfind("D\t", 0) == 0) return aobtm::read_ref_stats(in);
    std::vector<std::vector<std::string>> docs;
    for (const auto& d : aobtm::read_jsonl(in)) docs.push_back(aobtm::preprocess(d.text, stopwords));
    return aobtm::build_ref_stats(docs);
  } catch (const aobtm::ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

Workspace load_workspace(const RunConfig& cfg, bool need_input) {
  Workspace ws;
  ws.stopwords = load_stopwords(cfg);
  if (need_input) {
    if (cfg.input.empty()) throw ConfigError("--input is required");
    const auto docs = load_documents(cfg.input);
    aobtm::CorpusOptions opts;
    opts.stopwords = &ws.stopwords;
    opts.phrases = !cfg.no_phrases;
    opts.phrase_threshold = cfg.phrase_threshold;
    opts.phrase_pmi_cutoff = cfg.phrase_pmi;
    opts.window = cfg.window_size;
    ws.corpus = aobtm::build_corpus(docs, opts);
  }
  if (!cfg.ref_stats.empty()) ws.ref = load_ref_stats(cfg.ref_stats, ws.stopwords);
  return ws;
}

// Write-then-rename so readers never observe a half-written artifact.
void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw aobtm::Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw aobtm::Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string vocab_tsv(const aobtm::Vocabulary& vocab) {
  std::ostringstream os;
  for (std::size_t i = 0; i < vocab.size(); ++i) os << i << '\t' << vocab.terms()[i] << '\n';
  return os.str();
}

aobtm::Vocabulary load_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vocabulary " + path.string());
  aobtm::Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError(path.string() + ": line " + std::to_string(lineno) + ": expected id<TAB>term");
    const auto term = line.substr(tab + 1);
    if (std::to_string(vocab.size()) != line.substr(0, tab))
      throw InputError(path.string() + ": line " + std::to_string(lineno) + ": ids must be dense and ordered");
    vocab.add(term);
    if (term.find('_') != std::string::npos) vocab.mark_phrase(term);
  }
  return vocab;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

aobtm::SliceSnapshot load_snapshot(const fs::path& path) {
  try {
    return aobtm::snapshot_from_json(read_json_file(path));
  } catch (const InputError&) {
    throw;
  } catch (const aobtm::Error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json slice_report(const aobtm::SliceSnapshot& s, const aobtm::TimeSlice* slice,
                  const aobtm::Vocabulary& vocab, const RunConfig& cfg,
                  const std::optional<aobtm::RefStats>& ref) {
  aobtm::TopicReportOptions opts;
  opts.top_t = cfg.top;
  opts.ref = ref ? &*ref : nullptr;
  json j = {{"t", s.slice_index}, {"label", s.label}};
  if (slice) {
    j["num_documents"] = slice->documents.size();
    j["num_biterms"] = slice->num_biterms();
  }
  j.update(aobtm::topic_report(s.phi, s.theta, vocab, opts));
  return j;
}

json report_header(const RunConfig& cfg) {
  json j = {{"mode", cfg.mode}, {"K", cfg.k}, {"seed", cfg.seed}, {"n_iter", cfg.iters},
            {"top_t", cfg.top}};
  if (cfg.mode != "btm") j["win"] = cfg.win;
  return j;
}

int cmd_ingest(const RunConfig& cfg) {
  cfg.validate();
  const auto ws = load_workspace(cfg, true);
  json summary = {{"vocab_size", ws.corpus.vocab.size()},
                  {"phrases", ws.corpus.vocab.phrases()},
                  {"slices", json::array()}};
  for (const auto& s : ws.corpus.slices)
    summary["slices"].push_back({{"t", s.index},
                                 {"label", s.label},
                                 {"num_documents", s.documents.size()},
                                 {"num_biterms", s.num_biterms()},
                                 {"vocab_size", s.vocab_size}});
  if (!cfg.out.empty()) {
    write_file(fs::path(cfg.out) / "vocab.tsv", vocab_tsv(ws.corpus.vocab));
    write_json(fs::path(cfg.out) / "corpus.json", summary);
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw ConfigError("--out is required");
  const auto ws = load_workspace(cfg, true);
  const auto& slices = ws.corpus.slices;
  if (slices.empty()) throw InputError("input contains no documents");
  const fs::path out(cfg.out);
  const auto mode = aobtm::parse_chain_mode(cfg.mode);
  const auto hp = cfg.hyper_params();
  aobtm::OnlineChain chain(hp, {.mode = mode, .win = cfg.win});

  std::vector<aobtm::SliceSnapshot> snaps;
  std::size_t start = 0;
  if (cfg.resume && fs::exists(out / "manifest.json")) {
    const auto manifest = read_json_file(out / "manifest.json");
    const auto header = report_header(cfg);
    for (const char* key : {"mode", "K", "seed", "n_iter", "win"})
      if (header.contains(key) && manifest.value(key, json()) != header[key])
        throw ConfigError(std::string("--resume: manifest disagrees on ") + key);
    for (const auto& entry : manifest.at("slices")) {
      if (start >= slices.size() || entry.at("label") != slices[start].label) break;
      auto snap = load_snapshot(out / entry.at("snapshot").get<std::string>());
      if (snap.model.vocab_size != slices[start].vocab_size)
        throw InputError("--resume: snapshot vocabulary differs from the input");
      chain.absorb(snap.model, snap.phi);
      snaps.push_back(std::move(snap));
      ++start;
    }
  }
  for (std::size_t i = start; i < slices.size(); ++i) {
    auto r = chain.step(slices[i]);
    snaps.push_back({r.slice_index, slices[i].label, r.seed, hp.num_iters, std::move(r.model),
                     std::move(r.phi), std::move(r.theta)});
  }

  json report = report_header(cfg);
  report["slices"] = json::array();
  json manifest = report_header(cfg);
  manifest["alpha0"] = hp.alpha0;
  manifest["beta0"] = hp.beta0;
  manifest["window_size"] = cfg.window_size;
  manifest["created_at"] = timestamp();
  manifest["slices"] = json::array();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& s = snaps[i];
    const auto rel = "slices/" + std::to_string(s.slice_index) + ".json";
    if (i >= start) write_json(out / rel, aobtm::snapshot_to_json(s, cfg.include_assignments));
    manifest["slices"].push_back(
        {{"t", s.slice_index}, {"label", s.label}, {"seed", s.seed}, {"snapshot", rel}});
    report["slices"].push_back(slice_report(s, &slices[i], ws.corpus.vocab, cfg, ws.ref));
  }
  write_file(out / "vocab.tsv", vocab_tsv(ws.corpus.vocab));
  if (mode != aobtm::ChainMode::btm) write_json(out / "manifest.json", manifest);
  write_json(out / "report.json", report);
  std::cout << "trained " << snaps.size() << " slice(s), K=" << cfg.k << ", mode=" << cfg.mode
            << "; artifacts in " << out.string() << '\n';
  return 0;
}

aobtm::ScoringSetup scoring_setup(const RunConfig& cfg, const Workspace& ws) {
  if (!ws.ref) throw ConfigError("--ref-stats is required for searches");
  aobtm::ScoringSetup setup;
  setup.slices = ws.corpus.slices;
  setup.vocab = &ws.corpus.vocab;
  setup.ref = &*ws.ref;
  setup.num_topics = cfg.k;
  setup.num_iters = cfg.iters;
  setup.beta0 = cfg.beta;
  setup.alpha0 = cfg.alpha;
  setup.top_t = cfg.top;
  return setup;
}

void print_search(const aobtm::SearchResult& r, const char* what) {
  std::printf("%-10s %-6s %s\n", what, "phase", "mean PMI");
  for (const auto& c : r.trace) std::printf("%-10zu %-6d %.6f\n", c.value, c.phase, c.score);
  std::printf("best %s = %zu (PMI %.6f)\n", what, r.best_value, r.best_score);
}

int cmd_search_k(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.candidates.empty()) throw ConfigError("--candidates must list at least one K");
  for (auto c : cfg.candidates)
    if (c < 1) throw ConfigError("--candidates must be >= 1");
  const auto ws = load_workspace(cfg, true);
  auto setup = scoring_setup(cfg, ws);
  aobtm::SearchConfig sc{cfg.candidates, cfg.iter_reps, cfg.span, cfg.workers, cfg.seed};
  const auto result = aobtm::search_topic_num(sc, setup, cfg.win);
  print_search(result, "K");
  if (!cfg.out.empty()) {
    auto j = aobtm::search_result_to_json(result);
    j["search"] = "topics";
    write_json(fs::path(cfg.out) / "search.json", j);
  }
  return 0;
}

int cmd_search_win(const RunConfig& cfg) {
  cfg.validate();
  const auto ws = load_workspace(cfg, true);
  if (ws.corpus.slices.size() < 2)
    throw ConfigError("window search needs at least two slices");
  auto setup = scoring_setup(cfg, ws);
  const auto result = aobtm::search_win(setup, cfg.iter_reps, cfg.workers, cfg.seed);
  print_search(result, "win");
  const auto cutoff = aobtm::decline_cutoff(result.trace);
  std::printf("decline cutoff win = %zu\n", cutoff);
  if (!cfg.out.empty()) {
    auto j = aobtm::search_result_to_json(result);
    j["search"] = "window";
    j["cutoff"] = cutoff;
    write_json(fs::path(cfg.out) / "search.json", j);
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.snapshot.empty()) throw ConfigError("--snapshot is required");
  const fs::path snap_path(cfg.snapshot);
  const auto snap = load_snapshot(snap_path);
  const fs::path vocab_path =
      cfg.vocab.empty() ? snap_path.parent_path().parent_path() / "vocab.tsv" : fs::path(cfg.vocab);
  std::optional<aobtm::RefStats> ref;
  if (!cfg.ref_stats.empty()) ref = load_ref_stats(cfg.ref_stats, load_stopwords(cfg));

  json metrics = {{"dis_score", aobtm::dis_score(snap.phi)}};
  json per_topic = json::array();
  if (ref) {
    const auto vocab = load_vocab(vocab_path);
    if (vocab.size() < snap.model.vocab_size)
      throw InputError("snapshot has W=" + std::to_string(snap.model.vocab_size) +
                       " but the vocabulary has " + std::to_string(vocab.size()) + " terms");
    const auto pmi = aobtm::pmi_score_model_detail(snap.phi, cfg.top, *ref, vocab);
    metrics["pmi_score"] = pmi.mean;
    for (std::size_t k = 0; k < pmi.per_topic.size(); ++k)
      per_topic.push_back({{"k", k}, {"pmi", pmi.per_topic[k]}});
  } else {
    for (std::size_t k = 0; k < snap.phi.rows(); ++k) per_topic.push_back({{"k", k}});
  }
  metrics["per_topic"] = std::move(per_topic);
  if (!cfg.out.empty()) write_json(fs::path(cfg.out) / "metrics.json", metrics);
  std::cout << metrics.dump(2) << '\n';
  return 0;
}

// Rebuilds report.json from a training output directory.
int cmd_report(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw ConfigError("--out is required");
  const fs::path out(cfg.out);
  const auto vocab = load_vocab(out / "vocab.tsv");
  std::optional<aobtm::RefStats> ref;
  if (!cfg.ref_stats.empty()) ref = load_ref_stats(cfg.ref_stats, load_stopwords(cfg));
  std::vector<fs::path> paths;
  if (fs::exists(out / "manifest.json")) {
    for (const auto& e : read_json_file(out / "manifest.json").at("slices"))
      paths.push_back(out / e.at("snapshot").get<std::string>());
  } else {
    for (std::size_t t = 1; fs::exists(out / "slices" / (std::to_string(t) + ".json")); ++t)
      paths.push_back(out / "slices" / (std::to_string(t) + ".json"));
  }
  if (paths.empty()) throw InputError("no snapshots found in " + out.string());
  json report = report_header(cfg);
  report["slices"] = json::array();
  for (const auto& p : paths) {
    const auto snap = load_snapshot(p);
    if (vocab.size() < snap.model.vocab_size) throw InputError(p.string() + ": wider than vocabulary");
    report["K"] = snap.model.num_topics;
    report["slices"].push_back(slice_report(snap, nullptr, vocab, cfg, ref));
  }
  write_json(out / "report.json", report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_ref_stats(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.input.empty() || cfg.out.empty()) throw ConfigError("--input and --out are required");
  const auto stopwords = load_stopwords(cfg);
  const auto ref = load_ref_stats(cfg.input, stopwords);
  std::ostringstream os;
  aobtm::write_ref_stats(os, ref);
  write_file(fs::path(cfg.out) / "ref_stats.tsv", os.str());
  std::cout << "D=" << ref.doc_count << " terms=" << ref.word_df.size()
            << " pairs=" << ref.pair_df.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive online biterm topic modeling for version-tagged short texts"};
  app.set_config("--config", "", "key=value configuration file (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  app.add_option("--mode", cfg.mode, "btm | obtm | aobtm")->capture_default_str();
  app.add_option("--k", cfg.k, "number of topics")->capture_default_str();
  app.add_option("--win", cfg.win, "previous versions mixed into the prior")->capture_default_str();
  app.add_option("--iters", cfg.iters, "Gibbs sweeps per slice")->capture_default_str();
  app.add_option("--alpha", cfg.alpha, "initial symmetric alpha (default 50/K)");
  app.add_option("--beta", cfg.beta, "initial symmetric beta")->capture_default_str();
  app.add_option("--window-size", cfg.window_size, "biterm context window, 0 = whole document")
      ->capture_default_str();
  app.add_option("--phrase-threshold", cfg.phrase_threshold, "minimum bigram count for a phrase")
      ->capture_default_str();
  app.add_option("--phrase-pmi", cfg.phrase_pmi, "minimum bigram PMI for a phrase")->capture_default_str();
  app.add_flag("--no-phrases", cfg.no_phrases, "skip phrase extraction");
  app.add_option("--top", cfg.top, "top terms per topic for reports and PMI")->capture_default_str();
  app.add_option("--seed", cfg.seed, "base random seed")->capture_default_str();
  app.add_option("--workers", cfg.workers, "parallel workers for searches (1 = sequential)")
      ->capture_default_str();
  app.add_option("--candidates", cfg.candidates, "candidate K values, comma separated")->delimiter(',');
  app.add_option("--span", cfg.span, "fine-tune breadth around the best K (default workers-1)");
  app.add_option("--iter-reps", cfg.iter_reps, "models averaged per candidate")->capture_default_str();
  app.add_option("--input", cfg.input, "JSONL documents {\"slice\", \"text\"}");
  app.add_option("--stopwords", cfg.stopwords, "stopword file, one term per line");
  app.add_option("--ref-stats", cfg.ref_stats, "reference stats TSV or reference corpus JSONL");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--snapshot", cfg.snapshot, "slice snapshot JSON (eval)");
  app.add_option("--vocab", cfg.vocab, "vocabulary TSV (eval; default <out>/vocab.tsv)");
  app.add_flag("--include-assignments", cfg.include_assignments, "store biterm topics in snapshots");
  app.add_flag("--resume", cfg.resume, "continue a chain from the snapshots in --out");

  auto* ingest = app.add_subcommand("ingest", "preprocess input and write the vocabulary");
  auto* train = app.add_subcommand("train", "train a btm/obtm/aobtm chain");
  auto* search_k = app.add_subcommand("search-k", "search the number of topics");
  auto* search_w = app.add_subcommand("search-win", "search the AOBTM window size");
  auto* eval = app.add_subcommand("eval", "score a saved slice snapshot");
  auto* report = app.add_subcommand("report", "rebuild report.json from saved snapshots");
  auto* ref = app.add_subcommand("ref-stats", "build reference statistics TSV from JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*ingest) return cmd_ingest(cfg);
    if (*train) return cmd_train(cfg);
    if (*search_k) return cmd_search_k(cfg);
    if (*search_w) return cmd_search_win(cfg);
    if (*eval) return cmd_eval(cfg);
    if (*report) return cmd_report(cfg);
    if (*ref) return cmd_ref_stats(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aobtm::Error& e) {
    // Library validation failures are configuration problems.
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
