#include "lrm/job.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lrm/binary_io.hpp"
#include "lrm/brute_force.hpp"
#include "lrm/cross_execute.hpp"
#include "lrm/encoders_dense.hpp"
#include "lrm/encoders_sparse.hpp"
#include "lrm/error.hpp"
#include "lrm/eval.hpp"
#include "lrm/hnsw.hpp"
#include "lrm/inverted_index.hpp"
#include "lrm/pipeline.hpp"
#include "lrm/trainer.hpp"

namespace lrm::cli {
namespace {

const std::set<std::string, std::less<>> kKnownKeys = {
    // representation and backend
    "encoder", "comparison", "backend", "corpus", "queries", "index", "doc_vectors", "query_vectors",
    "model", "tag", "k", "seed",
    // analysis and sparse weighting
    "lowercase", "stopwords", "expansions", "k1", "b", "quantize_bits",
    // hnsw
    "hnsw_m", "ef_construction", "ef_search",
    // training
    "training_data", "learning_rate", "epochs", "batch_size", "dim", "shared_encoder",
    // fusion
    "run_a", "run_b", "alpha", "normalization",
    // reranking
    "candidates", "depth", "carry_first_stage_score", "rerank_encoder", "rerank_model",
    "rerank_doc_vectors", "rerank_query_vectors", "rerank_comparison",
    // evaluation and profiling
    "run", "qrels", "eval_k", "recall_k", "profile_backends", "corpus_name"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

JobConfig JobConfig::parse(std::string_view text, const std::string& source) {
  JobConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    const auto where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (cfg.has(key)) throw ConfigError(where + ": duplicate key " + key);
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

JobConfig JobConfig::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config " + path);
  }
  return parse(text, path);
}

void JobConfig::set(const std::string& key, std::string value) {
  if (!kKnownKeys.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
  values_[key] = std::move(value);
}

std::optional<std::string> JobConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string JobConfig::require(const std::string& key) const {
  auto v = get(key);
  if (!v || v->empty()) throw ConfigError("missing required config key \"" + key + "\"");
  return *v;
}

std::string JobConfig::get_or(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

double JobConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\" expects a number, got \"" + *v + "\"");
  }
}

long long JobConfig::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    long long n = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\" expects an integer, got \"" + *v + "\"");
  }
}

bool JobConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
  throw ConfigError("config key \"" + key + "\" expects a boolean, got \"" + *v + "\"");
}

std::string JobConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!out.empty()) out += "; ";
    out += k + "=" + v;
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

enum class Family { sparse, dense, multi };

Family family_of(const std::string& encoder) {
  if (encoder == "bm25" || encoder == "tfidf" || encoder == "learned_sparse") return Family::sparse;
  if (encoder == "dense" || encoder == "toy_dense") return Family::dense;
  if (encoder == "toy_maxsim") return Family::multi;
  throw ConfigError("unknown encoder \"" + encoder +
                    "\" (expected bm25, tfidf, learned_sparse, dense, toy_dense, toy_maxsim)");
}

Analyzer make_analyzer(const JobConfig& job) {
  const bool lower = job.get_bool("lowercase", true);
  std::unordered_set<std::string> stop;
  if (auto path = job.get("stopwords")) stop = load_stopwords(*path, lower);
  return Analyzer(lower, std::move(stop));
}

std::vector<Text> load_texts(const std::string& path, const Analyzer& analyzer) {
  std::vector<Text> texts;
  for (auto& raw : read_corpus(path)) texts.push_back({std::move(raw.id), analyzer.tokenize(raw.contents)});
  return texts;
}

std::size_t positive(const JobConfig& job, const std::string& key, long long fallback) {
  const auto v = job.get_int(key, fallback);
  if (v < 1) throw ConfigError("config key \"" + key + "\" must be >= 1");
  return static_cast<std::size_t>(v);
}

Comparison comparison_of(const JobConfig& job, const std::string& key, Family family) {
  const auto fallback = family == Family::multi ? "max_sim" : "inner_product";
  Comparison phi;
  try {
    phi = parse_comparison(job.get_or(key, fallback));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if ((phi == Comparison::max_sim) != (family == Family::multi))
    throw ConfigError("comparison " + std::string(to_string(phi)) + " does not fit the encoder");
  return phi;
}

Backend backend_of(const JobConfig& job) {
  try {
    return parse_backend(job.require("backend"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

HnswParams hnsw_params(const JobConfig& job, std::uint64_t seed) {
  HnswParams p;
  p.m = positive(job, "hnsw_m", 16);
  p.ef_construction = positive(job, "ef_construction", 200);
  p.seed = seed;
  if (p.m < 2) throw ConfigError("hnsw_m must be >= 2");
  return p;
}

std::string existing_file(const JobConfig& job, const std::string& key) {
  auto path = job.require(key);
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("config key \"" + key + "\" points to a missing file: " + path);
  return path;
}

// ---------------------------------------------------------------------------
// Sparse corpus encoding (bm25, tfidf, learned_sparse)

struct SparseCorpus {
  std::vector<NamedSparse> docs;
  TermDictionary dict;
  std::optional<CorpusStats> stats;
  std::optional<Quantization> quantization;
};

SparseCorpus encode_sparse_corpus(const JobConfig& job, const std::string& encoder,
                                  std::span<const Text> texts, const Analyzer& analyzer) {
  SparseCorpus sc;
  if (encoder == "learned_sparse") {
    sc.docs = load_learned_sparse(existing_file(job, "doc_vectors"), sc.dict);
  } else {
    std::unordered_map<std::string, std::vector<std::string>> expansions;
    if (auto path = job.get("expansions")) expansions = read_expansions(*path);
    std::vector<Document> docs;
    for (const auto& t : texts) {
      TokenList tokens = t.tokens;
      if (auto it = expansions.find(t.id); it != expansions.end()) {
        TokenList extra;
        for (const auto& term : it->second)
          for (auto& tok : analyzer.tokenize(term)) extra.push_back(std::move(tok));
        tokens = apply_expansion(tokens, extra);
      }
      docs.push_back({t.id, std::move(tokens)});
    }
    sc.stats = compute_corpus_stats(docs, sc.dict);
    Bm25Params params{job.get_double("k1", 0.9), job.get_double("b", 0.4)};
    if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0)
      throw ConfigError("bm25 parameters out of range (k1 >= 0, b in [0, 1])");
    for (const auto& d : docs) {
      auto v = encoder == "bm25" ? bm25_encode_document(d.tokens, *sc.stats, params, sc.dict)
                                 : tfidf_encode_document(d.tokens, *sc.stats, sc.dict);
      sc.docs.emplace_back(d.id, std::move(v));
    }
  }
  if (sc.docs.empty()) throw DataError("corpus is empty");
  if (const auto bits = job.get_int("quantize_bits", 0); bits != 0) {
    if (bits < 1 || bits > 16) throw ConfigError("quantize_bits must be in [1, 16]");
    std::vector<SparseVector> vecs;
    for (const auto& [id, v] : sc.docs) vecs.push_back(v);
    try {
      sc.quantization = quantize_impacts(vecs, static_cast<int>(bits));
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    for (std::size_t i = 0; i < sc.docs.size(); ++i)
      sc.docs[i].second = sc.quantization->vectors[i].as_sparse();
  }
  sc.dict.freeze();
  return sc;
}

// Query vectors for a sparse index: learned query weights when provided,
// otherwise multi-hot over the analyzed query text.
std::vector<std::pair<std::string, SparseVector>> sparse_queries(const JobConfig& job,
                                                                 const TermDictionary& dict,
                                                                 const Analyzer& analyzer) {
  std::vector<std::pair<std::string, SparseVector>> out;
  if (auto path = job.get("query_vectors")) {
    TermDictionary scratch(std::vector<std::string>(dict.terms().begin(), dict.terms().end()));
    const auto known = dict.size();
    for (auto& [id, v] : load_learned_sparse(*path, scratch)) {
      std::vector<SparseEntry> kept;
      for (const auto& e : v.entries())
        if (e.term < known) kept.push_back(e);
      out.emplace_back(id, SparseVector::from_entries(std::move(kept)));
    }
    return out;
  }
  for (const auto& q : load_texts(existing_file(job, "queries"), analyzer))
    out.emplace_back(q.id, multi_hot_encode_query(q.tokens, dict));
  return out;
}

// ---------------------------------------------------------------------------
// Dense encodings (dense, toy_dense)

DenseStore dense_corpus(const JobConfig& job, const std::string& encoder, const std::string& prefix,
                        const Analyzer& analyzer) {
  if (encoder == "dense") return load_dense(existing_file(job, prefix + "doc_vectors"));
  const auto model = load_model(existing_file(job, prefix + "model"));
  std::vector<std::string> ids;
  std::vector<DenseVector> rows;
  for (const auto& t : load_texts(existing_file(job, "corpus"), analyzer)) {
    ids.push_back(t.id);
    rows.push_back(toy_encode(model, t.tokens, Side::document));
  }
  if (rows.empty()) throw DataError("corpus is empty");
  return DenseStore::from_rows(std::move(ids), rows);
}

// Queries that fail to encode are returned as nullopt.
std::vector<std::pair<std::string, std::optional<DenseVector>>> dense_queries(
    const JobConfig& job, const std::string& encoder, const std::string& prefix,
    const Analyzer& analyzer) {
  std::vector<std::pair<std::string, std::optional<DenseVector>>> out;
  if (encoder == "dense") {
    const auto store = load_dense(existing_file(job, prefix + "query_vectors"));
    for (std::size_t i = 0; i < store.size(); ++i)
      out.emplace_back(store.ids[i],
                       DenseVector(store.vectors.row(static_cast<Eigen::Index>(i)).cast<double>().transpose()));
    return out;
  }
  const auto model = load_model(existing_file(job, prefix + "model"));
  for (const auto& q : load_texts(existing_file(job, "queries"), analyzer)) {
    try {
      out.emplace_back(q.id, toy_encode(model, q.tokens, Side::query));
    } catch (const DataError&) {
      out.emplace_back(q.id, std::nullopt);
    }
  }
  return out;
}

SparseVector unit_sparse(const SparseVector& v) {
  double norm = 0.0;
  for (const auto& e : v.entries()) norm += e.weight * e.weight;
  if (norm == 0.0) return v;
  norm = std::sqrt(norm);
  std::vector<SparseEntry> out(v.entries().begin(), v.entries().end());
  for (auto& e : out) e.weight /= norm;
  return SparseVector::from_entries(std::move(out));
}

// ---------------------------------------------------------------------------
// Logical models for profile and rerank

LogicalScoringModel make_model(const JobConfig& job, const std::string& prefix,
                               std::span<const Text> corpus, const Analyzer& analyzer) {
  const auto encoder = job.require(prefix + "encoder");
  const auto family = family_of(encoder);
  LogicalScoringModel model;
  model.name = encoder;
  model.phi = comparison_of(job, prefix + "comparison", family);

  using Table = std::unordered_map<std::string, Representation>;
  auto lookup_encoder = [](std::shared_ptr<const Table> table, std::string what) -> Encoder {
    return [table, what](const Text& t) -> Representation {
      auto it = table->find(t.id);
      if (it == table->end()) throw DataError("no " + what + " vector for " + t.id);
      return it->second;
    };
  };

  if (family == Family::sparse) {
    if (!prefix.empty()) throw ConfigError("rerank_encoder must be a dense or multi-vector encoder");
    auto sc = std::make_shared<SparseCorpus>(encode_sparse_corpus(job, encoder, corpus, analyzer));
    auto docs = std::make_shared<Table>();
    for (const auto& [id, v] : sc->docs) docs->emplace(id, v);
    model.doc_encoder = lookup_encoder(docs, "document");
    if (job.has("query_vectors")) {
      auto queries = std::make_shared<Table>();
      for (auto& [id, v] : sparse_queries(job, sc->dict, analyzer)) queries->emplace(id, std::move(v));
      model.query_encoder = lookup_encoder(queries, "query");
    } else {
      model.query_encoder = [sc](const Text& q) -> Representation {
        return multi_hot_encode_query(q.tokens, sc->dict);
      };
    }
    return model;
  }

  if (encoder == "dense") {
    auto docs = std::make_shared<Table>();
    auto store = load_dense(existing_file(job, prefix + "doc_vectors"));
    for (std::size_t i = 0; i < store.size(); ++i)
      docs->emplace(store.ids[i],
                    DenseVector(store.vectors.row(static_cast<Eigen::Index>(i)).cast<double>().transpose()));
    auto queries = std::make_shared<Table>();
    auto qstore = load_dense(existing_file(job, prefix + "query_vectors"), store.dim());
    for (std::size_t i = 0; i < qstore.size(); ++i)
      queries->emplace(qstore.ids[i],
                       DenseVector(qstore.vectors.row(static_cast<Eigen::Index>(i)).cast<double>().transpose()));
    model.doc_encoder = lookup_encoder(docs, "document");
    model.query_encoder = lookup_encoder(queries, "query");
    return model;
  }

  auto enc = std::make_shared<ToyEncoder>(load_model(existing_file(job, prefix + "model")));
  if (family == Family::dense) {
    model.doc_encoder = [enc](const Text& t) -> Representation { return toy_encode(*enc, t.tokens, Side::document); };
    model.query_encoder = [enc](const Text& t) -> Representation { return toy_encode(*enc, t.tokens, Side::query); };
  } else {
    model.doc_encoder = [enc](const Text& t) -> Representation {
      return toy_encode_tokens(*enc, t.tokens, Side::document);
    };
    model.query_encoder = [enc](const Text& t) -> Representation {
      return toy_encode_tokens(*enc, t.tokens, Side::query);
    };
  }
  return model;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Context {
  const JobConfig& job;
  const Options& opts;
  std::uint64_t seed;

  std::string output(const std::string& fallback_key = {}) const {
    if (!opts.output_path.empty()) return opts.output_path;
    if (!fallback_key.empty()) return job.require(fallback_key);
    throw ConfigError("--output is required");
  }

  std::optional<std::size_t> k() const {
    if (opts.k) {
      if (*opts.k < 1) throw ConfigError("--k must be >= 1");
      return static_cast<std::size_t>(*opts.k);
    }
    if (job.has("k")) return positive(job, "k", 10);
    return std::nullopt;
  }
};

int cmd_index(const Context& ctx) {
  const auto& job = ctx.job;
  const auto encoder = job.require("encoder");
  const auto family = family_of(encoder);
  const auto backend = backend_of(job);
  const auto phi = comparison_of(job, "comparison", family);
  const auto out = ctx.output("index");
  const auto analyzer = make_analyzer(job);
  auto t0 = Clock::now();
  std::size_t bytes = 0, docs = 0;

  if (family == Family::multi)
    throw ConfigError("toy_maxsim has no persistent index; use it through rerank or profile");

  if (family == Family::sparse) {
    if (backend == Backend::hnsw)
      throw ConfigError("sparse encoders are indexed with inverted, maxscore or brute_force backends");
    std::vector<Text> texts;
    if (encoder != "learned_sparse") texts = load_texts(existing_file(job, "corpus"), analyzer);
    auto sc = encode_sparse_corpus(job, encoder, texts, analyzer);
    if (phi == Comparison::cosine)
      for (auto& d : sc.docs) d.second = unit_sparse(d.second);
    InvertedIndex index;
    if (sc.quantization) {
      std::vector<std::string> ids;
      for (const auto& d : sc.docs) ids.push_back(d.first);
      index = InvertedIndex::build(ids, *sc.quantization);
    } else {
      index = InvertedIndex::build(sc.docs);
    }
    index.dictionary = std::move(sc.dict);
    index.stats = std::move(sc.stats);
    index.metadata["config"] = job.resolved();
    const auto image = encode_inverted_index(index);
    write_file_atomic(out, image);
    bytes = image.size();
    docs = index.num_docs();
  } else {
    auto store = dense_corpus(job, encoder, "", analyzer);
    docs = store.size();
    std::string image;
    if (backend == Backend::hnsw) {
      auto params = hnsw_params(job, ctx.seed);
      params.metric = phi == Comparison::cosine ? Metric::cosine : Metric::inner_product;
      image = encode_hnsw_index(HnswIndex::build(std::move(store), params));
    } else if (backend == Backend::brute_force) {
      image = encode_dense_binary(store);
    } else {
      std::vector<NamedSparse> sparse;
      for (std::size_t i = 0; i < store.size(); ++i) {
        DenseVector row = store.vectors.row(static_cast<Eigen::Index>(i)).cast<double>().transpose();
        auto v = sparsify(row);
        sparse.emplace_back(store.ids[i], phi == Comparison::cosine ? unit_sparse(v) : v);
      }
      auto index = InvertedIndex::build(sparse);
      index.metadata["config"] = job.resolved();
      image = encode_inverted_index(index);
    }
    write_file_atomic(out, image);
    bytes = image.size();
  }
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  nlohmann::ordered_json prof;
  prof["encoder"] = encoder;
  prof["backend"] = std::string(to_string(backend));
  prof["docs"] = docs;
  prof["index_bytes"] = bytes;
  prof["build_ms"] = ms;
  std::cout << prof.dump() << '\n';
  return kExitOk;
}

// Rebuilds per-document sparse vectors from an inverted index.
std::vector<NamedSparse> transpose_postings(const InvertedIndex& index) {
  std::vector<std::vector<SparseEntry>> rows(index.num_docs());
  for (TermId t = 0; t < index.num_terms(); ++t)
    for (const auto& p : index.decode(t)) rows[p.ordinal].push_back({t, p.weight});
  std::vector<NamedSparse> docs;
  for (std::size_t d = 0; d < rows.size(); ++d)
    docs.emplace_back(index.doc_ids()[d], SparseVector::from_entries(std::move(rows[d])));
  return docs;
}

int cmd_search(const Context& ctx) {
  const auto& job = ctx.job;
  const auto encoder = job.require("encoder");
  const auto family = family_of(encoder);
  const auto backend = backend_of(job);
  const auto phi = comparison_of(job, "comparison", family);
  const auto index_path = existing_file(job, "index");
  const auto out = ctx.output();
  const auto analyzer = make_analyzer(job);
  SearchBudget budget;
  budget.k = ctx.k().value_or(10);
  budget.ef_search = std::max(budget.k, positive(job, "ef_search", 100));
  if (family == Family::multi) throw ConfigError("toy_maxsim has no persistent index to search");

  Run run;
  if (family == Family::sparse) {
    if (backend == Backend::hnsw) throw ConfigError("sparse encoders cannot be searched with hnsw");
    const auto index = load_inverted_index(index_path);
    if (!index.dictionary) throw DataError("index carries no term dictionary");
    auto queries = sparse_queries(job, *index.dictionary, analyzer);
    std::optional<BruteForceIndex> flat;
    if (backend == Backend::brute_force) flat.emplace(transpose_postings(index), phi);
    for (auto& [qid, q] : queries) {
      if (phi == Comparison::cosine) q = unit_sparse(q);
      RankedList list;
      if (backend == Backend::brute_force) list = brute_force_search(*flat, q, budget);
      else if (backend == Backend::maxscore) list = max_score_prune(index, q, budget);
      else list = daat_search(index, q, budget);
      list.query_id = qid;
      run.push_back(std::move(list));
    }
  } else {
    const auto queries = dense_queries(job, encoder, "", analyzer);
    const auto bytes = read_file(index_path);
    std::optional<HnswIndex> graph;
    std::optional<BruteForceIndex> flat;
    std::optional<InvertedIndex> inverted;
    if (backend == Backend::hnsw) graph = decode_hnsw_index(bytes);
    else if (backend == Backend::brute_force) flat.emplace(decode_dense_binary(bytes), phi);
    else inverted = decode_inverted_index(bytes);
    for (const auto& [qid, q] : queries) {
      RankedList list;
      if (q) {
        if (graph) {
          list = graph->search(*q, budget);
        } else if (flat) {
          list = brute_force_search(*flat, *q, budget);
        } else {
          auto sq = sparsify(*q);
          if (phi == Comparison::cosine) sq = unit_sparse(sq);
          list = backend == Backend::maxscore ? max_score_prune(*inverted, sq, budget)
                                              : daat_search(*inverted, sq, budget);
        }
      }
      list.query_id = qid;
      run.push_back(std::move(list));
    }
  }
  write_run(out, run, job.get_or("tag", "lrm"), "config: " + job.resolved());
  return kExitOk;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

int cmd_train(const Context& ctx) {
  const auto& job = ctx.job;
  const auto out = ctx.output("model");
  const auto analyzer = make_analyzer(job);
  TrainConfig cfg;
  cfg.learning_rate = job.get_double("learning_rate", 0.1);
  cfg.epochs = static_cast<int>(job.get_int("epochs", 1));
  cfg.batch_size = static_cast<std::size_t>(std::max(0LL, job.get_int("batch_size", 16)));
  cfg.seed = ctx.seed;
  cfg.shared_encoder = job.get_bool("shared_encoder", true);
  cfg.dim = static_cast<Eigen::Index>(job.get_int("dim", 16));
  cfg.validate();

  const auto data = read_training_data(existing_file(job, "training_data"), analyzer);
  if (data.empty()) throw DataError("training data is empty");
  auto vocab = training_vocabulary(data);
  if (auto corpus = job.get("corpus"))
    for (const auto& t : load_texts(*corpus, analyzer))
      for (const auto& tok : t.tokens) vocab.intern(tok);

  std::ostringstream log;
  TrainReport report;
  const auto enc = train(cfg, data, vocab, &report);
  log << "initial_loss " << format_double(report.initial_loss) << '\n';
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
    log << "epoch " << (e + 1) << " loss " << format_double(report.epoch_losses[e]) << '\n';
  log << "final_loss " << format_double(report.final_loss) << '\n';
  save_model(out, enc);
  write_file_atomic(out + ".log", log.str());
  std::cerr << log.str();
  return kExitOk;
}

Run truncate(Run run, std::optional<std::size_t> k) {
  if (k)
    for (auto& l : run)
      if (l.hits.size() > *k) l.hits.resize(*k);
  return run;
}

int cmd_fuse(const Context& ctx) {
  const auto& job = ctx.job;
  FusionConfig cfg;
  cfg.alpha = job.get_double("alpha", 0.5);
  try {
    cfg.normalization = parse_normalization(job.get_or("normalization", "min_max"));
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto a = read_run(existing_file(job, "run_a"));
  const auto b = read_run(existing_file(job, "run_b"));
  const auto fused = truncate(fuse_runs(a, b, cfg), ctx.k());
  write_run(ctx.output(), fused, job.get_or("tag", "fused"), "config: " + job.resolved());
  return kExitOk;
}

int cmd_rerank(const Context& ctx) {
  const auto& job = ctx.job;
  const auto analyzer = make_analyzer(job);
  const auto candidates = read_run(existing_file(job, "candidates"));
  TextStore corpus(load_texts(existing_file(job, "corpus"), analyzer));
  TextStore queries(load_texts(existing_file(job, "queries"), analyzer));
  RerankConfig cfg;
  cfg.depth = positive(job, "depth", 100);
  cfg.carry_first_stage_score = job.get_bool("carry_first_stage_score", false);
  cfg.reranker = make_model(job, "rerank_", corpus.texts(), analyzer);

  Run out;
  std::string notes = "config: " + job.resolved();
  for (const auto& list : candidates) {
    const Text* q = queries.find(list.query_id);
    if (q == nullptr) throw DataError("no query text for " + list.query_id);
    auto result = rerank(list, *q, cfg, corpus);
    for (const auto& id : result.unscored) notes += "\n# unscored " + list.query_id + " " + id;
    out.push_back(std::move(result.list));
  }
  write_run(ctx.output(), truncate(std::move(out), ctx.k()), job.get_or("tag", "rerank"), notes);
  return kExitOk;
}

int cmd_eval(const Context& ctx) {
  const auto& job = ctx.job;
  const auto run = read_run(existing_file(job, "run"));
  const auto qrels = read_qrels(existing_file(job, "qrels"));
  const auto k = ctx.k().value_or(positive(job, "eval_k", 10));
  const auto recall_k = positive(job, "recall_k", 100);
  const auto mrr = mrr_at_k(run, qrels, k);
  const auto ndcg = ndcg_at_k(run, qrels, k);
  const auto rec = recall_at_k(run, qrels, recall_k);
  const auto ap = average_precision(run, qrels);
  std::string text;
  char line[160];
  auto emit = [&](const std::string& name, double value) {
    std::snprintf(line, sizeof line, "%s\tall\t%.6f\n", name.c_str(), value);
    text += line;
  };
  emit("mrr@" + std::to_string(k), mrr.value);
  emit("ndcg@" + std::to_string(k), ndcg.value);
  emit("recall@" + std::to_string(recall_k), rec.value);
  emit("map", ap.value);
  text += "num_q\tall\t" + std::to_string(mrr.evaluated) + "\n";
  text += "skipped_q\tall\t" + std::to_string(mrr.skipped) + "\n";
  if (ctx.opts.output_path.empty()) std::cout << text;
  else write_file_atomic(ctx.opts.output_path, text);
  return kExitOk;
}

int cmd_profile(const Context& ctx) {
  const auto& job = ctx.job;
  const auto analyzer = make_analyzer(job);
  std::vector<Text> corpus;
  if (job.has("corpus")) corpus = load_texts(existing_file(job, "corpus"), analyzer);
  const auto queries = load_texts(existing_file(job, "queries"), analyzer);
  const auto model = make_model(job, "", corpus, analyzer);
  if (corpus.empty()) {
    // Vector-file models: document ids come from the vector file.
    for (const auto& [id, v] : job.require("encoder") == "learned_sparse"
                                   ? [&] {
                                       TermDictionary d;
                                       return load_learned_sparse(existing_file(job, "doc_vectors"), d);
                                     }()
                                   : std::vector<NamedSparse>{})
      corpus.push_back({id, {}});
    if (corpus.empty() && job.get_or("encoder", "") == "dense")
      for (const auto& id : load_dense(existing_file(job, "doc_vectors")).ids) corpus.push_back({id, {}});
  }
  CrossOptions opts;
  opts.budget.k = ctx.k().value_or(10);
  opts.budget.ef_search = std::max(opts.budget.k, positive(job, "ef_search", 100));
  opts.hnsw = hnsw_params(job, ctx.seed);
  opts.corpus_name = job.get_or("corpus_name", job.get_or("corpus", job.get_or("doc_vectors", "corpus")));

  std::string lines;
  std::stringstream list(job.get_or("profile_backends", job.get_or("backend", "brute_force")));
  std::string name;
  while (std::getline(list, name, ',')) {
    name = trim(name);
    if (name.empty()) continue;
    Backend backend;
    try {
      backend = parse_backend(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!supports(backend, model.phi))
      throw ConfigError("unsupported (" + std::string(to_string(model.phi)) + ", " + name + ") pair");
    auto result = cross_execute(model, backend, corpus, queries, opts);
    lines += result.profile.to_json().dump() + "\n";
  }
  if (ctx.opts.output_path.empty()) std::cout << lines;
  else write_file_atomic(ctx.opts.output_path, lines);
  return kExitOk;
}

}  // namespace

int run_command(std::string_view command, const Options& options) {
  try {
    if (options.config_path.empty()) throw ConfigError("--config is required");
    auto job = JobConfig::load(options.config_path);
    if (options.seed) job.set("seed", std::to_string(*options.seed));
    const auto seed_value = job.get_int("seed", 42);
    if (seed_value < 0) throw ConfigError("seed must be >= 0");
    Context ctx{job, options, static_cast<std::uint64_t>(seed_value)};
    if (command == "index") return cmd_index(ctx);
    if (command == "search") return cmd_search(ctx);
    if (command == "train") return cmd_train(ctx);
    if (command == "fuse") return cmd_fuse(ctx);
    if (command == "rerank") return cmd_rerank(ctx);
    if (command == "eval") return cmd_eval(ctx);
    if (command == "profile") return cmd_profile(ctx);
    throw ConfigError("unknown subcommand " + std::string(command));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace lrm::cli
