#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxmod/clustering.hpp"
#include "ctxmod/conceptual.hpp"
#include "ctxmod/depgraph.hpp"
#include "ctxmod/facts.hpp"
#include "ctxmod/lexical.hpp"
#include "ctxmod/semantic_network.hpp"
#include "ctxmod/tree_metrics.hpp"
#include "ctxmod/vector_models.hpp"

namespace ctxmod {

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  std::string model = "boit";          // boi | boit | bot | ddg
  std::string enrichment = "ssn2";     // plain | ssn1 | ssn2 | custom
  std::string concept_measure = "ipl"; // custom enrichment: ipl|wup|lc|cd|diffusion
  std::string lexical = "lcu";         // custom enrichment: lcs|lcu|const|none
  std::string weighting = "idf";       // idf | tfidf | none
  std::string linkage = "complete";    // complete | average | single
  std::optional<int> k;
  int min_package_size = 5;
  int max_package_size = 40;
  double alpha_ipl = 1.0;
  double alpha_diffusion = 0.5;
  std::optional<double> lambda;        // walk kernel decay; default 0.5/rho per pair
  bool pd_edges = false;
  bool pd_sqrt = false;
};

inline ConceptMeasure parse_concept_measure(const std::string& name) {
  if (name == "ipl") return ConceptMeasure::IPL;
  if (name == "wup") return ConceptMeasure::WUP;
  if (name == "lc") return ConceptMeasure::LC;
  if (name == "cd") return ConceptMeasure::CD;
  if (name == "diffusion") return ConceptMeasure::Diffusion;
  throw std::runtime_error("unknown concept measure '" + name +
                           "' (expected ipl, wup, lc, cd or diffusion)");
}

inline LexicalKernel parse_lexical_kernel(const std::string& name) {
  if (name == "lcs") return LexicalKernel::Lcs;
  if (name == "lcu") return LexicalKernel::Lcu;
  if (name == "const") return LexicalKernel::Const;
  if (name == "none") return LexicalKernel::None;
  throw std::runtime_error("unknown lexical kernel '" + name +
                           "' (expected lcs, lcu, const or none)");
}

inline void apply_preset(PipelineConfig& cfg, const std::string& preset) {
  if (preset == "ssn1") {
    cfg.enrichment = "ssn1";
  } else if (preset == "ssn2") {
    cfg.enrichment = "ssn2";
  } else if (preset == "ssk1") {
    cfg.model = "boit";
    cfg.enrichment = "custom";
    cfg.concept_measure = "diffusion";
    cfg.lexical = "const";
  } else if (preset == "ssk2") {
    cfg.model = "ddg";
    cfg.enrichment = "custom";
    cfg.concept_measure = "diffusion";
    cfg.lexical = "const";
  } else {
    throw std::runtime_error("unknown preset '" + preset +
                             "' (expected ssn1, ssn2, ssk1 or ssk2)");
  }
}

inline void validate_config(const PipelineConfig& cfg) {
  auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed,
                   const char* what) {
    for (const char* a : allowed)
      if (v == a) return;
    std::vector<std::string> names(allowed.begin(), allowed.end());
    throw std::runtime_error(std::string("config: bad ") + what + " '" + v +
                             "' (expected " + join(names, ", ") + ")");
  };
  one_of(cfg.model, {"boi", "boit", "bot", "ddg"}, "model");
  one_of(cfg.enrichment, {"plain", "ssn1", "ssn2", "custom"}, "enrichment");
  one_of(cfg.weighting, {"idf", "tfidf", "none"}, "weighting");
  parse_linkage(cfg.linkage);
  if (cfg.enrichment == "custom") {
    parse_concept_measure(cfg.concept_measure);
    parse_lexical_kernel(cfg.lexical);
  }
  if (cfg.k && *cfg.k < 1) throw std::runtime_error("config: k must be >= 1");
  if (cfg.min_package_size < 1 || cfg.max_package_size < cfg.min_package_size)
    throw std::runtime_error("config: need 1 <= min package size <= max package size");
  if (cfg.lambda && *cfg.lambda < 0.0)
    throw std::runtime_error("config: lambda must be >= 0");
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["model"] = cfg.model;
  j["enrichment"] = cfg.enrichment;
  j["concept_measure"] = cfg.concept_measure;
  j["lexical"] = cfg.lexical;
  j["weighting"] = cfg.weighting;
  j["linkage"] = cfg.linkage;
  if (cfg.k) j["k"] = *cfg.k;
  j["min_package_size"] = cfg.min_package_size;
  j["max_package_size"] = cfg.max_package_size;
  j["alpha_ipl"] = cfg.alpha_ipl;
  j["alpha_diffusion"] = cfg.alpha_diffusion;
  if (cfg.lambda) j["lambda"] = *cfg.lambda;
  j["pd_edges"] = cfg.pd_edges;
  j["pd_sqrt"] = cfg.pd_sqrt;
  return j;
}

// Starts from `base` and overrides the keys present in `j`; a "preset" key is
// applied before any explicit field.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw std::runtime_error("config: expected a JSON object");
  PipelineConfig cfg = base;
  static const std::set<std::string> known = {
      "preset",         "model",          "enrichment",       "concept_measure",
      "lexical",        "weighting",      "linkage",          "k",
      "min_package_size", "max_package_size", "alpha_ipl",    "alpha_diffusion",
      "lambda",         "pd_edges",       "pd_sqrt"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
  if (j.contains("preset")) apply_preset(cfg, j.at("preset").get<std::string>());
  auto str = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
  };
  str("model", cfg.model);
  str("enrichment", cfg.enrichment);
  str("concept_measure", cfg.concept_measure);
  str("lexical", cfg.lexical);
  str("weighting", cfg.weighting);
  str("linkage", cfg.linkage);
  if (j.contains("k")) cfg.k = j.at("k").get<int>();
  if (j.contains("min_package_size"))
    cfg.min_package_size = j.at("min_package_size").get<int>();
  if (j.contains("max_package_size"))
    cfg.max_package_size = j.at("max_package_size").get<int>();
  if (j.contains("alpha_ipl")) cfg.alpha_ipl = j.at("alpha_ipl").get<double>();
  if (j.contains("alpha_diffusion"))
    cfg.alpha_diffusion = j.at("alpha_diffusion").get<double>();
  if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
  if (j.contains("pd_edges")) cfg.pd_edges = j.at("pd_edges").get<bool>();
  if (j.contains("pd_sqrt")) cfg.pd_sqrt = j.at("pd_sqrt").get<bool>();
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Stage tagging

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("[") + name + "] " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Semantic scoring shared by the vector-model and graph pipelines

struct PipelineInput {
  CorpusFacts corpus;
  LibraryFacts libs;
  std::vector<SourceUnit> units;  // required by the ddg model and `--via ddg`
};

struct ScoringBundle {
  std::unique_ptr<SemanticNetwork> net;
  std::unique_ptr<TypeHierarchyView> hierarchy;
  std::unique_ptr<ConceptSimilarity> concept_sim;
  LexicalKernel lexical = LexicalKernel::None;
  bool plain = true;

  double concept_score(const std::string& t1, const std::string& t2) const {
    if (plain) return t1 == t2 ? 1.0 : 0.0;
    return (*concept_sim)(t1, t2);
  }
  double lexical_score(const std::string& a, const std::string& b) const {
    if (plain) return a == b ? 1.0 : 0.0;
    return lexical_similarity(lexical, a, b);
  }
  double wsd_score(const std::string& id1, const std::string& id2) const {
    if (plain) return id1 == id2 ? 1.0 : 0.0;
    return disambiguate_sim(*net, id1, id2,
                            [this](const std::string& a, const std::string& b) {
                              return (*concept_sim)(a, b);
                            });
  }
  // Walk-kernel vertex label similarity.
  double label_score(const std::string& a, const std::string& b) const {
    if (a == b) return 1.0;
    if (plain) return 0.0;
    return wsd_score(a, b) * lexical_score(a, b);
  }
};

inline ScoringBundle make_scoring(const PipelineInput& in, const PipelineConfig& cfg,
                                  std::vector<std::string>* warnings) {
  ScoringBundle bundle;
  bundle.net = std::make_unique<SemanticNetwork>(
      build_network(in.corpus, in.libs, warnings));
  if (cfg.enrichment == "plain") {
    bundle.plain = true;
    return bundle;
  }
  bundle.plain = false;
  SimilarityConfig sim;
  sim.alpha_ipl = cfg.alpha_ipl;
  sim.alpha_diffusion = cfg.alpha_diffusion;
  if (cfg.enrichment == "ssn1") {
    sim.measure = ConceptMeasure::CD;
    bundle.lexical = LexicalKernel::Lcu;
  } else if (cfg.enrichment == "ssn2") {
    sim.measure = ConceptMeasure::Diffusion;
    bundle.lexical = LexicalKernel::Lcu;
  } else {
    sim.measure = parse_concept_measure(cfg.concept_measure);
    bundle.lexical = parse_lexical_kernel(cfg.lexical);
  }
  bundle.hierarchy = std::make_unique<TypeHierarchyView>(*bundle.net);
  bundle.concept_sim =
      std::make_unique<ConceptSimilarity>(*bundle.net, *bundle.hierarchy, sim);
  return bundle;
}

// ---------------------------------------------------------------------------
// Modularization pipeline

struct ModularizeResult {
  std::vector<std::string> labels;
  Eigen::MatrixXd distance;
  Dendrogram dendrogram;
  LabeledTree produced;       // cluster tree pruned to the authoritative leaf set
  LabeledTree authoritative;
  double pd = 0.0;
  std::int64_t ted = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline Eigen::MatrixXd model_distance(const PipelineInput& in, const PipelineConfig& cfg,
                                      const ScoringBundle& scoring, int jobs,
                                      std::vector<std::string>& labels) {
  FeatureKind kind = cfg.model == "boi"   ? FeatureKind::BoI
                     : cfg.model == "boit" ? FeatureKind::BoIT
                                           : FeatureKind::BoT;
  DocFeatureMatrix bof = run_stage("model", [&] { return build_bof(in.corpus, kind); });
  labels = bof.docs;

  Eigen::MatrixXd s = run_stage("enrichment", [&]() -> Eigen::MatrixXd {
    int nf = static_cast<int>(bof.space.features.size());
    if (scoring.plain) return Eigen::MatrixXd::Identity(nf, nf);
    return semantic_matrix(
        bof.space,
        [&](const std::string& a, const std::string& b) {
          return kind == FeatureKind::BoI ? scoring.wsd_score(a, b)
                                          : scoring.concept_score(a, b);
        },
        [&](const std::string& a, const std::string& b) {
          return scoring.lexical_score(a, b);
        },
        jobs);
  });

  return run_stage("kernel", [&] {
    Eigen::MatrixXd counts = bof.counts;
    Eigen::VectorXd r = Eigen::VectorXd::Ones(bof.space.features.size());
    if (cfg.weighting == "idf") {
      r = idf_diag(bof);
    } else if (cfg.weighting == "tfidf") {
      counts = sublinear_tf(counts);
      r = idf_diag(bof);
    }
    Eigen::MatrixXd k = document_kernel(counts, r, s);
    return kernel_to_distance(k);
  });
}

inline Eigen::MatrixXd ddg_distance(const PipelineInput& in, const PipelineConfig& cfg,
                                    const ScoringBundle& scoring, int jobs,
                                    std::vector<std::string>& labels) {
  if (in.units.empty())
    throw std::runtime_error("[model] ddg model needs parsed sources (--src)");
  std::vector<const SourceUnit*> units;
  for (const auto& u : in.units) units.push_back(&u);
  std::sort(units.begin(), units.end(),
            [](const SourceUnit* a, const SourceUnit* b) {
              return a->unit_name < b->unit_name;
            });

  std::vector<DepGraph> graphs;
  labels.clear();
  run_stage("model", [&] {
    for (const SourceUnit* u : units) {
      graphs.push_back(build_ddg(*u));
      labels.push_back(u->unit_name);
    }
    return 0;
  });

  // Global vertex-label similarity table, computed once.
  std::vector<std::string> vocab;
  {
    std::set<std::string> seen;
    for (const auto& g : graphs)
      for (int v = 0; v < g.vertex_count(); ++v) seen.insert(g.vertex(v).label);
    vocab.assign(seen.begin(), seen.end());
  }
  int nv = static_cast<int>(vocab.size());
  Eigen::MatrixXd sigma(nv, nv);
  run_stage("enrichment", [&] {
    parallel_for(nv, jobs, [&](int i) {
      for (int j = i; j < nv; ++j) {
        double v = scoring.label_score(vocab[i], vocab[j]);
        sigma(i, j) = v;
        sigma(j, i) = v;
      }
    });
    return 0;
  });
  std::map<std::string, int> vocab_index;
  for (int i = 0; i < nv; ++i) vocab_index.emplace(vocab[i], i);
  auto label_sim = [&](const std::string& a, const std::string& b) {
    return sigma(vocab_index.at(a), vocab_index.at(b));
  };

  return run_stage("kernel", [&] {
    int n = static_cast<int>(graphs.size());
    // One decay rate for the whole corpus keeps kernel values comparable
    // across pairs. rho(product) <= rho(a1) * rho(a2), so 0.5 over the squared
    // largest per-graph radius converges for every pair.
    std::optional<double> lambda = cfg.lambda;
    if (!lambda) {
      double rmax = 0.0;
      for (const auto& g : graphs) rmax = std::max(rmax, spectral_radius(g.adjacency()));
      lambda = 0.5 / std::max(1.0, rmax * rmax);
    }
    std::vector<double> self(n);
    parallel_for(n, jobs, [&](int i) {
      self[i] = random_walk_kernel_raw(graphs[i], graphs[i], label_sim, lambda);
    });
    Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n, n);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<double> values(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), jobs, [&](int p) {
      auto [i, j] = pairs[p];
      double raw = random_walk_kernel_raw(graphs[i], graphs[j], label_sim, lambda);
      values[p] = (self[i] > 0.0 && self[j] > 0.0)
                      ? raw / std::sqrt(self[i] * self[j])
                      : 0.0;
    });
    for (size_t p = 0; p < pairs.size(); ++p) {
      k(pairs[p].first, pairs[p].second) = values[p];
      k(pairs[p].second, pairs[p].first) = values[p];
    }
    return kernel_to_distance(k);
  });
}

}  // namespace detail

inline std::vector<PackageEntry> package_entries(const CorpusFacts& corpus) {
  std::vector<PackageEntry> entries;
  for (const auto& u : corpus.units) {
    std::string path;
    for (const auto& seg : u.package_path) {
      if (!path.empty()) path += '.';
      path += seg;
    }
    entries.push_back(PackageEntry{u.unit_name, path});
  }
  return entries;
}

inline ModularizeResult modularize_run(const PipelineInput& in, const PipelineConfig& cfg,
                                       int jobs = 1) {
  validate_config(cfg);
  ModularizeResult result;
  ScoringBundle scoring =
      run_stage("network", [&] { return make_scoring(in, cfg, &result.warnings); });

  result.distance =
      cfg.model == "ddg"
          ? detail::ddg_distance(in, cfg, scoring, jobs, result.labels)
          : detail::model_distance(in, cfg, scoring, jobs, result.labels);

  result.dendrogram = run_stage("clustering", [&] {
    return hierarchical_cluster(result.distance, result.labels,
                                parse_linkage(cfg.linkage));
  });

  result.authoritative = run_stage("authoritative", [&] {
    AuthoritativeOptions opts;
    opts.min_package_size = cfg.min_package_size;
    opts.max_package_size = cfg.max_package_size;
    return authoritative_tree(package_entries(in.corpus), opts);
  });

  result.produced = run_stage("metrics", [&] {
    std::vector<std::string> keep = leaf_labels(result.authoritative);
    return prune_to_leaves(dendrogram_to_tree(result.dendrogram),
                           std::set<std::string>(keep.begin(), keep.end()));
  });
  run_stage("metrics", [&] {
    PathDifferenceOptions pd_opts;
    pd_opts.count_edges = cfg.pd_edges;
    pd_opts.take_sqrt = cfg.pd_sqrt;
    result.pd = path_difference(result.produced, result.authoritative, pd_opts);
    result.ted = tree_edit_distance(result.produced, result.authoritative);
    return 0;
  });
  return result;
}

// ---------------------------------------------------------------------------
// Topic analysis

struct TopicsResult {
  std::vector<std::string> identifiers;  // row labels
  std::vector<std::string> columns;      // "(document,type)" display labels
  Eigen::MatrixXd matrix;                // weighted, row-normalized
  Dendrogram dendrogram;
  std::vector<std::vector<std::string>> groups;
  std::vector<std::string> warnings;
};

namespace detail {

inline Eigen::MatrixXd normalize_rows(Eigen::MatrixXd m) {
  for (int i = 0; i < m.rows(); ++i) {
    double norm = m.row(i).norm();
    if (norm > 0.0) m.row(i) /= norm;
  }
  return m;
}

inline Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& rows) {
  int n = static_cast<int>(rows.rows());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = (rows.row(i) - rows.row(j)).norm();
      d(i, j) = d(j, i) = v;
    }
  return d;
}

inline void apply_column_weighting(Eigen::MatrixXd& m, const std::string& weighting) {
  if (weighting == "none") return;
  if (weighting == "tfidf") m = sublinear_tf(m);
  int rows = static_cast<int>(m.rows());
  for (int c = 0; c < m.cols(); ++c) {
    int df = 0;
    for (int r = 0; r < rows; ++r)
      if (m(r, c) > 0.0) ++df;
    double w = df > 0 ? std::log(static_cast<double>(rows) / df) : 0.0;
    m.col(c) *= std::max(w, 1e-12);
  }
}

}  // namespace detail

inline TopicsResult topics_run(const PipelineInput& in, const PipelineConfig& cfg, int k,
                               const std::string& via = "", int jobs = 1) {
  validate_config(cfg);
  TopicsResult result;
  (void)jobs;

  Eigen::MatrixXd dist;
  if (via == "ddg") {
    if (in.units.empty())
      throw std::runtime_error("[model] topics via ddg needs parsed sources (--src)");
    std::vector<DepGraph> graphs;
    run_stage("model", [&] {
      std::vector<const SourceUnit*> units;
      for (const auto& u : in.units) units.push_back(&u);
      std::sort(units.begin(), units.end(),
                [](const SourceUnit* a, const SourceUnit* b) {
                  return a->unit_name < b->unit_name;
                });
      for (const SourceUnit* u : units) graphs.push_back(build_ddg(*u));
      return 0;
    });
    DepGraph merged = merge_graphs(graphs);
    dist = run_stage("kernel", [&] {
      Eigen::MatrixXd a = merged.adjacency();
      Eigen::MatrixXd kernel =
          diffusion_kernel(a + a.transpose(), cfg.alpha_diffusion);
      std::vector<std::pair<std::string, int>> named;
      for (int v = 0; v < merged.vertex_count(); ++v)
        if (merged.vertex(v).label != kNamelessCall)
          named.emplace_back(merged.vertex(v).label, v);
      std::sort(named.begin(), named.end());
      int n = static_cast<int>(named.size());
      if (n == 0) throw std::runtime_error("no identifier vertices in the merged graph");
      result.identifiers.clear();
      Eigen::MatrixXd d(n, n);
      for (int i = 0; i < n; ++i) result.identifiers.push_back(named[i].first);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = 1.0 - kernel(named[i].second, named[j].second);
          d(i, j) = i == j ? 0.0 : std::clamp(v, 0.0, 2.0);
        }
      return d;
    });
  } else if (via.empty()) {
    DocFeatureMatrix bof =
        run_stage("model", [&] { return build_bof(in.corpus, FeatureKind::BoIT); });
    run_stage("kernel", [&] {
      std::map<std::string, int> id_index;
      std::map<std::pair<std::string, std::string>, int> col_index;
      for (const auto& f : bof.space.features) id_index.emplace(f.id, 0);
      int next = 0;
      for (auto& [id, idx] : id_index) idx = next++;
      for (size_t d = 0; d < bof.docs.size(); ++d)
        for (const auto& f : bof.space.features) col_index.emplace(
            std::make_pair(bof.docs[d], f.type), 0);
      // keep only columns with some mass
      Eigen::MatrixXd full(id_index.size(), col_index.size());
      next = 0;
      for (auto& [key, idx] : col_index) idx = next++;
      full.setZero();
      for (size_t d = 0; d < bof.docs.size(); ++d)
        for (size_t f = 0; f < bof.space.features.size(); ++f) {
          double c = bof.counts(static_cast<int>(d), static_cast<int>(f));
          if (c <= 0.0) continue;
          const Feature& feat = bof.space.features[f];
          full(id_index.at(feat.id), col_index.at({bof.docs[d], feat.type})) += c;
        }
      std::vector<int> keep;
      std::vector<std::pair<std::string, std::string>> col_keys(col_index.size());
      for (const auto& [key, idx] : col_index) col_keys[idx] = key;
      for (int c = 0; c < full.cols(); ++c)
        if (full.col(c).sum() > 0.0) keep.push_back(c);
      Eigen::MatrixXd m(full.rows(), keep.size());
      for (size_t c = 0; c < keep.size(); ++c) {
        m.col(c) = full.col(keep[c]);
        result.columns.push_back("(" + col_keys[keep[c]].first + "," +
                                 col_keys[keep[c]].second + ")");
      }
      result.identifiers.resize(id_index.size());
      for (const auto& [id, idx] : id_index) result.identifiers[idx] = id;
      detail::apply_column_weighting(m, cfg.weighting);
      result.matrix = detail::normalize_rows(m);
      return 0;
    });
    dist = detail::euclidean_distances(result.matrix);
  } else {
    throw std::runtime_error("unknown --via '" + via + "' (expected ddg)");
  }

  int vocab = static_cast<int>(result.identifiers.size());
  if (k < 1)
    throw std::runtime_error("[clustering] k must be >= 1, got " + std::to_string(k));
  if (k > vocab)
    throw std::runtime_error("[clustering] k = " + std::to_string(k) +
                             " exceeds the vocabulary size " + std::to_string(vocab));
  result.dendrogram = run_stage("clustering", [&] {
    return hierarchical_cluster(dist, result.identifiers, parse_linkage(cfg.linkage));
  });
  result.groups = cut_dendrogram(result.dendrogram, k);
  return result;
}

// ---------------------------------------------------------------------------
// Module-type heatmap

struct HeatmapResult {
  std::vector<std::string> modules;  // ordered by (package path, unit name)
  std::vector<std::string> types;
  Eigen::MatrixXd matrix;  // row-normalized module x type usage
  Eigen::MatrixXd module_distance;
  Eigen::MatrixXd type_distance;
  Dendrogram module_dendrogram;
  Dendrogram type_dendrogram;
  std::vector<std::string> warnings;
};

inline HeatmapResult heatmap_run(const PipelineInput& in, const PipelineConfig& cfg) {
  validate_config(cfg);
  HeatmapResult result;
  DocFeatureMatrix bof =
      run_stage("model", [&] { return build_bof(in.corpus, FeatureKind::BoT); });

  run_stage("heatmap", [&] {
    std::vector<int> order(bof.docs.size());
    std::map<std::string, const UnitFacts*> by_name;
    for (const auto& u : in.corpus.units) by_name.emplace(u.unit_name, &u);
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const UnitFacts* ua = by_name.at(bof.docs[a]);
      const UnitFacts* ub = by_name.at(bof.docs[b]);
      return std::tie(ua->package_path, ua->unit_name) <
             std::tie(ub->package_path, ub->unit_name);
    });

    std::vector<int> keep_cols;
    for (int c = 0; c < bof.counts.cols(); ++c) {
      if (bof.counts.col(c).sum() > 0.0) {
        keep_cols.push_back(c);
      } else {
        result.warnings.push_back("heatmap: dropping empty type column '" +
                                  bof.space.features[c].type + "'");
      }
    }

    Eigen::MatrixXd counts(order.size(), keep_cols.size());
    for (size_t r = 0; r < order.size(); ++r)
      for (size_t c = 0; c < keep_cols.size(); ++c)
        counts(r, c) = bof.counts(order[r], keep_cols[c]);
    for (int r : order) result.modules.push_back(bof.docs[r]);
    for (int c : keep_cols) result.types.push_back(bof.space.features[c].type);

    result.matrix = detail::normalize_rows(counts);
    result.module_distance = detail::euclidean_distances(result.matrix);
    Eigen::MatrixXd type_rows = detail::normalize_rows(counts.transpose());
    result.type_distance = detail::euclidean_distances(type_rows);
    return 0;
  });

  result.module_dendrogram = run_stage("clustering", [&] {
    return hierarchical_cluster(result.module_distance, result.modules,
                                parse_linkage(cfg.linkage));
  });
  result.type_dendrogram = run_stage("clustering", [&] {
    return hierarchical_cluster(result.type_distance, result.types,
                                parse_linkage(cfg.linkage));
  });
  return result;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string delta_percent(double new_value, double old_value) {
  if (old_value == 0.0) return "n/a";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%+.2f%%", (new_value - old_value) / old_value * 100.0);
  return buf;
}

inline nlohmann::ordered_json modularize_report(
    const PipelineConfig& cfg, const ModularizeResult& result,
    const std::map<std::string, std::string>& artifacts,
    const std::optional<nlohmann::json>& baseline = std::nullopt,
    const std::optional<std::map<std::string, double>>& timing_ms = std::nullopt) {
  nlohmann::ordered_json j;
  j["config"] = config_to_json(cfg);
  j["metrics"]["modules"] = result.labels.size();
  j["metrics"]["leaves"] = leaf_labels(result.authoritative).size();
  j["metrics"]["pd"] = result.pd;
  j["metrics"]["ted"] = result.ted;
  if (baseline) {
    const auto& old = baseline->at("metrics");
    j["deltas"]["pd"] = delta_percent(result.pd, old.at("pd").get<double>());
    j["deltas"]["ted"] = delta_percent(static_cast<double>(result.ted),
                                       old.at("ted").get<double>());
  }
  j["artifacts"] = artifacts;
  j["warnings"] = result.warnings;
  if (timing_ms) j["timing_ms"] = *timing_ms;
  return j;
}

struct EvaluateResult {
  double pd = 0.0;
  std::int64_t ted = 0;
  LabeledTree produced;
  LabeledTree authoritative;
};

// Compares a produced tree against the authoritative one after dropping the
// produced-side leaves that the authoritative thresholds eliminated.
inline EvaluateResult evaluate_trees(const LabeledTree& produced,
                                     const LabeledTree& authoritative,
                                     const PipelineConfig& cfg) {
  EvaluateResult r;
  r.authoritative = authoritative;
  canonicalize(r.authoritative);
  std::vector<std::string> keep = leaf_labels(r.authoritative);
  r.produced =
      prune_to_leaves(produced, std::set<std::string>(keep.begin(), keep.end()));
  PathDifferenceOptions opts;
  opts.count_edges = cfg.pd_edges;
  opts.take_sqrt = cfg.pd_sqrt;
  r.pd = path_difference(r.produced, r.authoritative, opts);
  r.ted = tree_edit_distance(r.produced, r.authoritative);
  return r;
}

// ---------------------------------------------------------------------------
// Artifact writing

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

}  // namespace detail

inline std::map<std::string, std::string> write_modularize_artifacts(
    const ModularizeResult& result, const std::filesystem::path& out_dir,
    const std::optional<int>& k) {
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::string> artifacts;

  auto emit = [&](const std::string& name, const std::string& text) {
    std::filesystem::path p = out_dir / name;
    detail::write_text_file(p, text);
    artifacts[name] = p.string();
  };

  emit("dendrogram.nwk", dendrogram_to_newick(result.dendrogram));
  emit("produced.nwk", tree_to_newick(result.produced));
  emit("authoritative.nwk", tree_to_newick(result.authoritative));
  {
    std::ostringstream os;
    write_matrix_csv(os, result.labels, result.labels, result.distance, "module");
    emit("distance.csv", os.str());
  }
  if (k) {
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    auto cut = cut_dendrogram(result.dendrogram, *k);
    for (size_t i = 0; i < cut.size(); ++i) {
      nlohmann::ordered_json g;
      g["group"] = i + 1;
      g["members"] = cut[i];
      groups.push_back(g);
    }
    emit("groups.json", groups.dump(2));
  }
  return artifacts;
}

inline std::map<std::string, std::string> write_heatmap_artifacts(
    const HeatmapResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::string> artifacts;
  auto emit = [&](const std::string& name, const std::string& text) {
    std::filesystem::path p = out_dir / name;
    detail::write_text_file(p, text);
    artifacts[name] = p.string();
  };
  {
    std::ostringstream os;
    write_matrix_csv(os, result.modules, result.types, result.matrix, "module");
    emit("heatmap.csv", os.str());
  }
  {
    std::ostringstream os;
    write_matrix_csv(os, result.modules, result.modules, result.module_distance,
                     "module");
    emit("module_distance.csv", os.str());
  }
  {
    std::ostringstream os;
    write_matrix_csv(os, result.types, result.types, result.type_distance, "type");
    emit("type_distance.csv", os.str());
  }
  emit("modules.nwk", dendrogram_to_newick(result.module_dendrogram));
  emit("types.nwk", dendrogram_to_newick(result.type_dendrogram));
  {
    std::ostringstream os;
    os << "module\n";
    for (const auto& m : dendrogram_leaf_order(result.module_dendrogram)) os << m << "\n";
    emit("row_order.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "type\n";
    for (const auto& t : dendrogram_leaf_order(result.type_dendrogram)) os << t << "\n";
    emit("col_order.csv", os.str());
  }
  return artifacts;
}

}  // namespace ctxmod
