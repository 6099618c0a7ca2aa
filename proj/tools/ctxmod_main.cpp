#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxmod/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<fs::path> collect_sources(const std::vector<std::string>& roots) {
  std::vector<fs::path> files;
  for (const auto& root : roots) {
    fs::path p(root);
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".mini")
          files.push_back(entry.path());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw std::runtime_error("source path not found: " + root);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<ctxmod::SourceUnit> parse_sources(const std::vector<std::string>& roots) {
  std::vector<ctxmod::SourceUnit> units;
  for (const auto& file : collect_sources(roots)) {
    try {
      for (auto& u : ctxmod::parse_program(read_file(file))) units.push_back(std::move(u));
    } catch (const std::exception& e) {
      throw std::runtime_error(file.string() + ": " + e.what());
    }
  }
  std::sort(units.begin(), units.end(),
            [](const auto& a, const auto& b) { return a.unit_name < b.unit_name; });
  return units;
}

struct GlobalArgs {
  std::string facts;
  std::string libs;
  std::string out;
  std::string config_path;
  std::vector<std::string> src;
  int jobs = 1;
};

ctxmod::PipelineInput load_input(const GlobalArgs& g, bool need_units) {
  ctxmod::PipelineInput input;
  if (!g.libs.empty()) input.libs = ctxmod::load_library(g.libs);
  if (!g.src.empty()) input.units = parse_sources(g.src);
  if (!g.facts.empty()) {
    input.corpus = ctxmod::load_facts(g.facts);
  } else if (!input.units.empty()) {
    input.corpus = ctxmod::ingest_corpus(input.units, input.libs);
  } else {
    throw std::runtime_error("no input: pass --facts and/or --src");
  }
  if (need_units && input.units.empty())
    throw std::runtime_error("this command needs parsed sources: pass --src");
  return input;
}

ctxmod::PipelineConfig load_config(const GlobalArgs& g,
                                   ctxmod::PipelineConfig defaults = {}) {
  if (g.config_path.empty()) return defaults;
  nlohmann::json j = nlohmann::json::parse(read_file(g.config_path));
  return ctxmod::config_from_json(j, defaults);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

fs::path require_out(const GlobalArgs& g) {
  if (g.out.empty()) throw std::runtime_error("--out is required for this command");
  return fs::path(g.out);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

struct ConfigOverrides {
  std::optional<std::string> preset, model, enrichment, measure, lexical, weighting,
      linkage;
  std::optional<int> k, min_package, max_package;
  std::optional<double> alpha_ipl, alpha_diffusion, lambda;
  bool pd_edges = false, pd_sqrt = false;

  void add_flags(CLI::App* cmd, bool with_k = true) {
    cmd->add_option("--preset", preset, "configuration preset: ssn1, ssn2, ssk1, ssk2");
    cmd->add_option("--model", model, "vector model or graph model: boi, boit, bot, ddg");
    cmd->add_option("--enrichment", enrichment,
                    "semantic enrichment: plain, ssn1, ssn2, custom");
    cmd->add_option("--measure", measure,
                    "concept measure for custom enrichment: ipl, wup, lc, cd, diffusion");
    cmd->add_option("--lexical", lexical,
                    "lexical kernel for custom enrichment: lcs, lcu, const, none");
    cmd->add_option("--weighting", weighting, "feature weighting: idf, tfidf, none");
    cmd->add_option("--linkage", linkage, "cluster linkage: complete, average, single");
    if (with_k) cmd->add_option("-k,--k", k, "number of clusters for the cut");
    cmd->add_option("--min-package-size", min_package,
                    "packages with fewer units are dropped from the authoritative tree");
    cmd->add_option("--max-package-size", max_package,
                    "packages with more units are split into balanced chunks");
    cmd->add_option("--alpha-ipl", alpha_ipl, "inverse path length decay exponent");
    cmd->add_option("--alpha-diffusion", alpha_diffusion, "diffusion sinking factor");
    cmd->add_option("--lambda", lambda, "walk kernel decay (default 0.5/spectral radius)");
    cmd->add_flag("--pd-edges", pd_edges, "count edges instead of nodes in path lengths");
    cmd->add_flag("--pd-sqrt", pd_sqrt, "report the square root of the path difference");
  }

  void apply(ctxmod::PipelineConfig& cfg) const {
    if (preset) ctxmod::apply_preset(cfg, *preset);
    if (model) cfg.model = *model;
    if (enrichment) cfg.enrichment = *enrichment;
    if (measure) {
      cfg.concept_measure = *measure;
      if (!enrichment && !preset) cfg.enrichment = "custom";
    }
    if (lexical) {
      cfg.lexical = *lexical;
      if (!enrichment && !preset) cfg.enrichment = "custom";
    }
    if (weighting) cfg.weighting = *weighting;
    if (linkage) cfg.linkage = *linkage;
    if (k) cfg.k = *k;
    if (min_package) cfg.min_package_size = *min_package;
    if (max_package) cfg.max_package_size = *max_package;
    if (alpha_ipl) cfg.alpha_ipl = *alpha_ipl;
    if (alpha_diffusion) cfg.alpha_diffusion = *alpha_diffusion;
    if (lambda) cfg.lambda = *lambda;
    if (pd_edges) cfg.pd_edges = true;
    if (pd_sqrt) cfg.pd_sqrt = true;
    ctxmod::validate_config(cfg);
  }
};

int cmd_ingest(const GlobalArgs& g) {
  if (g.src.empty()) throw std::runtime_error("ingest needs --src");
  ctxmod::PipelineInput input = load_input(g, true);
  std::ostringstream os;
  ctxmod::save_facts(input.corpus, os);
  write_text(require_out(g), os.str());
  std::cout << "ingested " << input.corpus.units.size() << " units -> " << g.out << "\n";
  return 0;
}

int cmd_network(const GlobalArgs& g) {
  ctxmod::PipelineInput input = load_input(g, false);
  std::vector<std::string> warnings;
  ctxmod::SemanticNetwork net = ctxmod::build_network(input.corpus, input.libs, &warnings);
  print_warnings(warnings);
  fs::path out = require_out(g);
  fs::create_directories(out);
  {
    std::ostringstream os;
    ctxmod::write_network_nodes_csv(net, os);
    write_text(out / "nodes.csv", os.str());
  }
  {
    std::ostringstream os;
    ctxmod::write_network_edges_csv(net, os);
    write_text(out / "edges.csv", os.str());
  }
  {
    std::ostringstream os;
    ctxmod::write_network_dot(net, os);
    write_text(out / "network.dot", os.str());
  }
  std::cout << "network: " << net.node_count() << " nodes, " << net.edges().size()
            << " edges -> " << out.string() << "\n";
  return 0;
}

int cmd_similarity(const GlobalArgs& g, const std::string& measure, double alpha_ipl,
                   double alpha_diffusion) {
  ctxmod::PipelineInput input = load_input(g, false);
  std::vector<std::string> warnings;
  ctxmod::SemanticNetwork net = ctxmod::build_network(input.corpus, input.libs, &warnings);
  print_warnings(warnings);

  std::ostringstream os;
  if (measure == "diffusion") {
    Eigen::MatrixXd k = ctxmod::diffusion_similarity(net, alpha_diffusion);
    std::vector<std::string> labels;
    for (int i = 0; i < net.node_count(); ++i) {
      const auto& node = net.node(i);
      labels.push_back(
          (node.kind == ctxmod::NodeKind::Term ? "term:" : "concept:") + node.label);
    }
    ctxmod::write_matrix_csv(os, labels, labels, k, "node");
  } else {
    ctxmod::TypeHierarchyView hierarchy(net);
    ctxmod::SimilarityConfig sim;
    sim.measure = ctxmod::parse_concept_measure(measure);
    sim.alpha_ipl = alpha_ipl;
    sim.alpha_diffusion = alpha_diffusion;
    ctxmod::ConceptSimilarity concept_sim(net, hierarchy, sim);
    std::vector<std::string> labels;
    for (int i = 0; i < hierarchy.size(); ++i) labels.push_back(hierarchy.label(i));
    std::sort(labels.begin(), labels.end());
    int n = static_cast<int>(labels.size());
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) k(i, j) = concept_sim(labels[i], labels[j]);
    ctxmod::write_matrix_csv(os, labels, labels, k, "concept");
  }
  write_text(require_out(g), os.str());
  std::cout << "similarity (" << measure << ") -> " << g.out << "\n";
  return 0;
}

int cmd_kernel(const GlobalArgs& g, const ConfigOverrides& overrides) {
  ctxmod::PipelineInput input = load_input(g, false);
  ctxmod::PipelineConfig cfg = load_config(g);
  overrides.apply(cfg);
  if (cfg.model == "ddg")
    throw std::runtime_error("kernel emits document kernels; use modularize for ddg");
  std::vector<std::string> warnings;
  ctxmod::ScoringBundle scoring = ctxmod::make_scoring(input, cfg, &warnings);
  print_warnings(warnings);
  std::vector<std::string> labels;
  Eigen::MatrixXd dist = ctxmod::detail::model_distance(input, cfg, scoring, g.jobs, labels);
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Ones(dist.rows(), dist.cols()) - dist;
  fs::path out = require_out(g);
  fs::create_directories(out);
  {
    std::ostringstream os;
    ctxmod::write_matrix_csv(os, labels, labels, kernel, "module");
    write_text(out / "kernel.csv", os.str());
  }
  {
    std::ostringstream os;
    ctxmod::write_matrix_csv(os, labels, labels, dist, "module");
    write_text(out / "distance.csv", os.str());
  }
  std::cout << "kernel (" << cfg.model << ", " << cfg.enrichment << ") over "
            << labels.size() << " modules -> " << out.string() << "\n";
  return 0;
}

int cmd_ddg(const GlobalArgs& g, bool merge) {
  ctxmod::PipelineInput input = load_input(g, true);
  fs::path out = require_out(g);
  fs::create_directories(out);
  std::vector<ctxmod::DepGraph> graphs;
  for (const auto& unit : input.units) {
    ctxmod::DepGraph graph = ctxmod::build_ddg(unit);
    std::ostringstream os;
    ctxmod::write_ddg_dot(graph, os);
    write_text(out / (unit.unit_name + ".dot"), os.str());
    graphs.push_back(std::move(graph));
  }
  {
    std::ostringstream os;
    ctxmod::write_ddg_edges_csv(graphs, os);
    write_text(out / "edges.csv", os.str());
  }
  if (merge) {
    ctxmod::DepGraph merged = ctxmod::merge_graphs(graphs);
    std::ostringstream os;
    ctxmod::write_ddg_dot(merged, os);
    write_text(out / "merged.dot", os.str());
  }
  std::cout << "ddg: " << graphs.size() << " graphs -> " << out.string() << "\n";
  return 0;
}

int cmd_modularize(const GlobalArgs& g, const ConfigOverrides& overrides,
                   const std::string& baseline_path, bool timing) {
  auto t0 = std::chrono::steady_clock::now();
  ctxmod::PipelineInput input = load_input(g, false);
  ctxmod::PipelineConfig cfg = load_config(g);
  overrides.apply(cfg);

  ctxmod::ModularizeResult result = ctxmod::modularize_run(input, cfg, g.jobs);
  print_warnings(result.warnings);

  fs::path out = require_out(g);
  auto artifacts = ctxmod::write_modularize_artifacts(result, out, cfg.k);

  std::optional<nlohmann::json> baseline;
  if (!baseline_path.empty())
    baseline = nlohmann::json::parse(read_file(baseline_path));

  auto t1 = std::chrono::steady_clock::now();
  double total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  std::optional<std::map<std::string, double>> timing_ms;
  if (timing) timing_ms = std::map<std::string, double>{{"total", total_ms}};
  std::cerr << "timing: total=" << total_ms << "ms\n";

  ordered_json report = ctxmod::modularize_report(cfg, result, artifacts, baseline,
                                                  timing_ms);
  write_text(out / "report.json", report.dump(2));
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_topics(const GlobalArgs& g, const ConfigOverrides& overrides, int k,
               const std::string& via) {
  ctxmod::PipelineInput input = load_input(g, via == "ddg");
  ctxmod::PipelineConfig defaults;
  defaults.weighting = "none";  // topic counts stay raw unless asked otherwise
  ctxmod::PipelineConfig cfg = load_config(g, defaults);
  overrides.apply(cfg);

  ctxmod::TopicsResult result = ctxmod::topics_run(input, cfg, k, via, g.jobs);
  print_warnings(result.warnings);

  fs::path out = require_out(g);
  fs::create_directories(out);
  ordered_json topics = ordered_json::array();
  for (size_t i = 0; i < result.groups.size(); ++i) {
    ordered_json t;
    t["topic"] = i + 1;
    t["members"] = result.groups[i];
    topics.push_back(t);
  }
  write_text(out / "topics.json", topics.dump(2));
  write_text(out / "topics.nwk", ctxmod::dendrogram_to_newick(result.dendrogram));
  std::cout << topics.dump(2) << "\n";
  return 0;
}

int cmd_heatmap(const GlobalArgs& g, const ConfigOverrides& overrides) {
  ctxmod::PipelineInput input = load_input(g, false);
  ctxmod::PipelineConfig cfg = load_config(g);
  overrides.apply(cfg);
  ctxmod::HeatmapResult result = ctxmod::heatmap_run(input, cfg);
  print_warnings(result.warnings);
  auto artifacts = ctxmod::write_heatmap_artifacts(result, require_out(g));
  for (const auto& [name, path] : artifacts) std::cout << name << " -> " << path << "\n";
  return 0;
}

int cmd_evaluate(const GlobalArgs& g, const std::string& tree_path,
                 const std::string& auth_path, const std::string& baseline_path,
                 const ConfigOverrides& overrides) {
  ctxmod::PipelineConfig cfg = load_config(g);
  overrides.apply(cfg);
  ctxmod::LabeledTree produced = ctxmod::parse_newick(read_file(tree_path));
  ctxmod::LabeledTree authoritative = ctxmod::parse_newick(read_file(auth_path));
  ctxmod::EvaluateResult result = ctxmod::evaluate_trees(produced, authoritative, cfg);

  ordered_json report;
  report["metrics"]["pd"] = result.pd;
  report["metrics"]["ted"] = result.ted;
  report["metrics"]["leaves"] = ctxmod::leaf_labels(result.authoritative).size();
  std::cout << "PD: " << ctxmod::format_double(result.pd) << "\n";
  std::cout << "TED: " << result.ted << "\n";
  if (!baseline_path.empty()) {
    nlohmann::json baseline = nlohmann::json::parse(read_file(baseline_path));
    const auto& old = baseline.at("metrics");
    std::string pd_delta =
        ctxmod::delta_percent(result.pd, old.at("pd").get<double>());
    std::string ted_delta = ctxmod::delta_percent(static_cast<double>(result.ted),
                                                  old.at("ted").get<double>());
    report["deltas"]["pd"] = pd_delta;
    report["deltas"]["ted"] = ted_delta;
    std::cout << "PD delta: " << pd_delta << "\n";
    std::cout << "TED delta: " << ted_delta << "\n";
  }
  if (!g.out.empty()) write_text(fs::path(g.out), report.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic clustering of source code modules"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--facts", g.facts, "corpus facts JSONL file");
  app.add_option("--libs", g.libs, "library facts JSON file");
  app.add_option("--src", g.src, "source files or directories (*.mini)");
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--config", g.config_path, "pipeline config JSON file");
  app.add_option("--jobs", g.jobs, "worker threads for pairwise stages")
      ->check(CLI::PositiveNumber);

  auto* ingest = app.add_subcommand("ingest", "parse sources into corpus facts");

  auto* network = app.add_subcommand("network", "emit the semantic network");

  auto* similarity =
      app.add_subcommand("similarity", "emit concept or node similarity matrices");
  std::string sim_measure = "wup";
  double sim_alpha_ipl = 1.0, sim_alpha_diffusion = 0.5;
  similarity->add_option("--measure", sim_measure,
                         "ipl, wup, lc, cd or diffusion");
  similarity->add_option("--alpha-ipl", sim_alpha_ipl, "inverse path length exponent");
  similarity->add_option("--alpha-diffusion", sim_alpha_diffusion, "sinking factor");

  auto* kernel = app.add_subcommand("kernel", "emit document kernel and distances");
  ConfigOverrides kernel_overrides;
  kernel_overrides.add_flags(kernel, false);

  auto* ddg = app.add_subcommand("ddg", "emit data-dependency graphs");
  bool ddg_merge = false;
  ddg->add_flag("--merge", ddg_merge, "also emit the merged whole-program graph");

  auto* modularize =
      app.add_subcommand("modularize", "cluster modules and compare to the packages");
  ConfigOverrides mod_overrides;
  mod_overrides.add_flags(modularize);
  std::string mod_baseline;
  bool mod_timing = false;
  modularize->add_option("--baseline", mod_baseline, "baseline report.json for deltas");
  modularize->add_flag("--timing", mod_timing, "embed wall-clock timing in the report");

  auto* topics = app.add_subcommand("topics", "cluster identifiers into topics");
  ConfigOverrides topics_overrides;
  topics_overrides.add_flags(topics, false);
  int topics_k = 0;
  std::string topics_via;
  topics->add_option("-k,--k", topics_k, "number of topics")->required();
  topics->add_option("--via", topics_via, "alternative term similarity source: ddg");

  auto* heatmap = app.add_subcommand("heatmap", "emit the module-type usage heatmap");
  ConfigOverrides heatmap_overrides;
  heatmap_overrides.add_flags(heatmap, false);

  auto* evaluate = app.add_subcommand("evaluate", "compare two decomposition trees");
  std::string eval_tree, eval_auth, eval_baseline;
  ConfigOverrides eval_overrides;
  evaluate->add_option("--tree", eval_tree, "produced tree (Newick)")->required();
  evaluate->add_option("--authoritative", eval_auth, "authoritative tree (Newick)")
      ->required();
  evaluate->add_option("--baseline", eval_baseline, "baseline report.json for deltas");
  evaluate->add_flag("--pd-edges", eval_overrides.pd_edges,
                     "count edges instead of nodes in path lengths");
  evaluate->add_flag("--pd-sqrt", eval_overrides.pd_sqrt,
                     "report the square root of the path difference");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return cmd_ingest(g);
    if (network->parsed()) return cmd_network(g);
    if (similarity->parsed())
      return cmd_similarity(g, sim_measure, sim_alpha_ipl, sim_alpha_diffusion);
    if (kernel->parsed()) return cmd_kernel(g, kernel_overrides);
    if (ddg->parsed()) return cmd_ddg(g, ddg_merge);
    if (modularize->parsed())
      return cmd_modularize(g, mod_overrides, mod_baseline, mod_timing);
    if (topics->parsed()) return cmd_topics(g, topics_overrides, topics_k, topics_via);
    if (heatmap->parsed()) return cmd_heatmap(g, heatmap_overrides);
    if (evaluate->parsed())
      return cmd_evaluate(g, eval_tree, eval_auth, eval_baseline, eval_overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
