#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxmod/facts.hpp"
#include "ctxmod/semantic_network.hpp"

namespace ctxmod {

enum class ConceptMeasure { IPL, WUP, LC, CD, Diffusion };

struct SimilarityConfig {
  ConceptMeasure measure = ConceptMeasure::IPL;
  double alpha_ipl = 1.0;        // decay exponent
  double alpha_diffusion = 0.5;  // sinking factor
};

// ---------------------------------------------------------------------------
// View over the ITO hierarchy of a semantic network.

class TypeHierarchyView {
 public:
  explicit TypeHierarchyView(const SemanticNetwork& net) : net_(net) {
    for (int id = 0; id < net.node_count(); ++id)
      if (net.node(id).kind == NodeKind::Concept) {
        index_[net.node(id).label] = static_cast<int>(concepts_.size());
        concepts_.push_back(id);
      }
    int n = static_cast<int>(concepts_.size());
    parents_.resize(n);
    for (int i = 0; i < n; ++i)
      for (int e : net.out_edges(concepts_[i]))
        if (net.edge(e).rel == Relation::ITO)
          parents_[i].push_back(local_id(net.edge(e).dst));

    // Minimal depth: BFS down from the root along reversed ITO edges.
    depth_.assign(n, -1);
    int root = local_id(net.root_id());
    depth_[root] = 0;
    std::deque<int> queue{root};
    while (!queue.empty()) {
      int cur = queue.front();
      queue.pop_front();
      for (int e : net.in_edges(concepts_[cur])) {
        if (net.edge(e).rel != Relation::ITO) continue;
        int child = local_id(net.edge(e).src);
        if (depth_[child] < 0) {
          depth_[child] = depth_[cur] + 1;
          queue.push_back(child);
        }
      }
    }

    ancestors_.resize(n);
    for (int i = 0; i < n; ++i) collect_ancestors(i);
  }

  int size() const { return static_cast<int>(concepts_.size()); }

  int id_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw std::runtime_error("unknown concept '" + label + "'");
    return it->second;
  }

  bool has(const std::string& label) const { return index_.contains(label); }
  const std::string& label(int i) const { return net_.node(concepts_[i]).label; }
  int network_node(int i) const { return concepts_[i]; }
  int depth(int i) const { return depth_[i]; }
  const std::set<int>& ancestors(int i) const { return ancestors_[i]; }

  // Shortest ITO distance from a concept up to one of its ancestors.
  int distance_up(int from, int ancestor) const {
    if (from == ancestor) return 0;
    std::deque<std::pair<int, int>> queue{{from, 0}};
    std::set<int> seen{from};
    while (!queue.empty()) {
      auto [cur, d] = queue.front();
      queue.pop_front();
      for (int p : parents_[cur]) {
        if (p == ancestor) return d + 1;
        if (seen.insert(p).second) queue.emplace_back(p, d + 1);
      }
    }
    return std::numeric_limits<int>::max();
  }

  // Deepest common ancestor; ties broken by lexicographic label.
  int nch(int a, int b) const {
    std::vector<int> common;
    std::set_intersection(ancestors_[a].begin(), ancestors_[a].end(), ancestors_[b].begin(),
                          ancestors_[b].end(), std::back_inserter(common));
    int best = -1;
    for (int c : common) {
      if (best < 0 || depth_[c] > depth_[best] ||
          (depth_[c] == depth_[best] && label(c) < label(best)))
        best = c;
    }
    return best;  // never -1: the root subsumes everything
  }

  int path_length(int a, int b) const {
    int c = nch(a, b);
    return distance_up(a, c) + distance_up(b, c);
  }

 private:
  int local_id(int network_node) const {
    return index_.at(net_.node(network_node).label);
  }

  void collect_ancestors(int i) {
    std::set<int>& anc = ancestors_[i];
    if (!anc.empty()) return;
    std::vector<int> work{i};
    anc.insert(i);
    while (!work.empty()) {
      int cur = work.back();
      work.pop_back();
      for (int p : parents_[cur])
        if (anc.insert(p).second) work.push_back(p);
    }
  }

  const SemanticNetwork& net_;
  std::vector<int> concepts_;          // network node ids
  std::map<std::string, int> index_;   // label -> local id
  std::vector<std::vector<int>> parents_;
  std::vector<int> depth_;
  std::vector<std::set<int>> ancestors_;
};

// ---------------------------------------------------------------------------
// Path-based measures

inline double sim_ipl(const TypeHierarchyView& h, int a, int b, double alpha = 1.0) {
  return 1.0 / std::pow(1.0 + h.path_length(a, b), alpha);
}

inline double sim_wup(const TypeHierarchyView& h, int a, int b) {
  int c = h.nch(a, b);
  double dc = 2.0 * h.depth(c);
  double denom = h.distance_up(a, c) + h.distance_up(b, c) + dc;
  if (denom == 0.0) return 1.0;  // both arguments are the root
  return dc / denom;
}

inline double sim_lc(const TypeHierarchyView& h, int a, int b) {
  int d = std::max(1, h.path_length(a, b));
  int max_depth = std::max({1, h.depth(a), h.depth(b)});
  double score = -std::log(static_cast<double>(d) / (2.0 * max_depth));
  return std::max(0.0, score);
}

inline double sim_cd(const SemanticNetwork& net, const TypeHierarchyView& h, int a, int b) {
  Subhierarchy sub = subhierarchy(net, h.network_node(h.nch(a, b)));
  double size = static_cast<double>(sub.concepts.size());
  double mu = static_cast<double>(sub.internal_edges) / size;
  long long steps;
  if (mu == 1.0) {
    steps = 2;
  } else if (mu == 0.0) {
    steps = 0;
  } else {
    steps = std::max<long long>(0, static_cast<long long>(std::floor(std::log(2.0) / std::log(mu))));
  }
  double sum = 0.0;
  for (long long i = 0; i <= steps; ++i)
    sum += i == 0 ? 1.0 : std::pow(mu, static_cast<double>(i));  // 0^0 = 1
  return sum / size;
}

// Type-type similarity dispatch over labels; unknown labels and the bottom
// sentinel score 0 against everything.
class ConceptSimilarity {
 public:
  ConceptSimilarity(const SemanticNetwork& net, const TypeHierarchyView& h, SimilarityConfig cfg)
      : net_(net), hierarchy_(h), cfg_(cfg) {
    if (cfg.measure == ConceptMeasure::Diffusion) init_diffusion();
  }

  double operator()(const std::string& t1, const std::string& t2) const {
    if (t1 == kBottom || t2 == kBottom) return 0.0;
    if (!hierarchy_.has(t1) || !hierarchy_.has(t2)) return 0.0;
    int a = hierarchy_.id_of(t1), b = hierarchy_.id_of(t2);
    switch (cfg_.measure) {
      case ConceptMeasure::IPL:
        return sim_ipl(hierarchy_, a, b, cfg_.alpha_ipl);
      case ConceptMeasure::WUP:
        return sim_wup(hierarchy_, a, b);
      case ConceptMeasure::LC:
        return sim_lc(hierarchy_, a, b);
      case ConceptMeasure::CD:
        return sim_cd(net_, hierarchy_, a, b);
      case ConceptMeasure::Diffusion:
        return diffusion_(hierarchy_.network_node(a), hierarchy_.network_node(b));
    }
    return 0.0;
  }

 private:
  void init_diffusion();
  std::function<double(int, int)> diffusion_;
  const SemanticNetwork& net_;
  const TypeHierarchyView& hierarchy_;
  SimilarityConfig cfg_;
};

// ---------------------------------------------------------------------------
// Identifier-identifier similarity with sense disambiguation: take the sense
// pair with the highest weighted score; hub senses contribute less.

template <typename ConceptSim>
double disambiguate_sim(const SemanticNetwork& net, const std::string& id1,
                        const std::string& id2, ConceptSim&& concept_sim) {
  auto senses1 = net.senses(id1);
  auto senses2 = net.senses(id2);
  if (senses1.empty() || senses2.empty()) return 0.0;
  double best = 0.0;
  for (const auto& [c1, w1] : senses1) {
    double out1 = net.weighted_out_degree(c1);
    for (const auto& [c2, w2] : senses2) {
      double out2 = net.weighted_out_degree(c2);
      double share1 = out1 > 0.0 ? w1 / (2.0 * out1) : 0.0;
      double share2 = out2 > 0.0 ? w2 / (2.0 * out2) : 0.0;
      double score =
          concept_sim(net.node(c1).label, net.node(c2).label) * (share1 + share2);
      if (score > best) best = score;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Diffusion kernel over the whole network: K = exp(alpha * A) on the
// symmetrized relation-blind weighted adjacency, rescaled to unit diagonal.

inline Eigen::MatrixXd diffusion_kernel(const Eigen::MatrixXd& sym_adjacency, double alpha) {
  if (sym_adjacency.rows() == 0) throw std::runtime_error("diffusion over empty graph");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym_adjacency);
  Eigen::VectorXd ev = (alpha * eig.eigenvalues().array()).exp();
  Eigen::MatrixXd k = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  Eigen::VectorXd scale = k.diagonal().array().sqrt();
  int n = static_cast<int>(k.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k(i, j) /= scale(i) * scale(j);
  return k;
}

// Symmetrized relation-blind weighted adjacency of a network.
inline Eigen::MatrixXd network_adjacency(const SemanticNetwork& net) {
  int n = net.node_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : net.edges()) {
    a(e.src, e.dst) += e.weight;
    a(e.dst, e.src) += e.weight;
  }
  return a;
}

inline Eigen::MatrixXd diffusion_similarity(const SemanticNetwork& net, double alpha = 0.5) {
  if (net.node_count() == 0) throw std::runtime_error("diffusion over empty network");
  return diffusion_kernel(network_adjacency(net), alpha);
}

inline void ConceptSimilarity::init_diffusion() {
  auto table = std::make_shared<Eigen::MatrixXd>(diffusion_similarity(net_, cfg_.alpha_diffusion));
  diffusion_ = [table](int i, int j) { return (*table)(i, j); };
}

}  // namespace ctxmod
