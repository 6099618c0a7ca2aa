#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxmod/io.hpp"

namespace ctxmod {

enum class Linkage { Complete, Average, Single };

inline Linkage parse_linkage(const std::string& name) {
  if (name == "complete") return Linkage::Complete;
  if (name == "average") return Linkage::Average;
  if (name == "single") return Linkage::Single;
  throw std::runtime_error("unknown linkage '" + name +
                           "' (expected complete, average or single)");
}

struct Merge {
  int left = -1;   // node id: leaves are 0..n-1, merge i creates node n+i
  int right = -1;
  double height = 0.0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;

  int leaf_count() const { return static_cast<int>(labels.size()); }
  int node_count() const { return leaf_count() + static_cast<int>(merges.size()); }
  int root() const { return node_count() - 1; }
};

inline void validate_distance_matrix(const Eigen::MatrixXd& d,
                                     const std::vector<std::string>& labels) {
  int n = static_cast<int>(labels.size());
  if (n == 0) throw std::runtime_error("clustering: no items");
  if (d.rows() != n || d.cols() != n)
    throw std::runtime_error("clustering: distance matrix is " +
                             std::to_string(d.rows()) + "x" + std::to_string(d.cols()) +
                             " but there are " + std::to_string(n) + " labels");
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second)
      throw std::runtime_error("clustering: duplicate label '" + l + "'");
  for (int i = 0; i < n; ++i) {
    if (d(i, i) != 0.0)
      throw std::runtime_error("clustering: nonzero diagonal at '" + labels[i] + "'");
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(d(i, j)))
        throw std::runtime_error("clustering: non-finite distance between '" + labels[i] +
                                 "' and '" + labels[j] + "'");
      if (d(i, j) < 0.0)
        throw std::runtime_error("clustering: negative distance between '" + labels[i] +
                                 "' and '" + labels[j] + "'");
      if (std::abs(d(i, j) - d(j, i)) > 1e-9)
        throw std::runtime_error("clustering: asymmetric distance between '" + labels[i] +
                                 "' and '" + labels[j] + "'");
    }
  }
}

// Agglomerative clustering. Among pairs at the minimal linkage distance the
// pair whose smallest member labels compare lexicographically least is merged,
// so results do not depend on input order beyond the labels themselves.
inline Dendrogram hierarchical_cluster(const Eigen::MatrixXd& dist,
                                       const std::vector<std::string>& labels,
                                       Linkage linkage = Linkage::Complete) {
  validate_distance_matrix(dist, labels);
  int n = static_cast<int>(labels.size());

  Dendrogram dendro;
  dendro.labels = labels;

  std::vector<int> node_id(n);        // cluster slot -> dendrogram node
  std::vector<int> size(n, 1);        // cluster sizes for average linkage
  std::vector<std::string> least(n);  // smallest member label per cluster
  std::vector<bool> active(n, true);
  for (int i = 0; i < n; ++i) {
    node_id[i] = i;
    least[i] = labels[i];
  }
  Eigen::MatrixXd d = dist;

  for (int step = 0; step < n - 1; ++step) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        double cur = d(i, j);
        if (cur > best) continue;
        if (cur < best) {
          best = cur;
          bi = i;
          bj = j;
          continue;
        }
        const std::string& a1 = std::min(least[i], least[j]);
        const std::string& a2 = std::max(least[i], least[j]);
        const std::string& b1 = std::min(least[bi], least[bj]);
        const std::string& b2 = std::max(least[bi], least[bj]);
        if (a1 < b1 || (a1 == b1 && a2 < b2)) {
          bi = i;
          bj = j;
        }
      }
    }

    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      double dik = d(bi, k), djk = d(bj, k);
      double merged;
      switch (linkage) {
        case Linkage::Complete: merged = std::max(dik, djk); break;
        case Linkage::Single: merged = std::min(dik, djk); break;
        case Linkage::Average:
          merged = (size[bi] * dik + size[bj] * djk) / (size[bi] + size[bj]);
          break;
      }
      d(bi, k) = d(k, bi) = merged;
    }

    Merge m;
    m.height = best;
    m.left = node_id[bi];
    m.right = node_id[bj];
    if (least[bj] < least[bi]) std::swap(m.left, m.right);
    dendro.merges.push_back(m);

    node_id[bi] = n + step;
    size[bi] += size[bj];
    least[bi] = std::min(least[bi], least[bj]);
    active[bj] = false;
  }
  return dendro;
}

// Leaf ids under each dendrogram node.
inline std::vector<std::vector<int>> dendrogram_members(const Dendrogram& dendro) {
  int n = dendro.leaf_count();
  std::vector<std::vector<int>> members(dendro.node_count());
  for (int i = 0; i < n; ++i) members[i] = {i};
  for (size_t i = 0; i < dendro.merges.size(); ++i) {
    const Merge& m = dendro.merges[i];
    auto& out = members[n + i];
    out = members[m.left];
    out.insert(out.end(), members[m.right].begin(), members[m.right].end());
    std::sort(out.begin(), out.end());
  }
  return members;
}

// Remove the k-1 final merges; groups ordered by their smallest member label,
// members sorted within each group.
inline std::vector<std::vector<std::string>> cut_dendrogram(const Dendrogram& dendro,
                                                            int k) {
  int n = dendro.leaf_count();
  if (k < 1 || k > n)
    throw std::runtime_error("cut: k must be between 1 and " + std::to_string(n) +
                             ", got " + std::to_string(k));
  std::vector<int> parent(dendro.node_count());
  for (int i = 0; i < dendro.node_count(); ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int kept = n - k;
  for (int i = 0; i < kept; ++i) {
    const Merge& m = dendro.merges[i];
    parent[find(m.left)] = n + i;
    parent[find(m.right)] = n + i;
  }
  std::map<int, std::vector<std::string>> by_root;
  for (int i = 0; i < n; ++i) by_root[find(i)].push_back(dendro.labels[i]);
  std::vector<std::vector<std::string>> groups;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

// Left-to-right leaf order of the merge tree.
inline std::vector<std::string> dendrogram_leaf_order(const Dendrogram& dendro) {
  int n = dendro.leaf_count();
  std::vector<std::string> out;
  std::function<void(int)> walk = [&](int node) {
    if (node < n) {
      out.push_back(dendro.labels[node]);
      return;
    }
    walk(dendro.merges[node - n].left);
    walk(dendro.merges[node - n].right);
  };
  walk(dendro.root());
  return out;
}

namespace detail {

inline bool newick_needs_quotes(const std::string& label) {
  if (label.empty()) return true;
  for (char c : label)
    if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' ||
        c == ']' || c == '\'' || c == ' ' || c == '\t' || c == '\n')
      return true;
  return false;
}

inline std::string newick_label(const std::string& label) {
  if (!newick_needs_quotes(label)) return label;
  std::string out = "'";
  for (char c : label) {
    out += c;
    if (c == '\'') out += '\'';
  }
  out += "'";
  return out;
}

inline void write_newick_node(const Dendrogram& dendro, int node, double parent_height,
                              std::ostream& os) {
  int n = dendro.leaf_count();
  double height = node < n ? 0.0 : dendro.merges[node - n].height;
  if (node < n) {
    os << newick_label(dendro.labels[node]);
  } else {
    const Merge& m = dendro.merges[node - n];
    os << '(';
    write_newick_node(dendro, m.left, height, os);
    os << ',';
    write_newick_node(dendro, m.right, height, os);
    os << ')';
  }
  if (parent_height >= 0.0) os << ':' << format_double(parent_height - height);
}

}  // namespace detail

inline std::string dendrogram_to_newick(const Dendrogram& dendro) {
  std::ostringstream os;
  detail::write_newick_node(dendro, dendro.root(), -1.0, os);
  os << ';';
  return os.str();
}

}  // namespace ctxmod
