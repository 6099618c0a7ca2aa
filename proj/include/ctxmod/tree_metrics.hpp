#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxmod/clustering.hpp"

namespace ctxmod {

struct TreeNode {
  std::string label;  // leaves carry module names; internal nodes may be empty
  std::vector<int> children;
  bool is_leaf() const { return children.empty(); }
};

struct LabeledTree {
  std::vector<TreeNode> nodes;
  int root = -1;

  int add_node(const std::string& label) {
    nodes.push_back(TreeNode{label, {}});
    return static_cast<int>(nodes.size()) - 1;
  }
  bool empty() const { return root < 0; }
  int node_count() const { return static_cast<int>(nodes.size()); }
};

inline std::vector<std::string> leaf_labels(const LabeledTree& tree) {
  std::vector<std::string> out;
  if (tree.empty()) return out;
  std::vector<int> stack{tree.root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (tree.nodes[v].is_leaf()) {
      out.push_back(tree.nodes[v].label);
    } else {
      for (auto it = tree.nodes[v].children.rbegin(); it != tree.nodes[v].children.rend();
           ++it)
        stack.push_back(*it);
    }
  }
  return out;
}

inline void require_unique_leaves(const LabeledTree& tree, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& l : leaf_labels(tree))
    if (!seen.insert(l).second)
      throw std::runtime_error(what + ": duplicate leaf label '" + l + "'");
}

// Children sorted by the lexicographically smallest leaf label below them.
inline void canonicalize(LabeledTree& tree) {
  if (tree.empty()) return;
  std::vector<std::string> min_leaf(tree.nodes.size());
  std::function<const std::string&(int)> fill = [&](int v) -> const std::string& {
    TreeNode& node = tree.nodes[v];
    if (node.is_leaf()) {
      min_leaf[v] = node.label;
      return min_leaf[v];
    }
    for (int c : node.children) fill(c);
    std::sort(node.children.begin(), node.children.end(),
              [&](int a, int b) { return min_leaf[a] < min_leaf[b]; });
    min_leaf[v] = min_leaf[node.children.front()];
    return min_leaf[v];
  };
  fill(tree.root);
}

// ---------------------------------------------------------------------------
// Newick serialization

namespace detail {

inline void write_newick_tree(const LabeledTree& tree, int v, std::ostream& os) {
  const TreeNode& node = tree.nodes[v];
  if (!node.is_leaf()) {
    os << '(';
    for (size_t i = 0; i < node.children.size(); ++i) {
      if (i) os << ',';
      write_newick_tree(tree, node.children[i], os);
    }
    os << ')';
  }
  if (!node.label.empty() || node.is_leaf()) os << newick_label(node.label);
}

class NewickParser {
 public:
  explicit NewickParser(const std::string& text) : text_(text) {}

  LabeledTree parse() {
    LabeledTree tree;
    tree.root = subtree(tree);
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ';') ++pos_;
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after tree");
    return tree;
  }

 private:
  int subtree(LabeledTree& tree) {
    skip_space();
    int node = tree.add_node("");
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      std::vector<int> children;
      children.push_back(subtree(tree));
      skip_space();
      while (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        children.push_back(subtree(tree));
        skip_space();
      }
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      tree.nodes[node].children = std::move(children);
    }
    skip_space();
    tree.nodes[node].label = label();
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ':') {
      ++pos_;
      branch_length();
    }
    if (tree.nodes[node].is_leaf() && tree.nodes[node].label.empty())
      fail("leaf without a label");
    return node;
  }

  std::string label() {
    if (pos_ < text_.size() && text_[pos_] == '\'') {
      ++pos_;
      std::string out;
      while (pos_ < text_.size()) {
        char c = text_[pos_++];
        if (c == '\'') {
          if (pos_ < text_.size() && text_[pos_] == '\'') {
            out += '\'';
            ++pos_;
            continue;
          }
          return out;
        }
        out += c;
      }
      fail("unterminated quoted label");
    }
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' ||
          c == ']' || c == '\'' || std::isspace(static_cast<unsigned char>(c)))
        break;
      out += c;
      ++pos_;
    }
    return out;
  }

  void branch_length() {
    skip_space();
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == '-' || text_[pos_] == '+' || text_[pos_] == 'e' ||
            text_[pos_] == 'E'))
      ++pos_;
    if (pos_ == start) fail("expected branch length after ':'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw std::runtime_error("newick: " + msg + " at offset " + std::to_string(pos_));
  }

  const std::string& text_;
  size_t pos_ = 0;
};

}  // namespace detail

inline std::string tree_to_newick(const LabeledTree& tree) {
  if (tree.empty()) throw std::runtime_error("newick: empty tree");
  std::ostringstream os;
  detail::write_newick_tree(tree, tree.root, os);
  os << ';';
  return os.str();
}

inline LabeledTree parse_newick(const std::string& text) {
  return detail::NewickParser(text).parse();
}

inline LabeledTree dendrogram_to_tree(const Dendrogram& dendro) {
  LabeledTree tree;
  int n = dendro.leaf_count();
  std::vector<int> mapped(dendro.node_count(), -1);
  for (int i = 0; i < n; ++i) mapped[i] = tree.add_node(dendro.labels[i]);
  for (size_t i = 0; i < dendro.merges.size(); ++i) {
    int node = tree.add_node("");
    tree.nodes[node].children = {mapped[dendro.merges[i].left],
                                 mapped[dendro.merges[i].right]};
    mapped[n + i] = node;
  }
  tree.root = mapped[dendro.root()];
  return tree;
}

// ---------------------------------------------------------------------------
// Authoritative decomposition from the package structure

struct PackageEntry {
  std::string unit_name;     // leaf label
  std::string package_path;  // dot-separated, may be empty
};

struct AuthoritativeOptions {
  int min_package_size = 5;   // packages with fewer direct units are dropped
  int max_package_size = 40;  // larger packages are split into balanced chunks
};

namespace detail {

struct PackageNode {
  std::string label;
  std::map<std::string, int> children;  // segment -> node index
  std::vector<std::string> units;
};

inline void split_package(std::vector<PackageNode>& nodes, int idx, int max_size) {
  PackageNode& node = nodes[idx];
  int n = static_cast<int>(node.units.size());
  int chunks = (n + max_size - 1) / max_size;
  std::sort(node.units.begin(), node.units.end());
  std::string base_label = node.label.empty() ? "root" : node.label;
  int at = 0;
  std::vector<std::string> units = std::move(node.units);
  nodes[idx].units.clear();
  for (int c = 0; c < chunks; ++c) {
    int take = n / chunks + (c < n % chunks ? 1 : 0);
    PackageNode chunk;
    chunk.label = base_label + "_" + std::to_string(c + 1);
    chunk.units.assign(units.begin() + at, units.begin() + at + take);
    at += take;
    int child = static_cast<int>(nodes.size());
    nodes.push_back(std::move(chunk));
    nodes[idx].children.emplace(nodes[child].label, child);
  }
}

inline int emit_package(const std::vector<PackageNode>& nodes, int idx, LabeledTree& tree) {
  const PackageNode& node = nodes[idx];
  std::vector<int> children;
  for (const auto& [seg, child] : node.children) {
    int mapped = emit_package(nodes, child, tree);
    if (mapped >= 0) children.push_back(mapped);
  }
  std::vector<std::string> units = node.units;
  std::sort(units.begin(), units.end());
  for (const auto& u : units) children.push_back(tree.add_node(u));
  if (children.empty()) return -1;
  int self = tree.add_node(node.label);
  tree.nodes[self].children = std::move(children);
  return self;
}

}  // namespace detail

inline LabeledTree authoritative_tree(const std::vector<PackageEntry>& entries,
                                      const AuthoritativeOptions& opts = {}) {
  if (opts.min_package_size < 1 || opts.max_package_size < opts.min_package_size)
    throw std::runtime_error("authoritative tree: need 1 <= min size <= max size");
  std::vector<detail::PackageNode> nodes;
  nodes.push_back(detail::PackageNode{"", {}, {}});
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.unit_name).second)
      throw std::runtime_error("authoritative tree: duplicate unit '" + e.unit_name + "'");
    int cur = 0;
    std::string segment;
    std::istringstream path(e.package_path);
    while (std::getline(path, segment, '.')) {
      if (segment.empty()) continue;
      auto it = nodes[cur].children.find(segment);
      if (it == nodes[cur].children.end()) {
        int child = static_cast<int>(nodes.size());
        nodes.push_back(detail::PackageNode{segment, {}, {}});
        nodes[cur].children.emplace(segment, child);
        cur = child;
      } else {
        cur = it->second;
      }
    }
    nodes[cur].units.push_back(e.unit_name);
  }

  for (size_t i = 0; i < nodes.size(); ++i) {
    int count = static_cast<int>(nodes[i].units.size());
    if (count >= 1 && count < opts.min_package_size)
      nodes[i].units.clear();
    else if (count > opts.max_package_size)
      detail::split_package(nodes, static_cast<int>(i), opts.max_package_size);
  }

  LabeledTree tree;
  tree.root = detail::emit_package(nodes, 0, tree);
  if (tree.root < 0)
    throw std::runtime_error(
        "authoritative tree: no units survive the package size thresholds");
  canonicalize(tree);
  return tree;
}

// Keep only the given leaves, then drop empty subtrees and splice out internal
// nodes left with a single child.
inline LabeledTree prune_to_leaves(const LabeledTree& tree,
                                   const std::set<std::string>& keep) {
  if (tree.empty()) throw std::runtime_error("prune: empty tree");
  LabeledTree out;
  std::function<int(int)> copy = [&](int v) -> int {
    const TreeNode& node = tree.nodes[v];
    if (node.is_leaf()) {
      if (!keep.count(node.label)) return -1;
      return out.add_node(node.label);
    }
    std::vector<int> children;
    for (int c : node.children) {
      int mapped = copy(c);
      if (mapped >= 0) children.push_back(mapped);
    }
    if (children.empty()) return -1;
    if (children.size() == 1) return children.front();
    int self = out.add_node(node.label);
    out.nodes[self].children = std::move(children);
    return self;
  };
  out.root = copy(tree.root);
  if (out.root < 0) throw std::runtime_error("prune: no leaves left");
  canonicalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// Tree edit distance (Zhang-Shasha) with a structural cost policy: leaves may
// only match leaves with the same label, internal nodes match freely, and
// every insert or delete costs 1.

inline constexpr std::int64_t kForbiddenEdit = 1000000000;

namespace detail {

struct TedSide {
  std::vector<int> postorder;       // node ids in postorder
  std::vector<int> leftmost;        // postorder index of leftmost leaf
  std::vector<bool> leaf;
  std::vector<std::string> label;
  std::vector<int> keyroots;
};

inline TedSide ted_side(const LabeledTree& tree) {
  TedSide side;
  std::function<int(int)> walk = [&](int v) -> int {
    const TreeNode& node = tree.nodes[v];
    int left = -1;
    for (int c : node.children) {
      int l = walk(c);
      if (left < 0) left = l;
    }
    int index = static_cast<int>(side.postorder.size());
    side.postorder.push_back(v);
    side.leaf.push_back(node.is_leaf());
    side.label.push_back(node.label);
    side.leftmost.push_back(node.is_leaf() ? index : left);
    return side.leftmost[index];
  };
  walk(tree.root);
  int n = static_cast<int>(side.postorder.size());
  std::vector<bool> is_keyroot(n, true);
  for (int i = 0; i < n; ++i) {
    // a node is a keyroot unless some later node shares its leftmost leaf
    for (int j = i + 1; j < n; ++j)
      if (side.leftmost[j] == side.leftmost[i]) {
        is_keyroot[i] = false;
        break;
      }
  }
  for (int i = 0; i < n; ++i)
    if (is_keyroot[i]) side.keyroots.push_back(i);
  return side;
}

inline std::int64_t ted_rename(const TedSide& a, int i, const TedSide& b, int j) {
  if (a.leaf[i] != b.leaf[j]) return kForbiddenEdit;
  if (a.leaf[i]) return a.label[i] == b.label[j] ? 0 : kForbiddenEdit;
  return 0;
}

}  // namespace detail

inline std::int64_t tree_edit_distance(const LabeledTree& t1, const LabeledTree& t2) {
  if (t1.empty() || t2.empty()) throw std::runtime_error("ted: empty tree");
  require_unique_leaves(t1, "ted");
  require_unique_leaves(t2, "ted");
  LabeledTree c1 = t1, c2 = t2;
  canonicalize(c1);
  canonicalize(c2);
  detail::TedSide a = detail::ted_side(c1);
  detail::TedSide b = detail::ted_side(c2);
  int n = static_cast<int>(a.postorder.size());
  int m = static_cast<int>(b.postorder.size());
  std::vector<std::vector<std::int64_t>> dist(n, std::vector<std::int64_t>(m, 0));
  std::vector<std::vector<std::int64_t>> fd(n + 1, std::vector<std::int64_t>(m + 1, 0));

  for (int ki : a.keyroots) {
    for (int kj : b.keyroots) {
      int li = a.leftmost[ki], lj = b.leftmost[kj];
      fd[li][lj] = 0;
      for (int i = li; i <= ki; ++i) fd[i + 1][lj] = fd[i][lj] + 1;
      for (int j = lj; j <= kj; ++j) fd[li][j + 1] = fd[li][j] + 1;
      for (int i = li; i <= ki; ++i) {
        for (int j = lj; j <= kj; ++j) {
          if (a.leftmost[i] == li && b.leftmost[j] == lj) {
            std::int64_t sub = fd[i][j] + detail::ted_rename(a, i, b, j);
            fd[i + 1][j + 1] =
                std::min({fd[i][j + 1] + 1, fd[i + 1][j] + 1, sub});
            dist[i][j] = fd[i + 1][j + 1];
          } else {
            std::int64_t sub = fd[a.leftmost[i]][b.leftmost[j]] + dist[i][j];
            fd[i + 1][j + 1] =
                std::min({fd[i][j + 1] + 1, fd[i + 1][j] + 1, sub});
          }
        }
      }
    }
  }
  return dist[n - 1][m - 1];
}

// ---------------------------------------------------------------------------
// Path difference

struct PathDifferenceOptions {
  bool count_edges = false;  // default counts nodes, endpoints included
  bool take_sqrt = false;
};

namespace detail {

inline std::map<std::pair<std::string, std::string>, std::int64_t> leaf_path_lengths(
    const LabeledTree& tree, bool count_edges) {
  std::vector<int> parent(tree.node_count(), -1);
  std::vector<int> depth(tree.node_count(), 0);
  std::vector<int> leaves;
  std::vector<int> stack{tree.root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (tree.nodes[v].is_leaf()) leaves.push_back(v);
    for (int c : tree.nodes[v].children) {
      parent[c] = v;
      depth[c] = depth[v] + 1;
      stack.push_back(c);
    }
  }
  std::map<std::pair<std::string, std::string>, std::int64_t> out;
  for (size_t x = 0; x < leaves.size(); ++x) {
    for (size_t y = x + 1; y < leaves.size(); ++y) {
      int i = leaves[x], j = leaves[y];
      int a = i, b = j;
      while (depth[a] > depth[b]) a = parent[a];
      while (depth[b] > depth[a]) b = parent[b];
      while (a != b) {
        a = parent[a];
        b = parent[b];
      }
      std::int64_t edges = depth[i] + depth[j] - 2 * depth[a];
      std::int64_t p = count_edges ? edges : edges + 1;
      std::string la = tree.nodes[i].label, lb = tree.nodes[j].label;
      if (lb < la) std::swap(la, lb);
      out[{la, lb}] = p;
    }
  }
  return out;
}

}  // namespace detail

inline double path_difference(const LabeledTree& t1, const LabeledTree& t2,
                              const PathDifferenceOptions& opts = {}) {
  require_unique_leaves(t1, "path difference");
  require_unique_leaves(t2, "path difference");
  std::vector<std::string> l1 = leaf_labels(t1), l2 = leaf_labels(t2);
  std::set<std::string> s1(l1.begin(), l1.end()), s2(l2.begin(), l2.end());
  if (s1 != s2) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(s1.begin(), s1.end(), s2.begin(), s2.end(),
                                  std::back_inserter(diff));
    throw std::runtime_error("path difference: leaf sets differ: " + join(diff, ", "));
  }
  auto p1 = detail::leaf_path_lengths(t1, opts.count_edges);
  auto p2 = detail::leaf_path_lengths(t2, opts.count_edges);
  double sum = 0.0;
  for (const auto& [pair, len1] : p1) {
    double d = static_cast<double>(len1 - p2.at(pair));
    sum += d * d;
  }
  return opts.take_sqrt ? std::sqrt(sum) : sum;
}

}  // namespace ctxmod
