#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ctxmod/tree_metrics.hpp"

using namespace ctxmod;

namespace {

// Exhaustive ordered-forest edit distance used as the reference for the
// dynamic program. Works directly off the recursive definition: remove the
// rightmost root of either forest, or match the two rightmost roots.
class BruteTed {
 public:
  BruteTed(const LabeledTree& t1, const LabeledTree& t2) : a_(t1), b_(t2) {
    canonicalize(a_);
    canonicalize(b_);
  }

  std::int64_t run() { return dist({a_.root}, {b_.root}); }

 private:
  using Forest = std::vector<int>;

  std::int64_t nodes_below(const LabeledTree& t, int v) {
    std::int64_t total = 1;
    for (int c : t.nodes[v].children) total += nodes_below(t, c);
    return total;
  }

  std::int64_t forest_size(const LabeledTree& t, const Forest& f) {
    std::int64_t total = 0;
    for (int v : f) total += nodes_below(t, v);
    return total;
  }

  Forest drop_last(const LabeledTree& t, const Forest& f) {
    Forest out(f.begin(), f.end() - 1);
    const auto& kids = t.nodes[f.back()].children;
    out.insert(out.end(), kids.begin(), kids.end());
    return out;
  }

  std::int64_t rename(int v, int w) {
    bool leaf_a = a_.nodes[v].is_leaf(), leaf_b = b_.nodes[w].is_leaf();
    if (leaf_a != leaf_b) return kForbiddenEdit;
    if (leaf_a) return a_.nodes[v].label == b_.nodes[w].label ? 0 : kForbiddenEdit;
    return 0;
  }

  std::int64_t dist(const Forest& f, const Forest& g) {
    if (f.empty()) return forest_size(b_, g);
    if (g.empty()) return forest_size(a_, f);
    auto key = std::make_pair(f, g);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    int v = f.back(), w = g.back();
    std::int64_t best = dist(drop_last(a_, f), g) + 1;
    best = std::min(best, dist(f, drop_last(b_, g)) + 1);
    Forest f1(f.begin(), f.end() - 1), g1(g.begin(), g.end() - 1);
    best = std::min(best, dist(f1, g1) +
                              dist(a_.nodes[v].children, b_.nodes[w].children) +
                              rename(v, w));
    memo_.emplace(std::move(key), best);
    return best;
  }

  LabeledTree a_, b_;
  std::map<std::pair<Forest, Forest>, std::int64_t> memo_;
};

std::int64_t brute_ted(const LabeledTree& t1, const LabeledTree& t2) {
  return BruteTed(t1, t2).run();
}

struct Shape {
  std::vector<Shape> children;
};

// All ordered trees with exactly n nodes.
std::vector<Shape> all_shapes(int n) {
  if (n == 1) return {Shape{}};
  std::vector<Shape> out;
  std::vector<int> parts;
  std::function<void(int)> compose = [&](int remaining) {
    if (remaining == 0) {
      std::vector<std::vector<Shape>> pools;
      for (int p : parts) pools.push_back(all_shapes(p));
      std::vector<size_t> pick(parts.size(), 0);
      while (true) {
        Shape s;
        for (size_t i = 0; i < parts.size(); ++i) s.children.push_back(pools[i][pick[i]]);
        out.push_back(std::move(s));
        size_t i = 0;
        while (i < pick.size() && ++pick[i] == pools[i].size()) pick[i++] = 0;
        if (i == pick.size()) break;
      }
      return;
    }
    for (int p = 1; p <= remaining; ++p) {
      parts.push_back(p);
      compose(remaining - p);
      parts.pop_back();
    }
  };
  compose(n - 1);
  return out;
}

LabeledTree shape_to_tree(const Shape& shape) {
  LabeledTree tree;
  char next = 'a';
  std::function<int(const Shape&)> build = [&](const Shape& s) {
    if (s.children.empty()) return tree.add_node(std::string(1, next++));
    int v = tree.add_node("");
    std::vector<int> kids;
    for (const auto& c : s.children) kids.push_back(build(c));
    tree.nodes[v].children = std::move(kids);
    return v;
  };
  tree.root = build(shape);
  return tree;
}

LabeledTree random_labeled_tree(std::mt19937& rng, int n) {
  LabeledTree tree;
  tree.root = tree.add_node("");
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, tree.node_count() - 1);
    int parent = pick(rng);
    int child = tree.add_node("");
    tree.nodes[parent].children.push_back(child);
  }
  int next = 0;
  for (auto& node : tree.nodes)
    if (node.is_leaf()) node.label = "L" + std::to_string(next++);
  return tree;
}

LabeledTree shuffled_copy(const LabeledTree& tree, std::mt19937& rng) {
  LabeledTree out = tree;
  for (auto& node : out.nodes) std::shuffle(node.children.begin(), node.children.end(), rng);
  return out;
}

}  // namespace

TEST_CASE("newick round-trips byte for byte", "[tree]") {
  for (const std::string& text :
       {std::string("a;"), std::string("(a,b);"), std::string("((a,b),c);"),
        std::string("(a,(b));"), std::string("((a,b)inner,c)top;"),
        std::string("('a b','c''d');"), std::string("(a,b,c,d);")}) {
    LabeledTree tree = parse_newick(text);
    CHECK(tree_to_newick(tree) == text);
  }
}

TEST_CASE("newick parser drops branch lengths", "[tree]") {
  LabeledTree tree = parse_newick("(a:0.5,(b:1,c:2.5e-1):0.25);");
  CHECK(tree_to_newick(tree) == "(a,(b,c));");
  CHECK(leaf_labels(tree) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("newick parser rejects malformed input", "[tree]") {
  CHECK_THROWS(parse_newick("(a,b"));
  CHECK_THROWS(parse_newick("(a,b);x"));
  CHECK_THROWS(parse_newick("(a,);"));
  CHECK_THROWS(parse_newick("(a:;"));
  CHECK_THROWS(parse_newick("('ab;"));
  CHECK_THROWS(parse_newick(""));
}

TEST_CASE("canonical order sorts children by smallest leaf", "[tree]") {
  LabeledTree tree = parse_newick("(c,(b,a));");
  canonicalize(tree);
  CHECK(tree_to_newick(tree) == "((a,b),c);");
  canonicalize(tree);
  CHECK(tree_to_newick(tree) == "((a,b),c);");
}

TEST_CASE("dendrograms convert to leaf-labeled trees", "[tree]") {
  Dendrogram dendro;
  dendro.labels = {"a", "b", "c"};
  dendro.merges = {{0, 1, 1.0}, {3, 2, 3.0}};
  CHECK(tree_to_newick(dendrogram_to_tree(dendro)) == "((a,b),c);");
}

TEST_CASE("edit distance matches the exhaustive reference on all small trees", "[tree]") {
  std::vector<LabeledTree> trees;
  for (int n = 1; n <= 6; ++n)
    for (const Shape& s : all_shapes(n)) trees.push_back(shape_to_tree(s));
  REQUIRE(trees.size() == 65);

  for (size_t i = 0; i < trees.size(); ++i) {
    CHECK(tree_edit_distance(trees[i], trees[i]) == 0);
    for (size_t j = i + 1; j < trees.size(); ++j) {
      std::int64_t fast = tree_edit_distance(trees[i], trees[j]);
      std::int64_t slow = brute_ted(trees[i], trees[j]);
      INFO(tree_to_newick(trees[i]) << " vs " << tree_to_newick(trees[j]));
      CHECK(fast == slow);
      CHECK(fast == tree_edit_distance(trees[j], trees[i]));
    }
  }
}

TEST_CASE("one extra leaf costs a single insertion", "[tree]") {
  CHECK(tree_edit_distance(parse_newick("(a,b);"), parse_newick("(a,b,c);")) == 1);
  CHECK(tree_edit_distance(parse_newick("(a,b);"), parse_newick("((a,b));")) == 1);
}

TEST_CASE("edit distance ignores child order", "[tree]") {
  std::mt19937 rng(20240819);
  for (int trial = 0; trial < 30; ++trial) {
    LabeledTree t1 = random_labeled_tree(rng, 2 + trial % 9);
    LabeledTree t2 = random_labeled_tree(rng, 2 + (trial * 7) % 9);
    LabeledTree p1 = shuffled_copy(t1, rng);
    LabeledTree p2 = shuffled_copy(t2, rng);
    CHECK(tree_edit_distance(t1, p1) == 0);
    CHECK(tree_edit_distance(p1, p2) == tree_edit_distance(t1, t2));
  }
}

TEST_CASE("edit distance rejects bad inputs", "[tree]") {
  CHECK_THROWS(tree_edit_distance(LabeledTree{}, parse_newick("a;")));
  CHECK_THROWS_WITH(tree_edit_distance(parse_newick("(a,a);"), parse_newick("a;")),
                    Catch::Matchers::ContainsSubstring("duplicate leaf"));
}

TEST_CASE("path difference separates cherry from chain", "[tree]") {
  LabeledTree cherry = parse_newick("(a,b);");
  LabeledTree chain = parse_newick("(a,(b));");
  CHECK(path_difference(cherry, chain) == 1.0);
  CHECK(path_difference(cherry, cherry) == 0.0);
  CHECK(path_difference(chain, chain) == 0.0);
}

TEST_CASE("path difference hand example on four leaves", "[tree]") {
  LabeledTree balanced = parse_newick("((a,b),(c,d));");
  LabeledTree ladder = parse_newick("(((a,b),c),d);");
  CHECK(path_difference(balanced, ladder) == 3.0);
  CHECK(path_difference(ladder, balanced) == 3.0);

  PathDifferenceOptions edges;
  edges.count_edges = true;
  CHECK(path_difference(balanced, ladder, edges) == 3.0);

  PathDifferenceOptions rooted;
  rooted.take_sqrt = true;
  CHECK(path_difference(balanced, ladder, rooted) ==
        Catch::Approx(std::sqrt(3.0)).margin(1e-12));
}

TEST_CASE("path difference ignores child order", "[tree]") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    LabeledTree t1 = random_labeled_tree(rng, 6);
    LabeledTree t2 = shuffled_copy(t1, rng);
    CHECK(path_difference(t1, t2) == 0.0);
  }
}

TEST_CASE("path difference requires identical leaf sets", "[tree]") {
  CHECK_THROWS_WITH(path_difference(parse_newick("(a,b);"), parse_newick("(a,c);")),
                    Catch::Matchers::ContainsSubstring("leaf sets differ"));
  CHECK_THROWS(path_difference(parse_newick("(a,a);"), parse_newick("(a,a);")));
}

TEST_CASE("package tree groups units and drops small packages", "[tree]") {
  std::vector<PackageEntry> entries;
  for (int i = 1; i <= 5; ++i) entries.push_back({"a" + std::to_string(i), "alpha"});
  for (int i = 1; i <= 5; ++i) entries.push_back({"b" + std::to_string(i), "beta"});
  for (int i = 1; i <= 4; ++i) entries.push_back({"g" + std::to_string(i), "gamma"});

  LabeledTree tree = authoritative_tree(entries);
  CHECK(tree_to_newick(tree) ==
        "((a1,a2,a3,a4,a5)alpha,(b1,b2,b3,b4,b5)beta);");

  AuthoritativeOptions keep_all;
  keep_all.min_package_size = 1;
  LabeledTree full = authoritative_tree(entries, keep_all);
  CHECK(tree_to_newick(full) ==
        "((a1,a2,a3,a4,a5)alpha,(b1,b2,b3,b4,b5)beta,(g1,g2,g3,g4)gamma);");
}

TEST_CASE("package tree keeps nested packages", "[tree]") {
  std::vector<PackageEntry> entries;
  for (int i = 1; i <= 5; ++i) entries.push_back({"c" + std::to_string(i), "app.core"});
  for (int i = 1; i <= 5; ++i) entries.push_back({"u" + std::to_string(i), "app.util"});
  LabeledTree tree = authoritative_tree(entries);
  CHECK(tree_to_newick(tree) ==
        "(((c1,c2,c3,c4,c5)core,(u1,u2,u3,u4,u5)util)app);");
}

TEST_CASE("oversized packages split into balanced chunks", "[tree]") {
  auto units = [](int count) {
    std::vector<PackageEntry> entries;
    for (int i = 1; i <= count; ++i) {
      char name[8];
      std::snprintf(name, sizeof(name), "u%02d", i);
      entries.push_back({name, "big"});
    }
    return entries;
  };

  LabeledTree split41 = authoritative_tree(units(41));
  REQUIRE(leaf_labels(split41).size() == 41);
  std::string newick = tree_to_newick(split41);
  CHECK(newick.find("big_1") != std::string::npos);
  CHECK(newick.find("big_2") != std::string::npos);
  CHECK(newick.find("big_3") == std::string::npos);
  CHECK(newick.find("(u01,") != std::string::npos);
  CHECK(newick.find("(u22,") != std::string::npos);

  LabeledTree split50 = authoritative_tree(units(50));
  std::string n50 = tree_to_newick(split50);
  CHECK(n50.find("(u01,") != std::string::npos);
  CHECK(n50.find("(u26,") != std::string::npos);

  LabeledTree kept = authoritative_tree(units(40));
  CHECK(tree_to_newick(kept).find("big_1") == std::string::npos);
}

TEST_CASE("package tree derivation is idempotent", "[tree]") {
  std::vector<PackageEntry> entries;
  for (int i = 1; i <= 45; ++i) {
    char name[8];
    std::snprintf(name, sizeof(name), "u%02d", i);
    entries.push_back({name, "big"});
  }
  for (int i = 1; i <= 7; ++i) entries.push_back({"s" + std::to_string(i), "small"});

  LabeledTree first = authoritative_tree(entries);

  std::vector<PackageEntry> rederived;
  std::function<void(int, const std::string&)> walk = [&](int v, const std::string& path) {
    const TreeNode& node = first.nodes[v];
    if (node.is_leaf()) {
      rederived.push_back({node.label, path});
      return;
    }
    std::string next = node.label.empty()
                           ? path
                           : (path.empty() ? node.label : path + "." + node.label);
    for (int c : node.children) walk(c, next);
  };
  walk(first.root, "");

  LabeledTree second = authoritative_tree(rederived);
  CHECK(tree_to_newick(second) == tree_to_newick(first));
}

TEST_CASE("package tree input validation", "[tree]") {
  CHECK_THROWS(authoritative_tree({{"a", "p"}, {"a", "q"}}));

  std::vector<PackageEntry> sparse = {{"a", "p"}, {"b", "p"}, {"c", "q"}};
  CHECK_THROWS_WITH(authoritative_tree(sparse),
                    Catch::Matchers::ContainsSubstring("no units survive"));

  AuthoritativeOptions bad;
  bad.min_package_size = 0;
  CHECK_THROWS(authoritative_tree(sparse, bad));
  bad.min_package_size = 10;
  bad.max_package_size = 5;
  CHECK_THROWS(authoritative_tree(sparse, bad));
}

TEST_CASE("pruning keeps requested leaves and splices unary nodes", "[tree]") {
  LabeledTree tree = parse_newick("((a,b),(c,d));");
  CHECK(tree_to_newick(prune_to_leaves(tree, {"a", "b", "c"})) == "((a,b),c);");
  CHECK(tree_to_newick(prune_to_leaves(tree, {"a", "c"})) == "(a,c);");
  CHECK(tree_to_newick(prune_to_leaves(tree, {"a"})) == "a;");
  CHECK(tree_to_newick(prune_to_leaves(tree, {"a", "b", "c", "d"})) ==
        "((a,b),(c,d));");
  CHECK_THROWS_WITH(prune_to_leaves(tree, {"z"}),
                    Catch::Matchers::ContainsSubstring("no leaves left"));
}
