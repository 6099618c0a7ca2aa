#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "ctxmod/depgraph.hpp"
#include "fixture_util.hpp"

using namespace ctxmod;

namespace {

using EdgeTriple = std::tuple<std::string, std::string, DepEdgeKind>;

std::multiset<EdgeTriple> edge_triples(const DepGraph& g) {
  std::multiset<EdgeTriple> out;
  for (const auto& e : g.edges())
    out.insert({g.vertex(e.src).label, g.vertex(e.dst).label, e.kind});
  return out;
}

DepGraph ddg_from(const std::string& text, size_t unit = 0) {
  auto units = parse_program(text);
  return build_ddg(units.at(unit));
}

bool reaches(const DepGraph& g, const std::string& from, const std::string& to) {
  int s = g.find_vertex(from), t = g.find_vertex(to);
  if (s < 0 || t < 0) return false;
  std::set<int> seen{s};
  std::vector<int> work{s};
  while (!work.empty()) {
    int cur = work.back();
    work.pop_back();
    if (cur == t) return true;
    for (const auto& e : g.edges())
      if (e.src == cur && seen.insert(e.dst).second) work.push_back(e.dst);
  }
  return false;
}

double series_kernel(const Eigen::MatrixXd& ax, double lambda, int terms) {
  int n = static_cast<int>(ax.rows());
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd t = ones;
  double sum = ones.dot(t);
  double scale = 1.0;
  for (int k = 1; k <= terms; ++k) {
    t = (ax * t).eval();
    scale *= lambda;
    sum += scale * ones.dot(t);
  }
  return sum;
}

const auto sigma_zero = [](const std::string&, const std::string&) { return 0.0; };

}  // namespace

TEST_CASE("assignment from a binary expression routes through a call vertex", "[ddg]") {
  DepGraph g = ddg_from("public class T { public void m(int a, int b, int c) { a = b + c; } }");
  CHECK(g.vertex_count() == 4);

  std::multiset<EdgeTriple> expected = {
      {"b", kNamelessCall, DepEdgeKind::CallBinding},
      {"c", kNamelessCall, DepEdgeKind::CallBinding},
      {kNamelessCall, "a", DepEdgeKind::Definition},
  };
  CHECK(edge_triples(g) == expected);
  CHECK(reaches(g, "b", "a"));
  CHECK(reaches(g, "c", "a"));
  CHECK_FALSE(reaches(g, "a", "b"));
}

TEST_CASE("employee graph edge set", "[ddg]") {
  auto units = testutil::parse_fixture("employee.mini");
  DepGraph g = build_ddg(units[0]);

  std::multiset<EdgeTriple> expected = {
      // constructor
      {"name", "name", DepEdgeKind::Definition},
      {"salary", "salary", DepEdgeKind::Definition},
      {"year", "Date", DepEdgeKind::CallBinding},
      {"month", "Date", DepEdgeKind::CallBinding},
      {"day", "Date", DepEdgeKind::CallBinding},
      {"Date", "temp", DepEdgeKind::Definition},
      {"temp", "hireDay", DepEdgeKind::Definition},
      // raiseSalary, first statement
      {"salary", kNamelessCall, DepEdgeKind::CallBinding},
      {"byPercent", kNamelessCall, DepEdgeKind::CallBinding},
      {kNamelessCall, "temp", DepEdgeKind::Definition},
      // raiseSalary, compound assignment
      {"salary", kNamelessCall, DepEdgeKind::CallBinding},
      {"temp", kNamelessCall, DepEdgeKind::CallBinding},
      {"bonus", kNamelessCall, DepEdgeKind::CallBinding},
      {kNamelessCall, "salary", DepEdgeKind::Definition},
  };
  CHECK(edge_triples(g) == expected);
  CHECK(g.vertex_count() == 12);
  CHECK(reaches(g, "byPercent", "salary"));
  CHECK(reaches(g, "year", "hireDay"));
}

TEST_CASE("receiver and callee connect both ways", "[ddg]") {
  DepGraph g = ddg_from(
      "public class T { public void m(T employee, T newCar) { employee.setVehicle(newCar); } }");
  std::multiset<EdgeTriple> expected = {
      {"employee", "setVehicle", DepEdgeKind::AccessPath},
      {"setVehicle", "employee", DepEdgeKind::AccessPath},
      {"newCar", "setVehicle", DepEdgeKind::CallBinding},
  };
  CHECK(edge_triples(g) == expected);
}

TEST_CASE("field access through a receiver joins the access path", "[ddg]") {
  DepGraph g = ddg_from(
      "public class T { public int f; public void m(T other) { int x = other.f; } }");
  std::multiset<EdgeTriple> expected = {
      {"other", "f", DepEdgeKind::AccessPath},
      {"f", "other", DepEdgeKind::AccessPath},
      {"f", "x", DepEdgeKind::Definition},
  };
  CHECK(edge_triples(g) == expected);
}

TEST_CASE("own method calls bind arguments to formal parameters", "[ddg]") {
  DepGraph g = ddg_from(
      "public class T {"
      "  public int helper(int a, int b) { return a; }"
      "  public void m(int p, int q) { int r = helper(p, q); }"
      "}");
  auto triples = edge_triples(g);
  CHECK(triples.count({"p", "a", DepEdgeKind::CallBinding}) == 1);
  CHECK(triples.count({"q", "b", DepEdgeKind::CallBinding}) == 1);
  CHECK(triples.count({"helper", "r", DepEdgeKind::Definition}) == 1);
  CHECK(triples.count({"a", "helper", DepEdgeKind::Return}) == 1);
}

TEST_CASE("foreign calls keep arguments on the call vertex", "[ddg]") {
  DepGraph g = ddg_from(
      "public class T { public void m(int p) { int r = mystery(p); } }");
  auto triples = edge_triples(g);
  CHECK(triples.count({"p", "mystery", DepEdgeKind::CallBinding}) == 1);
  CHECK(triples.count({"mystery", "r", DepEdgeKind::Definition}) == 1);
}

TEST_CASE("return statements feed the method vertex", "[ddg]") {
  DepGraph g = ddg_from("public class T { public int m(int x) { return x; } }");
  std::multiset<EdgeTriple> expected = {{"x", "m", DepEdgeKind::Return}};
  CHECK(edge_triples(g) == expected);
}

TEST_CASE("classes without statements produce empty graphs", "[ddg]") {
  auto units = testutil::parse_fixture("vehicle.mini");
  DepGraph g = build_ddg(units[2]);  // Employee with empty bodies
  CHECK(g.vertex_count() == 0);
  auto one = [](const std::string&, const std::string&) { return 1.0; };
  CHECK(random_walk_kernel_raw(g, g, one, std::nullopt) == 0.0);
}

TEST_CASE("graph construction is deterministic", "[ddg]") {
  auto units = testutil::parse_fixture("employee.mini");
  DepGraph a = build_ddg(units[0]);
  DepGraph b = build_ddg(units[0]);
  std::ostringstream da, db;
  write_ddg_dot(a, da);
  write_ddg_dot(b, db);
  CHECK(da.str() == db.str());
}

TEST_CASE("merging by label collapses shared identifiers", "[ddg]") {
  auto ga = ddg_from("public class A { public void m(int salary, int x) { salary = x; } }");
  auto gb = ddg_from("public class B { public void m(int salary, int y) { y = salary; } }");

  DepGraph merged = merge_graphs({ga, gb});
  CHECK(merged.vertex_count() == 3);  // salary, x, y
  auto triples = edge_triples(merged);
  CHECK(triples.count({"x", "salary", DepEdgeKind::Definition}) == 1);
  CHECK(triples.count({"salary", "y", DepEdgeKind::Definition}) == 1);

  DepGraph self_merge = merge_graphs({ga, ga});
  CHECK(self_merge.vertex_count() == ga.vertex_count());
  CHECK(edge_triples(self_merge) == edge_triples(ga));

  DepGraph with_empty = merge_graphs({ga, DepGraph{}});
  CHECK(with_empty.vertex_count() == ga.vertex_count());
  CHECK(edge_triples(with_empty) == edge_triples(ga));
}

TEST_CASE("merged graphs keep nameless call vertices distinct per module", "[ddg]") {
  auto ga = ddg_from("public class A { public void m(int a, int b, int c) { a = b + c; } }");
  auto gb = ddg_from("public class B { public void m(int a, int b, int c) { a = b * c; } }");
  DepGraph merged = merge_graphs({ga, gb});
  // a, b, c shared; one nameless call per module.
  CHECK(merged.vertex_count() == 5);
}

TEST_CASE("product adjacency marks exactly the matching walks", "[ddg]") {
  auto g1 = ddg_from("public class A { public void m(int u, int v) { v = u; } }");
  auto g2 = ddg_from("public class B { public void m(int p, int q) { q = p; } }");
  auto one = [](const std::string&, const std::string&) { return 1.0; };

  Eigen::MatrixXd ax = product_adjacency(g1, g2, one);
  REQUIRE(ax.rows() == 4);
  CHECK(ax.sum() == 1.0);
  int u = g1.find_vertex("u"), v = g1.find_vertex("v");
  int p = g2.find_vertex("p"), q = g2.find_vertex("q");
  int n2 = g2.vertex_count();
  CHECK(ax(u * n2 + p, v * n2 + q) == 1.0);

  Eigen::MatrixXd zero = product_adjacency(g1, g2, sigma_zero);
  // Labels differ everywhere, so sigma is zero off the nonexistent diagonal.
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spectral radius by power iteration", "[ddg]") {
  Eigen::MatrixXd cycle(2, 2);
  cycle << 0.0, 1.0, 1.0, 0.0;
  CHECK(spectral_radius(cycle) == Catch::Approx(1.0));

  Eigen::MatrixXd nilpotent(2, 2);
  nilpotent << 0.0, 1.0, 0.0, 0.0;
  CHECK(spectral_radius(nilpotent) == 0.0);

  Eigen::MatrixXd scaled(2, 2);
  scaled << 0.0, 2.0, 2.0, 0.0;
  CHECK(spectral_radius(scaled) == Catch::Approx(2.0));
}

TEST_CASE("walk kernel counts vertex pairs at lambda zero", "[ddg]") {
  auto g1 = ddg_from("public class A { public void m(int u, int v) { v = u; } }");
  auto g2 = ddg_from("public class B { public void m(int p, int q, int r) { q = p; r = q; } }");
  auto one = [](const std::string&, const std::string&) { return 1.0; };
  CHECK(random_walk_kernel_raw(g1, g2, one, 0.0) == Catch::Approx(6.0));
  CHECK(random_walk_kernel_raw(g2, g2, one, 0.0) == Catch::Approx(9.0));
}

TEST_CASE("closed form agrees with the truncated series", "[ddg]") {
  auto g1 = ddg_from("public class A { public void m(int u, int v) { v = u; u = v; } }");
  auto g2 = ddg_from("public class B { public void m(int p, int q) { q = p; p = q; } }");
  auto one = [](const std::string&, const std::string&) { return 1.0; };

  Eigen::MatrixXd ax = product_adjacency(g1, g2, one);
  double rho = spectral_radius(ax);
  REQUIRE(rho > 0.0);
  double lambda = 0.5 / rho;
  double closed = random_walk_kernel_raw(g1, g2, one, lambda);
  double series = series_kernel(ax, lambda, 60);
  CHECK(closed == Catch::Approx(series).margin(1e-9));
}

TEST_CASE("walk kernel rejects divergent lambda", "[ddg]") {
  auto g = ddg_from("public class A { public void m(int u, int v) { v = u; u = v; } }");
  auto one = [](const std::string&, const std::string&) { return 1.0; };
  CHECK_THROWS_WITH(random_walk_kernel_raw(g, g, one, 2.0),
                    Catch::Matchers::ContainsSubstring("diverges"));
  CHECK_THROWS(random_walk_kernel_raw(g, g, one, -0.1));
}

TEST_CASE("normalized kernel has unit self similarity and symmetry", "[ddg]") {
  auto g1 = ddg_from("public class A { public void m(int u, int v) { v = u; u = v; } }");
  auto g2 = ddg_from("public class B { public void m(int p, int q) { q = p + p; } }");
  auto half = [](const std::string&, const std::string&) { return 0.5; };

  WalkKernelConfig cfg;
  cfg.lambda = 0.1;
  CHECK(random_walk_kernel(g1, g1, half, cfg) == Catch::Approx(1.0));
  CHECK(random_walk_kernel(g1, g2, half, cfg) ==
        Catch::Approx(random_walk_kernel(g2, g1, half, cfg)));
}

TEST_CASE("exports name modules, labels and edge kinds", "[ddg]") {
  auto units = testutil::parse_fixture("employee.mini");
  DepGraph g = build_ddg(units[0]);
  std::ostringstream dot, csv;
  write_ddg_dot(g, dot);
  write_ddg_edges_csv({g}, csv);

  CHECK(dot.str().rfind("digraph", 0) == 0);
  CHECK(dot.str().find("Employee") != std::string::npos);
  CHECK(dot.str().find("definition") != std::string::npos);
  CHECK(csv.str().find("Employee") != std::string::npos);
  CHECK(csv.str().find("call-binding") != std::string::npos);

  for (const auto& e : g.edges()) CHECK(e.kind != DepEdgeKind::Value);
}
