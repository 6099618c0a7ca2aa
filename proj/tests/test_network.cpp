#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "ctxmod/semantic_network.hpp"
#include "fixture_util.hpp"

using namespace ctxmod;

namespace {

struct EdgeView {
  std::string src;
  std::string dst;
  Relation rel;
  double weight;
};

std::vector<EdgeView> edge_views(const SemanticNetwork& net) {
  std::vector<EdgeView> out;
  for (const auto& e : net.edges())
    out.push_back({net.node(e.src).label, net.node(e.dst).label, e.rel, e.weight});
  return out;
}

double edge_weight(const SemanticNetwork& net, const std::string& src, const std::string& dst,
                   Relation rel) {
  for (const auto& e : edge_views(net))
    if (e.src == src && e.dst == dst && e.rel == rel) return e.weight;
  return -1.0;
}

SemanticNetwork employee_network() {
  return build_network(testutil::employee_facts(), testutil::fixture_libs());
}

SemanticNetwork vehicle_network() {
  return build_network(testutil::vehicle_facts(), testutil::fixture_libs());
}

}  // namespace

TEST_CASE("employee network materializes the expected nodes", "[network]") {
  SemanticNetwork net = employee_network();

  std::set<std::string> concepts, terms;
  for (int i = 0; i < net.node_count(); ++i) {
    if (net.node(i).kind == NodeKind::Concept)
      concepts.insert(net.node(i).label);
    else
      terms.insert(net.node(i).label);
  }
  CHECK(concepts ==
        std::set<std::string>{kRoot, "Employee", "String", "double", "Date", "int"});
  CHECK(terms == std::set<std::string>{"name", "salary", "hireDay", "raiseSalary", "year",
                                       "month", "day", "temp", "byPercent", "bonus",
                                       "getTime", "before", "after"});
}

TEST_CASE("employee network edge weights aggregate occurrence frequencies", "[network]") {
  SemanticNetwork net = employee_network();

  CHECK(edge_weight(net, "salary", "double", Relation::ISA) == 4.0);
  CHECK(edge_weight(net, "temp", "Date", Relation::ISA) == 2.0);
  CHECK(edge_weight(net, "temp", "double", Relation::ISA) == 2.0);
  CHECK(edge_weight(net, "name", "String", Relation::ISA) == 2.0);
  CHECK(edge_weight(net, "hireDay", "Date", Relation::ISA) == 1.0);
  CHECK(edge_weight(net, "year", "int", Relation::ISA) == 1.0);

  CHECK(edge_weight(net, "name", "Employee", Relation::ISA) == 1.0);
  CHECK(edge_weight(net, "salary", "Employee", Relation::ISA) == 1.0);
  CHECK(edge_weight(net, "hireDay", "Employee", Relation::ISA) == 1.0);
  CHECK(edge_weight(net, "raiseSalary", "Employee", Relation::ISA) == 1.0);

  CHECK(edge_weight(net, "String", "Employee", Relation::IPO) == 1.0);
  CHECK(edge_weight(net, "double", "Employee", Relation::IPO) == 1.0);
  CHECK(edge_weight(net, "Date", "Employee", Relation::IPO) == 1.0);

  for (const std::string& c : {"Employee", "String", "double", "Date", "int"})
    CHECK(edge_weight(net, c, kRoot, Relation::ITO) == 1.0);
}

TEST_CASE("concept out-degrees on the employee network", "[network]") {
  SemanticNetwork net = employee_network();
  CHECK(net.weighted_out_degree(net.concept_id("Employee")) == 1.0);
  CHECK(net.weighted_out_degree(net.concept_id("String")) == 2.0);
  CHECK(net.weighted_out_degree(net.concept_id("double")) == 2.0);
  CHECK(net.weighted_out_degree(net.concept_id("Date")) == 2.0);
  CHECK(net.weighted_out_degree(net.concept_id("int")) == 1.0);
  CHECK(net.weighted_out_degree(net.root_id()) == 0.0);
}

TEST_CASE("temp participates in exactly the Date and double synsets", "[network]") {
  SemanticNetwork net = employee_network();
  auto synsets = synsets_of(net, "temp");
  REQUIRE(synsets.size() == 2);
  std::set<std::string> owners{synsets[0].head, synsets[1].head};
  CHECK(owners == std::set<std::string>{"Date", "double"});
  for (const auto& s : synsets) {
    CHECK_FALSE(s.members.empty());
    for (const auto& m : s.members) {
      int term = net.term_id(m);
      REQUIRE(term >= 0);
      bool linked = false;
      for (const auto& [concept_node, w] : net.senses(m))
        if (net.node(concept_node).label == s.head) linked = true;
      CHECK(linked);
    }
  }
}

TEST_CASE("vehicle synset lists the public surface of Vehicle", "[network]") {
  SemanticNetwork net = vehicle_network();
  auto synsets = synsets_of(net, "gear");
  REQUIRE(synsets.size() == 1);
  CHECK(synsets[0].head == "Vehicle");
  CHECK(synsets[0].members == std::vector<std::string>{"applyBrake", "gear", "setGear",
                                                       "setSpeed", "speed"});
}

TEST_CASE("subtype edge and subhierarchy statistics", "[network]") {
  SemanticNetwork net = vehicle_network();
  CHECK(edge_weight(net, "Car", "Vehicle", Relation::ITO) == 1.0);
  CHECK(edge_weight(net, "Car", kRoot, Relation::ITO) == -1.0);

  Subhierarchy sub = subhierarchy(net, net.concept_id("Vehicle"));
  std::set<std::string> labels;
  for (int c : sub.concepts) labels.insert(net.node(c).label);
  CHECK(labels == std::set<std::string>{"Vehicle", "Car"});
  CHECK(sub.internal_edges == 1);

  Subhierarchy leaf = subhierarchy(net, net.concept_id("Car"));
  CHECK(leaf.concepts.size() == 1);
  CHECK(leaf.internal_edges == 0);

  Subhierarchy all = subhierarchy(net, net.root_id());
  std::set<std::string> all_labels;
  for (int c : all.concepts) all_labels.insert(net.node(c).label);
  for (int i = 0; i < net.node_count(); ++i)
    if (net.node(i).kind == NodeKind::Concept) CHECK(all_labels.contains(net.node(i).label));
}

TEST_CASE("car reaches Vehicle only through the subtype edge", "[network]") {
  SemanticNetwork net = vehicle_network();
  int car_term = net.term_id("car");
  int vehicle = net.concept_id("Vehicle");
  REQUIRE(car_term >= 0);
  REQUIRE(vehicle >= 0);

  auto reaches = [&](bool use_ito) {
    std::set<int> seen{car_term};
    std::vector<int> work{car_term};
    while (!work.empty()) {
      int cur = work.back();
      work.pop_back();
      for (const auto& e : net.edges()) {
        if (e.rel == Relation::ITO && !use_ito) continue;
        int next = -1;
        if (e.src == cur) next = e.dst;
        if (e.dst == cur) next = e.src;
        if (next >= 0 && seen.insert(next).second) work.push_back(next);
      }
    }
    return seen.contains(vehicle);
  };
  CHECK(reaches(true));
  CHECK_FALSE(reaches(false));
}

TEST_CASE("empty corpus yields only the virtual root", "[network]") {
  SemanticNetwork net = build_network(CorpusFacts{}, LibraryFacts{});
  CHECK(net.node_count() == 1);
  CHECK(net.node(net.root_id()).label == kRoot);
  CHECK(net.edges().empty());
}

TEST_CASE("dangling supertype attaches to the root with a warning", "[network]") {
  auto units = parse_program("public class A extends Ghost {}");
  CorpusFacts corpus = ingest_corpus(units, LibraryFacts{});
  std::vector<std::string> warnings;
  SemanticNetwork net = build_network(corpus, LibraryFacts{}, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("Ghost") != std::string::npos);
  CHECK(edge_weight(net, "A", kRoot, Relation::ITO) == 1.0);
}

TEST_CASE("supertype cycles break deterministically with a warning", "[network]") {
  CorpusFacts corpus;
  UnitFacts a;
  a.unit_name = "A";
  a.supertype_edges = {{"A", "B"}};
  UnitFacts b;
  b.unit_name = "B";
  b.supertype_edges = {{"B", "A"}};
  corpus.units = {a, b};
  std::vector<std::string> warnings;
  SemanticNetwork net = build_network(corpus, LibraryFacts{}, &warnings);
  REQUIRE_FALSE(warnings.empty());
  CHECK(edge_weight(net, "A", "B", Relation::ITO) == 1.0);
  CHECK(edge_weight(net, "B", "A", Relation::ITO) == -1.0);
  CHECK(edge_weight(net, "B", kRoot, Relation::ITO) == 1.0);
}

TEST_CASE("every network invariant holds on the corpus fixture", "[network]") {
  SemanticNetwork net = build_network(testutil::corpus_facts(), testutil::fixture_libs());
  for (const auto& e : net.edges()) {
    CHECK(e.weight >= 1.0);
    if (e.rel == Relation::ISA) {
      CHECK(net.node(e.src).kind == NodeKind::Term);
      CHECK(net.node(e.dst).kind == NodeKind::Concept);
    } else {
      CHECK(net.node(e.src).kind == NodeKind::Concept);
      CHECK(net.node(e.dst).kind == NodeKind::Concept);
    }
  }
  // The subtype subgraph is acyclic: every concept reaches the root.
  for (int i = 0; i < net.node_count(); ++i) {
    if (net.node(i).kind != NodeKind::Concept || i == net.root_id()) continue;
    int cur = i;
    int hops = 0;
    while (cur != net.root_id() && hops <= net.node_count()) {
      int next = -1;
      for (int e : net.out_edges(cur))
        if (net.edge(e).rel == Relation::ITO) next = net.edge(e).dst;
      REQUIRE(next >= 0);
      cur = next;
      ++hops;
    }
    CHECK(cur == net.root_id());
  }
}

TEST_CASE("exports carry labels, kinds, relations and weights", "[network]") {
  SemanticNetwork net = vehicle_network();
  std::ostringstream nodes, edges, dot;
  write_network_nodes_csv(net, nodes);
  write_network_edges_csv(net, edges);
  write_network_dot(net, dot);

  CHECK(nodes.str().rfind("id,kind,label\n", 0) == 0);
  CHECK(edges.str().rfind("source,source_kind,target,target_kind,relation,weight\n", 0) == 0);
  CHECK(edges.str().find("Car,concept,Vehicle,concept,ITO,1") != std::string::npos);
  CHECK(edges.str().find("gear,term,Vehicle,concept,ISA,1") != std::string::npos);
  CHECK(dot.str().rfind("digraph", 0) == 0);
  CHECK(dot.str().find("shape=box") != std::string::npos);
  CHECK(dot.str().find("shape=ellipse") != std::string::npos);
}
