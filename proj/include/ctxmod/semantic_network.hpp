#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxmod/facts.hpp"

namespace ctxmod {

enum class NodeKind { Term, Concept };
enum class Relation { ISA, ITO, IPO };

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::ISA: return "ISA";
    case Relation::ITO: return "ITO";
    case Relation::IPO: return "IPO";
  }
  return "?";
}

struct NetworkNode {
  NodeKind kind = NodeKind::Term;
  std::string label;
};

struct NetworkEdge {
  int src = -1;
  int dst = -1;
  Relation rel = Relation::ISA;
  double weight = 0.0;
};

// Virtual root concept subsuming every type.
inline const std::string kRoot = "\xE2\x8A\xA4";  // UTF-8 down tack

class SemanticNetwork {
 public:
  int ensure_node(NodeKind kind, const std::string& label) {
    auto key = std::make_pair(kind, label);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(NetworkNode{kind, label});
    out_.emplace_back();
    in_.emplace_back();
    index_.emplace(std::move(key), id);
    return id;
  }

  int find_node(NodeKind kind, const std::string& label) const {
    auto it = index_.find(std::make_pair(kind, label));
    return it == index_.end() ? -1 : it->second;
  }

  int concept_id(const std::string& label) const { return find_node(NodeKind::Concept, label); }
  int term_id(const std::string& label) const { return find_node(NodeKind::Term, label); }

  // Adds weight to the (src, dst, rel) edge, creating it if absent.
  void add_edge(int src, int dst, Relation rel, double weight) {
    if (rel == Relation::ISA &&
        !(nodes_[src].kind == NodeKind::Term && nodes_[dst].kind == NodeKind::Concept))
      throw std::runtime_error("ISA edge must run Term -> Concept");
    if (rel != Relation::ISA &&
        !(nodes_[src].kind == NodeKind::Concept && nodes_[dst].kind == NodeKind::Concept))
      throw std::runtime_error("ITO/IPO edge must run Concept -> Concept");
    auto key = std::make_tuple(src, dst, rel);
    auto it = edge_index_.find(key);
    if (it != edge_index_.end()) {
      edges_[it->second].weight += weight;
      return;
    }
    int id = static_cast<int>(edges_.size());
    edges_.push_back(NetworkEdge{src, dst, rel, weight});
    edge_index_.emplace(key, id);
    out_[src].push_back(id);
    in_[dst].push_back(id);
  }

  double edge_weight(int src, int dst, Relation rel) const {
    auto it = edge_index_.find(std::make_tuple(src, dst, rel));
    return it == edge_index_.end() ? 0.0 : edges_[it->second].weight;
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const NetworkNode& node(int id) const { return nodes_[id]; }
  const std::vector<NetworkEdge>& edges() const { return edges_; }
  const std::vector<int>& out_edges(int node) const { return out_[node]; }
  const std::vector<int>& in_edges(int node) const { return in_[node]; }
  const NetworkEdge& edge(int id) const { return edges_[id]; }

  int root_id() const { return root_; }
  void set_root(int id) { root_ = id; }

  double weighted_out_degree(int node) const {
    double sum = 0.0;
    for (int e : out_[node]) sum += edges_[e].weight;
    return sum;
  }

  // ISA senses of a term: (concept node, weight), sorted by concept label.
  std::vector<std::pair<int, double>> senses(const std::string& term_label) const {
    std::vector<std::pair<int, double>> out;
    int t = term_id(term_label);
    if (t < 0) return out;
    for (int e : out_[t])
      if (edges_[e].rel == Relation::ISA) out.emplace_back(edges_[e].dst, edges_[e].weight);
    std::sort(out.begin(), out.end(), [this](const auto& a, const auto& b) {
      return nodes_[a.first].label < nodes_[b.first].label;
    });
    return out;
  }

  bool ito_reaches(int from, int target) const {
    if (from == target) return true;
    std::vector<int> work{from};
    std::set<int> seen{from};
    while (!work.empty()) {
      int cur = work.back();
      work.pop_back();
      for (int e : out_[cur]) {
        if (edges_[e].rel != Relation::ITO) continue;
        int next = edges_[e].dst;
        if (next == target) return true;
        if (seen.insert(next).second) work.push_back(next);
      }
    }
    return false;
  }

 private:
  std::vector<NetworkNode> nodes_;
  std::vector<NetworkEdge> edges_;
  std::map<std::pair<NodeKind, std::string>, int> index_;
  std::map<std::tuple<int, int, Relation>, int> edge_index_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
  int root_ = 0;
};

struct Synset {
  std::string head;                  // head concept label
  std::vector<std::string> members;  // ISA-linked term labels, sorted
};

// ---------------------------------------------------------------------------
// Construction

inline SemanticNetwork build_network(const CorpusFacts& corpus, const LibraryFacts& libs,
                                     std::vector<std::string>* warnings = nullptr) {
  SemanticNetwork net;
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  int root = net.ensure_node(NodeKind::Concept, kRoot);
  net.set_root(root);

  std::map<std::string, const LibraryType*> lib_by_name;
  for (const auto& t : libs.types) lib_by_name[t.name] = &t;

  // Concept materialization: units, imported library types (plus their
  // supertype closure), occurrence types, field types.
  std::set<std::string> materialized_lib;  // fully qualified names
  std::vector<const LibraryType*> lib_order;
  for (const auto& u : corpus.units) net.ensure_node(NodeKind::Concept, u.simple_name());
  for (const auto& u : corpus.units) {
    for (const auto& imp : u.imports) {
      auto it = lib_by_name.find(imp);
      if (it == lib_by_name.end()) continue;
      std::vector<const LibraryType*> work{it->second};
      while (!work.empty()) {
        const LibraryType* t = work.back();
        work.pop_back();
        if (!materialized_lib.insert(t->name).second) continue;
        net.ensure_node(NodeKind::Concept, t->simple_name());
        lib_order.push_back(t);
        for (const auto& super : t->supertypes) {
          auto jt = lib_by_name.find(super);
          if (jt != lib_by_name.end()) work.push_back(jt->second);
        }
      }
    }
  }
  for (const auto& u : corpus.units)
    for (const auto& o : u.occurrences)
      if (o.type != kBottom) net.ensure_node(NodeKind::Concept, o.type);
  for (const auto& u : corpus.units)
    for (const auto& m : u.api_members)
      if (m.kind == MemberKind::Field) net.ensure_node(NodeKind::Concept, m.type);

  // ITO edges. Cycle-closing edges are dropped with a warning.
  auto add_ito = [&](int sub, int super) {
    if (sub == super) {
      warn("self ITO edge ignored at '" + net.node(sub).label + "'");
      return;
    }
    if (net.ito_reaches(super, sub)) {
      warn("ITO cycle broken: dropped '" + net.node(sub).label + "' -> '" +
           net.node(super).label + "'");
      return;
    }
    net.add_edge(sub, super, Relation::ITO, 1.0);
  };

  for (const auto& u : corpus.units) {
    for (const auto& [sub, super] : u.supertype_edges) {
      int sub_id = net.concept_id(simple_type_name(sub));
      if (sub_id < 0) sub_id = net.ensure_node(NodeKind::Concept, simple_type_name(sub));
      int super_id = net.concept_id(simple_type_name(super));
      if (super_id < 0) {
        warn("dangling supertype '" + super + "' of '" + sub + "' attached to virtual root");
        super_id = root;
      }
      add_ito(sub_id, super_id);
    }
  }
  for (const LibraryType* t : lib_order) {
    int sub_id = net.concept_id(t->simple_name());
    for (const auto& super : t->supertypes) {
      int super_id = materialized_lib.contains(super)
                         ? net.concept_id(simple_type_name(super))
                         : root;
      add_ito(sub_id, super_id);
    }
  }
  // Every concept except the root must reach the root.
  for (int id = 0; id < net.node_count(); ++id) {
    if (id == root || net.node(id).kind != NodeKind::Concept) continue;
    bool has_ito = false;
    for (int e : net.out_edges(id))
      if (net.edge(e).rel == Relation::ITO) has_ito = true;
    if (!has_ito) net.add_edge(id, root, Relation::ITO, 1.0);
  }

  // IPO edges: field type -> owner, weight = number of such fields.
  for (const auto& u : corpus.units) {
    for (const auto& m : u.api_members) {
      if (m.kind != MemberKind::Field) continue;
      int part = net.concept_id(m.type);
      int whole = net.concept_id(simple_type_name(m.owner));
      if (part < 0 || whole < 0 || part == whole) continue;
      net.add_edge(part, whole, Relation::IPO, 1.0);
    }
  }

  // ISA edges: members to their owner concept, occurrences to their type
  // concept (weight = frequency).
  for (const auto& u : corpus.units) {
    for (const auto& m : u.api_members) {
      int term = net.ensure_node(NodeKind::Term, m.name);
      int owner = net.concept_id(simple_type_name(m.owner));
      if (owner >= 0) net.add_edge(term, owner, Relation::ISA, 1.0);
    }
  }
  for (const LibraryType* t : lib_order) {
    int owner = net.concept_id(t->simple_name());
    for (const auto& m : t->members) {
      int term = net.ensure_node(NodeKind::Term, m.name);
      net.add_edge(term, owner, Relation::ISA, 1.0);
    }
  }
  for (const auto& u : corpus.units) {
    for (const auto& o : u.occurrences) {
      int term = net.ensure_node(NodeKind::Term, o.id);
      if (o.type == kBottom) continue;
      int concept_node = net.concept_id(o.type);
      net.add_edge(term, concept_node, Relation::ISA, static_cast<double>(o.count));
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Queries

inline Synset synset_of_concept(const SemanticNetwork& net, int concept_node) {
  Synset s;
  s.head = net.node(concept_node).label;
  for (int e : net.in_edges(concept_node))
    if (net.edge(e).rel == Relation::ISA) s.members.push_back(net.node(net.edge(e).src).label);
  std::sort(s.members.begin(), s.members.end());
  s.members.erase(std::unique(s.members.begin(), s.members.end()), s.members.end());
  return s;
}

// Synsets a name participates in: senses when the name is a term, plus the
// concept's own synset when the name is a type.
inline std::vector<Synset> synsets_of(const SemanticNetwork& net, const std::string& name) {
  std::vector<Synset> out;
  for (const auto& [concept_node, weight] : net.senses(name)) {
    (void)weight;
    out.push_back(synset_of_concept(net, concept_node));
  }
  int c = net.concept_id(name);
  if (c >= 0) {
    Synset own = synset_of_concept(net, c);
    if (!own.members.empty()) out.push_back(own);
  }
  return out;
}

struct Subhierarchy {
  std::vector<int> concepts;  // ITO descendants, root of the subhierarchy included
  int internal_edges = 0;     // ITO edges with both endpoints inside
};

inline Subhierarchy subhierarchy(const SemanticNetwork& net, int concept_node) {
  Subhierarchy sub;
  std::set<int> seen{concept_node};
  std::vector<int> work{concept_node};
  while (!work.empty()) {
    int cur = work.back();
    work.pop_back();
    for (int e : net.in_edges(cur)) {
      if (net.edge(e).rel != Relation::ITO) continue;
      int child = net.edge(e).src;
      if (seen.insert(child).second) work.push_back(child);
    }
  }
  sub.concepts.assign(seen.begin(), seen.end());
  for (const auto& e : net.edges())
    if (e.rel == Relation::ITO && seen.contains(e.src) && seen.contains(e.dst))
      ++sub.internal_edges;
  return sub;
}

// ---------------------------------------------------------------------------
// Export

inline std::string format_weight(double w) {
  char buf[32];
  if (w == static_cast<long long>(w))
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(w));
  else
    std::snprintf(buf, sizeof(buf), "%g", w);
  return buf;
}

inline void write_network_nodes_csv(const SemanticNetwork& net, std::ostream& os) {
  os << "id,kind,label\n";
  for (int i = 0; i < net.node_count(); ++i)
    os << i << ',' << (net.node(i).kind == NodeKind::Term ? "term" : "concept") << ','
       << net.node(i).label << "\n";
}

inline void write_network_edges_csv(const SemanticNetwork& net, std::ostream& os) {
  auto kind_name = [](NodeKind k) { return k == NodeKind::Term ? "term" : "concept"; };
  os << "source,source_kind,target,target_kind,relation,weight\n";
  for (const auto& e : net.edges())
    os << net.node(e.src).label << ',' << kind_name(net.node(e.src).kind) << ','
       << net.node(e.dst).label << ',' << kind_name(net.node(e.dst).kind) << ','
       << relation_name(e.rel) << ',' << format_weight(e.weight) << "\n";
}

inline void write_network_dot(const SemanticNetwork& net, std::ostream& os) {
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  };
  os << "digraph semantic_network {\n";
  for (int i = 0; i < net.node_count(); ++i) {
    const NetworkNode& n = net.node(i);
    os << "  n" << i << " [label=\"" << escape(n.label) << "\", shape="
       << (n.kind == NodeKind::Term ? "ellipse" : "box") << "];\n";
  }
  for (const auto& e : net.edges())
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << relation_name(e.rel) << " "
       << format_weight(e.weight) << "\"];\n";
  os << "}\n";
}

}  // namespace ctxmod
