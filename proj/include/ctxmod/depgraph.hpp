#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxmod/source.hpp"

namespace ctxmod {

enum class DepEdgeKind { Definition, Value, Return, CallBinding, AccessPath };

inline const char* dep_edge_name(DepEdgeKind k) {
  switch (k) {
    case DepEdgeKind::Definition: return "definition";
    case DepEdgeKind::Value: return "value";
    case DepEdgeKind::Return: return "return";
    case DepEdgeKind::CallBinding: return "call-binding";
    case DepEdgeKind::AccessPath: return "access-path";
  }
  return "?";
}

inline const std::string kNamelessCall = "\xE2\x8A\xA5" "fun";  // display label

struct DepVertex {
  std::string label;  // identifier / callee / nameless-call display label
  std::string key;    // unique merge key (nameless calls get fresh keys)
};

struct DepEdge {
  int src = -1;
  int dst = -1;
  DepEdgeKind kind = DepEdgeKind::Definition;
};

class DepGraph {
 public:
  std::string module;

  int ensure_vertex(const std::string& label, const std::string& key) {
    auto it = by_key_.find(key);
    if (it != by_key_.end()) return it->second;
    int id = static_cast<int>(vertices_.size());
    vertices_.push_back(DepVertex{label, key});
    by_key_.emplace(key, id);
    return id;
  }

  int ensure_identifier(const std::string& label) { return ensure_vertex(label, label); }

  int fresh_nameless() {
    std::string key = kNamelessCall + "#" + std::to_string(++nameless_);
    return ensure_vertex(kNamelessCall, key);
  }

  void add_edge(int src, int dst, DepEdgeKind kind) {
    if (!edge_set_.insert(std::make_tuple(src, dst, kind)).second) return;
    edges_.push_back(DepEdge{src, dst, kind});
  }

  int find_vertex(const std::string& key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? -1 : it->second;
  }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  const DepVertex& vertex(int id) const { return vertices_[id]; }
  const std::vector<DepEdge>& edges() const { return edges_; }

  // Direction-respecting 0/1 adjacency.
  Eigen::MatrixXd adjacency() const {
    int n = vertex_count();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges_) a(e.src, e.dst) = 1.0;
    return a;
  }

 private:
  std::vector<DepVertex> vertices_;
  std::map<std::string, int> by_key_;
  std::vector<DepEdge> edges_;
  std::set<std::tuple<int, int, DepEdgeKind>> edge_set_;
  int nameless_ = 0;
};

// ---------------------------------------------------------------------------
// Flow-insensitive lowering of a unit's method bodies.

namespace detail {

class DdgBuilder {
 public:
  explicit DdgBuilder(const SourceUnit& unit) : unit_(unit) {
    graph_.module = unit.unit_name;
    for (const auto& m : unit.cls.methods) {
      std::vector<std::string> params;
      for (const auto& p : m.params) params.push_back(p.name);
      own_methods_[m.name] = std::move(params);
    }
  }

  DepGraph build() {
    for (const auto& m : unit_.cls.methods) {
      current_method_ = m.name;
      lower_stmts(m.body);
    }
    return std::move(graph_);
  }

 private:
  struct Flow {
    std::vector<int> producers;  // vertices carrying the expression's value
    int head = -1;               // access-path head for enclosing member access
  };

  void lower_stmts(const std::vector<Stmt>& body) {
    for (const auto& s : body) lower_stmt(s);
  }

  void lower_stmt(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Block:
        lower_stmts(s.body);
        break;
      case Stmt::Kind::ExprStmt:
        lower_expr(*s.value);
        break;
      case Stmt::Kind::Return: {
        if (!s.value) break;
        int fn = graph_.ensure_identifier(current_method_);
        for (int v : lower_expr(*s.value).producers)
          graph_.add_edge(v, fn, DepEdgeKind::Return);
        break;
      }
      case Stmt::Kind::LocalDecl: {
        if (!s.value) break;
        int target = graph_.ensure_identifier(s.decl_name);
        for (int v : lower_expr(*s.value).producers)
          graph_.add_edge(v, target, DepEdgeKind::Definition);
        break;
      }
      case Stmt::Kind::Assign: {
        int target = lower_target(*s.target);
        if (s.op == "=") {
          for (int v : lower_expr(*s.value).producers)
            graph_.add_edge(v, target, DepEdgeKind::Definition);
        } else {
          // Compound assignment: target and the right-hand operands feed one
          // nameless call whose result defines the target.
          int op = graph_.fresh_nameless();
          graph_.add_edge(target, op, DepEdgeKind::CallBinding);
          for (const Expr* operand : flatten_operands(*s.value))
            for (int v : lower_expr(*operand).producers)
              graph_.add_edge(v, op, DepEdgeKind::CallBinding);
          graph_.add_edge(op, target, DepEdgeKind::Definition);
        }
        break;
      }
    }
  }

  // The written vertex of an assignment target: the last identifier of the
  // access path. Access-path pairs of the target are still materialized.
  int lower_target(const Expr& e) {
    if (e.kind == Expr::Kind::Ident) return graph_.ensure_identifier(e.text);
    Flow f = lower_expr(e);  // Access: produces the member vertex
    if (f.producers.size() == 1) return f.producers.front();
    throw std::runtime_error("unsupported assignment target in " + unit_.unit_name);
  }

  // Maximal operator trees collapse into one nameless call: collect the
  // non-operator leaves of a Binary/Unary spine.
  static std::vector<const Expr*> flatten_operands(const Expr& e) {
    std::vector<const Expr*> out;
    std::vector<const Expr*> work{&e};
    while (!work.empty()) {
      const Expr* cur = work.back();
      work.pop_back();
      if (cur->kind == Expr::Kind::Binary) {
        work.push_back(cur->rhs.get());
        work.push_back(cur->base.get());
      } else if (cur->kind == Expr::Kind::Unary) {
        work.push_back(cur->base.get());
      } else {
        out.push_back(cur);
      }
    }
    return out;
  }

  Flow lower_expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Ident: {
        int v = graph_.ensure_identifier(e.text);
        return Flow{{v}, v};
      }
      case Expr::Kind::This:
      case Expr::Kind::IntLit:
      case Expr::Kind::FloatLit:
      case Expr::Kind::StrLit:
        return Flow{};
      case Expr::Kind::Access: {
        bool via_this = e.base->kind == Expr::Kind::This;
        int v = graph_.ensure_identifier(e.text);
        if (via_this) return Flow{{v}, v};
        Flow base = lower_expr(*e.base);
        if (base.head >= 0) {
          graph_.add_edge(base.head, v, DepEdgeKind::AccessPath);
          graph_.add_edge(v, base.head, DepEdgeKind::AccessPath);
        }
        return Flow{{v}, base.head >= 0 ? base.head : v};
      }
      case Expr::Kind::Call: {
        int callee = graph_.ensure_identifier(e.text);
        bool own = (!e.base || e.base->kind == Expr::Kind::This) &&
                   own_methods_.contains(e.text);
        if (e.base && e.base->kind != Expr::Kind::This) {
          Flow base = lower_expr(*e.base);
          if (base.head >= 0) {
            graph_.add_edge(base.head, callee, DepEdgeKind::AccessPath);
            graph_.add_edge(callee, base.head, DepEdgeKind::AccessPath);
          }
        }
        bind_arguments(e, callee, own);
        return Flow{{callee}, callee};
      }
      case Expr::Kind::New: {
        int callee = graph_.ensure_identifier(e.text);
        bind_arguments(e, callee, own_methods_.contains(e.text));
        return Flow{{callee}, callee};
      }
      case Expr::Kind::Unary:
      case Expr::Kind::Binary: {
        int op = graph_.fresh_nameless();
        for (const Expr* operand : flatten_operands(e))
          for (int v : lower_expr(*operand).producers)
            graph_.add_edge(v, op, DepEdgeKind::CallBinding);
        return Flow{{op}, op};
      }
    }
    return Flow{};
  }

  // Arguments flow to the callee's formal parameters when the callee is a
  // method of this unit, otherwise to the call vertex itself.
  void bind_arguments(const Expr& call, int callee, bool own) {
    const std::vector<std::string>* params =
        own ? &own_methods_.at(call.text) : nullptr;
    for (size_t i = 0; i < call.args.size(); ++i) {
      std::vector<int> producers = lower_expr(*call.args[i]).producers;
      if (producers.empty()) continue;
      int sink = callee;
      if (params && i < params->size()) sink = graph_.ensure_identifier((*params)[i]);
      for (int v : producers) graph_.add_edge(v, sink, DepEdgeKind::CallBinding);
    }
  }

  const SourceUnit& unit_;
  DepGraph graph_;
  std::map<std::string, std::vector<std::string>> own_methods_;
  std::string current_method_;
};

}  // namespace detail

inline DepGraph build_ddg(const SourceUnit& unit) {
  return detail::DdgBuilder(unit).build();
}

// Union by vertex key: identifier vertices share keys across modules and
// merge; nameless call vertices keep module-scoped keys and stay distinct.
inline DepGraph merge_graphs(const std::vector<DepGraph>& graphs) {
  DepGraph merged;
  merged.module = "merged";
  for (const auto& g : graphs) {
    std::vector<int> remap(g.vertex_count());
    for (int v = 0; v < g.vertex_count(); ++v) {
      const DepVertex& vert = g.vertex(v);
      std::string key =
          vert.label == vert.key ? vert.key : g.module + "/" + vert.key;
      remap[v] = merged.ensure_vertex(vert.label, key);
    }
    for (const auto& e : g.edges()) merged.add_edge(remap[e.src], remap[e.dst], e.kind);
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Random-walk kernel (direct product graph)

struct WalkKernelConfig {
  std::optional<double> lambda;  // default 0.5 / rho per pair
  bool normalize = true;
};

inline Eigen::MatrixXd product_adjacency(
    const DepGraph& g1, const DepGraph& g2,
    const std::function<double(const std::string&, const std::string&)>& label_sim) {
  int n1 = g1.vertex_count(), n2 = g2.vertex_count();
  Eigen::MatrixXd sigma(n1, n2);
  for (int v = 0; v < n1; ++v)
    for (int w = 0; w < n2; ++w) {
      const std::string& a = g1.vertex(v).label;
      const std::string& b = g2.vertex(w).label;
      sigma(v, w) = a == b ? 1.0 : label_sim(a, b);
    }
  Eigen::MatrixXd a1 = g1.adjacency(), a2 = g2.adjacency();
  Eigen::MatrixXd ax = Eigen::MatrixXd::Zero(n1 * n2, n1 * n2);
  for (int v1 = 0; v1 < n1; ++v1)
    for (int w1 = 0; w1 < n2; ++w1) {
      if (sigma(v1, w1) == 0.0) continue;
      for (int v2 = 0; v2 < n1; ++v2) {
        if (a1(v1, v2) == 0.0) continue;
        for (int w2 = 0; w2 < n2; ++w2) {
          if (a2(w1, w2) == 0.0) continue;
          ax(v1 * n2 + w1, v2 * n2 + w2) = sigma(v1, w1) * sigma(v2, w2);
        }
      }
    }
  return ax;
}

// Spectral radius of a nonnegative matrix. Acyclic support means the radius
// is exactly zero, detected by peeling sources. Otherwise power iteration
// runs on the shifted matrix a + cI: shifting keeps the Perron root dominant
// but breaks modulus ties with complex peripheral eigenvalues, so the
// Rayleigh quotient converges instead of oscillating (directed cycles).
inline double spectral_radius(const Eigen::MatrixXd& a, double tol = 1e-10,
                              int max_iter = 300) {
  int n = static_cast<int>(a.rows());
  if (n == 0) return 0.0;

  std::vector<int> out_degree(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i, j) != 0.0) ++out_degree[i];
  std::vector<bool> peeled(n, false);
  for (bool progress = true; progress;) {
    progress = false;
    for (int i = 0; i < n; ++i) {
      if (peeled[i] || out_degree[i] > 0) continue;
      peeled[i] = true;
      progress = true;
      for (int j = 0; j < n; ++j)
        if (!peeled[j] && a(j, i) != 0.0) --out_degree[j];
    }
  }
  if (std::all_of(peeled.begin(), peeled.end(), [](bool p) { return p; })) return 0.0;

  double shift = 0.0;
  for (int i = 0; i < n; ++i) shift = std::max(shift, a.row(i).cwiseAbs().sum());
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double prev = -1.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = a * x + shift * x;
    double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    double est = x.dot(a * x) + shift;
    if (prev >= 0.0 && std::abs(est - prev) <= tol * std::max(1.0, est))
      return std::max(est - shift, 0.0);
    prev = est;
  }
  return std::max(prev - shift, 0.0);
}

inline double random_walk_kernel_raw(
    const DepGraph& g1, const DepGraph& g2,
    const std::function<double(const std::string&, const std::string&)>& label_sim,
    std::optional<double> lambda_opt) {
  if (g1.vertex_count() == 0 || g2.vertex_count() == 0) return 0.0;
  Eigen::MatrixXd ax = product_adjacency(g1, g2, label_sim);
  double rho = spectral_radius(ax);
  double lambda = lambda_opt ? *lambda_opt : (rho > 0.0 ? 0.5 / rho : 0.0);
  if (lambda < 0.0) throw std::runtime_error("walk kernel: lambda must be >= 0");
  if (lambda * rho >= 1.0)
    throw std::runtime_error("walk kernel diverges: lambda * rho = " +
                             std::to_string(lambda * rho) + " >= 1, use a smaller lambda");
  int n = static_cast<int>(ax.rows());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - lambda * ax;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd z = system.partialPivLu().solve(ones);
  return ones.dot(z);
}

inline double random_walk_kernel(
    const DepGraph& g1, const DepGraph& g2,
    const std::function<double(const std::string&, const std::string&)>& label_sim,
    const WalkKernelConfig& config = {}) {
  double k = random_walk_kernel_raw(g1, g2, label_sim, config.lambda);
  if (!config.normalize) return k;
  double k11 = random_walk_kernel_raw(g1, g1, label_sim, config.lambda);
  double k22 = random_walk_kernel_raw(g2, g2, label_sim, config.lambda);
  if (k11 <= 0.0 || k22 <= 0.0) return 0.0;
  return k / std::sqrt(k11 * k22);
}

// ---------------------------------------------------------------------------
// Export

inline void write_ddg_dot(const DepGraph& g, std::ostream& os) {
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  };
  os << "digraph ddg {\n";
  os << "  label=\"" << escape(g.module) << "\";\n";
  for (int v = 0; v < g.vertex_count(); ++v)
    os << "  n" << v << " [label=\"" << escape(g.vertex(v).label) << "\"];\n";
  for (const auto& e : g.edges())
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << dep_edge_name(e.kind)
       << "\"];\n";
  os << "}\n";
}

inline void write_ddg_edges_csv(const std::vector<DepGraph>& graphs, std::ostream& os) {
  os << "module,src,dst,kind\n";
  for (const auto& g : graphs)
    for (const auto& e : g.edges())
      os << g.module << ',' << g.vertex(e.src).label << ',' << g.vertex(e.dst).label << ','
         << dep_edge_name(e.kind) << "\n";
}

}  // namespace ctxmod
