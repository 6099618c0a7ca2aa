#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctxmod/source.hpp"

namespace ctxmod {

// Sentinel declared type for occurrences whose type cannot be resolved
// (unknown members, results of void calls, foreign receivers).
inline const std::string kBottom = "\xE2\x8A\xA5";  // UTF-8 up tack

struct Occurrence {
  std::string id;
  std::string type;
  int count = 0;
};

enum class MemberKind { Field, Method };

struct ApiMember {
  std::string name;
  std::string type;   // field type or method return type
  std::string owner;  // owning unit's simple name
  MemberKind kind = MemberKind::Method;
};

struct UnitFacts {
  std::string unit_name;  // package-qualified
  std::vector<std::string> package_path;
  std::vector<std::string> imports;
  std::vector<Occurrence> occurrences;  // sorted by (id, type)
  std::vector<ApiMember> api_members;
  std::vector<std::pair<std::string, std::string>> supertype_edges;  // (sub, super)

  std::string simple_name() const {
    auto dot = unit_name.rfind('.');
    return dot == std::string::npos ? unit_name : unit_name.substr(dot + 1);
  }
};

struct CorpusFacts {
  std::vector<UnitFacts> units;
};

struct LibraryMember {
  std::string name;
  std::string type;
};

struct LibraryType {
  std::string name;  // fully qualified
  std::vector<std::string> supertypes;
  std::vector<LibraryMember> members;

  std::string simple_name() const {
    auto dot = name.rfind('.');
    return dot == std::string::npos ? name : name.substr(dot + 1);
  }
};

struct LibraryFacts {
  std::vector<LibraryType> types;
};

inline std::string simple_type_name(const std::string& name) {
  auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

// ---------------------------------------------------------------------------
// Member resolution across units and libraries

class ApiIndex {
 public:
  void add_member(const std::string& owner, const std::string& name, const std::string& type,
                  MemberKind kind) {
    auto& slot = members_[owner];
    slot.emplace(name, Entry{type, kind});
  }

  const std::string* lookup(const std::string& owner, const std::string& name) const {
    auto it = members_.find(owner);
    if (it == members_.end()) return nullptr;
    auto jt = it->second.find(name);
    if (jt == it->second.end()) return nullptr;
    return &jt->second.type;
  }

  bool has_type(const std::string& owner) const { return members_.contains(owner); }

 private:
  struct Entry {
    std::string type;
    MemberKind kind;
  };
  std::map<std::string, std::map<std::string, Entry>> members_;
};

inline std::vector<ApiMember> extract_api(const SourceUnit& unit) {
  std::vector<ApiMember> out;
  for (const auto& f : unit.cls.fields)
    if (f.is_public)
      out.push_back(ApiMember{f.name, f.type, unit.cls.name, MemberKind::Field});
  for (const auto& m : unit.cls.methods)
    if (m.is_public && !m.is_ctor)
      out.push_back(ApiMember{m.name, m.return_type, unit.cls.name, MemberKind::Method});
  return out;
}

// Flattens unit and library members (inherited members included, own members
// shadow inherited ones). Keys are simple type names.
inline ApiIndex build_api_index(const std::vector<SourceUnit>& units, const LibraryFacts& libs) {
  std::map<std::string, std::vector<std::pair<std::string, std::pair<std::string, MemberKind>>>>
      direct;
  std::map<std::string, std::string> super_of;

  for (const auto& u : units) {
    auto& own = direct[u.cls.name];
    for (const auto& f : u.cls.fields)
      own.emplace_back(f.name, std::make_pair(f.type, MemberKind::Field));
    for (const auto& m : u.cls.methods)
      if (!m.is_ctor) own.emplace_back(m.name, std::make_pair(m.return_type, MemberKind::Method));
    if (!u.cls.supertype.empty()) super_of[u.cls.name] = u.cls.supertype;
  }
  for (const auto& t : libs.types) {
    std::string simple = t.simple_name();
    auto& own = direct[simple];
    for (const auto& m : t.members)
      own.emplace_back(m.name, std::make_pair(m.type, MemberKind::Field));
    if (!t.supertypes.empty() && !super_of.contains(simple))
      super_of[simple] = simple_type_name(t.supertypes.front());
  }

  ApiIndex index;
  for (const auto& [type, _] : direct) {
    std::set<std::string> seen;
    std::set<std::string> visited;
    std::string cur = type;
    while (!cur.empty() && visited.insert(cur).second) {
      auto it = direct.find(cur);
      if (it != direct.end())
        for (const auto& [name, info] : it->second)
          if (seen.insert(name).second) index.add_member(type, name, info.first, info.second);
      auto up = super_of.find(cur);
      cur = up == super_of.end() ? std::string() : up->second;
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Occurrence extraction

namespace detail {

class FactsWalker {
 public:
  FactsWalker(const SourceUnit& unit, const ApiIndex* resolver)
      : unit_(unit), resolver_(resolver) {
    for (const auto& f : unit.cls.fields) fields_[f.name] = f.type;
    for (const auto& m : unit.cls.methods)
      if (!m.is_ctor) methods_[m.name] = m.return_type;
  }

  std::map<std::pair<std::string, std::string>, int> run() {
    for (const auto& m : unit_.cls.methods) {
      env_.clear();
      for (const auto& p : m.params) env_[p.name] = p.type;
      walk_stmts(m.body);
    }
    return std::move(counts_);
  }

 private:
  void walk_stmts(const std::vector<Stmt>& body) {
    for (const auto& s : body) walk_stmt(s);
  }

  void walk_stmt(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Block:
        walk_stmts(s.body);
        break;
      case Stmt::Kind::Return:
        if (s.value) walk_expr(*s.value);
        break;
      case Stmt::Kind::LocalDecl:
        if (s.value) {
          record(s.decl_name, s.decl_type);
          walk_expr(*s.value);
        }
        env_[s.decl_name] = s.decl_type;
        break;
      case Stmt::Kind::Assign:
        walk_expr(*s.target);
        walk_expr(*s.value);
        break;
      case Stmt::Kind::ExprStmt:
        walk_expr(*s.value);
        break;
    }
  }

  // Records one occurrence per identifier reference. Type names in object
  // creation and declarations are not identifier occurrences.
  void walk_expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Ident:
        record(e.text, ident_type(e.text));
        break;
      case Expr::Kind::Access:
        walk_expr(*e.base);
        record(e.text, member_type(expr_type(*e.base), e.text));
        break;
      case Expr::Kind::Call: {
        if (e.base) {
          walk_expr(*e.base);
          record(e.text, member_type(expr_type(*e.base), e.text));
        } else {
          record(e.text, own_callable_type(e.text));
        }
        for (const auto& a : e.args) walk_expr(*a);
        break;
      }
      case Expr::Kind::New:
        for (const auto& a : e.args) walk_expr(*a);
        break;
      case Expr::Kind::Unary:
        walk_expr(*e.base);
        break;
      case Expr::Kind::Binary:
        walk_expr(*e.base);
        walk_expr(*e.rhs);
        break;
      case Expr::Kind::This:
      case Expr::Kind::IntLit:
      case Expr::Kind::FloatLit:
      case Expr::Kind::StrLit:
        break;
    }
  }

  void record(const std::string& id, std::string type) {
    if (type == "void") type = kBottom;
    ++counts_[{id, std::move(type)}];
  }

  std::string ident_type(const std::string& name) const {
    auto it = env_.find(name);
    if (it != env_.end()) return it->second;
    auto f = fields_.find(name);
    if (f != fields_.end()) return f->second;
    auto m = methods_.find(name);
    if (m != methods_.end()) return m->second;
    if (resolver_)
      if (const std::string* t = resolver_->lookup(unit_.cls.name, name)) return *t;
    return kBottom;
  }

  std::string own_callable_type(const std::string& name) const {
    auto m = methods_.find(name);
    if (m != methods_.end()) return m->second;
    if (resolver_)
      if (const std::string* t = resolver_->lookup(unit_.cls.name, name)) return *t;
    return kBottom;
  }

  std::string member_type(const std::string& owner, const std::string& name) const {
    if (owner == kBottom) return kBottom;
    if (owner == unit_.cls.name) {
      auto f = fields_.find(name);
      if (f != fields_.end()) return f->second;
      auto m = methods_.find(name);
      if (m != methods_.end()) return m->second;
    }
    if (resolver_)
      if (const std::string* t = resolver_->lookup(owner, name)) return *t;
    return kBottom;
  }

  std::string expr_type(const Expr& e) const {
    switch (e.kind) {
      case Expr::Kind::Ident:
        return ident_type(e.text);
      case Expr::Kind::This:
        return unit_.cls.name;
      case Expr::Kind::New:
        return e.text;
      case Expr::Kind::Access:
      case Expr::Kind::Call: {
        if (e.kind == Expr::Kind::Call && !e.base) return own_callable_type(e.text);
        return member_type(expr_type(*e.base), e.text);
      }
      case Expr::Kind::IntLit:
        return "int";
      case Expr::Kind::FloatLit:
        return "double";
      case Expr::Kind::StrLit:
        return "String";
      case Expr::Kind::Unary:
        return e.text == "!" ? "boolean" : expr_type(*e.base);
      case Expr::Kind::Binary: {
        if (e.text == "+" || e.text == "-" || e.text == "*" || e.text == "/" || e.text == "%") {
          std::string a = expr_type(*e.base), b = expr_type(*e.rhs);
          if (a == b) return a;
          if ((a == "int" && b == "double") || (a == "double" && b == "int")) return "double";
          return kBottom;
        }
        return "boolean";
      }
    }
    return kBottom;
  }

  const SourceUnit& unit_;
  const ApiIndex* resolver_;
  std::map<std::string, std::string> fields_;
  std::map<std::string, std::string> methods_;
  std::map<std::string, std::string> env_;
  std::map<std::pair<std::string, std::string>, int> counts_;
};

}  // namespace detail

inline UnitFacts extract_facts(const SourceUnit& unit, const ApiIndex* resolver = nullptr) {
  UnitFacts facts;
  facts.unit_name = unit.unit_name;
  facts.package_path = unit.package_path;
  facts.imports = unit.imports;
  detail::FactsWalker walker(unit, resolver);
  for (const auto& [key, n] : walker.run())
    facts.occurrences.push_back(Occurrence{key.first, key.second, n});
  facts.api_members = extract_api(unit);
  if (!unit.cls.supertype.empty())
    facts.supertype_edges.emplace_back(unit.cls.name, unit.cls.supertype);
  return facts;
}

inline CorpusFacts ingest_corpus(const std::vector<SourceUnit>& units, const LibraryFacts& libs) {
  ApiIndex index = build_api_index(units, libs);
  CorpusFacts corpus;
  std::set<std::string> names;
  for (const auto& u : units) {
    if (!names.insert(u.unit_name).second)
      throw std::runtime_error("duplicate unit '" + u.unit_name + "' in corpus");
    corpus.units.push_back(extract_facts(u, &index));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Serialization (facts: JSON lines, one unit per line; library: one JSON doc)

inline nlohmann::ordered_json unit_to_json(const UnitFacts& u) {
  nlohmann::ordered_json j;
  j["unit"] = u.unit_name;
  j["package"] = u.package_path;
  j["imports"] = u.imports;
  auto occ = nlohmann::ordered_json::array();
  for (const auto& o : u.occurrences)
    occ.push_back({{"id", o.id}, {"type", o.type}, {"count", o.count}});
  j["occurrences"] = std::move(occ);
  auto api = nlohmann::ordered_json::array();
  for (const auto& m : u.api_members)
    api.push_back({{"name", m.name},
                   {"type", m.type},
                   {"owner", m.owner},
                   {"kind", m.kind == MemberKind::Field ? "field" : "method"}});
  j["api"] = std::move(api);
  auto sup = nlohmann::ordered_json::array();
  for (const auto& [sub, super] : u.supertype_edges) sup.push_back({sub, super});
  j["supertypes"] = std::move(sup);
  return j;
}

inline void save_facts(const CorpusFacts& corpus, std::ostream& out) {
  for (const auto& u : corpus.units) out << unit_to_json(u).dump() << "\n";
}

inline void save_facts(const CorpusFacts& corpus, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write facts file: " + path);
  save_facts(corpus, f);
}

namespace detail {

inline std::runtime_error facts_error(size_t line, const std::string& who,
                                      const std::string& what) {
  return std::runtime_error("facts record " + std::to_string(line) + " (" + who + "): " + what);
}

inline UnitFacts unit_from_json(const nlohmann::json& j, size_t line) {
  if (!j.is_object()) throw facts_error(line, "?", "record is not a JSON object");
  if (!j.contains("unit") || !j["unit"].is_string() || j["unit"].get<std::string>().empty())
    throw facts_error(line, "?", "missing or empty \"unit\" name");
  UnitFacts u;
  u.unit_name = j["unit"].get<std::string>();
  if (j.contains("package"))
    for (const auto& seg : j["package"]) u.package_path.push_back(seg.get<std::string>());
  if (j.contains("imports"))
    for (const auto& imp : j["imports"]) u.imports.push_back(imp.get<std::string>());
  if (j.contains("occurrences")) {
    for (const auto& o : j["occurrences"]) {
      Occurrence occ;
      occ.id = o.value("id", std::string());
      occ.type = o.value("type", std::string());
      occ.count = o.value("count", 0);
      if (occ.id.empty())
        throw facts_error(line, u.unit_name, "occurrence with empty \"id\"");
      if (occ.type.empty())
        throw facts_error(line, u.unit_name, "occurrence '" + occ.id + "' has empty \"type\"");
      if (occ.count < 1)
        throw facts_error(line, u.unit_name,
                          "occurrence '" + occ.id + "' has count " +
                              std::to_string(occ.count) + ", expected >= 1");
      u.occurrences.push_back(std::move(occ));
    }
  }
  if (j.contains("api")) {
    for (const auto& m : j["api"]) {
      ApiMember mem;
      mem.name = m.value("name", std::string());
      mem.type = m.value("type", std::string());
      mem.owner = m.value("owner", std::string());
      std::string kind = m.value("kind", std::string("method"));
      if (kind != "field" && kind != "method")
        throw facts_error(line, u.unit_name, "api member '" + mem.name + "' has kind '" + kind +
                                                 "', expected field|method");
      mem.kind = kind == "field" ? MemberKind::Field : MemberKind::Method;
      if (mem.name.empty() || mem.owner.empty())
        throw facts_error(line, u.unit_name, "api member with empty name or owner");
      u.api_members.push_back(std::move(mem));
    }
  }
  if (j.contains("supertypes")) {
    for (const auto& pair : j["supertypes"]) {
      if (!pair.is_array() || pair.size() != 2)
        throw facts_error(line, u.unit_name, "supertype entry is not a [sub, super] pair");
      std::string sub = pair[0].get<std::string>();
      std::string super = pair[1].get<std::string>();
      if (sub.empty() || super.empty())
        throw facts_error(line, u.unit_name, "supertype pair with empty name");
      u.supertype_edges.emplace_back(std::move(sub), std::move(super));
    }
  }
  return u;
}

}  // namespace detail

inline CorpusFacts load_facts(std::istream& in) {
  CorpusFacts corpus;
  std::set<std::string> names;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw detail::facts_error(lineno, "?", std::string("invalid JSON: ") + e.what());
    }
    UnitFacts u = detail::unit_from_json(j, lineno);
    if (!names.insert(u.unit_name).second)
      throw detail::facts_error(lineno, u.unit_name, "duplicate unit name");
    corpus.units.push_back(std::move(u));
  }
  return corpus;
}

inline CorpusFacts load_facts(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read facts file: " + path);
  return load_facts(f);
}

inline nlohmann::ordered_json library_to_json(const LibraryFacts& libs) {
  nlohmann::ordered_json j;
  auto types = nlohmann::ordered_json::array();
  for (const auto& t : libs.types) {
    nlohmann::ordered_json tj;
    tj["name"] = t.name;
    tj["supertypes"] = t.supertypes;
    auto members = nlohmann::ordered_json::array();
    for (const auto& m : t.members) members.push_back({{"name", m.name}, {"type", m.type}});
    tj["members"] = std::move(members);
    types.push_back(std::move(tj));
  }
  j["types"] = std::move(types);
  return j;
}

inline void save_library(const LibraryFacts& libs, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write library file: " + path);
  f << library_to_json(libs).dump(2) << "\n";
}

inline LibraryFacts load_library(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("library file: invalid JSON: ") + e.what());
  }
  LibraryFacts libs;
  if (!j.contains("types")) return libs;
  std::set<std::string> names;
  for (const auto& tj : j["types"]) {
    LibraryType t;
    t.name = tj.value("name", std::string());
    if (t.name.empty()) throw std::runtime_error("library type with empty name");
    if (!names.insert(t.name).second)
      throw std::runtime_error("duplicate library type '" + t.name + "'");
    if (tj.contains("supertypes"))
      for (const auto& s : tj["supertypes"]) t.supertypes.push_back(s.get<std::string>());
    if (tj.contains("members")) {
      for (const auto& m : tj["members"]) {
        LibraryMember mem;
        mem.name = m.value("name", std::string());
        mem.type = m.value("type", std::string());
        if (mem.name.empty())
          throw std::runtime_error("library type '" + t.name + "' has member with empty name");
        t.members.push_back(std::move(mem));
      }
    }
    libs.types.push_back(std::move(t));
  }
  return libs;
}

inline LibraryFacts load_library(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read library file: " + path);
  return load_library(f);
}

}  // namespace ctxmod
