#pragma once

#include <cctype>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ctxmod {

struct SourcePos {
  int line = 1;
  int col = 1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, SourcePos pos)
      : std::runtime_error(msg + " (line " + std::to_string(pos.line) +
                           ", col " + std::to_string(pos.col) + ")"),
        pos_(pos) {}

  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

// ---------------------------------------------------------------------------
// Tokens

enum class Tok {
  Ident,
  IntLit,
  FloatLit,
  StrLit,
  KwPublic,
  KwPrivate,
  KwAbstract,
  KwClass,
  KwExtends,
  KwImport,
  KwPackage,
  KwNew,
  KwReturn,
  KwThis,
  KwVoid,
  LBrace,
  RBrace,
  LParen,
  RParen,
  Semi,
  Comma,
  Dot,
  Assign,
  PlusAssign,
  MinusAssign,
  StarAssign,
  SlashAssign,
  Plus,
  Minus,
  Star,
  Slash,
  Percent,
  EqEq,
  NotEq,
  Lt,
  Gt,
  Le,
  Ge,
  AndAnd,
  OrOr,
  Not,
  Eof,
};

struct Token {
  Tok kind = Tok::Eof;
  std::string text;
  SourcePos pos;
};

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;

  auto bump = [&](size_t n) {
    for (size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto push = [&](Tok t, std::string text, SourcePos p) {
    out.push_back(Token{t, std::move(text), p});
  };

  while (i < src.size()) {
    char c = src[i];
    SourcePos pos{line, col};
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      bump(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') bump(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      bump(2);
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) bump(1);
      if (i + 1 >= src.size()) throw ParseError("unterminated block comment", pos);
      bump(2);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      std::string word = src.substr(i, j - i);
      bump(j - i);
      Tok t = Tok::Ident;
      if (word == "public") t = Tok::KwPublic;
      else if (word == "private") t = Tok::KwPrivate;
      else if (word == "abstract") t = Tok::KwAbstract;
      else if (word == "class") t = Tok::KwClass;
      else if (word == "extends") t = Tok::KwExtends;
      else if (word == "import") t = Tok::KwImport;
      else if (word == "package") t = Tok::KwPackage;
      else if (word == "new") t = Tok::KwNew;
      else if (word == "return") t = Tok::KwReturn;
      else if (word == "this") t = Tok::KwThis;
      else if (word == "void") t = Tok::KwVoid;
      push(t, std::move(word), pos);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      bool is_float = false;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' &&
          std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        is_float = true;
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      std::string num = src.substr(i, j - i);
      bump(j - i);
      push(is_float ? Tok::FloatLit : Tok::IntLit, std::move(num), pos);
      continue;
    }
    if (c == '"') {
      std::string value;
      bump(1);
      while (i < src.size() && src[i] != '"') {
        if (src[i] == '\\' && i + 1 < src.size()) {
          char e = src[i + 1];
          if (e == 'n') value += '\n';
          else if (e == 't') value += '\t';
          else value += e;
          bump(2);
        } else if (src[i] == '\n') {
          throw ParseError("unterminated string literal", pos);
        } else {
          value += src[i];
          bump(1);
        }
      }
      if (i >= src.size()) throw ParseError("unterminated string literal", pos);
      bump(1);
      push(Tok::StrLit, std::move(value), pos);
      continue;
    }

    auto two = [&](char a, char b) {
      return c == a && i + 1 < src.size() && src[i + 1] == b;
    };
    if (two('+', '=')) { push(Tok::PlusAssign, "+=", pos); bump(2); continue; }
    if (two('-', '=')) { push(Tok::MinusAssign, "-=", pos); bump(2); continue; }
    if (two('*', '=')) { push(Tok::StarAssign, "*=", pos); bump(2); continue; }
    if (two('/', '=')) { push(Tok::SlashAssign, "/=", pos); bump(2); continue; }
    if (two('=', '=')) { push(Tok::EqEq, "==", pos); bump(2); continue; }
    if (two('!', '=')) { push(Tok::NotEq, "!=", pos); bump(2); continue; }
    if (two('<', '=')) { push(Tok::Le, "<=", pos); bump(2); continue; }
    if (two('>', '=')) { push(Tok::Ge, ">=", pos); bump(2); continue; }
    if (two('&', '&')) { push(Tok::AndAnd, "&&", pos); bump(2); continue; }
    if (two('|', '|')) { push(Tok::OrOr, "||", pos); bump(2); continue; }

    Tok t;
    switch (c) {
      case '{': t = Tok::LBrace; break;
      case '}': t = Tok::RBrace; break;
      case '(': t = Tok::LParen; break;
      case ')': t = Tok::RParen; break;
      case ';': t = Tok::Semi; break;
      case ',': t = Tok::Comma; break;
      case '.': t = Tok::Dot; break;
      case '=': t = Tok::Assign; break;
      case '+': t = Tok::Plus; break;
      case '-': t = Tok::Minus; break;
      case '*': t = Tok::Star; break;
      case '/': t = Tok::Slash; break;
      case '%': t = Tok::Percent; break;
      case '<': t = Tok::Lt; break;
      case '>': t = Tok::Gt; break;
      case '!': t = Tok::Not; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", pos);
    }
    push(t, std::string(1, c), pos);
    bump(1);
  }
  out.push_back(Token{Tok::Eof, "", SourcePos{line, col}});
  return out;
}

// ---------------------------------------------------------------------------
// AST

struct Expr {
  enum class Kind {
    Ident,
    This,
    IntLit,
    FloatLit,
    StrLit,
    New,     // text = type name, args
    Call,    // text = callee name, base = optional receiver, args
    Access,  // text = member name, base = receiver
    Unary,   // text = operator, base = operand
    Binary,  // text = operator, base = lhs, rhs = rhs
  };

  Kind kind = Kind::Ident;
  std::string text;
  std::unique_ptr<Expr> base;
  std::unique_ptr<Expr> rhs;
  std::vector<std::unique_ptr<Expr>> args;
  SourcePos pos;
};

using ExprPtr = std::unique_ptr<Expr>;

struct Stmt {
  enum class Kind { Block, Return, LocalDecl, Assign, ExprStmt };

  Kind kind = Kind::ExprStmt;
  std::string decl_type;  // LocalDecl
  std::string decl_name;  // LocalDecl
  std::string op;         // Assign: =, +=, -=, *=, /=
  ExprPtr target;         // Assign lvalue
  ExprPtr value;          // Assign rhs / Return value / ExprStmt / LocalDecl init
  std::vector<Stmt> body; // Block
  SourcePos pos;
};

struct Param {
  std::string type;
  std::string name;
};

struct MethodDecl {
  std::string name;
  std::string return_type;  // "void" allowed; constructors use the class name
  bool is_ctor = false;
  bool is_public = true;
  std::vector<Param> params;
  std::vector<Stmt> body;
};

struct FieldDecl {
  std::string type;
  std::string name;
  bool is_public = true;
};

struct ClassDecl {
  std::string name;
  std::string supertype;  // empty when absent
  bool is_public = true;
  bool is_abstract = false;
  std::vector<FieldDecl> fields;
  std::vector<MethodDecl> methods;
};

enum class DeclKind { Class, Field, Method, Parameter, Local };
enum class Visibility { Public, Private };

struct Declaration {
  DeclKind kind = DeclKind::Class;
  std::string name;
  std::string declared_type;
  Visibility visibility = Visibility::Public;
};

struct SourceUnit {
  std::string unit_name;  // package-qualified class name
  std::vector<std::string> package_path;
  std::vector<std::string> imports;  // fully qualified
  ClassDecl cls;
  std::vector<Declaration> declarations;

  const std::string& simple_name() const { return cls.name; }
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<SourceUnit> program() {
    std::vector<std::string> pkg;
    std::vector<std::string> imports;
    if (at(Tok::KwPackage)) {
      advance();
      pkg = qualified_name();
      expect(Tok::Semi, "';' after package declaration");
    }
    while (at(Tok::KwImport)) {
      advance();
      std::vector<std::string> path = qualified_name();
      expect(Tok::Semi, "';' after import");
      std::string joined;
      for (size_t k = 0; k < path.size(); ++k) {
        if (k) joined += '.';
        joined += path[k];
      }
      imports.push_back(std::move(joined));
    }
    std::vector<SourceUnit> units;
    while (!at(Tok::Eof)) {
      SourceUnit u;
      u.package_path = pkg;
      u.imports = imports;
      u.cls = class_decl();
      u.unit_name = qualify(pkg, u.cls.name);
      finish(u);
      units.push_back(std::move(u));
    }
    if (units.empty()) throw ParseError("empty compilation unit", peek().pos);
    return units;
  }

 private:
  static std::string qualify(const std::vector<std::string>& pkg, const std::string& name) {
    std::string out;
    for (const auto& seg : pkg) {
      out += seg;
      out += '.';
    }
    out += name;
    return out;
  }

  std::vector<std::string> qualified_name() {
    std::vector<std::string> segs;
    segs.push_back(expect(Tok::Ident, "identifier").text);
    while (at(Tok::Dot)) {
      advance();
      segs.push_back(expect(Tok::Ident, "identifier").text);
    }
    return segs;
  }

  ClassDecl class_decl() {
    ClassDecl cls;
    while (at(Tok::KwPublic) || at(Tok::KwPrivate) || at(Tok::KwAbstract)) {
      if (at(Tok::KwPrivate)) cls.is_public = false;
      if (at(Tok::KwAbstract)) cls.is_abstract = true;
      advance();
    }
    expect(Tok::KwClass, "'class'");
    cls.name = expect(Tok::Ident, "class name").text;
    if (at(Tok::KwExtends)) {
      advance();
      cls.supertype = expect(Tok::Ident, "supertype name").text;
    }
    expect(Tok::LBrace, "'{' opening class body");
    while (!at(Tok::RBrace)) member(cls);
    advance();  // consume '}'
    return cls;
  }

  void member(ClassDecl& cls) {
    bool is_public = true;
    SourcePos pos = peek().pos;
    while (at(Tok::KwPublic) || at(Tok::KwPrivate) || at(Tok::KwAbstract)) {
      if (at(Tok::KwPrivate)) is_public = false;
      advance();
    }
    if (at(Tok::Ident) && peek(1).kind == Tok::LParen && peek(0).text == cls.name) {
      // constructor
      MethodDecl m;
      m.name = cls.name;
      m.return_type = cls.name;
      m.is_ctor = true;
      m.is_public = is_public;
      advance();
      m.params = params();
      m.body = block();
      check_param_dupes(m, pos);
      cls.methods.push_back(std::move(m));
      return;
    }
    std::string type;
    if (at(Tok::KwVoid)) {
      type = "void";
      advance();
    } else {
      type = expect(Tok::Ident, "member type").text;
    }
    std::string name = expect(Tok::Ident, "member name").text;
    if (at(Tok::LParen)) {
      MethodDecl m;
      m.name = std::move(name);
      m.return_type = std::move(type);
      m.is_public = is_public;
      m.params = params();
      m.body = block();
      check_param_dupes(m, pos);
      for (const auto& other : cls.methods)
        if (other.name == m.name)
          throw ParseError("duplicate method '" + m.name + "'", pos);
      cls.methods.push_back(std::move(m));
      return;
    }
    if (type == "void") throw ParseError("field of type void", pos);
    expect(Tok::Semi, "';' after field declaration");
    for (const auto& other : cls.fields)
      if (other.name == name)
        throw ParseError("duplicate field '" + name + "'", pos);
    cls.fields.push_back(FieldDecl{std::move(type), std::move(name), is_public});
  }

  static void check_param_dupes(const MethodDecl& m, SourcePos pos) {
    std::set<std::string> seen;
    for (const auto& p : m.params)
      if (!seen.insert(p.name).second)
        throw ParseError("duplicate parameter '" + p.name + "' in " + m.name, pos);
  }

  std::vector<Param> params() {
    expect(Tok::LParen, "'('");
    std::vector<Param> out;
    if (!at(Tok::RParen)) {
      while (true) {
        Param p;
        p.type = expect(Tok::Ident, "parameter type").text;
        p.name = expect(Tok::Ident, "parameter name").text;
        out.push_back(std::move(p));
        if (!at(Tok::Comma)) break;
        advance();
      }
    }
    expect(Tok::RParen, "')'");
    return out;
  }

  std::vector<Stmt> block() {
    expect(Tok::LBrace, "'{' opening block");
    std::vector<Stmt> out;
    while (!at(Tok::RBrace)) out.push_back(statement());
    advance();
    return out;
  }

  Stmt statement() {
    SourcePos pos = peek().pos;
    if (at(Tok::LBrace)) {
      Stmt s;
      s.kind = Stmt::Kind::Block;
      s.pos = pos;
      s.body = block();
      return s;
    }
    if (at(Tok::KwReturn)) {
      advance();
      Stmt s;
      s.kind = Stmt::Kind::Return;
      s.pos = pos;
      if (!at(Tok::Semi)) s.value = expression();
      expect(Tok::Semi, "';' after return");
      return s;
    }
    if (at(Tok::Ident) && peek(1).kind == Tok::Ident &&
        (peek(2).kind == Tok::Assign || peek(2).kind == Tok::Semi)) {
      Stmt s;
      s.kind = Stmt::Kind::LocalDecl;
      s.pos = pos;
      s.decl_type = advance().text;
      s.decl_name = advance().text;
      if (at(Tok::Assign)) {
        advance();
        s.value = expression();
      }
      expect(Tok::Semi, "';' after local declaration");
      return s;
    }
    ExprPtr e = expression();
    if (at(Tok::Assign) || at(Tok::PlusAssign) || at(Tok::MinusAssign) ||
        at(Tok::StarAssign) || at(Tok::SlashAssign)) {
      if (e->kind != Expr::Kind::Ident && e->kind != Expr::Kind::Access)
        throw ParseError("assignment target must be a variable or access path", pos);
      Stmt s;
      s.kind = Stmt::Kind::Assign;
      s.pos = pos;
      s.op = advance().text;
      s.target = std::move(e);
      s.value = expression();
      expect(Tok::Semi, "';' after assignment");
      return s;
    }
    Stmt s;
    s.kind = Stmt::Kind::ExprStmt;
    s.pos = pos;
    s.value = std::move(e);
    expect(Tok::Semi, "';' after expression");
    return s;
  }

  // precedence: || < && < equality < relational < additive < multiplicative < unary < postfix
  ExprPtr expression() { return or_expr(); }

  ExprPtr or_expr() {
    ExprPtr lhs = and_expr();
    while (at(Tok::OrOr)) {
      std::string op = advance().text;
      lhs = binary(std::move(lhs), std::move(op), and_expr());
    }
    return lhs;
  }
  ExprPtr and_expr() {
    ExprPtr lhs = equality();
    while (at(Tok::AndAnd)) {
      std::string op = advance().text;
      lhs = binary(std::move(lhs), std::move(op), equality());
    }
    return lhs;
  }
  ExprPtr equality() {
    ExprPtr lhs = relational();
    while (at(Tok::EqEq) || at(Tok::NotEq)) {
      std::string op = advance().text;
      lhs = binary(std::move(lhs), std::move(op), relational());
    }
    return lhs;
  }
  ExprPtr relational() {
    ExprPtr lhs = additive();
    while (at(Tok::Lt) || at(Tok::Gt) || at(Tok::Le) || at(Tok::Ge)) {
      std::string op = advance().text;
      lhs = binary(std::move(lhs), std::move(op), additive());
    }
    return lhs;
  }
  ExprPtr additive() {
    ExprPtr lhs = multiplicative();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      std::string op = advance().text;
      lhs = binary(std::move(lhs), std::move(op), multiplicative());
    }
    return lhs;
  }
  ExprPtr multiplicative() {
    ExprPtr lhs = unary();
    while (at(Tok::Star) || at(Tok::Slash) || at(Tok::Percent)) {
      std::string op = advance().text;
      lhs = binary(std::move(lhs), std::move(op), unary());
    }
    return lhs;
  }

  ExprPtr binary(ExprPtr lhs, std::string op, ExprPtr rhs) {
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::Binary;
    e->pos = lhs->pos;
    e->text = std::move(op);
    e->base = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
  }

  ExprPtr unary() {
    if (at(Tok::Minus) || at(Tok::Not)) {
      Token t = advance();
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::Unary;
      e->text = t.text;
      e->pos = t.pos;
      e->base = unary();
      return e;
    }
    return postfix();
  }

  ExprPtr postfix() {
    ExprPtr e = primary();
    while (at(Tok::Dot)) {
      advance();
      Token name = expect(Tok::Ident, "member name after '.'");
      if (at(Tok::LParen)) {
        auto call = std::make_unique<Expr>();
        call->kind = Expr::Kind::Call;
        call->text = name.text;
        call->pos = name.pos;
        call->base = std::move(e);
        call->args = arguments();
        e = std::move(call);
      } else {
        auto acc = std::make_unique<Expr>();
        acc->kind = Expr::Kind::Access;
        acc->text = name.text;
        acc->pos = name.pos;
        acc->base = std::move(e);
        e = std::move(acc);
      }
    }
    return e;
  }

  std::vector<ExprPtr> arguments() {
    expect(Tok::LParen, "'('");
    std::vector<ExprPtr> out;
    if (!at(Tok::RParen)) {
      while (true) {
        out.push_back(expression());
        if (!at(Tok::Comma)) break;
        advance();
      }
    }
    expect(Tok::RParen, "')'");
    return out;
  }

  ExprPtr primary() {
    Token t = peek();
    switch (t.kind) {
      case Tok::IntLit:
      case Tok::FloatLit:
      case Tok::StrLit: {
        advance();
        auto e = std::make_unique<Expr>();
        e->kind = t.kind == Tok::IntLit    ? Expr::Kind::IntLit
                  : t.kind == Tok::FloatLit ? Expr::Kind::FloatLit
                                            : Expr::Kind::StrLit;
        e->text = t.text;
        e->pos = t.pos;
        return e;
      }
      case Tok::KwThis: {
        advance();
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::This;
        e->text = "this";
        e->pos = t.pos;
        return e;
      }
      case Tok::KwNew: {
        advance();
        Token type = expect(Tok::Ident, "type name after 'new'");
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::New;
        e->text = type.text;
        e->pos = t.pos;
        e->args = arguments();
        return e;
      }
      case Tok::Ident: {
        advance();
        if (at(Tok::LParen)) {
          auto e = std::make_unique<Expr>();
          e->kind = Expr::Kind::Call;
          e->text = t.text;
          e->pos = t.pos;
          e->args = arguments();
          return e;
        }
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::Ident;
        e->text = t.text;
        e->pos = t.pos;
        return e;
      }
      case Tok::LParen: {
        advance();
        ExprPtr e = expression();
        expect(Tok::RParen, "')'");
        return e;
      }
      default:
        throw ParseError("unexpected token '" + t.text + "'", t.pos);
    }
  }

  // Collects the flat declaration list and checks local-scope duplicates.
  void finish(SourceUnit& u) {
    auto vis = [](bool pub) { return pub ? Visibility::Public : Visibility::Private; };
    u.declarations.push_back(
        Declaration{DeclKind::Class, u.cls.name, u.cls.name, vis(u.cls.is_public)});
    for (const auto& f : u.cls.fields)
      u.declarations.push_back(Declaration{DeclKind::Field, f.name, f.type, vis(f.is_public)});
    for (const auto& m : u.cls.methods) {
      u.declarations.push_back(
          Declaration{DeclKind::Method, m.name, m.return_type, vis(m.is_public)});
      std::set<std::string> scope;
      for (const auto& p : m.params) {
        scope.insert(p.name);
        u.declarations.push_back(Declaration{DeclKind::Parameter, p.name, p.type, vis(true)});
      }
      collect_locals(m.body, m.name, scope, u.declarations);
    }
  }

  static void collect_locals(const std::vector<Stmt>& body, const std::string& method,
                             std::set<std::string>& scope, std::vector<Declaration>& out) {
    for (const auto& s : body) {
      if (s.kind == Stmt::Kind::LocalDecl) {
        if (!scope.insert(s.decl_name).second)
          throw ParseError("duplicate declaration '" + s.decl_name + "' in " + method, s.pos);
        out.push_back(Declaration{DeclKind::Local, s.decl_name, s.decl_type, Visibility::Public});
      } else if (s.kind == Stmt::Kind::Block) {
        collect_locals(s.body, method, scope, out);
      }
    }
  }

  const Token& peek(size_t n = 0) const {
    size_t k = pos_ + n;
    if (k >= toks_.size()) k = toks_.size() - 1;
    return toks_[k];
  }
  bool at(Tok t) const { return peek().kind == t; }
  Token advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  Token expect(Tok t, const std::string& what) {
    if (!at(t)) throw ParseError("expected " + what + ", got '" + peek().text + "'", peek().pos);
    return advance();
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace detail

// Parses a compilation unit containing any number of classes that share one
// package declaration and import list.
inline std::vector<SourceUnit> parse_program(const std::string& text) {
  detail::Parser p(lex(text));
  return p.program();
}

// Parses a compilation unit that must contain exactly one class.
inline SourceUnit parse_unit(const std::string& text) {
  std::vector<SourceUnit> units = parse_program(text);
  if (units.size() != 1)
    throw ParseError("expected exactly one class per unit, got " +
                         std::to_string(units.size()),
                     SourcePos{1, 1});
  return std::move(units.front());
}

}  // namespace ctxmod
