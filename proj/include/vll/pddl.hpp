#pragma once

// Emitter and parser for the closed logistics PDDL subset: `can-fly` and `at`
// predicates, per-edge fluents (`fuel-cost`, `route-risk`, `flight-time`),
// plan totals (`total-fuel-cost`, `total-time`, `total-risk`), problem
// instances with `:init`, `:goal` and `:metric`.
//
// Canonical text is lowercase, one item per line, single spaces.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"
#include "vll/text.hpp"

namespace vll::pddl {

struct Predicate {
  std::string name;
  std::vector<std::string> args;
  bool operator==(const Predicate&) const = default;
};

struct NumericAssign {
  std::string fluent;
  std::vector<std::string> args;
  double value = 0.0;
  bool operator==(const NumericAssign&) const = default;
};

struct Goal {
  std::vector<Predicate> conjuncts;
  bool operator==(const Goal&) const = default;
};

enum class Direction { minimize, maximize };

struct Metric {
  Direction direction = Direction::minimize;
  std::string fluent;
  bool operator==(const Metric&) const = default;
};

using Item = std::variant<Predicate, NumericAssign, Goal, Metric>;

// A bare fact listing when `problem` is empty; otherwise a problem instance
// whose Predicate/NumericAssign items form `:init`, followed by Goal/Metric.
struct Ast {
  std::optional<std::string> problem;
  std::vector<Item> items;
  bool operator==(const Ast&) const = default;
};

inline const std::map<std::string, std::size_t>& predicate_arity() {
  static const std::map<std::string, std::size_t> m = {{"at", 2}, {"can-fly", 2}};
  return m;
}

inline const std::map<std::string, std::size_t>& fluent_arity() {
  static const std::map<std::string, std::size_t> m = {
      {"fuel-cost", 2},       {"route-risk", 2}, {"flight-time", 2},
      {"total-fuel-cost", 0}, {"total-time", 0}, {"total-risk", 0}};
  return m;
}

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, std::size_t column, std::string what, std::vector<std::string> expected)
      : std::runtime_error(format(line, column, what, expected)),
        line(line),
        column(column),
        expected(std::move(expected)) {}
  std::size_t line;
  std::size_t column;
  std::vector<std::string> expected;

 private:
  static std::string format(std::size_t line, std::size_t col, const std::string& what,
                            const std::vector<std::string>& expected) {
    std::string m = "line " + std::to_string(line) + " col " + std::to_string(col) + ": " + what;
    if (!expected.empty()) m += " (expected one of: " + text::join(expected, " ") + ")";
    return m;
  }
};

// ---------------------------------------------------------------------------
// Emit

namespace detail {

inline void emit_predicate(std::ostream& out, const Predicate& p) {
  out << "(" << p.name;
  for (const auto& a : p.args) out << " " << a;
  out << ")";
}

inline void emit_item(std::ostream& out, const Item& item) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Predicate>) {
          emit_predicate(out, x);
        } else if constexpr (std::is_same_v<T, NumericAssign>) {
          out << "(= (" << x.fluent;
          for (const auto& a : x.args) out << " " << a;
          out << ") " << text::format_number(x.value) << ")";
        } else if constexpr (std::is_same_v<T, Goal>) {
          out << "(:goal ";
          if (x.conjuncts.size() == 1) {
            emit_predicate(out, x.conjuncts.front());
          } else {
            out << "(and";
            for (const auto& c : x.conjuncts) {
              out << " ";
              emit_predicate(out, c);
            }
            out << ")";
          }
          out << ")";
        } else {
          out << "(:metric " << (x.direction == Direction::minimize ? "minimize" : "maximize") << " (" << x.fluent
              << "))";
        }
      },
      item);
  out << "\n";
}

inline bool is_init_item(const Item& i) {
  return std::holds_alternative<Predicate>(i) || std::holds_alternative<NumericAssign>(i);
}

}  // namespace detail

inline std::string emit(const Ast& ast) {
  std::ostringstream out;
  if (!ast.problem) {
    for (const auto& item : ast.items) detail::emit_item(out, item);
    return out.str();
  }
  out << "(define (problem " << *ast.problem << ")\n";
  out << "(:init\n";
  for (const auto& item : ast.items)
    if (detail::is_init_item(item)) detail::emit_item(out, item);
  out << ")\n";
  for (const auto& item : ast.items)
    if (!detail::is_init_item(item)) detail::emit_item(out, item);
  out << ")\n";
  return out.str();
}

// can-fly for every flyable edge, then route-risk / fuel-cost / flight-time per edge.
inline Ast facts_to_ast(const FactSet& facts) {
  Ast ast;
  for (const auto& e : facts.edges)
    if (e.flyable) ast.items.push_back(Predicate{"can-fly", {text::lower(e.origin), text::lower(e.destination)}});
  for (const auto& e : facts.edges) {
    std::vector<std::string> args{text::lower(e.origin), text::lower(e.destination)};
    ast.items.push_back(NumericAssign{"route-risk", args, e.route_risk});
    ast.items.push_back(NumericAssign{"fuel-cost", args, e.fuel_cost});
    ast.items.push_back(NumericAssign{"flight-time", args, e.flight_time});
  }
  return ast;
}

inline std::string emit_facts(const FactSet& facts) { return emit(facts_to_ast(facts)); }

inline Ast problem_to_ast(const GoalSpec& goal, const FactSet& facts) {
  auto origin = goal.location(SlotName::origin);
  auto destination = goal.location(SlotName::destination);
  auto objective = goal.objective();
  if (goal.intent != Intent::PlanRequest || !origin || !destination || !objective)
    throw std::logic_error("problem emission requires a validated PlanRequest");
  Ast ast;
  ast.problem = "deliver-" + text::lower(*origin) + "-" + text::lower(*destination);
  ast.items.push_back(Predicate{"at", {"cargo", text::lower(*origin)}});
  for (auto& item : facts_to_ast(facts).items) ast.items.push_back(std::move(item));
  std::string fluent(objective_fluent(*objective));
  ast.items.push_back(NumericAssign{fluent, {}, 0.0});
  ast.items.push_back(Goal{{Predicate{"at", {"cargo", text::lower(*destination)}}}});
  ast.items.push_back(Metric{Direction::minimize, fluent});
  return ast;
}

inline std::string emit_problem(const GoalSpec& goal, const FactSet& facts) {
  return emit(problem_to_ast(goal, facts));
}

// ---------------------------------------------------------------------------
// Parse

namespace detail {

struct Token {
  enum Kind { open, close, atom, end } kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip();
    Token t{Token::end, {}, line_, col_};
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (c == '(' || c == ')') {
      t.kind = c == '(' ? Token::open : Token::close;
      t.text = std::string(1, c);
      advance();
      return t;
    }
    t.kind = Token::atom;
    while (pos_ < src_.size()) {
      char d = src_[pos_];
      if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d))) break;
      t.text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(d))));
      advance();
    }
    return t;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }
  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

  Ast parse() {
    Ast ast;
    if (tok_.kind == Token::open) {
      Token open = tok_;
      bump();
      if (tok_.kind == Token::atom && tok_.text == "define") {
        bump();
        parse_problem_body(ast);
        expect_kind(Token::end, "trailing input after problem", {"end of input"});
        return ast;
      }
      ast.items.push_back(parse_item_after_open(open, true));
    }
    allow_define_ = false;
    while (tok_.kind != Token::end) {
      expect_kind(Token::open, "expected an item", {"("});
      Token open = tok_;
      bump();
      ast.items.push_back(parse_item_after_open(open, true));
    }
    return ast;
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) const {
    throw ParseError(tok_.line, tok_.column, what, std::move(expected));
  }
  void bump() { tok_ = lex_.next(); }
  void expect_kind(Token::Kind k, const std::string& what, std::vector<std::string> expected) {
    if (tok_.kind != k) fail(what + describe(), std::move(expected));
  }
  void expect_open() {
    expect_kind(Token::open, "expected '('", {"("});
    bump();
  }
  void expect_close() {
    expect_kind(Token::close, "expected ')'", {")"});
    bump();
  }
  std::string expect_atom(const std::string& what) {
    expect_kind(Token::atom, what, {"<symbol>"});
    std::string s = tok_.text;
    bump();
    return s;
  }
  void expect_word(const std::string& word) {
    if (tok_.kind != Token::atom || tok_.text != word) fail("expected '" + word + "'" + describe(), {word});
    bump();
  }
  std::string describe() const {
    switch (tok_.kind) {
      case Token::open: return ", found '('";
      case Token::close: return ", found ')'";
      case Token::atom: return ", found '" + tok_.text + "'";
      case Token::end: return ", found end of input";
    }
    return {};
  }

  static std::vector<std::string> item_heads(bool allow_goal) {
    std::vector<std::string> h{"=", "at", "can-fly"};
    if (allow_goal) {
      h.push_back(":goal");
      h.push_back(":metric");
    }
    return h;
  }

  Predicate parse_predicate_after_head(const std::string& name) {
    Predicate p{name, {}};
    std::size_t arity = predicate_arity().at(name);
    for (std::size_t i = 0; i < arity; ++i) p.args.push_back(expect_atom("expected argument of " + name));
    expect_close();
    return p;
  }

  Predicate parse_predicate() {
    expect_open();
    if (tok_.kind != Token::atom || !predicate_arity().count(tok_.text))
      fail("unknown predicate" + describe(), {"at", "can-fly"});
    std::string name = tok_.text;
    bump();
    return parse_predicate_after_head(name);
  }

  NumericAssign parse_assign_after_eq() {
    expect_open();
    if (tok_.kind != Token::atom || !fluent_arity().count(tok_.text)) {
      std::vector<std::string> names;
      for (const auto& [n, a] : fluent_arity()) names.push_back(n);
      fail("unknown fluent" + describe(), names);
    }
    NumericAssign a{tok_.text, {}, 0.0};
    bump();
    std::size_t arity = fluent_arity().at(a.fluent);
    for (std::size_t i = 0; i < arity; ++i) a.args.push_back(expect_atom("expected argument of " + a.fluent));
    expect_close();
    expect_kind(Token::atom, "expected a number", {"<number>"});
    auto v = text::parse_number(tok_.text);
    if (!v) fail("malformed number '" + tok_.text + "'", {"<number>"});
    a.value = *v;
    bump();
    expect_close();
    return a;
  }

  Goal parse_goal_body() {
    Goal g;
    expect_open();
    if (tok_.kind == Token::atom && tok_.text == "and") {
      bump();
      while (tok_.kind == Token::open) g.conjuncts.push_back(parse_predicate());
      expect_close();
    } else {
      if (tok_.kind != Token::atom || !predicate_arity().count(tok_.text))
        fail("unknown goal head" + describe(), {"and", "at", "can-fly"});
      std::string name = tok_.text;
      bump();
      g.conjuncts.push_back(parse_predicate_after_head(name));
    }
    expect_close();
    return g;
  }

  Metric parse_metric_body() {
    Metric m;
    if (tok_.kind == Token::atom && tok_.text == "minimize") m.direction = Direction::minimize;
    else if (tok_.kind == Token::atom && tok_.text == "maximize") m.direction = Direction::maximize;
    else fail("expected metric direction" + describe(), {"maximize", "minimize"});
    bump();
    expect_open();
    auto it = tok_.kind == Token::atom ? fluent_arity().find(tok_.text) : fluent_arity().end();
    if (it == fluent_arity().end() || it->second != 0)
      fail("expected a plan-total fluent" + describe(), {"total-fuel-cost", "total-risk", "total-time"});
    m.fluent = tok_.text;
    bump();
    expect_close();
    expect_close();
    return m;
  }

  // Called with the opening '(' already consumed.
  Item parse_item_after_open(const Token& /*open*/, bool allow_goal) {
    if (tok_.kind != Token::atom) fail("expected a head symbol" + describe(), with_define(item_heads(allow_goal)));
    std::string head = tok_.text;
    if (head == "=") {
      bump();
      return parse_assign_after_eq();
    }
    if (predicate_arity().count(head)) {
      bump();
      return parse_predicate_after_head(head);
    }
    if (allow_goal && head == ":goal") {
      bump();
      return parse_goal_body();
    }
    if (allow_goal && head == ":metric") {
      bump();
      return parse_metric_body();
    }
    fail("unknown head symbol '" + head + "'", with_define(item_heads(allow_goal)));
  }

  std::vector<std::string> with_define(std::vector<std::string> v) const {
    if (allow_define_) v.push_back("define");
    std::sort(v.begin(), v.end());
    return v;
  }

  void parse_problem_body(Ast& ast) {
    allow_define_ = false;
    expect_open();
    expect_word("problem");
    ast.problem = expect_atom("expected problem name");
    expect_close();
    expect_open();
    expect_word(":init");
    while (tok_.kind == Token::open) {
      Token open = tok_;
      bump();
      ast.items.push_back(parse_item_after_open(open, false));
    }
    expect_close();
    while (tok_.kind == Token::open) {
      bump();
      if (tok_.kind == Token::atom && tok_.text == ":goal") {
        bump();
        ast.items.push_back(parse_goal_body());
      } else if (tok_.kind == Token::atom && tok_.text == ":metric") {
        bump();
        ast.items.push_back(parse_metric_body());
      } else {
        fail("unknown problem section" + describe(), {":goal", ":metric"});
      }
    }
    expect_close();
  }

  Lexer lex_;
  Token tok_;
  bool allow_define_ = true;
};

}  // namespace detail

inline Ast parse(std::string_view src) { return detail::Parser(src).parse(); }

// ---------------------------------------------------------------------------
// Lint

struct Diagnostic {
  std::string kind;
  std::string message;
  bool operator==(const Diagnostic&) const = default;
};

// Static checks against a database: unknown locations, negative fluent
// values, the same fluent assigned more than once.
inline std::vector<Diagnostic> lint(const Ast& ast, const LogisticsDatabase& db) {
  std::vector<Diagnostic> out;
  std::set<std::string> reported_unknown;
  std::set<std::string> assigned;

  auto check_location = [&](const std::string& arg) {
    if (db.find_location(text::upper(arg))) return;
    if (reported_unknown.insert(arg).second)
      out.push_back({"unknown location", "unknown location '" + arg + "'"});
  };
  auto check_predicate = [&](const Predicate& p) {
    for (std::size_t i = 0; i < p.args.size(); ++i) {
      if (p.name == "at" && i == 0) continue;  // object slot
      check_location(p.args[i]);
    }
  };

  for (const auto& item : ast.items) {
    if (auto* p = std::get_if<Predicate>(&item)) {
      check_predicate(*p);
    } else if (auto* a = std::get_if<NumericAssign>(&item)) {
      for (const auto& arg : a->args) check_location(arg);
      std::string label = "(" + a->fluent + (a->args.empty() ? "" : " " + text::join(a->args, " ")) + ")";
      if (a->value < 0.0)
        out.push_back({"negative fluent", "negative fluent " + label + " = " + text::format_number(a->value)});
      if (!assigned.insert(label).second) out.push_back({"duplicate assignment", "duplicate assignment of " + label});
    } else if (auto* g = std::get_if<Goal>(&item)) {
      for (const auto& c : g->conjuncts) check_predicate(c);
    }
  }
  return out;
}

}  // namespace vll::pddl
