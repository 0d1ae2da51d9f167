#pragma once

// Boolean formulas over (name = value) atoms, with a small text grammar:
//
//   expr    := or ('->' expr)?          right-associative implication
//   or      := and ('|' and)*
//   and     := unary ('&' unary)*
//   unary   := '!' unary | '(' expr ')' | ident '=' ident
//   ident   := [A-Za-z0-9_.-]+
//
// Used for CTD model constraints and for condition guards on downstream
// calls in application specs.

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "faultline/errors.hpp"

namespace faultline::expr {

using Assignment = std::map<std::string, std::string>;

struct BoolExpr {
  enum class Kind { Atom, Not, And, Or, Implies };

  Kind kind = Kind::Atom;
  std::string name;   // Atom only
  std::string value;  // Atom only
  std::vector<BoolExpr> children;

  static BoolExpr atom(std::string name, std::string value) {
    BoolExpr e;
    e.kind = Kind::Atom;
    e.name = std::move(name);
    e.value = std::move(value);
    return e;
  }
  static BoolExpr negation(BoolExpr inner) {
    BoolExpr e;
    e.kind = Kind::Not;
    e.children.push_back(std::move(inner));
    return e;
  }
  static BoolExpr conjunction(BoolExpr lhs, BoolExpr rhs) {
    return binary(Kind::And, std::move(lhs), std::move(rhs));
  }
  static BoolExpr disjunction(BoolExpr lhs, BoolExpr rhs) {
    return binary(Kind::Or, std::move(lhs), std::move(rhs));
  }
  static BoolExpr implication(BoolExpr lhs, BoolExpr rhs) {
    return binary(Kind::Implies, std::move(lhs), std::move(rhs));
  }

  // Missing names evaluate as "not equal", so guards over sparse
  // assignments are total.
  bool eval(const Assignment& a) const {
    switch (kind) {
      case Kind::Atom: {
        auto it = a.find(name);
        return it != a.end() && it->second == value;
      }
      case Kind::Not:
        return !children[0].eval(a);
      case Kind::And:
        return children[0].eval(a) && children[1].eval(a);
      case Kind::Or:
        return children[0].eval(a) || children[1].eval(a);
      case Kind::Implies:
        return !children[0].eval(a) || children[1].eval(a);
    }
    return false;
  }

  template <typename Fn>
  void visit_atoms(Fn&& fn) const {
    if (kind == Kind::Atom) {
      fn(name, value);
      return;
    }
    for (const auto& c : children) c.visit_atoms(fn);
  }

  std::string to_text() const {
    switch (kind) {
      case Kind::Atom:
        return name + "=" + value;
      case Kind::Not:
        return "!" + parenthesized(children[0]);
      case Kind::And:
        return parenthesized(children[0]) + " & " + parenthesized(children[1]);
      case Kind::Or:
        return parenthesized(children[0]) + " | " + parenthesized(children[1]);
      case Kind::Implies:
        return parenthesized(children[0]) + " -> " +
               parenthesized(children[1]);
    }
    return "?";
  }

 private:
  static BoolExpr binary(Kind k, BoolExpr lhs, BoolExpr rhs) {
    BoolExpr e;
    e.kind = k;
    e.children.push_back(std::move(lhs));
    e.children.push_back(std::move(rhs));
    return e;
  }

  static std::string parenthesized(const BoolExpr& e) {
    return e.kind == Kind::Atom || e.kind == Kind::Not ? e.to_text()
                                                       : "(" + e.to_text() + ")";
  }
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  BoolExpr parse() {
    BoolExpr e = parse_implies();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return e;
  }

 private:
  BoolExpr parse_implies() {
    BoolExpr lhs = parse_or();
    skip_ws();
    if (match("->")) return BoolExpr::implication(std::move(lhs), parse_implies());
    return lhs;
  }

  BoolExpr parse_or() {
    BoolExpr lhs = parse_and();
    for (;;) {
      skip_ws();
      if (peek() == '|') {
        ++pos_;
        lhs = BoolExpr::disjunction(std::move(lhs), parse_and());
      } else {
        return lhs;
      }
    }
  }

  BoolExpr parse_and() {
    BoolExpr lhs = parse_unary();
    for (;;) {
      skip_ws();
      if (peek() == '&') {
        ++pos_;
        lhs = BoolExpr::conjunction(std::move(lhs), parse_unary());
      } else {
        return lhs;
      }
    }
  }

  BoolExpr parse_unary() {
    skip_ws();
    if (peek() == '!') {
      ++pos_;
      return BoolExpr::negation(parse_unary());
    }
    if (peek() == '(') {
      ++pos_;
      BoolExpr e = parse_implies();
      skip_ws();
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return e;
    }
    std::string name = parse_ident();
    skip_ws();
    if (peek() != '=') fail("expected '=' after '" + name + "'");
    ++pos_;
    skip_ws();
    return BoolExpr::atom(std::move(name), parse_ident());
  }

  std::string parse_ident() {
    skip_ws();
    std::size_t start = pos_;
    // '-' belongs to identifiers except when it starts the '->' operator.
    while (pos_ < text_.size() && is_ident_char(text_[pos_]) &&
           !(text_[pos_] == '-' && pos_ + 1 < text_.size() &&
             text_[pos_ + 1] == '>'))
      ++pos_;
    if (pos_ == start) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  static bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
  }

  bool match(std::string_view token) {
    // '-' is an identifier char, so '->' must be matched before idents only
    // where the grammar expects an operator.
    if (text_.substr(pos_).substr(0, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t'))
      ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("expression parse error at offset " +
                     std::to_string(pos_) + ": " + msg + " in \"" +
                     std::string(text_) + "\"");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline BoolExpr parse(std::string_view text) {
  return detail::Parser(text).parse();
}

}  // namespace faultline::expr
