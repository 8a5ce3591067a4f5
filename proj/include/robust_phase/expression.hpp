#pragma once

// Tiny arithmetic language for sample-size and corruption-count rules, e.g.
// "ceil(10*d*ln(d))" or "ceil(n^(2/3))". Variables: n, d. Operators: + - * / ^.
// Functions: sqrt, ln, ceil.

#include "robust_phase/core.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>

namespace robust_phase {

using Bindings = std::map<std::string, double, std::less<>>;

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view src, const Bindings& vars) : src_(src), vars_(vars) {}

  double parse() {
    const double v = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidArgument("expression '" + std::string(src_) + "': " + msg);
  }
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = unary();
    for (;;) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else return v;
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }
  // right-associative, binds tighter than unary minus on its left
  double power() {
    const double base = primary();
    if (eat('^')) return std::pow(base, unary());
    return base;
  }
  double primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end");
    if (eat('(')) {
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string rest(src_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(rest.c_str(), &end);
      if (end == rest.c_str()) fail("bad number");
      pos_ += static_cast<std::size_t>(end - rest.c_str());
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      const std::string_view name = src_.substr(start, pos_ - start);
      if (name == "sqrt" || name == "ln" || name == "ceil") {
        if (!eat('(')) fail("expected '(' after " + std::string(name));
        const double a = expr();
        if (!eat(')')) fail("missing ')'");
        if (name == "sqrt") return std::sqrt(a);
        if (name == "ln") return std::log(a);
        return std::ceil(a);
      }
      const auto it = vars_.find(name);
      if (it == vars_.end()) fail("unknown variable '" + std::string(name) + "'");
      return it->second;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view src_;
  const Bindings& vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline double evaluate_expression(std::string_view src, const Bindings& vars) {
  return detail::ExprParser(src, vars).parse();
}

/// Evaluates and rounds up to a non-negative count.
inline long evaluate_count(std::string_view src, const Bindings& vars) {
  const double v = evaluate_expression(src, vars);
  if (!std::isfinite(v) || v < 0.0)
    throw InvalidArgument("expression '" + std::string(src) + "' is not a non-negative count");
  return static_cast<long>(std::ceil(v));
}

}  // namespace robust_phase
