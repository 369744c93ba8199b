#pragma once

// A minimal arithmetic expression language for user-supplied field
// components. Grammar:
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('-' | '+') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | 'x' digit+ | ident '(' expr ')' | '(' expr ')'
//
// Variables are x1..xn (1-based). Supported functions: sin cos tan tanh exp
// log sqrt.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "flatlab/jet.hpp"

namespace flatlab {

class Expression {
 public:
  /// Parses `text`; throws Error(ConfigInvalid) on malformed input or on a
  /// variable index outside 1..max_vars.
  static Expression parse(std::string_view text, int max_vars);

  Jet2 evaluate(std::span<const Jet2> x) const;
  double evaluate(std::span<const double> x) const;

  const std::string& source() const noexcept { return source_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
};

}  // namespace flatlab
