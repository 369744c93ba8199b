#include "flatlab/expression.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace flatlab {

struct Expression::Node {
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Func };
  enum class Fn { Sin, Cos, Tan, Tanh, Exp, Log, Sqrt };

  Op op = Op::Const;
  double value = 0.0;
  int var = 0;
  Fn fn = Fn::Sin;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_binary(Node::Op op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(std::string_view s, int max_vars) : s_(s), max_vars_(max_vars) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::ConfigInvalid, "expression '" + std::string(s_) + "' at " +
                                              std::to_string(pos_) + ": " + why);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr a = term();
    for (;;) {
      if (accept('+')) a = make_binary(Node::Op::Add, a, term());
      else if (accept('-')) a = make_binary(Node::Op::Sub, a, term());
      else return a;
    }
  }

  NodePtr term() {
    NodePtr a = unary();
    for (;;) {
      if (accept('*')) a = make_binary(Node::Op::Mul, a, unary());
      else if (accept('/')) a = make_binary(Node::Op::Div, a, unary());
      else return a;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->op = Node::Op::Neg;
      n->lhs = unary();
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make_binary(Node::Op::Pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    // strtod handles exponents; copy to a terminated buffer first.
    std::string tail(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(tail.c_str(), &end);
    if (end == tail.c_str()) fail("bad number");
    pos_ += static_cast<std::size_t>(end - tail.c_str());
    auto n = std::make_shared<Node>();
    n->op = Node::Op::Const;
    n->value = v;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string_view id = s_.substr(start, pos_ - start);
    if (id.size() >= 2 && id[0] == 'x' &&
        id.substr(1).find_first_not_of("0123456789") == std::string_view::npos) {
      int k = 0;
      std::from_chars(id.data() + 1, id.data() + id.size(), k);
      if (k < 1 || k > max_vars_) fail("variable index out of range");
      auto n = std::make_shared<Node>();
      n->op = Node::Op::Var;
      n->var = k - 1;
      return n;
    }
    static constexpr std::pair<std::string_view, Node::Fn> kFns[] = {
        {"sin", Node::Fn::Sin},   {"cos", Node::Fn::Cos}, {"tan", Node::Fn::Tan},
        {"tanh", Node::Fn::Tanh}, {"exp", Node::Fn::Exp}, {"log", Node::Fn::Log},
        {"sqrt", Node::Fn::Sqrt}};
    for (const auto& [name, fn] : kFns) {
      if (id == name) {
        if (!accept('(')) fail("expected '(' after function name");
        auto n = std::make_shared<Node>();
        n->op = Node::Op::Func;
        n->fn = fn;
        n->lhs = expr();
        if (!accept(')')) fail("expected ')'");
        return n;
      }
    }
    fail("unknown identifier '" + std::string(id) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int max_vars_;
};

template <class T>
T eval(const Node& n, std::span<const T> x) {
  using std::cos, std::exp, std::log, std::pow, std::sin, std::sqrt, std::tan, std::tanh;
  switch (n.op) {
    case Node::Op::Const: return T(n.value);
    case Node::Op::Var: return x[static_cast<std::size_t>(n.var)];
    case Node::Op::Add: return eval(*n.lhs, x) + eval(*n.rhs, x);
    case Node::Op::Sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
    case Node::Op::Mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
    case Node::Op::Div: return eval(*n.lhs, x) / eval(*n.rhs, x);
    case Node::Op::Neg: return -eval(*n.lhs, x);
    case Node::Op::Pow: {
      if (n.rhs->op == Node::Op::Const) return pow(eval(*n.lhs, x), n.rhs->value);
      return pow(eval(*n.lhs, x), eval(*n.rhs, x));
    }
    case Node::Op::Func: {
      const T a = eval(*n.lhs, x);
      switch (n.fn) {
        case Node::Fn::Sin: return sin(a);
        case Node::Fn::Cos: return cos(a);
        case Node::Fn::Tan: return tan(a);
        case Node::Fn::Tanh: return tanh(a);
        case Node::Fn::Exp: return exp(a);
        case Node::Fn::Log: return log(a);
        case Node::Fn::Sqrt: return sqrt(a);
      }
    }
  }
  return T(0.0);
}

}  // namespace

Expression Expression::parse(std::string_view text, int max_vars) {
  Expression e;
  e.root_ = Parser(text, max_vars).parse();
  e.source_ = std::string(text);
  return e;
}

Jet2 Expression::evaluate(std::span<const Jet2> x) const { return eval<Jet2>(*root_, x); }

double Expression::evaluate(std::span<const double> x) const { return eval<double>(*root_, x); }

}  // namespace flatlab
