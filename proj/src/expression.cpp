#include "indiff/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace indiff {

struct Expression::Node {
  enum class Op { constant, var_b, var_T, var_t, neg, add, sub, mul, div, pow, call1, call2 };
  Op op = Op::constant;
  double value = 0.0;
  int index = 0;                         // Brownian dimension for var_b
  double (*fn1)(double) = nullptr;
  double (*fn2)(double, double) = nullptr;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double fmax2(double a, double b) { return std::fmax(a, b); }
double fmin2(double a, double b) { return std::fmin(a, b); }
double fexp(double a) { return std::exp(a); }
double flog(double a) { return std::log(a); }
double fsqrt(double a) { return std::sqrt(a); }
double fsin(double a) { return std::sin(a); }
double ftanh(double a) { return std::tanh(a); }
double fcos(double a) { return std::cos(a); }
double fabs1(double a) { return std::fabs(a); }

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    auto n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return n;
  }
  int max_dim() const { return max_dim_; }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression '" + s_ + "' column " + std::to_string(pos_ + 1) + ": " +
                                what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    auto n = product();
    for (;;) {
      if (eat('+'))
        n = make(Op::add, n, product());
      else if (eat('-'))
        n = make(Op::sub, n, product());
      else
        return n;
    }
  }
  NodePtr product() {
    auto n = unary();
    for (;;) {
      if (eat('*'))
        n = make(Op::mul, n, unary());
      else if (eat('/'))
        n = make(Op::div, n, unary());
      else
        return n;
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Op::neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    auto base = primary();
    if (eat('^')) return make(Op::pow, base, unary());  // right-associative
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (eat('(')) {
      auto n = sum();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected character");
  }
  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->value = v;
    return n;
  }
  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string id = s_.substr(start, pos_ - start);

    if (id == "T") return make(Op::var_T);
    if (id == "t") return make(Op::var_t);
    if (id == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->value = std::numbers::pi;
      return n;
    }
    if (id[0] == 'B') {
      int dim = 1;
      if (id.size() > 1) {
        for (std::size_t i = 1; i < id.size(); ++i)
          if (!std::isdigit(static_cast<unsigned char>(id[i]))) fail("unknown identifier '" + id + "'");
        dim = std::stoi(id.substr(1));
        if (dim < 1) fail("Brownian index must be >= 1");
      }
      max_dim_ = std::max(max_dim_, dim);
      auto n = std::make_shared<Expression::Node>();
      n->op = Op::var_b;
      n->index = dim - 1;
      return n;
    }

    double (*f1)(double) = nullptr;
    double (*f2)(double, double) = nullptr;
    if (id == "exp") f1 = fexp;
    else if (id == "log") f1 = flog;
    else if (id == "sqrt") f1 = fsqrt;
    else if (id == "sin") f1 = fsin;
    else if (id == "cos") f1 = fcos;
    else if (id == "tanh") f1 = ftanh;
    else if (id == "abs") f1 = fabs1;
    else if (id == "max") f2 = fmax2;
    else if (id == "min") f2 = fmin2;
    else fail("unknown identifier '" + id + "'");

    if (!eat('(')) fail("expected '(' after " + id);
    auto n = std::make_shared<Expression::Node>();
    n->a = sum();
    if (f2) {
      if (!eat(',')) fail("expected ',' in " + id);
      n->b = sum();
      n->op = Op::call2;
      n->fn2 = f2;
    } else {
      n->op = Op::call1;
      n->fn1 = f1;
    }
    if (!eat(')')) fail("expected ')'");
    return n;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int max_dim_ = 0;
};

double eval(const Expression::Node& n, const ExpressionContext& ctx) {
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::var_b:
      if (static_cast<std::size_t>(n.index) >= ctx.B.size())
        throw std::out_of_range("expression references B" + std::to_string(n.index + 1) +
                                " beyond the lattice dimension");
      return ctx.B[static_cast<std::size_t>(n.index)];
    case Op::var_T: return ctx.T;
    case Op::var_t: return ctx.t;
    case Op::neg: return -eval(*n.a, ctx);
    case Op::add: return eval(*n.a, ctx) + eval(*n.b, ctx);
    case Op::sub: return eval(*n.a, ctx) - eval(*n.b, ctx);
    case Op::mul: return eval(*n.a, ctx) * eval(*n.b, ctx);
    case Op::div: return eval(*n.a, ctx) / eval(*n.b, ctx);
    case Op::pow: return std::pow(eval(*n.a, ctx), eval(*n.b, ctx));
    case Op::call1: return n.fn1(eval(*n.a, ctx));
    case Op::call2: return n.fn2(eval(*n.a, ctx), eval(*n.b, ctx));
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Parser p(text);
  auto root = p.parse();
  return Expression(text, std::move(root), p.max_dim());
}

double Expression::operator()(const ExpressionContext& ctx) const { return eval(*root_, ctx); }

}  // namespace indiff
