#pragma once

#include <memory>
#include <span>
#include <string>

namespace indiff {

/// Variables visible to a payoff expression.
struct ExpressionContext {
  std::span<const double> B;  // terminal Brownian value per dimension
  double T = 0.0;             // horizon
  double t = 0.0;             // current time (T at leaves)
};

/// Arithmetic over numbers, + - * / ^, parentheses, the variables
/// B (= B1), B1..Bd, T, t, pi and the functions exp, log, sqrt, sin, cos,
/// tanh, abs, max(a,b), min(a,b).
class Expression {
 public:
  /// Throws std::invalid_argument with the column of the offending token.
  static Expression parse(const std::string& text);

  double operator()(const ExpressionContext& ctx) const;
  const std::string& text() const noexcept { return text_; }
  /// Highest Brownian dimension referenced (1-based), 0 if none.
  int max_dimension() const noexcept { return max_dim_; }

  struct Node;

 private:
  Expression(std::string text, std::shared_ptr<const Node> root, int max_dim)
      : text_(std::move(text)), root_(std::move(root)), max_dim_(max_dim) {}

  std::string text_;
  std::shared_ptr<const Node> root_;
  int max_dim_ = 0;
};

}  // namespace indiff
