#pragma once

#include "indiff/field.hpp"
#include "indiff/types.hpp"

namespace indiff {

struct SaddleOptions {
  double tolerance = 1e-10;  // scaled by (1 + |u|_inf)
  int max_iterations = 100;
  int polish_steps = 2;
  int fixed_point_iterations = 400;
  int multistarts = 8;
};

/// Saddle point of G(b) = sup_v inf_x [<v,u> + x y - F(v,x,q)] at b = (u,y,q).
/// `w` is the simplex-normalised weight and `x` the cash with
/// dF/dv(w, x, q) = u; the unnormalised weight is `v` = dG/du.
struct SaddleResult {
  double g = 0.0;     // G(u, y, q) = y x
  Vector w;
  double x = 0.0;     // G(u, 1, q)
  Vector v;           // dG/du(b) = y w / F_x(w, x, q)
  Vector grad_q;      // dG/dq(b) = -F_q at the saddle point
  double residual = 0.0;
  int iterations = 0;
};

/// Second derivatives of G by implicit differentiation of the saddle
/// system [F_v; F_x](v, x, q) = [u; y].
struct DualHessian {
  Matrix G_uu;
  Vector G_uy;
  Matrix G_uq;
  double G_yy = 0.0;
  Vector G_yq;
  Matrix G_qq;
};

class ConjugateSolver {
 public:
  explicit ConjugateSolver(const FieldEvaluator& field, SaddleOptions options = {});

  const FieldEvaluator& field() const noexcept { return field_; }
  const SaddleOptions& options() const noexcept { return options_; }

  /// Throws DomainError unless u < 0 and y > 0; NumericError when every
  /// restart fails. `warm` seeds the first Newton attempt.
  SaddleResult solve(const DualPoint& b, NodeRef node, const SaddleResult* warm = nullptr) const;

  DualHessian hessian(const DualPoint& b, NodeRef node, const SaddleResult& s) const;

 private:
  const FieldEvaluator& field_;
  SaddleOptions options_;
};

// Matrices of second derivatives with the invariance normalisation.
struct PrimalMatrices {
  Matrix A;  // M x M
  Matrix C;  // M x J
  Matrix D;  // J x J
};
struct DualMatrices {
  Matrix B;   // M x M
  Matrix E;   // M x J
  Matrix Hg;  // J x J
};

/// Requires f.hessian; v is the weight at which f was evaluated.
PrimalMatrices primal_matrices(const FieldValue& f, const Vector& v);
DualMatrices dual_matrices(const SaddleResult& s, const DualHessian& h, double y);

PrimalMatrices matrix_ACD(const FieldEvaluator& field, const PrimalPoint& a, NodeRef node);
DualMatrices matrix_BEH(const ConjugateSolver& solver, const DualPoint& b, NodeRef node);

/// Residuals of the exact relations between the primal and dual matrices at
/// a conjugate pair, each as max |lhs - rhs| / max(1, |rhs|_inf).
struct IdentityReport {
  double inverse = 0.0;       // B A = I
  double e_relation = 0.0;    // E = -A^{-1} C
  double h_relation = 0.0;    // Hg = C^T A^{-1} C + D
  double c_row_sum = 0.0;     // sum_m C^{mj} = F_qj / F_x - F_qjx / F_xx
  double a_row_sum = 0.0;     // sum_m A^{lm} = -v^l F_{v^l x} / F_xx
  double a_total = 0.0;       // sum_lm A^{lm} = -F_x / F_xx
  double g_yy = 0.0;          // |G_yy|
  double max() const;
};

IdentityReport conjugacy_identities(const ConjugateSolver& solver, const DualPoint& b, NodeRef node);

/// Round trips between a = (w, x, q) with w on the simplex and b = (u, 1, q).
struct RoundTripReport {
  double weights = 0.0;      // |w - normalised dG/du(F_v(a))|
  double cash = 0.0;         // |x - G(F_v(a), 1, q)|
  double utilities = 0.0;    // |u - F_v(dG/du(b), G(b), q)| / max(1, |u|)
  double utilities_normalised = 0.0;  // same through the normalised weight
  double max() const;
};

RoundTripReport state_identities(const ConjugateSolver& solver, const PrimalPoint& a, NodeRef node);
RoundTripReport state_identities(const ConjugateSolver& solver, const DualPoint& b, NodeRef node);

/// min and max over m of -u^m dG/du^m(u, 1, q).
std::pair<double, double> marginal_cash_bounds(const SaddleResult& s, const Vector& u);

}  // namespace indiff
