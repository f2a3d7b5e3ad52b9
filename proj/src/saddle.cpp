#include "indiff/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "indiff/errors.hpp"

namespace indiff {
namespace {

Vector softmax(const Vector& s) {
  const double m = s.maxCoeff();
  Vector w = (s.array() - m).exp().matrix();
  return w / w.sum();
}

Vector logits(const Vector& w) {
  Vector s = w.array().log().matrix();
  return s.array() - s[s.size() - 1];
}

struct Iterate {
  Vector s;  // logits, last entry pinned at 0
  double x = 0.0;
  Vector w;
  FieldValue f;
  Vector R;
  double norm = 0.0;
};

class Attempt {
 public:
  Attempt(const FieldEvaluator& field, const SaddleOptions& opt, const Vector& u, const Vector& q,
          NodeRef node)
      : field_(field), opt_(opt), u_(u), q_(q), node_(node),
        tol_(opt.tolerance * (1.0 + u.cwiseAbs().maxCoeff())) {}

  double tolerance() const { return tol_; }
  int iterations() const { return iterations_; }

  Iterate make(const Vector& s, double x, bool hessian) const {
    Iterate it;
    it.s = s;
    it.x = x;
    it.w = softmax(s);
    it.f = field_.evaluate({it.w, x, q_}, node_, hessian);
    it.R = it.f.grad_v - u_;
    it.norm = it.R.allFinite() ? it.R.cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
    return it;
  }

  // Cash x solving F(w, x, q) = <w, u>; at the saddle point this holds by
  // Euler's identity for the degree-one homogeneous F.
  double cash_for(const Vector& w, double x0) {
    const double target = w.dot(u_);
    const double log_target = std::log(-target);
    auto phi = [&](double x, double& slope) {
      const auto f = field_.evaluate({w, x, q_}, node_);
      slope = f.grad_x / f.value;
      return std::log(-f.value) - log_target;
    };
    double slope = 0.0;
    double x = x0;
    double fx = phi(x, slope);
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 200; ++k) {
      ++iterations_;
      if (fx > 0.0)
        lo = x;
      else
        hi = x;
      double next = x - fx / slope;
      if (!std::isfinite(next)) next = fx > 0.0 ? x + 1.0 : x - 1.0;
      if (std::isfinite(lo) && std::isfinite(hi) && !(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
      const double step = next - x;
      x = next;
      fx = phi(x, slope);
      if (std::abs(step) <= 1e-14 * (1.0 + std::abs(x)) || fx == 0.0) return x;
    }
    return x;
  }

  std::optional<Iterate> newton(Iterate it) {
    const int M = static_cast<int>(u_.size());
    int polished = 0;
    for (int k = 0; k < opt_.max_iterations; ++k) {
      ++iterations_;
      if (it.norm <= tol_ && polished >= opt_.polish_steps) return it;

      Matrix J(M, M);
      const Matrix Fvv = it.f.hessian.topLeftCorner(M, M);
      const Vector Fvv_w = Fvv * it.w;
      for (int c = 0; c + 1 < M; ++c) J.col(c) = Fvv.col(c) * it.w[c] - it.w[c] * Fvv_w;
      J.col(M - 1) = it.f.hessian.block(0, M, M, 1);
      Eigen::FullPivLU<Matrix> lu(J);
      if (!lu.isInvertible()) return std::nullopt;
      const Vector step = lu.solve(-it.R);
      if (!step.allFinite()) return std::nullopt;

      auto trial = [&](double t) {
        Vector s = it.s;
        s.head(M - 1) += t * step.head(M - 1);
        return make(s, it.x + t * step[M - 1], false);
      };

      if (it.norm <= tol_) {
        // Polishing: take the full step only if it does not hurt.
        ++polished;
        auto next = trial(1.0);
        if (next.norm <= it.norm) it = make(next.s, next.x, true);
        continue;
      }

      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        auto next = trial(t);
        if (next.norm < (1.0 - 1e-4 * t) * it.norm || next.norm <= tol_) {
          it = make(next.s, next.x, true);
          accepted = true;
          break;
        }
      }
      if (!accepted) return it.norm <= 10.0 * tol_ ? std::optional<Iterate>(it) : std::nullopt;
    }
    if (it.norm <= tol_) return it;
    return std::nullopt;
  }

  Iterate from_weights(const Vector& w, double x0) {
    const double x = cash_for(w, x0);
    return make(logits(w), x, true);
  }

  // Damped multiplicative update towards F_v = u.
  Iterate fixed_point(Vector w, double x) {
    Iterate it = from_weights(w, x);
    for (int k = 0; k < opt_.fixed_point_iterations && it.norm > 1e3 * tol_; ++k) {
      for (Eigen::Index m = 0; m < w.size(); ++m) w[m] = it.w[m] * std::sqrt(it.f.grad_v[m] / u_[m]);
      w /= w.sum();
      it = from_weights(w, it.x);
    }
    return it;
  }

 private:
  const FieldEvaluator& field_;
  const SaddleOptions& opt_;
  const Vector& u_;
  const Vector& q_;
  NodeRef node_;
  double tol_;
  int iterations_ = 0;
};

Vector cold_weights(const MakerPanel& panel, const Vector& u) {
  Vector w(u.size());
  for (int m = 0; m < panel.size(); ++m) w[m] = panel[m].risk_tolerance(0.0) / (-u[m]);
  return w / w.sum();
}

double rel_dev(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.size() == 0) return 0.0;
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  return (lhs - rhs).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

ConjugateSolver::ConjugateSolver(const FieldEvaluator& field, SaddleOptions options)
    : field_(field), options_(options) {}

SaddleResult ConjugateSolver::solve(const DualPoint& b, NodeRef node, const SaddleResult* warm) const {
  const int M = field_.makers();
  if (b.u.size() != M) throw std::invalid_argument("conjugate: utility dimension mismatch");
  if (b.q.size() != field_.claims()) throw std::invalid_argument("conjugate: position dimension mismatch");
  for (int m = 0; m < M; ++m)
    if (!(b.u[m] < 0.0)) throw DomainError("conjugate: indirect utilities must be negative");
  if (!(b.y > 0.0)) throw DomainError("conjugate: y must be positive");

  Attempt attempt(field_, options_, b.u, b.q, node);
  std::optional<Iterate> found;
  double last = std::numeric_limits<double>::infinity();

  auto run = [&](const Vector& w, double x0) {
    auto start = attempt.from_weights(w, x0);
    last = std::min(last, start.norm);
    if (auto r = attempt.newton(std::move(start))) found = std::move(r);
  };

  if (warm && warm->w.size() == M && (warm->w.array() > 0.0).all()) run(warm->w, warm->x);
  if (!found) run(cold_weights(field_.panel(), b.u), 0.0);
  if (!found) {
    auto fp = attempt.fixed_point(cold_weights(field_.panel(), b.u), 0.0);
    last = std::min(last, fp.norm);
    if (auto r = attempt.newton(std::move(fp))) found = std::move(r);
  }
  for (int k = 0; !found && k < options_.multistarts; ++k) {
    Vector w = Vector::Constant(M, 1.0);
    if (k < M) {
      w *= 0.2 / std::max(1, M - 1);
      w[k] = 0.8;
    } else {
      for (int m = 0; m < M; ++m) w[m] = 0.1 + std::fmod(0.6180339887498949 * (k * M + m + 1), 1.0);
    }
    run(w / w.sum(), 0.0);
  }
  if (!found)
    throw NumericError("conjugate: saddle solve failed at node (" + std::to_string(node.level) + ", " +
                           std::to_string(node.index) + ")",
                       last, attempt.iterations());

  const auto& it = *found;
  SaddleResult out;
  out.w = it.w;
  out.x = it.x;
  out.g = b.y * it.x;
  const double scale = b.y / it.f.grad_x;
  out.v = scale * it.w;
  out.grad_q = -scale * it.f.grad_q;
  out.residual = it.norm;
  out.iterations = attempt.iterations();
  return out;
}

DualHessian ConjugateSolver::hessian(const DualPoint& b, NodeRef node, const SaddleResult& s) const {
  const int M = field_.makers();
  const int J = field_.claims();
  const auto f = field_.evaluate({s.v, s.x, b.q}, node, true);
  const Matrix S = f.hessian.topLeftCorner(M + 1, M + 1);
  const Matrix P = f.hessian.topRightCorner(M + 1, J);
  Eigen::FullPivLU<Matrix> lu(S);
  if (!lu.isInvertible()) throw NumericError("conjugate: singular saddle Jacobian", 0.0, 0);
  const Matrix Sinv = lu.inverse();
  const Matrix dq = -Sinv * P;  // d(v, x)/dq

  DualHessian h;
  h.G_uu = Sinv.topLeftCorner(M, M);
  h.G_uy = Sinv.block(0, M, M, 1);
  h.G_yy = Sinv(M, M);
  h.G_uq = dq.topRows(M);
  h.G_yq = dq.row(M).transpose();
  // dG/dq = -F_q(v(q), x(q), q)
  const Matrix Fqv = f.hessian.block(M + 1, 0, J, M);
  const Vector Fqx = f.hessian.block(M + 1, M, J, 1);
  const Matrix Fqq = f.hessian.bottomRightCorner(J, J);
  h.G_qq = -(Fqq + Fqv * h.G_uq + Fqx * h.G_yq.transpose());
  return h;
}

PrimalMatrices primal_matrices(const FieldValue& f, const Vector& v) {
  if (!f.has_hessian()) throw std::invalid_argument("primal_matrices: Hessian not evaluated");
  const int M = static_cast<int>(f.grad_v.size());
  const int J = static_cast<int>(f.grad_q.size());
  const auto& H = f.hessian;
  const double Fx = f.grad_x;
  const double Fxx = H(M, M);
  if (!(Fxx < 0.0)) throw NumericError("primal_matrices: F_xx is not negative", Fxx, 0);
  const Vector Fvx = H.block(0, M, M, 1);
  const Vector Fxq = H.block(M, M + 1, 1, J).transpose();

  PrimalMatrices out;
  out.A = (H.topLeftCorner(M, M) - Fvx * Fvx.transpose() / Fxx) / Fx;
  out.A = v.asDiagonal() * out.A * v.asDiagonal();
  out.C = v.asDiagonal() * (H.block(0, M + 1, M, J) - Fvx * Fxq.transpose() / Fxx) / Fx;
  out.D = (-H.bottomRightCorner(J, J) + Fxq * Fxq.transpose() / Fxx) / Fx;
  return out;
}

DualMatrices dual_matrices(const SaddleResult& s, const DualHessian& h, double y) {
  const Vector& Gu = s.v;
  DualMatrices out;
  out.B = y * Gu.cwiseInverse().asDiagonal() * h.G_uu * Gu.cwiseInverse().asDiagonal();
  out.E = Gu.cwiseInverse().asDiagonal() * h.G_uq;
  out.Hg = h.G_qq / y;
  return out;
}

PrimalMatrices matrix_ACD(const FieldEvaluator& field, const PrimalPoint& a, NodeRef node) {
  return primal_matrices(field.evaluate(a, node, true), a.v);
}

DualMatrices matrix_BEH(const ConjugateSolver& solver, const DualPoint& b, NodeRef node) {
  const auto s = solver.solve(b, node);
  return dual_matrices(s, solver.hessian(b, node, s), b.y);
}

double IdentityReport::max() const {
  return std::max({inverse, e_relation, h_relation, c_row_sum, a_row_sum, a_total, g_yy});
}

IdentityReport conjugacy_identities(const ConjugateSolver& solver, const DualPoint& b, NodeRef node) {
  const auto& field = solver.field();
  const int M = field.makers();
  const int J = field.claims();
  const auto s = solver.solve(b, node);
  const auto h = solver.hessian(b, node, s);
  const auto dual = dual_matrices(s, h, b.y);
  const auto f = field.evaluate({s.v, s.x, b.q}, node, true);
  const auto primal = primal_matrices(f, s.v);

  IdentityReport r;
  r.inverse = rel_dev(dual.B * primal.A, Matrix::Identity(M, M));
  Eigen::FullPivLU<Matrix> lu(primal.A);
  const Matrix AinvC = lu.solve(primal.C);
  r.e_relation = rel_dev(dual.E, -AinvC);
  r.h_relation = rel_dev(dual.Hg, primal.C.transpose() * AinvC + primal.D);

  const double Fx = f.grad_x;
  const double Fxx = f.hessian(M, M);
  Vector rhs_c(J);
  for (int j = 0; j < J; ++j) rhs_c[j] = f.grad_q[j] / Fx - f.hessian(M + 1 + j, M) / Fxx;
  r.c_row_sum = rel_dev(primal.C.colwise().sum().transpose(), rhs_c);
  Vector rhs_a(M);
  for (int l = 0; l < M; ++l) rhs_a[l] = -s.v[l] * f.hessian(l, M) / Fxx;
  r.a_row_sum = rel_dev(primal.A.rowwise().sum(), rhs_a);
  Matrix lhs_total(1, 1), rhs_total(1, 1);
  lhs_total(0, 0) = primal.A.sum();
  rhs_total(0, 0) = -Fx / Fxx;
  r.a_total = rel_dev(lhs_total, rhs_total);
  r.g_yy = std::abs(h.G_yy);
  return r;
}

double RoundTripReport::max() const {
  return std::max({weights, cash, utilities, utilities_normalised});
}

RoundTripReport state_identities(const ConjugateSolver& solver, const PrimalPoint& a, NodeRef node) {
  const auto& field = solver.field();
  const Vector w = normalize_simplex(a.v);
  const auto f = field.evaluate({w, a.x, a.q}, node);
  const DualPoint b{f.grad_v, 1.0, a.q};
  const auto s = solver.solve(b, node);

  RoundTripReport r;
  r.weights = (normalize_simplex(s.v) - w).cwiseAbs().maxCoeff();
  r.cash = std::abs(s.x - a.x);
  const double scale = std::max(1.0, b.u.cwiseAbs().maxCoeff());
  r.utilities = (field.evaluate({s.v, s.x, a.q}, node).grad_v - b.u).cwiseAbs().maxCoeff() / scale;
  r.utilities_normalised =
      (field.evaluate({normalize_simplex(s.v), s.x, a.q}, node).grad_v - b.u).cwiseAbs().maxCoeff() / scale;
  return r;
}

RoundTripReport state_identities(const ConjugateSolver& solver, const DualPoint& b, NodeRef node) {
  const auto& field = solver.field();
  const DualPoint unit{b.u, 1.0, b.q};
  const auto s = solver.solve(unit, node);
  const double scale = std::max(1.0, b.u.cwiseAbs().maxCoeff());

  RoundTripReport r;
  r.utilities = (field.evaluate({s.v, s.x, b.q}, node).grad_v - b.u).cwiseAbs().maxCoeff() / scale;
  const Vector w = normalize_simplex(s.v);
  r.utilities_normalised = (field.evaluate({w, s.x, b.q}, node).grad_v - b.u).cwiseAbs().maxCoeff() / scale;
  // Back through the primal side: the recovered state must map to itself.
  const auto u2 = field.evaluate({w, s.x, b.q}, node).grad_v;
  const auto s2 = solver.solve({u2, 1.0, b.q}, node, &s);
  r.weights = (normalize_simplex(s2.v) - w).cwiseAbs().maxCoeff();
  r.cash = std::abs(s2.x - s.x);
  return r;
}

std::pair<double, double> marginal_cash_bounds(const SaddleResult& s, const Vector& u) {
  const Vector e = -(u.array() * s.v.array()).matrix();
  return {e.minCoeff(), e.maxCoeff()};
}

}  // namespace indiff
