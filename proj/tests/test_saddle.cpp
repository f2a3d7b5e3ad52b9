#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "indiff/errors.hpp"
#include "indiff/saddle.hpp"

using namespace indiff;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

struct Model {
  MakerPanel panel;
  Lattice lattice;
  FieldEvaluator field;
  ConjugateSolver solver;
  Model(MakerPanel p, Lattice l)
      : panel(std::move(p)), lattice(std::move(l)), field(panel, lattice), solver(field) {}
};

Lattice two_period() {
  LatticeSpec s;
  s.steps = 2;
  return Lattice::from_expressions(s, "0.4*B + 0.1", {"1 + 0.5*B"});
}

// Brute force for M = 2: the cash solving F(w, x, q) = <w, u> is maximal at
// the saddle weight. Bisection in x, grid in w.
double grid_G(const FieldEvaluator& f, const DualPoint& b, NodeRef n) {
  double best = -INFINITY;
  for (int i = 1; i < 2000; ++i) {
    const double w1 = i / 2000.0;
    const Vector w = vec({w1, 1.0 - w1});
    const double target = w.dot(b.u);
    double lo = -50.0, hi = 50.0;
    for (int k = 0; k < 80; ++k) {
      const double mid = 0.5 * (lo + hi);
      (f.evaluate({w, mid, b.q}, n).value < target ? lo : hi) = mid;
    }
    best = std::max(best, 0.5 * (lo + hi));
  }
  return b.y * best;
}

}  // namespace

TEST(Saddle, SingleMakerTerminal) {
  LatticeSpec s;
  s.steps = 1;
  Model S(MakerPanel({UtilitySpec::exponential(1.0)}), Lattice(s, {0.0, 0.0}, {0.0, 0.0}));
  const NodeRef leaf{1, 0};
  EXPECT_NEAR(S.solver.solve({vec({-1.0}), 1.0, vec({0.0})}, leaf).g, 0.0, 1e-14);
  EXPECT_NEAR(S.solver.solve({vec({-std::exp(1.0)}), 1.0, vec({0.0})}, leaf).g, -1.0, 1e-14);
}

TEST(Saddle, MatchesGridOracle) {
  Model S(MakerPanel({UtilitySpec::exponential(0.8), UtilitySpec::exponential(1.5)}), two_period());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    const NodeRef n{k % 3, 0};
    const DualPoint b{vec({-std::exp(U(rng)), -std::exp(U(rng))}), std::exp(U(rng)), vec({U(rng)})};
    const auto s = S.solver.solve(b, n);
    EXPECT_NEAR(s.g, grid_G(S.field, b, n), 1e-5);
    EXPECT_NEAR(s.g, b.y * s.x, 1e-14 * (1 + std::abs(s.g)));
  }
}

TEST(Saddle, GenericPanelMatchesGridOracle) {
  Model S(MakerPanel({UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})}),
          two_period());
  const DualPoint b{vec({-0.8, -1.6}), 1.0, vec({0.3})};
  EXPECT_NEAR(S.solver.solve(b, S.lattice.root()).g, grid_G(S.field, b, S.lattice.root()), 1e-5);
}

TEST(Saddle, HomogeneityInY) {
  Model S(MakerPanel({UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})}),
          two_period());
  const Vector u = vec({-0.9, -1.3});
  const auto base = S.solver.solve({u, 1.0, vec({0.2})}, {1, 1});
  for (double y : {0.1, 1.0, 7.0}) {
    const auto s = S.solver.solve({u, y, vec({0.2})}, {1, 1});
    EXPECT_NEAR(s.g, y * base.g, 1e-12 * (1 + std::abs(s.g)));
    EXPECT_NEAR((s.v - y * base.v).cwiseAbs().maxCoeff(), 0.0, 1e-11 * y);
  }
}

TEST(Saddle, GradientsMatchFiniteDifferences) {
  Model S(MakerPanel({UtilitySpec::exponential(0.8), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0}),
                      UtilitySpec::exponential(2.0)}),
          two_period());
  const DualPoint b{vec({-0.9, -1.3, -0.4}), 1.0, vec({0.4})};
  const NodeRef n{1, 0};
  const auto s = S.solver.solve(b, n);
  const double h = 1e-6;
  for (int m = 0; m < 3; ++m) {
    auto up = b, dn = b;
    up.u[m] += h;
    dn.u[m] -= h;
    EXPECT_NEAR(s.v[m], (S.solver.solve(up, n).g - S.solver.solve(dn, n).g) / (2 * h), 1e-7);
  }
  auto up = b, dn = b;
  up.q[0] += h;
  dn.q[0] -= h;
  EXPECT_NEAR(s.grad_q[0], (S.solver.solve(up, n).g - S.solver.solve(dn, n).g) / (2 * h), 1e-7);

  // Second derivatives against differences of the first.
  const auto H = S.solver.hessian(b, n, s);
  for (int m = 0; m < 3; ++m) {
    auto bu = b, bd = b;
    bu.u[m] += h;
    bd.u[m] -= h;
    const Vector fd = (S.solver.solve(bu, n).v - S.solver.solve(bd, n).v) / (2 * h);
    for (int l = 0; l < 3; ++l) EXPECT_NEAR(H.G_uu(l, m), fd[l], 1e-6 * (1 + std::abs(fd[l])));
  }
  EXPECT_NEAR(H.G_yy, 0.0, 1e-12);
}

TEST(Saddle, PrimalMatrices) {
  Model S(MakerPanel({UtilitySpec::exponential(1.3)}), two_period());
  const PrimalPoint a{vec({1.0}), 0.2, vec({0.5})};
  const auto f = S.field.evaluate(a, {1, 0}, true);
  const auto P = matrix_ACD(S.field, a, {1, 0});
  ASSERT_EQ(P.A.rows(), 1);
  EXPECT_GT(P.A(0, 0), 0.0);
  EXPECT_NEAR(P.A(0, 0), -f.grad_x / f.hessian(1, 1), 1e-12);

  Model G(MakerPanel({UtilitySpec::exponential(0.5), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0}),
                      UtilitySpec::exponential(2.0)}),
          two_period());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N;
  const auto A = matrix_ACD(G.field, {vec({0.2, 0.5, 0.3}), -0.3, vec({0.7})}, {2, 1}).A;
  for (int k = 0; k < 100; ++k) {
    const Vector z = vec({N(rng), N(rng), N(rng)});
    EXPECT_GT(z.dot(A * z), 0.0);
  }
}

TEST(Saddle, ExponentialSpectrumWithinBounds) {
  const MakerPanel panel({UtilitySpec::exponential(0.5), UtilitySpec::exponential(2.0)});
  Model S(panel, two_period());
  const double c = panel.bound_constant();
  const auto A = matrix_ACD(S.field, {vec({0.4, 0.6}), 0.1, vec({-0.4})}, {1, 1}).A;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (A + A.transpose()));
  EXPECT_GE(es.eigenvalues().minCoeff(), 1.0 / c - 1e-12);
  EXPECT_LE(es.eigenvalues().maxCoeff(), c + 1e-12);
}

TEST(Saddle, IdentitiesAndRoundTrips) {
  Model S(MakerPanel({UtilitySpec::exponential(0.9), UtilitySpec::sum_exponential({0.5, 1.5}, {0.4, 1.8})}),
          two_period());
  const DualPoint b{vec({-1.1, -0.6}), 1.7, vec({-0.3})};
  const auto r = conjugacy_identities(S.solver, b, {1, 1});
  EXPECT_LT(r.max(), 1e-8);
  const auto D = matrix_BEH(S.solver, b, {1, 1});
  const auto s = S.solver.solve(b, {1, 1});
  const auto P = matrix_ACD(S.field, {normalize_simplex(s.v), s.x / 1.0, b.q}, {1, 1});
  EXPECT_LT((D.B * P.A - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((D.E + D.B * P.C).cwiseAbs().maxCoeff(), 1e-8);

  const PrimalPoint a{vec({0.35, 0.65}), 0.4, vec({0.2})};
  EXPECT_LT(state_identities(S.solver, a, {2, 0}).max(), 1e-8);
  EXPECT_LT(state_identities(S.solver, DualPoint{vec({-0.7, -1.4}), 1.0, vec({0.1})}, {0, 0}).max(), 1e-8);
}

TEST(Saddle, ZeroCashAtInitialState) {
  Model S(MakerPanel({UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})}),
          two_period());
  const Vector lambda = vec({0.3, 0.7});
  const auto u = S.field.evaluate({lambda, 0.0, vec({0.0})}, S.lattice.root()).grad_v;
  const auto s = S.solver.solve({u, 1.0, vec({0.0})}, S.lattice.root());
  EXPECT_NEAR(s.x, 0.0, 1e-12);
  EXPECT_NEAR((normalize_simplex(s.v) - lambda).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Saddle, DomainErrors) {
  Model S(MakerPanel({UtilitySpec::exponential(1.0), UtilitySpec::exponential(2.0)}), two_period());
  EXPECT_THROW(S.solver.solve({vec({-1.0, 0.0}), 1.0, vec({0.0})}, {0, 0}), DomainError);
  EXPECT_THROW(S.solver.solve({vec({-1.0, -1.0}), 0.0, vec({0.0})}, {0, 0}), DomainError);
}
