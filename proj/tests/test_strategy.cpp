#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "indiff/bachelier.hpp"
#include "indiff/path_tree.hpp"
#include "indiff/representative.hpp"
#include "indiff/saddle.hpp"
#include "indiff/strategy.hpp"

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

MakerPanel generic() {
  return MakerPanel({UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})});
}

Lattice small(int steps = 6) {
  LatticeSpec s;
  s.steps = steps;
  return Lattice::from_expressions(s, "0.5*B", {"1 + 0.3*B"});
}

}  // namespace

TEST(PathTree, FullChainAndSample) {
  const auto L = small(4);
  const auto full = PathTree::full(L);
  EXPECT_EQ(full.size(), 31);
  EXPECT_TRUE(full.complete());
  double total = 0.0;
  for (std::int64_t i = 0; i < full.size(); ++i)
    if (full.is_leaf(i)) total += full[i].probability;
  EXPECT_NEAR(total, 1.0, 1e-15);
  const std::vector<int> edges{1, 1, 0, 1};
  const auto chain = PathTree::chain(L, edges);
  EXPECT_EQ(chain.size(), 5);
  EXPECT_FALSE(chain.complete());
  EXPECT_EQ(chain[4].lattice, (NodeRef{4, 3}));
  EXPECT_EQ(chain.history(4).size(), 5u);
  std::mt19937_64 a(1), b(1);
  const auto s1 = PathTree::sample(L, a), s2 = PathTree::sample(L, b);
  for (std::int64_t i = 0; i < s1.size(); ++i) EXPECT_EQ(s1[i].lattice, s2[i].lattice);
  EXPECT_THROW(PathTree::full(L, 10), std::exception);
}

TEST(ExecuteSimple, ZeroStrategyIsInert) {
  Model S(generic(), small());
  const auto tree = PathTree::full(S.lattice);
  const Vector lambda = vec({0.3, 0.7});
  const auto path = execute_simple(S.solver, tree, lambda, SimpleStrategy{});
  for (const auto& st : path.states) {
    EXPECT_EQ(st.X, 0.0);
    EXPECT_NEAR(st.V, 0.0, 1e-12);
    EXPECT_EQ(st.W, lambda);
  }
  EXPECT_EQ(utility_preservation_residual(path), 0.0);
  EXPECT_LT(path.martingale, 1e-14);
}

TEST(ExecuteSimple, BuyAndHoldPricesAtIndifference) {
  BachelierParams p;
  const auto panel = bachelier_panel(p);
  const auto L = bachelier_lattice(p, 256);
  const FieldEvaluator field(panel, L);
  const ConjugateSolver solver(field);
  std::vector<int> edges(256, 0);
  for (std::size_t k = 0; k < edges.size(); k += 2) edges[k] = 1;
  const auto tree = PathTree::chain(L, edges);
  EngineOptions opt;
  opt.compute_gain = false;
  const auto path = execute_simple(solver, tree, vec({1.0}), SimpleStrategy::constant(vec({1.0})), opt);
  EXPECT_LT(utility_preservation_residual(path), 1e-9);

  // Independent oracle: E[u(Sigma0 + xi + psi)] = E[u(Sigma0)] by quadrature
  // over the Gaussian B_T, solved for xi by bisection.
  auto expected_u = [&](double xi, double q) {
    double s = 0.0;
    const int n = 4000;
    const double h = 16.0 / n;
    for (int i = 0; i <= n; ++i) {
      const double z = -8.0 + i * h;
      const double b = std::sqrt(p.T) * z;
      const double sigma0 = p.b + p.mu / (p.gamma * p.sigma) * b;
      const double psi = p.s + p.mu * p.T + p.sigma * b;
      const double wgt = (i == 0 || i == n ? 0.5 : 1.0) * h * std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI);
      s += wgt * -std::exp(-p.gamma * (sigma0 + xi + q * psi)) / p.gamma;
    }
    return s;
  };
  const double base = expected_u(0.0, 0.0);
  double lo = -50.0, hi = 50.0;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    (expected_u(mid, 1.0) < base ? lo : hi) = mid;
  }
  const double oracle = 0.5 * (lo + hi);
  EXPECT_NEAR(bachelier_indifference_price(p, 1.0), oracle, 1e-9);
  EXPECT_NEAR(path.states[1].X, oracle, 1e-3 * std::abs(oracle));
}

// The mean is taken under the pricing measure of the initial allocation,
// density proportional to r_x(lambda, Sigma0); concavity of r then forces
// E[r_x V_T] <= 0. Under P the sign can flip through the risk premium.
TEST(ExecuteSimple, RoundTripLosesOnAverage) {
  Model S(generic(), small());
  const auto tree = PathTree::full(S.lattice);
  const Vector lambda = vec({0.5, 0.5});
  for (double q : {0.0, 0.6, -0.8}) {
    const auto strategy = SimpleStrategy::on_grid({0, 3}, [q](int k, const Vector&, double) {
      return vec({k == 0 ? q : 0.0});
    });
    const auto path = execute_simple(S.solver, tree, lambda, strategy);
    double m = 0.0, z = 0.0;
    for (std::int64_t i = 0; i < tree.size(); ++i) {
      if (!tree.is_leaf(i)) continue;
      const double sigma = S.lattice.sigma0()[static_cast<std::size_t>(S.lattice.leaf_index(tree[i].lattice))];
      const double density = tree[i].probability * representative_utility(S.panel, lambda, sigma).y;
      m += density * path.states[static_cast<std::size_t>(i)].V;
      z += density;
    }
    m /= z;
    if (q == 0.0) {
      EXPECT_NEAR(m, 0.0, 1e-12);
    } else {
      EXPECT_LT(m, -1e-8) << q;
    }
    EXPECT_LT(utility_preservation_residual(path), 1e-8);
    EXPECT_LT(path.martingale, 1e-12);
  }
}

TEST(ExecuteSimple, StatesAreConsistent) {
  Model S(generic(), small());
  const auto tree = PathTree::full(S.lattice);
  const auto strategy = SimpleStrategy::on_grid({1, 4}, [](int k, const Vector& B, double) {
    return vec({0.4 * k - 0.5 * std::tanh(B[0])});
  });
  const auto path = execute_simple(S.solver, tree, vec({0.4, 0.6}), strategy);
  for (std::int64_t i = 0; i < tree.size(); i += 7) {
    const auto& st = path.states[static_cast<std::size_t>(i)];
    const auto rec = state_from_U(S.solver, st.U, st.Q, tree[i].lattice);
    EXPECT_NEAR((rec.W - st.W).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    EXPECT_NEAR(rec.X, st.X, 1e-9);
    EXPECT_NEAR(rec.V, st.V, 1e-9);
    const auto b = cash_bounds(S.solver, st.U, st.X, st.Q, tree[i].lattice, S.panel.bound_constant());
    EXPECT_TRUE(b.holds()) << b.lower << " " << b.middle << " " << b.upper;
  }
}

TEST(StateFromU, InitialState) {
  Model S(generic(), small());
  const Vector lambda = vec({0.25, 0.75});
  const auto U0 = S.field.evaluate({lambda, 0.0, vec({0.0})}, S.lattice.root()).grad_v;
  const auto r = state_from_U(S.solver, U0, vec({0.0}), S.lattice.root());
  EXPECT_NEAR(r.X, 0.0, 1e-12);
  EXPECT_NEAR(r.V, 0.0, 1e-12);
  EXPECT_NEAR((r.W - lambda).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Kernel, BachelierClosedForm) {
  BachelierParams p;
  const auto panel = bachelier_panel(p);
  const auto L = bachelier_lattice(p, 512);
  const FieldEvaluator field(panel, L);
  const ConjugateSolver solver(field);
  for (double q : {0.0, 1.0, -2.0}) {
    const double u = -1.3;
    const auto K = kernel_K(solver, vec({u}), vec({q}), L.root());
    EXPECT_NEAR(K(0, 0), bachelier_K(p, u, q), 5e-3 * std::abs(bachelier_K(p, u, q)));
  }
}

TEST(Kernel, DeterministicEndowmentWithoutClaims) {
  LatticeSpec s;
  s.steps = 3;
  const auto L = Lattice::from_expressions(s, "0.2", {"B"});
  const auto panel = generic();
  const FieldEvaluator field(panel, L);
  const ConjugateSolver solver(field);
  const auto K = kernel_K(solver, vec({-0.8, -1.2}), vec({0.0}), {1, 0});
  EXPECT_NEAR(K.cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(SimulateSde, ZeroPositionMatchesTreeMartingale) {
  Model S(generic(), small(8));
  const auto tree = PathTree::full(S.lattice);
  const Vector lambda = vec({0.4, 0.6});
  const auto U0 = S.field.evaluate({lambda, 0.0, vec({0.0})}, S.lattice.root()).grad_v;
  const auto path = simulate_sde(S.solver, tree, U0, nullptr);
  EXPECT_FALSE(path.explosion.exploded);
  EXPECT_LT(path.martingale, 1e-12);
  double worst_u = 0.0, worst_v = 0.0;
  for (std::int64_t i = 0; i < tree.size(); ++i) {
    const auto& st = path.states[static_cast<std::size_t>(i)];
    const auto exact = S.field.evaluate({lambda, 0.0, vec({0.0})}, tree[i].lattice).grad_v;
    worst_u = std::max(worst_u, (st.U - exact).cwiseAbs().maxCoeff());
    if (!tree.is_leaf(i)) worst_v = std::max(worst_v, std::abs(st.V));
  }
  EXPECT_LT(worst_u, 0.05);
  EXPECT_LT(worst_v, 0.05);
}

// On d = 1 lattices the fitted increment is exact and U cannot leave the
// negative orthant; a corner payoff on a 2-d lattice makes the linear fit
// overshoot.
TEST(SimulateSde, ReportsExplosion) {
  LatticeSpec s;
  s.steps = 2;
  s.dim = 2;
  const auto panel = generic();
  Model S(panel, Lattice::from_expressions(s, "0.5*B1", {"max(B1,0)*max(B2,0)"}));
  const auto tree = PathTree::full(S.lattice);
  const auto U0 = S.field.evaluate({vec({0.5, 0.5}), 0.0, vec({0.0})}, S.lattice.root()).grad_v;
  const auto path = simulate_sde(S.solver, tree, U0, [](const PathTree&, std::int64_t) { return vec({-4.0}); });
  EXPECT_TRUE(path.explosion.exploded);
  EXPECT_GT(path.explosion.node, 0);
  EXPECT_GT(path.explosion.time, 0.0);
  const auto& hit = path.states[static_cast<std::size_t>(path.explosion.node)];
  EXPECT_TRUE(hit.exploded);
  EXPECT_GT(hit.U.maxCoeff(), 0.0);
}

TEST(NoArbitrage, ZeroStrategyIsNeutral) {
  Model S(generic(), small());
  const auto tree = PathTree::full(S.lattice);
  const Vector lambda = vec({0.5, 0.5});
  const auto zero = execute_simple(S.solver, tree, lambda, SimpleStrategy{});
  const auto r0 = no_arbitrage(S.panel, tree, zero, lambda);
  EXPECT_NEAR(r0.after, r0.before, 1e-12);
  const auto path = execute_simple(S.solver, tree, lambda, SimpleStrategy::constant(vec({0.7})));
  const auto r = no_arbitrage(S.panel, tree, path, lambda);
  EXPECT_GT(r.after, r.before);
  std::mt19937_64 rng(1);
  EXPECT_THROW(no_arbitrage(S.panel, PathTree::sample(S.lattice, rng), zero, lambda), std::exception);
}
