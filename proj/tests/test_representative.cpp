#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "indiff/errors.hpp"
#include "indiff/representative.hpp"

using namespace indiff;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Grid search over the first maker's share for two makers.
double grid_sup(const MakerPanel& p, const Vector& v, double x, double& best_x1) {
  double best = -INFINITY;
  for (double x1 = -5.0; x1 <= 5.0; x1 += 1e-4) {
    const double r = v[0] * p[0].value(x1) + v[1] * p[1].value(x - x1);
    if (r > best) {
      best = r;
      best_x1 = x1;
    }
  }
  return best;
}

}  // namespace

TEST(Representative, SingleMaker) {
  const MakerPanel p({UtilitySpec::sum_exponential({1.0, 2.0}, {0.5, 1.5})});
  const auto rep = representative_utility(p, vec({2.5}), 0.7);
  EXPECT_DOUBLE_EQ(rep.r, 2.5 * p[0].value(0.7));
  EXPECT_DOUBLE_EQ(rep.split[0], 0.7);
  const auto g = representative_gradient(p, vec({2.5}), 0.7);
  EXPECT_DOUBLE_EQ(g.d_v[0], p[0].value(0.7));
  EXPECT_DOUBLE_EQ(g.d_x, 2.5 * p[0].marginal(0.7));
}

TEST(Representative, SymmetricPair) {
  const MakerPanel p({UtilitySpec::exponential(1.0), UtilitySpec::exponential(1.0)});
  const auto rep = representative_utility(p, vec({1.0, 1.0}), 0.0);
  EXPECT_NEAR(rep.split[0], 0.0, 1e-15);
  EXPECT_NEAR(rep.split[1], 0.0, 1e-15);
  EXPECT_NEAR(rep.r, -2.0, 1e-15);
  EXPECT_NEAR(rep.y, 1.0, 1e-15);
  EXPECT_NEAR(rep.r_v[0], -1.0, 1e-15);
}

TEST(Representative, AsymmetricWeightsAgainstGrid) {
  const MakerPanel p({UtilitySpec::exponential(1.0), UtilitySpec::exponential(1.0)});
  const Vector v = vec({1.0, std::exp(1.0)});
  for (auto mode : {SolveMode::automatic, SolveMode::root_find}) {
    const auto rep = representative_utility(p, v, 0.0, mode);
    EXPECT_NEAR(rep.split[0], -0.5, 1e-12);
    EXPECT_NEAR(rep.split[1], 0.5, 1e-12);
    EXPECT_NEAR(rep.r, -2.0 * std::exp(0.5), 1e-12);
  }
  double x1 = 0.0;
  const double sup = grid_sup(p, v, 0.0, x1);
  EXPECT_NEAR(sup, -2.0 * std::exp(0.5), 1e-7);
  EXPECT_NEAR(x1, -0.5, 1e-4);
}

TEST(Representative, GenericPanelAgainstGrid) {
  const MakerPanel p({UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})});
  const Vector v = vec({0.5, 0.5});
  const auto rep = representative_utility(p, v, 1.0);
  EXPECT_NEAR(rep.split.sum(), 1.0, 1e-13);
  double x1 = 0.0;
  EXPECT_NEAR(rep.r, grid_sup(p, v, 1.0, x1), 1e-7);
  EXPECT_NEAR(rep.split[0], x1, 2e-4);
  // First-order condition: equal weighted marginals.
  EXPECT_NEAR(v[0] * p[0].marginal(rep.split[0]), v[1] * p[1].marginal(rep.split[1]), 1e-13);
}

TEST(Representative, ParetoAllocation) {
  const MakerPanel one({UtilitySpec::exponential(1.3)});
  EXPECT_DOUBLE_EQ(pareto_allocation(one, {vec({1.0}), 0.0, Vector()}, 2.2)[0], 2.2);

  const MakerPanel same({UtilitySpec::exponential(1.0), UtilitySpec::exponential(1.0)});
  const auto pi = pareto_allocation(same, {vec({1.0, 1.0}), 0.0, Vector()}, 2.0);
  EXPECT_NEAR(pi[0], 1.0, 1e-14);
  EXPECT_NEAR(pi[1], 1.0, 1e-14);

  // e^{-x1} = e^{-2 x2}, x1 + x2 = 0, solved by bisection.
  const MakerPanel mixed({UtilitySpec::exponential(1.0), UtilitySpec::exponential(2.0)});
  const auto p2 = pareto_allocation(mixed, {vec({1.0, 1.0}), 0.0, Vector()}, 0.0);
  double lo = -5.0, hi = 5.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::exp(-mid) - std::exp(2.0 * mid) > 0.0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(p2[0], lo, 1e-12);
  EXPECT_NEAR(std::exp(-p2[0]) - std::exp(-2.0 * p2[1]), 0.0, 1e-10);
}

TEST(Representative, WeightsFromAllocation) {
  const MakerPanel one({UtilitySpec::exponential(1.0)});
  EXPECT_DOUBLE_EQ(weights_from_allocation(one, vec({0.3}))[0], 1.0);
  const MakerPanel mixed({UtilitySpec::exponential(1.0), UtilitySpec::exponential(2.0)});
  const auto l = weights_from_allocation(mixed, vec({0.0, 0.0}));
  EXPECT_DOUBLE_EQ(l[0], 0.5);
  EXPECT_DOUBLE_EQ(l[1], 0.5);
  // The weights recover the allocation they came from.
  const MakerPanel generic({UtilitySpec::exponential(0.7), UtilitySpec::sum_exponential({1, 2}, {0.5, 2.0})});
  const Vector alpha = vec({0.4, -0.9});
  const auto w = weights_from_allocation(generic, alpha);
  const auto back = pareto_allocation(generic, {w, 0.0, Vector()}, alpha.sum());
  EXPECT_NEAR((back - alpha).cwiseAbs().maxCoeff(), 0.0, 1e-11);
}

TEST(Representative, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const MakerPanel p({UtilitySpec::exponential(0.8), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0}),
                      UtilitySpec::exponential(1.7)});
  const double h = 1e-5;
  for (int k = 0; k < 20; ++k) {
    Vector v(3);
    for (auto& x : v) x = std::exp(U(rng));
    const double x = 2.0 * U(rng);
    const auto rep = representative_utility(p, v, x);
    auto r = [&](const Vector& vv, double xx) { return representative_utility(p, vv, xx).r; };
    for (int m = 0; m < 3; ++m) {
      Vector up = v, dn = v;
      up[m] += h;
      dn[m] -= h;
      EXPECT_NEAR(rep.r_v[m], (r(up, x) - r(dn, x)) / (2 * h), 1e-6 * (1 + std::abs(rep.r_v[m])));
      const double fd_vx = (representative_utility(p, up, x).y - representative_utility(p, dn, x).y) / (2 * h);
      EXPECT_NEAR(rep.r_vx[m], fd_vx, 1e-6 * (1 + std::abs(fd_vx)));
      for (int l = 0; l < 3; ++l) {
        const double fd = (representative_utility(p, up, x).r_v[l] - representative_utility(p, dn, x).r_v[l]) / (2 * h);
        EXPECT_NEAR(rep.r_vv(l, m), fd, 1e-6 * (1 + std::abs(fd)));
      }
    }
    EXPECT_NEAR(rep.y, (r(v, x + h) - r(v, x - h)) / (2 * h), 1e-6 * rep.y);
    const double fd_xx = (representative_utility(p, v, x + h).y - representative_utility(p, v, x - h).y) / (2 * h);
    EXPECT_NEAR(rep.r_xx, fd_xx, 1e-6 * (1 + std::abs(fd_xx)));
  }
}

TEST(Representative, ClosedFormMatchesRootFinder) {
  const MakerPanel p({UtilitySpec::exponential(0.6), UtilitySpec::exponential(1.4), UtilitySpec::exponential(3.0)});
  const Vector v = vec({0.2, 0.5, 0.3});
  for (double x : {-3.0, 0.0, 2.5}) {
    const auto a = representative_utility(p, v, x, SolveMode::automatic);
    const auto b = representative_utility(p, v, x, SolveMode::root_find);
    EXPECT_NEAR(a.r, b.r, 1e-13 * std::abs(a.r));
    EXPECT_NEAR((a.split - b.split).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR((a.r_vv - b.r_vv).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(Representative, PositiveHomogeneity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> C(0.1, 10.0);
  const MakerPanel p({UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})});
  const Vector v = vec({0.3, 0.7});
  const double base = representative_utility(p, v, 0.4).r;
  for (int k = 0; k < 20; ++k) {
    const double c = C(rng);
    EXPECT_NEAR(representative_utility(p, c * v, 0.4).r, c * base, 1e-12 * std::abs(c * base));
  }
}

TEST(Representative, RejectsNonPositiveWeights) {
  const MakerPanel p({UtilitySpec::exponential(1.0), UtilitySpec::exponential(1.0)});
  EXPECT_THROW(representative_utility(p, vec({1.0, 0.0}), 0.0), DomainError);
  EXPECT_THROW(representative_utility(p, vec({1.0}), 0.0), std::invalid_argument);
}
