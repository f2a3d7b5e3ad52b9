#include "indiff/strategy.hpp"

#include <algorithm>
#include <cmath>

#include "indiff/errors.hpp"

namespace indiff {
namespace {

struct Zeta {
  Vector w;
  double x = 0.0;
  Vector q;
};

double leaf_claims(const Lattice& lat, NodeRef node, const Vector& q) {
  const auto leaf = static_cast<std::size_t>(lat.leaf_index(node));
  const auto L = static_cast<std::size_t>(lat.leaf_count());
  double s = 0.0;
  for (int j = 0; j < lat.claims(); ++j) s += q[j] * lat.psi()[static_cast<std::size_t>(j) * L + leaf];
  return s;
}

double scaled_inf(const Vector& d, const Vector& ref) {
  return d.cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff());
}

std::string where(const PathTree& tree, std::int64_t i) {
  const auto n = tree[i].lattice;
  return " at path node " + std::to_string(i) + " (level " + std::to_string(n.level) + ", lattice index " +
         std::to_string(n.index) + ")";
}

}  // namespace

SimpleStrategy SimpleStrategy::on_grid(std::vector<int> levels,
                                       std::function<Vector(int, const Vector&, double)> theta) {
  std::sort(levels.begin(), levels.end());
  SimpleStrategy s;
  s.rule = [levels = std::move(levels), theta = std::move(theta)](const PathTree& tree,
                                                                  std::int64_t i) -> std::optional<Vector> {
    const int k = tree.level(i);
    if (!std::binary_search(levels.begin(), levels.end(), k)) return std::nullopt;
    const auto& lat = tree.lattice();
    return theta(k, lat.brownian(tree[i].lattice), lat.time(k));
  };
  return s;
}

SimpleStrategy SimpleStrategy::constant(const Vector& q) {
  SimpleStrategy s;
  s.rule = [q](const PathTree& tree, std::int64_t i) -> std::optional<Vector> {
    if (tree.level(i) == 0) return q;
    return std::nullopt;
  };
  return s;
}

MarketStatePath execute_simple(const ConjugateSolver& solver, const PathTree& tree, const Vector& lambda0,
                               const SimpleStrategy& strategy, const EngineOptions& options) {
  const auto& field = solver.field();
  const auto& lat = tree.lattice();
  const int J = field.claims();
  if (lambda0.size() != field.makers() || (lambda0.array() <= 0.0).any())
    throw DomainError("execute_simple: initial weights must be positive");
  const Vector lambda = normalize_simplex(lambda0);

  MarketStatePath out;
  out.states.resize(static_cast<std::size_t>(tree.size()));
  std::vector<Zeta> post(static_cast<std::size_t>(tree.size()));
  std::vector<Vector> u_post(static_cast<std::size_t>(tree.size()));
  std::vector<SaddleResult> warm(static_cast<std::size_t>(tree.size()));
  const Zeta zeta0{lambda, 0.0, Vector::Zero(J)};

  for (std::int64_t i = 0; i < tree.size(); ++i) {
    const auto& pn = tree[i];
    const auto node = pn.lattice;
    const Zeta& z = pn.parent < 0 ? zeta0 : post[static_cast<std::size_t>(pn.parent)];
    auto& st = out.states[static_cast<std::size_t>(i)];
    st.U = field.evaluate({z.w, z.x, z.q}, node).grad_v;
    st.W = z.w;
    st.X = z.x;
    st.Q = z.q;

    SaddleResult seed;
    if (pn.parent >= 0) seed = warm[static_cast<std::size_t>(pn.parent)];
    if (seed.w.size() == 0) {
      seed.w = z.w;
      seed.x = z.x;
    }

    if (lat.is_leaf(node)) {
      st.V = -(st.X + leaf_claims(lat, node, st.Q));
      st.has_V = true;
    } else if (options.compute_gain) {
      try {
        st.V = -solver.solve({st.U, 1.0, Vector::Zero(J)}, node, &seed).x;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + where(tree, i), e.residual(), e.iterations());
      }
      st.has_V = true;
    }

    post[static_cast<std::size_t>(i)] = z;
    u_post[static_cast<std::size_t>(i)] = st.U;
    warm[static_cast<std::size_t>(i)] = seed;
    if (lat.is_leaf(node) || !strategy.rule) continue;

    auto theta = strategy.rule(tree, i);
    if (!theta) continue;
    if (theta->size() != J) throw std::invalid_argument("execute_simple: position dimension mismatch");
    if (*theta == z.q) continue;

    SaddleResult s;
    try {
      s = solver.solve({st.U, 1.0, *theta}, node, &seed);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + where(tree, i), e.residual(), e.iterations());
    }
    Zeta next{normalize_simplex(s.v), s.x, *theta};
    const Vector after = field.evaluate({next.w, next.x, next.q}, node).grad_v;
    st.rebalanced = true;
    st.preservation = (after - st.U).cwiseAbs().maxCoeff();
    out.max_preservation = std::max(out.max_preservation, st.preservation);
    post[static_cast<std::size_t>(i)] = std::move(next);
    u_post[static_cast<std::size_t>(i)] = after;
    warm[static_cast<std::size_t>(i)] = std::move(s);
  }

  if (options.check_martingale && tree.complete()) {
    for (std::int64_t i = 0; i < tree.size(); ++i) {
      const auto& pn = tree[i];
      if (pn.child_count == 0) continue;
      Vector mean = Vector::Zero(field.makers());
      for (int c = 0; c < pn.child_count; ++c) {
        const auto ci = pn.first_child + c;
        mean += lat.edge_probability(tree[ci].edge) * out.states[static_cast<std::size_t>(ci)].U;
      }
      const auto& ref = u_post[static_cast<std::size_t>(i)];
      out.martingale = std::max(out.martingale, scaled_inf(mean - ref, ref));
    }
  }
  return out;
}

double utility_preservation_residual(const MarketStatePath& path) {
  double r = 0.0;
  for (const auto& s : path.states)
    if (s.rebalanced) r = std::max(r, s.preservation);
  return r;
}

Matrix kernel_K(const ConjugateSolver& solver, const Vector& u, const Vector& q, NodeRef node,
                const SaddleResult* warm) {
  const auto s = solver.solve({u, 1.0, q}, node, warm);
  return solver.field().integrand({s.w, s.x, q}, node).dHdv;
}

MarketStatePath simulate_sde(const ConjugateSolver& solver, const PathTree& tree, const Vector& U0,
                             const PositionProcess& Q, const EngineOptions& options) {
  const auto& field = solver.field();
  const auto& lat = tree.lattice();
  const int J = field.claims();
  const int M = field.makers();
  if (U0.size() != M || (U0.array() >= 0.0).any())
    throw DomainError("simulate_sde: initial indirect utilities must be negative");
  const double eps = options.explode_ratio * U0.cwiseAbs().maxCoeff();

  MarketStatePath out;
  out.states.resize(static_cast<std::size_t>(tree.size()));
  std::vector<Vector> q_next(static_cast<std::size_t>(tree.size()));
  std::vector<SaddleResult> warm(static_cast<std::size_t>(tree.size()));
  std::vector<bool> alive(static_cast<std::size_t>(tree.size()), false);
  out.states[0].U = U0;
  alive[0] = true;

  for (std::int64_t i = 0; i < tree.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (!alive[idx]) continue;
    const auto& pn = tree[i];
    const auto node = pn.lattice;
    auto& st = out.states[idx];
    st.Q = pn.parent < 0 ? Vector::Zero(J) : q_next[static_cast<std::size_t>(pn.parent)];
    const SaddleResult* seed = pn.parent < 0 ? nullptr : &warm[static_cast<std::size_t>(pn.parent)];

    SaddleResult s;
    try {
      s = solver.solve({st.U, 1.0, st.Q}, node, seed);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + where(tree, i), e.residual(), e.iterations());
    }
    st.W = normalize_simplex(s.v);
    st.X = s.x;
    if (lat.is_leaf(node)) {
      st.V = -(st.X + leaf_claims(lat, node, st.Q));
      st.has_V = true;
      continue;
    }
    if (options.compute_gain) {
      st.V = st.Q.isZero(0.0) ? -s.x : -solver.solve({st.U, 1.0, Vector::Zero(J)}, node, &s).x;
      st.has_V = true;
    }

    Vector qn = Q ? Q(tree, i) : Vector::Zero(J);
    if (qn.size() != J) throw std::invalid_argument("simulate_sde: position dimension mismatch");
    if (qn != st.Q) s = solver.solve({st.U, 1.0, qn}, node, &s);
    const Matrix K = field.integrand({s.w, s.x, qn}, node).dHdv;
    q_next[idx] = qn;
    warm[idx] = s;

    if (options.check_martingale) {
      Vector mean = Vector::Zero(M);
      for (int e = 0; e < lat.child_count(); ++e)
        mean += lat.edge_probability(e) * (st.U + K * lat.edge_increment(e));
      out.martingale = std::max(out.martingale, scaled_inf(mean - st.U, st.U));
    }

    for (int c = 0; c < pn.child_count; ++c) {
      const auto ci = pn.first_child + c;
      auto& child = out.states[static_cast<std::size_t>(ci)];
      child.U = st.U + K * lat.edge_increment(tree[ci].edge);
      if (child.U.maxCoeff() > -eps) {
        child.exploded = true;
        if (!out.explosion.exploded) {
          out.explosion.exploded = true;
          out.explosion.node = ci;
          out.explosion.time = lat.time(tree[ci].lattice.level);
        }
        continue;
      }
      alive[static_cast<std::size_t>(ci)] = true;
    }
  }
  return out;
}

StateRecovery state_from_U(const ConjugateSolver& solver, const Vector& U, const Vector& Q, NodeRef node) {
  const int J = solver.field().claims();
  const auto s = solver.solve({U, 1.0, Q}, node);
  StateRecovery r;
  r.W = normalize_simplex(s.v);
  r.X = s.x;
  r.V = Q.isZero(0.0) ? -s.x : -solver.solve({U, 1.0, Vector::Zero(J)}, node, &s).x;
  return r;
}

CashBounds cash_bounds(const ConjugateSolver& solver, const Vector& U, double X, const Vector& Q,
                       NodeRef node, double c) {
  const int M = static_cast<int>(U.size());
  CashBounds b;
  b.middle = solver.solve({Vector::Constant(M, -1.0), 1.0, Q}, node).x - X;
  for (int m = 0; m < M; ++m) {
    const double a = -U[m];
    const double up = std::log(std::max(a, 1.0));
    const double down = std::log(std::min(a, 1.0));
    b.lower += up / c + c * down;
    b.upper += down / c + c * up;
  }
  return b;
}

NoArbitrageReport no_arbitrage(const MakerPanel& panel, const PathTree& tree, const MarketStatePath& path,
                               const Vector& lambda0) {
  if (!tree.complete()) throw TreeError("no_arbitrage: needs a complete path tree");
  const auto& lat = tree.lattice();
  const Vector lambda = normalize_simplex(lambda0);
  NoArbitrageReport r;
  for (std::int64_t i = 0; i < tree.size(); ++i) {
    if (!tree.is_leaf(i)) continue;
    const auto& st = path.states[static_cast<std::size_t>(i)];
    if (!st.has_V) throw TreeError("no_arbitrage: terminal gain missing");
    const double sigma = lat.sigma0()[static_cast<std::size_t>(lat.leaf_index(tree[i].lattice))];
    const double p = tree[i].probability;
    r.before += p * representative_utility(panel, lambda, sigma).r;
    r.after += p * representative_utility(panel, lambda, sigma - st.V).r;
    r.max_abs_gain = std::max(r.max_abs_gain, std::abs(st.V));
  }
  return r;
}

}  // namespace indiff
