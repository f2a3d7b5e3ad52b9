#include "indiff/field.hpp"

#include <bit>
#include <cmath>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "indiff/errors.hpp"
#include "indiff/simd/kernels.hpp"

namespace indiff {
namespace {

struct Key {
  int level;
  std::int64_t index;
  bool hessian;
  std::vector<std::uint64_t> bits;

  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t x) {
      h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(k.level));
    mix(static_cast<std::uint64_t>(k.index));
    mix(k.hessian ? 1u : 0u);
    for (auto b : k.bits) mix(b);
    return static_cast<std::size_t>(h);
  }
};

void push_bits(std::vector<std::uint64_t>& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::bit_cast<std::uint64_t>(v[i]));
}

// Exponential moments of the leaf payoff at one (node, q):
//   Z = E[exp(-(Sigma0 + <q,psi>)/Gamma)],
//   g_j = dZ/dq_j / Z,  h_ij = d2Z/dq_i dq_j / Z.
struct Moments {
  double log_z = 0.0;
  Vector g;
  Matrix h;
};

struct Scratch {
  std::vector<double> z, e, w, sigma, psi;
  std::vector<std::int64_t> leaves;
  std::vector<double> weights;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

struct FieldEvaluator::Impl {
  mutable std::mutex mutex;
  std::unordered_map<Key, FieldValue, KeyHash> values;
  std::unordered_map<Key, Moments, KeyHash> moments;
};

Vector FieldValue::gradient() const {
  Vector g(grad_v.size() + 1 + grad_q.size());
  g << grad_v, grad_x, grad_q;
  return g;
}

FieldEvaluator::FieldEvaluator(const MakerPanel& panel, const Lattice& lattice, FieldOptions options)
    : panel_(panel), lattice_(lattice), options_(options), impl_(std::make_unique<Impl>()) {}

FieldEvaluator::~FieldEvaluator() = default;

bool FieldEvaluator::exponential_fast_path() const noexcept {
  return panel_.all_exponential() && options_.mode == SolveMode::automatic;
}

void FieldEvaluator::check_point(const PrimalPoint& a) const {
  if (a.v.size() != makers()) throw std::invalid_argument("field: weight dimension mismatch");
  if (a.q.size() != claims()) throw std::invalid_argument("field: position dimension mismatch");
  for (Eigen::Index m = 0; m < a.v.size(); ++m)
    if (!(a.v[m] > 0.0)) throw DomainError("field: weights must be positive");
  if (!std::isfinite(a.x) || !a.q.allFinite()) throw DomainError("field: non-finite cash or position");
}

void FieldEvaluator::clear_cache() const {
  std::lock_guard lock(impl_->mutex);
  impl_->values.clear();
  impl_->moments.clear();
}

std::size_t FieldEvaluator::cache_size() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->values.size() + impl_->moments.size();
}

namespace {

// Per-leaf integrand and its derivatives through Sigma = Sigma0 + x + <q,psi>.
void accumulate_leaf(const Representative& rep, double w, const double* psi, std::int64_t leaf,
                     std::int64_t L, int J, bool hessian, FieldValue& out) {
  const int M = static_cast<int>(rep.r_v.size());
  out.value += w * rep.r;
  out.grad_v += w * rep.r_v;
  out.grad_x += w * rep.y;
  for (int j = 0; j < J; ++j) out.grad_q[j] += w * rep.y * psi[j * L + leaf];
  if (!hessian) return;
  auto& Hs = out.hessian;
  Hs.topLeftCorner(M, M) += w * rep.r_vv;
  Hs.block(0, M, M, 1) += w * rep.r_vx;
  Hs(M, M) += w * rep.r_xx;
  for (int j = 0; j < J; ++j) {
    const double pj = psi[j * L + leaf];
    Hs.block(0, M + 1 + j, M, 1) += (w * pj) * rep.r_vx;
    Hs(M, M + 1 + j) += w * rep.r_xx * pj;
    for (int i = 0; i <= j; ++i) Hs(M + 1 + i, M + 1 + j) += w * rep.r_xx * psi[i * L + leaf] * pj;
  }
}

void symmetrize_upper(Matrix& h) {
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = j + 1; i < h.rows(); ++i) h(i, j) = h(j, i);
}

FieldValue blank(int M, int J, bool hessian) {
  FieldValue f;
  f.grad_v = Vector::Zero(M);
  f.grad_q = Vector::Zero(J);
  if (hessian) f.hessian = Matrix::Zero(M + 1 + J, M + 1 + J);
  return f;
}

Moments compute_moments(const Lattice& lat, NodeRef node, const Vector& q, double Gamma) {
  const auto& k = simd::kernels();
  auto& s = scratch();
  const int J = lat.claims();
  const std::int64_t L = lat.leaf_count();

  std::size_t n = 0;
  const double* sigma = nullptr;
  const double* w = nullptr;
  std::vector<const double*> psi(static_cast<std::size_t>(J));
  if (lat.dim() == 1) {
    const auto span = lat.reachable_span(node);
    n = span.weights.size();
    w = span.weights.data();
    sigma = lat.sigma0().data() + span.first;
    for (int j = 0; j < J; ++j) psi[static_cast<std::size_t>(j)] = lat.psi(j).data() + span.first;
  } else {
    lat.reachable(node, s.leaves, s.weights);
    n = s.leaves.size();
    w = s.weights.data();
    s.sigma.resize(n);
    s.psi.resize(n * static_cast<std::size_t>(J));
    const auto sig0 = lat.sigma0();
    const auto ps = lat.psi();
    for (std::size_t i = 0; i < n; ++i) {
      const auto leaf = static_cast<std::size_t>(s.leaves[i]);
      s.sigma[i] = sig0[leaf];
      for (int j = 0; j < J; ++j)
        s.psi[static_cast<std::size_t>(j) * n + i] = ps[static_cast<std::size_t>(j) * static_cast<std::size_t>(L) + leaf];
    }
    sigma = s.sigma.data();
    for (int j = 0; j < J; ++j) psi[static_cast<std::size_t>(j)] = s.psi.data() + static_cast<std::size_t>(j) * n;
  }

  s.z.assign(sigma, sigma + n);
  for (int j = 0; j < J; ++j)
    if (q[j] != 0.0) k.axpy(q[j], psi[static_cast<std::size_t>(j)], s.z.data(), n);
  const double scale = -1.0 / Gamma;
  for (auto& zi : s.z) zi *= scale;
  const double shift = k.max(s.z.data(), n);
  s.e.resize(n);
  const double m0 = k.exp_weighted(w, s.z.data(), shift, s.e.data(), n);

  Moments out;
  out.log_z = shift + std::log(m0);
  out.g.resize(J);
  out.h.resize(J, J);
  for (int j = 0; j < J; ++j) {
    const auto* pj = psi[static_cast<std::size_t>(j)];
    out.g[j] = scale * k.dot(s.e.data(), pj, n) / m0;
    for (int i = 0; i <= j; ++i) {
      const double m2 = k.dot3(s.e.data(), psi[static_cast<std::size_t>(i)], pj, n);
      out.h(i, j) = out.h(j, i) = scale * scale * m2 / m0;
    }
  }
  return out;
}

FieldValue from_moments(const MakerPanel& panel, const PrimalPoint& a, const Moments& mo, bool hessian) {
  const int M = panel.size();
  const int J = static_cast<int>(a.q.size());
  const double Gamma = panel.aggregate_tolerance();
  Vector beta(M);
  double log_prod = 0.0;
  for (int m = 0; m < M; ++m) {
    beta[m] = 1.0 / (panel[m].gamma() * Gamma);
    log_prod += beta[m] * std::log(a.v[m]);
  }
  const double F = -Gamma * std::exp(log_prod - a.x / Gamma + mo.log_z);

  FieldValue f = blank(M, J, hessian);
  f.value = F;
  for (int m = 0; m < M; ++m) f.grad_v[m] = F * beta[m] / a.v[m];
  f.grad_x = -F / Gamma;
  f.grad_q = F * mo.g;
  if (!hessian) return f;

  auto& H = f.hessian;
  for (int l = 0; l < M; ++l) {
    for (int m = 0; m < M; ++m) {
      H(l, m) = F * beta[l] * beta[m] / (a.v[l] * a.v[m]);
      if (l == m) H(l, m) -= F * beta[m] / (a.v[m] * a.v[m]);
    }
    H(l, M) = H(M, l) = -F * beta[l] / (a.v[l] * Gamma);
    for (int j = 0; j < J; ++j) H(l, M + 1 + j) = H(M + 1 + j, l) = F * beta[l] * mo.g[j] / a.v[l];
  }
  H(M, M) = F / (Gamma * Gamma);
  for (int j = 0; j < J; ++j) {
    H(M, M + 1 + j) = H(M + 1 + j, M) = -F * mo.g[j] / Gamma;
    for (int i = 0; i < J; ++i) H(M + 1 + i, M + 1 + j) = F * mo.h(i, j);
  }
  return f;
}

}  // namespace

FieldValue FieldEvaluator::terminal(const PrimalPoint& a, std::int64_t leaf, bool hessian) const {
  check_point(a);
  if (leaf < 0 || leaf >= lattice_.leaf_count()) throw TreeError("field: leaf index out of range");
  const int J = claims();
  const auto psi = lattice_.psi();
  double sigma = lattice_.sigma0()[static_cast<std::size_t>(leaf)] + a.x;
  for (int j = 0; j < J; ++j)
    sigma += a.q[j] * psi[static_cast<std::size_t>(j) * static_cast<std::size_t>(lattice_.leaf_count()) +
                          static_cast<std::size_t>(leaf)];
  const auto rep = representative_utility(panel_, a.v, sigma, options_.mode);
  FieldValue f = blank(makers(), J, hessian);
  accumulate_leaf(rep, 1.0, psi.data(), leaf, lattice_.leaf_count(), J, hessian, f);
  if (hessian) symmetrize_upper(f.hessian);
  return f;
}

FieldValue FieldEvaluator::evaluate(const PrimalPoint& a, NodeRef node, bool hessian) const {
  check_point(a);
  if (!lattice_.contains(node)) throw TreeError("field: node not in lattice");
  if (lattice_.is_leaf(node) && !exponential_fast_path()) return terminal(a, node.index, hessian);

  if (exponential_fast_path()) {
    Key key{node.level, node.index, false, {}};
    push_bits(key.bits, a.q);
    if (options_.cache) {
      std::lock_guard lock(impl_->mutex);
      auto it = impl_->moments.find(key);
      if (it != impl_->moments.end()) return from_moments(panel_, a, it->second, hessian);
    }
    const auto mo = compute_moments(lattice_, node, a.q, panel_.aggregate_tolerance());
    if (options_.cache) {
      std::lock_guard lock(impl_->mutex);
      if (impl_->moments.size() >= options_.cache_capacity) impl_->moments.clear();
      impl_->moments.emplace(std::move(key), mo);
    }
    return from_moments(panel_, a, mo, hessian);
  }

  Key key{node.level, node.index, hessian, {}};
  if (options_.cache) {
    push_bits(key.bits, a.v);
    key.bits.push_back(std::bit_cast<std::uint64_t>(a.x));
    push_bits(key.bits, a.q);
    std::lock_guard lock(impl_->mutex);
    auto it = impl_->values.find(key);
    if (it != impl_->values.end()) return it->second;
  }

  const int J = claims();
  const std::int64_t L = lattice_.leaf_count();
  const auto sig0 = lattice_.sigma0();
  const auto psi = lattice_.psi();
  auto& s = scratch();
  std::vector<std::int64_t> leaves;
  std::vector<double> weights;
  if (lattice_.dim() == 1) {
    const auto span = lattice_.reachable_span(node);
    leaves.resize(span.weights.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i] = span.first + static_cast<std::int64_t>(i);
    weights.assign(span.weights.begin(), span.weights.end());
  } else {
    lattice_.reachable(node, s.leaves, s.weights);
    leaves = s.leaves;
    weights = s.weights;
  }

  FieldValue f = blank(makers(), J, hessian);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto leaf = leaves[i];
    double sigma = sig0[static_cast<std::size_t>(leaf)] + a.x;
    for (int j = 0; j < J; ++j)
      sigma += a.q[j] * psi[static_cast<std::size_t>(j) * static_cast<std::size_t>(L) + static_cast<std::size_t>(leaf)];
    const auto rep = representative_utility(panel_, a.v, sigma, options_.mode);
    accumulate_leaf(rep, weights[i], psi.data(), leaf, L, J, hessian, f);
  }
  if (hessian) symmetrize_upper(f.hessian);

  if (options_.cache) {
    std::lock_guard lock(impl_->mutex);
    if (impl_->values.size() >= options_.cache_capacity) impl_->values.clear();
    impl_->values.emplace(std::move(key), f);
  }
  return f;
}

Integrand FieldEvaluator::integrand(const PrimalPoint& a, NodeRef node) const {
  if (lattice_.is_leaf(node)) throw TreeError("integrand: node is terminal");
  const int d = lattice_.dim();
  const int M = makers();
  const auto here = evaluate(a, node);

  Matrix gram = Matrix::Zero(d, d);
  Vector rhs = Vector::Zero(d);
  Matrix rhs_v = Matrix::Zero(d, M);
  const int E = lattice_.child_count();
  std::vector<double> dF(static_cast<std::size_t>(E));
  std::vector<Vector> dFv(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) {
    const double p = lattice_.edge_probability(e);
    const Vector db = lattice_.edge_increment(e);
    const auto child = evaluate(a, lattice_.child(node, e));
    dF[static_cast<std::size_t>(e)] = child.value - here.value;
    dFv[static_cast<std::size_t>(e)] = child.grad_v - here.grad_v;
    gram += p * db * db.transpose();
    rhs += p * dF[static_cast<std::size_t>(e)] * db;
    rhs_v += p * db * dFv[static_cast<std::size_t>(e)].transpose();
  }
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
    throw TreeError("integrand: Brownian increment matrix is rank deficient");

  Integrand out;
  out.H = ldlt.solve(rhs);
  out.dHdv = ldlt.solve(rhs_v).transpose();
  for (int e = 0; e < E; ++e) {
    const Vector db = lattice_.edge_increment(e);
    out.residual = std::max(out.residual, std::abs(dF[static_cast<std::size_t>(e)] - out.H.dot(db)));
    out.dHdv_residual = std::max(
        out.dHdv_residual, (dFv[static_cast<std::size_t>(e)] - out.dHdv * db).cwiseAbs().maxCoeff());
  }
  return out;
}

MarginalPrice FieldEvaluator::marginal_price(const PrimalPoint& a, NodeRef node) const {
  const auto f = evaluate(a, node);
  MarginalPrice out;
  out.S = f.grad_q / f.grad_x;

  // Pricing density proportional to u_1'(pi^1(a)) at each reachable leaf.
  std::vector<std::int64_t> leaves;
  std::vector<double> weights;
  lattice_.reachable(node, leaves, weights);
  const int J = claims();
  const std::int64_t L = lattice_.leaf_count();
  const auto sig0 = lattice_.sigma0();
  const auto psi = lattice_.psi();
  double mass = 0.0;
  Vector acc = Vector::Zero(J);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto leaf = static_cast<std::size_t>(leaves[i]);
    double sigma = sig0[leaf] + a.x;
    for (int j = 0; j < J; ++j) sigma += a.q[j] * psi[static_cast<std::size_t>(j) * static_cast<std::size_t>(L) + leaf];
    const auto alloc = pareto_allocation(panel_, a, sigma);
    const double density = weights[i] * panel_[0].marginal(alloc[0]);
    mass += density;
    for (int j = 0; j < J; ++j) acc[j] += density * psi[static_cast<std::size_t>(j) * static_cast<std::size_t>(L) + leaf];
  }
  out.S_density = acc / mass;
  out.deviation = J > 0 ? (out.S - out.S_density).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace indiff
