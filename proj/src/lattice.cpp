#include "indiff/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "indiff/errors.hpp"

namespace indiff {
namespace {

constexpr std::int64_t kMaxLeaves = 50'000'000;

std::int64_t ipow(std::int64_t b, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

Lattice::Lattice(const LatticeSpec& spec, std::vector<double> sigma0, std::vector<double> psi)
    : spec_(spec), sigma0_(std::move(sigma0)), psi_(std::move(psi)) {
  if (spec.steps < 1) throw TreeError("lattice: steps must be >= 1");
  if (spec.dim < 1 || spec.dim > 8) throw TreeError("lattice: dimension must be in [1, 8]");
  if (!(spec.horizon > 0.0)) throw TreeError("lattice: horizon must be positive");
  if (!(spec.p_up > 0.0 && spec.p_up < 1.0)) throw TreeError("lattice: p_up must lie in (0, 1)");
  const double leaves = std::pow(spec.steps + 1.0, spec.dim);
  if (leaves > static_cast<double>(kMaxLeaves)) throw TreeError("lattice: too many leaves");

  dt_ = spec.horizon / spec.steps;
  sqrt_dt_ = std::sqrt(dt_);
  leaves_ = ipow(spec.steps + 1, spec.dim);
  if (static_cast<std::int64_t>(sigma0_.size()) != leaves_)
    throw TreeError("lattice: sigma0 must have one value per leaf");
  if (psi_.size() % static_cast<std::size_t>(leaves_) != 0)
    throw TreeError("lattice: psi must hold whole blocks of leaf values");
  claims_ = static_cast<int>(psi_.size() / static_cast<std::size_t>(leaves_));
  for (double s : sigma0_)
    if (!std::isfinite(s)) throw TreeError("lattice: non-finite endowment value");
  for (double s : psi_)
    if (!std::isfinite(s)) throw TreeError("lattice: non-finite claim payoff");

  const double p = spec.p_up;
  rows_.resize(static_cast<std::size_t>(spec.steps) + 1);
  rows_[0] = {1.0};
  for (int n = 1; n <= spec.steps; ++n) {
    auto& row = rows_[static_cast<std::size_t>(n)];
    const auto& prev = rows_[static_cast<std::size_t>(n) - 1];
    row.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (int l = 0; l <= n; ++l) {
      double w = 0.0;
      if (l < n) w += (1.0 - p) * prev[static_cast<std::size_t>(l)];
      if (l > 0) w += p * prev[static_cast<std::size_t>(l) - 1];
      row[static_cast<std::size_t>(l)] = w;
    }
  }

  if (spec.validate) {
    const auto r = moment_errors();
    const double tol = 1e-14 * std::max(1.0, dt_);
    if (r.probability_error > 1e-14 || r.mean_error > tol || r.variance_error > tol)
      throw TreeError("lattice: increments are not moment matched (mean error " +
                      std::to_string(r.mean_error) + ", variance error " +
                      std::to_string(r.variance_error) + ")");
  }
}

Lattice Lattice::from_expressions(const LatticeSpec& spec, const std::string& sigma0,
                                  const std::vector<std::string>& psi) {
  if (spec.steps < 1 || spec.dim < 1 || spec.dim > 8) throw TreeError("lattice: bad shape");
  const auto s0 = Expression::parse(sigma0);
  std::vector<Expression> ps;
  for (const auto& p : psi) ps.push_back(Expression::parse(p));
  auto check_dim = [&](const Expression& e) {
    if (e.max_dimension() > spec.dim)
      throw TreeError("expression '" + e.text() + "' references B" +
                      std::to_string(e.max_dimension()) + " but the lattice has dimension " +
                      std::to_string(spec.dim));
  };
  check_dim(s0);
  for (const auto& e : ps) check_dim(e);

  const std::int64_t L = ipow(spec.steps + 1, spec.dim);
  if (static_cast<double>(L) > static_cast<double>(kMaxLeaves)) throw TreeError("lattice: too many leaves");
  const double sdt = std::sqrt(spec.horizon / spec.steps);
  std::vector<double> sig(static_cast<std::size_t>(L));
  std::vector<double> pv(static_cast<std::size_t>(L) * ps.size());
  std::vector<double> B(static_cast<std::size_t>(spec.dim));
  for (std::int64_t leaf = 0; leaf < L; ++leaf) {
    std::int64_t rem = leaf;
    for (int i = 0; i < spec.dim; ++i) {
      const auto j = rem % (spec.steps + 1);
      rem /= spec.steps + 1;
      B[static_cast<std::size_t>(i)] = static_cast<double>(2 * j - spec.steps) * sdt;
    }
    ExpressionContext ctx{B, spec.horizon, spec.horizon};
    sig[static_cast<std::size_t>(leaf)] = s0(ctx);
    for (std::size_t j = 0; j < ps.size(); ++j)
      pv[j * static_cast<std::size_t>(L) + static_cast<std::size_t>(leaf)] = ps[j](ctx);
  }
  return Lattice(spec, std::move(sig), std::move(pv));
}

std::int64_t Lattice::nodes_at(int level) const {
  if (level < 0 || level > spec_.steps) throw TreeError("lattice: level out of range");
  return ipow(level + 1, spec_.dim);
}

bool Lattice::contains(NodeRef n) const noexcept {
  if (n.level < 0 || n.level > spec_.steps || n.index < 0) return false;
  return n.index < ipow(n.level + 1, spec_.dim);
}

void Lattice::check_node(NodeRef n) const {
  if (!contains(n))
    throw TreeError("lattice: node (" + std::to_string(n.level) + ", " + std::to_string(n.index) +
                    ") does not exist");
}

std::vector<int> Lattice::up_counts(NodeRef n) const {
  check_node(n);
  std::vector<int> c(static_cast<std::size_t>(spec_.dim));
  std::int64_t rem = n.index;
  for (auto& ci : c) {
    ci = static_cast<int>(rem % (n.level + 1));
    rem /= n.level + 1;
  }
  return c;
}

NodeRef Lattice::from_counts(int level, std::span<const int> counts) const {
  if (static_cast<int>(counts.size()) != spec_.dim) throw TreeError("lattice: count dimension mismatch");
  std::int64_t idx = 0;
  std::int64_t stride = 1;
  for (int c : counts) {
    if (c < 0 || c > level) throw TreeError("lattice: up count out of range");
    idx += c * stride;
    stride *= level + 1;
  }
  return {level, idx};
}

NodeRef Lattice::child(NodeRef n, int edge) const {
  if (n.level >= spec_.steps) throw TreeError("lattice: a leaf has no children");
  if (edge < 0 || edge >= child_count()) throw TreeError("lattice: edge out of range");
  auto c = up_counts(n);
  for (int i = 0; i < spec_.dim; ++i)
    if (edge & (1 << i)) ++c[static_cast<std::size_t>(i)];
  return from_counts(n.level + 1, c);
}

double Lattice::edge_probability(int edge) const {
  double p = 1.0;
  for (int i = 0; i < spec_.dim; ++i) p *= (edge & (1 << i)) ? spec_.p_up : 1.0 - spec_.p_up;
  return p;
}

Vector Lattice::edge_increment(int edge) const {
  Vector db(spec_.dim);
  for (int i = 0; i < spec_.dim; ++i) db[i] = (edge & (1 << i)) ? sqrt_dt_ : -sqrt_dt_;
  return db;
}

Vector Lattice::brownian(NodeRef n) const {
  const auto c = up_counts(n);
  Vector b(spec_.dim);
  for (int i = 0; i < spec_.dim; ++i) b[i] = (2.0 * c[static_cast<std::size_t>(i)] - n.level) * sqrt_dt_;
  return b;
}

std::int64_t Lattice::leaf_index(NodeRef n) const {
  if (!is_leaf(n)) throw TreeError("lattice: not a leaf");
  check_node(n);
  return n.index;
}

std::span<const double> Lattice::psi(int j) const {
  if (j < 0 || j >= claims_) throw TreeError("lattice: claim index out of range");
  return std::span<const double>(psi_).subspan(static_cast<std::size_t>(j) * static_cast<std::size_t>(leaves_),
                                               static_cast<std::size_t>(leaves_));
}

Lattice::Span Lattice::reachable_span(NodeRef n) const {
  if (spec_.dim != 1) throw TreeError("lattice: contiguous spans exist only for d = 1");
  check_node(n);
  return {n.index, rows_[static_cast<std::size_t>(spec_.steps - n.level)]};
}

void Lattice::reachable(NodeRef n, std::vector<std::int64_t>& leaves, std::vector<double>& weights) const {
  const auto c = up_counts(n);
  const int rest = spec_.steps - n.level;
  const auto& row = rows_[static_cast<std::size_t>(rest)];
  const std::int64_t per_dim = rest + 1;
  const std::int64_t total = ipow(per_dim, spec_.dim);
  leaves.resize(static_cast<std::size_t>(total));
  weights.resize(static_cast<std::size_t>(total));
  for (std::int64_t k = 0; k < total; ++k) {
    std::int64_t rem = k;
    std::int64_t leaf = 0;
    std::int64_t stride = 1;
    double w = 1.0;
    for (int i = 0; i < spec_.dim; ++i) {
      const auto li = rem % per_dim;
      rem /= per_dim;
      w *= row[static_cast<std::size_t>(li)];
      leaf += (c[static_cast<std::size_t>(i)] + li) * stride;
      stride *= spec_.steps + 1;
    }
    leaves[static_cast<std::size_t>(k)] = leaf;
    weights[static_cast<std::size_t>(k)] = w;
  }
}

Lattice::MomentReport Lattice::moment_errors() const {
  // Every node shares the same edge distribution, so one check suffices.
  MomentReport r;
  const int d = spec_.dim;
  Vector mean = Vector::Zero(d);
  Matrix second = Matrix::Zero(d, d);
  double total = 0.0;
  for (int e = 0; e < child_count(); ++e) {
    const double p = edge_probability(e);
    const Vector db = edge_increment(e);
    total += p;
    mean += p * db;
    second += p * db * db.transpose();
  }
  r.probability_error = std::abs(total - 1.0);
  r.mean_error = mean.cwiseAbs().maxCoeff();
  r.variance_error = (second - dt_ * Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  return r;
}

}  // namespace indiff
