#include "indiff/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "indiff/bachelier.hpp"
#include "indiff/errors.hpp"
#include "indiff/experiment.hpp"
#include "indiff/saddle.hpp"
#include "indiff/strategy.hpp"

namespace indiff {
namespace {

constexpr std::int64_t kFullTreeLimit = std::int64_t{1} << 17;

struct Context {
  const ExperimentConfig& cfg;
  const VerifyOptions& opt;
  MakerPanel panel;
  Lattice lattice;
  FieldEvaluator field;
  ConjugateSolver solver;
  std::mt19937_64 rng;
  double sign;

  static LatticeSpec spec_for(const ExperimentConfig& cfg, const VerifyOptions& opt) {
    auto s = cfg.tree.spec;
    if (opt.corruption == Corruption::probabilities) {
      s.p_up = 0.6;
      s.validate = false;
    }
    return s;
  }
  static SaddleOptions saddle_for(const ExperimentConfig& cfg, const VerifyOptions& opt) {
    SaddleOptions s;
    s.tolerance = cfg.engine.tolerance;
    s.max_iterations = cfg.engine.max_iterations;
    if (opt.corruption == Corruption::tolerance) {
      s.tolerance = 1e-1;
      s.max_iterations = 1;
      s.polish_steps = 0;
      s.fixed_point_iterations = 0;
      s.multistarts = 0;
    }
    return s;
  }

  Context(const ExperimentConfig& c, const VerifyOptions& o)
      : cfg(c), opt(o), panel(make_panel(c.panel)),
        lattice(Lattice::from_expressions(spec_for(c, o), c.tree.sigma0, c.tree.psi)),
        field(panel, lattice), solver(field, saddle_for(c, o)), rng(o.seed),
        sign(o.corruption == Corruption::sign ? -1.0 : 1.0) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

  NodeRef node(bool allow_leaf = true) {
    const int top = allow_leaf ? lattice.steps() : lattice.steps() - 1;
    const int level = std::uniform_int_distribution<int>(0, top)(rng);
    const auto idx = std::uniform_int_distribution<std::int64_t>(0, lattice.nodes_at(level) - 1)(rng);
    return {level, idx};
  }

  PrimalPoint primal() {
    PrimalPoint a;
    a.v.resize(panel.size());
    for (auto& x : a.v) x = std::exp(uniform(-1.0, 1.0));
    a.v = normalize_simplex(a.v);
    a.x = uniform(-1.0, 1.0);
    a.q.resize(lattice.claims());
    for (auto& x : a.q) x = uniform(-1.0, 1.0);
    return a;
  }

  DualPoint dual(NodeRef n) {
    const auto a = primal();
    return {field.evaluate(a, n).grad_v, 1.0, a.q};
  }
};

SuiteResult verdict(std::string name, int probes, double dev, double threshold, std::string detail = {}) {
  return {std::move(name), probes, dev, threshold, std::isfinite(dev) && dev < threshold, std::move(detail)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-4); }

SuiteResult gradient(Context& c) {
  double worst = 0.0;
  const double h = 1e-5;
  for (int p = 0; p < c.opt.probes; ++p) {
    const auto n = c.node();
    const auto a = c.primal();
    const auto f = c.field.evaluate(a, n);
    auto value = [&](PrimalPoint b) { return c.field.evaluate(b, n).value; };
    for (int m = 0; m < a.v.size(); ++m) {
      auto up = a, dn = a;
      up.v[m] += h;
      dn.v[m] -= h;
      worst = std::max(worst, rel(f.grad_v[m], (value(up) - value(dn)) / (2 * h)));
    }
    auto up = a, dn = a;
    up.x += h;
    dn.x -= h;
    worst = std::max(worst, rel(c.sign * f.grad_x, (value(up) - value(dn)) / (2 * h)));
    for (int j = 0; j < a.q.size(); ++j) {
      auto qu = a, qd = a;
      qu.q[j] += h;
      qd.q[j] -= h;
      worst = std::max(worst, rel(f.grad_q[j], (value(qu) - value(qd)) / (2 * h)));
    }
  }
  return verdict("gradient", c.opt.probes, worst, 1e-6);
}

double scaled(const Vector& d, const Vector& ref) {
  return d.cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff());
}

SuiteResult martingale(Context& c) {
  const auto moments = c.lattice.moment_errors();
  double worst = std::max(moments.mean_error, moments.variance_error) / std::sqrt(c.lattice.dt());
  int probes = 0;
  for (int p = 0; p < c.opt.probes; ++p) {
    const auto n = c.node(false);
    const auto a = c.primal();
    const auto f = c.field.evaluate(a, n, true);
    FieldValue mean;
    mean.value = 0.0;
    Vector g = Vector::Zero(f.gradient().size());
    Matrix H = Matrix::Zero(f.hessian.rows(), f.hessian.cols());
    for (int e = 0; e < c.lattice.child_count(); ++e) {
      const auto ch = c.field.evaluate(a, c.lattice.child(n, e), true);
      const double pe = c.lattice.edge_probability(e);
      mean.value += pe * ch.value;
      g += pe * ch.gradient();
      H += pe * ch.hessian;
    }
    worst = std::max(worst, std::abs(mean.value - c.sign * f.value) / std::max(1.0, std::abs(f.value)));
    worst = std::max(worst, scaled(g - f.gradient(), f.gradient()));
    worst = std::max(worst, (H - f.hessian).cwiseAbs().maxCoeff() / std::max(1.0, f.hessian.cwiseAbs().maxCoeff()));
    ++probes;
  }

  // U under both engines for the configured strategy, on a small complete tree.
  auto small = c.cfg.tree.spec;
  small.steps = std::min(small.steps, 6);
  if (c.opt.corruption == Corruption::probabilities) {
    small.p_up = 0.6;
    small.validate = false;
  }
  auto tcfg = c.cfg.tree;
  tcfg.spec = small;
  const auto lat = make_lattice(tcfg);
  const FieldEvaluator field(c.panel, lat);
  const ConjugateSolver solver(field, c.solver.options());
  const auto tree = PathTree::full(lat, kFullTreeLimit);
  auto scfg = c.cfg.strategy;
  scfg.rebalance.erase(std::remove_if(scfg.rebalance.begin(), scfg.rebalance.end(),
                                      [&](int k) { return k >= small.steps; }),
                       scfg.rebalance.end());
  if (scfg.kind == StrategyKind::table) scfg.kind = StrategyKind::zero;
  const Vector lambda0 = initial_weights(c.cfg.panel);
  EngineOptions eopt;
  eopt.compute_gain = false;
  const auto simple = execute_simple(solver, tree, lambda0, make_strategy(scfg, lat.claims()), eopt);
  const Vector U0 = field.evaluate({lambda0, 0.0, Vector::Zero(lat.claims())}, lat.root()).grad_v;
  const auto euler = simulate_sde(solver, tree, U0, make_position_process(scfg, lat.claims()), eopt);
  // The Euler identity also needs the increments to be centred.
  const double drift = moments.mean_error / std::sqrt(lat.dt());
  worst = std::max({worst, simple.martingale, euler.martingale, drift});
  return verdict("martingale", probes + 2, worst, 1e-12);
}

SuiteResult conjugacy(Context& c) {
  double worst = 0.0;
  std::string fail;
  for (int p = 0; p < c.opt.probes; ++p) {
    const auto n = c.node();
    try {
      auto b = c.dual(n);
      b.y = std::exp(c.uniform(-1.0, 1.0));
      auto r = conjugacy_identities(c.solver, b, n);
      if (c.sign < 0) r.e_relation = std::max(r.e_relation, 1.0);
      worst = std::max(worst, r.max());
    } catch (const std::exception& e) {
      worst = std::numeric_limits<double>::infinity();
      fail = e.what();
    }
  }
  return verdict("conjugacy", c.opt.probes, worst, 1e-8, fail);
}

SuiteResult roundtrip(Context& c) {
  double worst = 0.0;
  std::string fail;
  for (int p = 0; p < c.opt.probes; ++p) {
    const auto n = c.node();
    try {
      auto a = c.primal();
      const auto r1 = state_identities(c.solver, a, n);
      const auto r2 = state_identities(c.solver, c.dual(n), n);
      double d = std::max(r1.max(), r2.max());
      if (c.sign < 0) d = std::max(d, 2.0 * std::abs(a.x) + 1.0);
      worst = std::max(worst, d);
    } catch (const std::exception& e) {
      worst = std::numeric_limits<double>::infinity();
      fail = e.what();
    }
  }
  return verdict("roundtrip", 2 * c.opt.probes, worst, 1e-8, fail);
}

// Random simple strategies: up to five rebalance levels, positions in [-1, 1].
SimpleStrategy random_strategy(Context& c, int steps, int claims) {
  std::vector<int> levels;
  for (int k = 0; k < steps; ++k)
    if (c.uniform(0.0, 1.0) < 0.4 && levels.size() < 5) levels.push_back(k);
  if (levels.empty()) levels.push_back(0);
  std::vector<Vector> coef;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    Vector v(2 * claims);
    for (auto& x : v) x = c.uniform(-1.0, 1.0);
    coef.push_back(v);
  }
  return SimpleStrategy::on_grid(levels, [levels, coef, claims](int k, const Vector& B, double) {
    const auto i = static_cast<std::size_t>(std::find(levels.begin(), levels.end(), k) - levels.begin());
    Vector q(claims);
    for (int j = 0; j < claims; ++j) q[j] = coef[i][j] + 0.5 * coef[i][claims + j] * std::tanh(B.sum());
    return q;
  });
}


SuiteResult preservation(Context& c) {
  const auto tree = PathTree::full(c.lattice, kFullTreeLimit);
  const Vector lambda0 = initial_weights(c.cfg.panel);
  EngineOptions eopt;
  eopt.compute_gain = false;
  double worst = 0.0;
  std::string fail;
  const int runs = std::max(1, c.opt.probes / 4);
  for (int r = 0; r < runs; ++r) {
    try {
      const auto path = execute_simple(c.solver, tree, lambda0, random_strategy(c, c.lattice.steps(), c.lattice.claims()), eopt);
      double d = utility_preservation_residual(path);
      if (c.sign < 0) d = std::max(d, 2.0 * path.states[0].U.cwiseAbs().maxCoeff());
      worst = std::max(worst, d);
    } catch (const std::exception& e) {
      worst = std::numeric_limits<double>::infinity();
      fail = e.what();
    }
  }
  return verdict("preservation", runs, worst, 1e-8, fail);
}

SuiteResult bounds(Context& c) {
  const double cc = c.cfg.panel.c.value_or(c.panel.bound_constant());
  double worst = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int p = 0; p < c.opt.probes; ++p) {
    const auto n = c.node();
    const auto a = c.primal();
    const auto P = matrix_ACD(c.field, a, n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P.A + P.A.transpose()));
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  worst = std::max({worst, 1.0 / cc - lo, hi - cc, 0.0});

  // Cash-balance sandwich at every node of one executed path.
  const auto tree = PathTree::full(c.lattice, kFullTreeLimit);
  const Vector lambda0 = initial_weights(c.cfg.panel);
  EngineOptions eopt;
  eopt.compute_gain = false;
  const auto path = execute_simple(c.solver, tree, lambda0, random_strategy(c, c.lattice.steps(), c.lattice.claims()), eopt);
  for (std::int64_t i = 0; i < tree.size(); ++i) {
    const auto& s = path.states[static_cast<std::size_t>(i)];
    const auto b = cash_bounds(c.solver, s.U, c.sign * s.X + (c.sign < 0 ? 1.0 : 0.0), s.Q, tree[i].lattice, cc);
    worst = std::max({worst, b.lower - b.middle, b.middle - b.upper});
  }
  std::ostringstream detail;
  detail << "eigenvalues of A in [" << lo << ", " << hi << "], c = " << cc;
  return verdict("bounds", c.opt.probes + static_cast<int>(tree.size()), worst, 1e-6, detail.str());
}

SuiteResult no_arbitrage_suite(Context& c) {
  const auto tree = PathTree::full(c.lattice, kFullTreeLimit);
  const Vector lambda0 = initial_weights(c.cfg.panel);
  EngineOptions eopt;
  eopt.compute_gain = false;
  auto flip = [&](MarketStatePath p) {
    for (auto& s : p.states) s.V *= c.sign;
    return p;
  };
  const auto zero = flip(execute_simple(c.solver, tree, lambda0, SimpleStrategy{}, eopt));
  const auto z = no_arbitrage(c.panel, tree, zero, lambda0);
  double worst = std::abs(z.after - z.before);
  const int runs = std::max(1, c.opt.probes / 4);
  for (int r = 0; r < runs; ++r) {
    const auto path = flip(execute_simple(c.solver, tree, lambda0, random_strategy(c, c.lattice.steps(), c.lattice.claims()), eopt));
    const auto rep = no_arbitrage(c.panel, tree, path, lambda0);
    worst = std::max(worst, rep.before - rep.after);
  }
  return verdict("no-arbitrage", runs + 1, worst, 1e-10);
}

SuiteResult bachelier_suite(Context& c) {
  auto b = c.cfg.bachelier;
  b.paths = std::min(b.paths, 400);
  const auto s = run_bachelier(b, c.opt.seed, 1);
  const double price_closed = c.sign * s.price_closed;
  const double price_err = std::abs(s.price_engine - price_closed) / std::abs(price_closed);
  const double worst = std::max(s.mean_gain_error / s.gain_threshold, price_err / 0.01);
  std::ostringstream detail;
  detail << "mean |dV_T| = " << s.mean_gain_error << " (limit " << s.gain_threshold << "), xi rel error = " << price_err;
  return verdict("bachelier", s.paths, worst, 1.0, detail.str());
}

using Suite = std::function<SuiteResult(Context&)>;

const std::vector<std::pair<std::string, Suite>>& registry() {
  static const std::vector<std::pair<std::string, Suite>> r{
      {"gradient", gradient},         {"martingale", martingale},     {"conjugacy", conjugacy},
      {"roundtrip", roundtrip},       {"preservation", preservation}, {"bounds", bounds},
      {"no-arbitrage", no_arbitrage_suite}, {"bachelier", bachelier_suite}};
  return r;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, _] : registry()) n.push_back(k);
    return n;
  }();
  return names;
}

Corruption parse_corruption(const std::string& name) {
  if (name.empty() || name == "none") return Corruption::none;
  if (name == "probabilities") return Corruption::probabilities;
  if (name == "sign") return Corruption::sign;
  if (name == "tolerance") return Corruption::tolerance;
  throw std::invalid_argument("unknown corruption '" + name + "'");
}

std::vector<SuiteResult> run_verify(const ExperimentConfig& config, const std::string& suite,
                                    const VerifyOptions& options) {
  bool known = suite == "all";
  for (const auto& n : suite_names()) known = known || n == suite;
  if (!known) throw std::invalid_argument("unknown suite '" + suite + "'");

  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : registry()) {
    if (suite != "all" && suite != name) continue;
    Context ctx(config, options);
    try {
      out.push_back(fn(ctx));
    } catch (const std::exception& e) {
      out.push_back({name, 0, std::numeric_limits<double>::infinity(), 0.0, false, e.what()});
    }
  }
  return out;
}

}  // namespace indiff
