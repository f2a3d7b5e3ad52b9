#include "indiff/config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "indiff/errors.hpp"

namespace indiff {
namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(key, line_of(n), "expected a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, line_of(n), "cannot convert '" + n.Scalar() + "'");
  }
}

template <class T>
std::vector<T> list(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) return {scalar<T>(n, key)};
  if (!n.IsSequence()) throw ConfigError(key, line_of(n), "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar<T>(n[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

template <class T>
void read(const YAML::Node& block, const char* name, const std::string& prefix, T& into) {
  if (auto n = block[name]) into = scalar<T>(n, prefix + "." + name);
}

void check_keys(const YAML::Node& block, const std::string& prefix, std::initializer_list<const char*> allowed) {
  if (!block.IsMap()) throw ConfigError(prefix, line_of(block), "expected a block of key: value entries");
  for (const auto& kv : block) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(prefix.empty() ? key : prefix + "." + key, line_of(kv.first), "unknown key");
  }
}

void positive(double v, const std::string& key, const YAML::Node& n) {
  if (!(v > 0.0)) throw ConfigError(key, line_of(n), "must be positive");
}

UtilitySpec parse_maker(const YAML::Node& n, const std::string& key) {
  check_keys(n, key, {"kind", "gamma", "weights", "rates"});
  const auto kind = n["kind"] ? scalar<std::string>(n["kind"], key + ".kind") : std::string("exponential");
  try {
    if (kind == "exponential") {
      if (!n["gamma"]) throw ConfigError(key + ".gamma", line_of(n), "missing");
      return UtilitySpec::exponential(scalar<double>(n["gamma"], key + ".gamma"));
    }
    if (kind == "sum_exponential") {
      if (!n["weights"] || !n["rates"]) throw ConfigError(key, line_of(n), "needs weights and rates");
      return UtilitySpec::sum_exponential(list<double>(n["weights"], key + ".weights"),
                                          list<double>(n["rates"], key + ".rates"));
    }
  } catch (const DomainError& e) {
    throw ConfigError(key, line_of(n), e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, line_of(n), e.what());
  }
  throw ConfigError(key + ".kind", line_of(n["kind"]), "unknown utility kind '" + kind + "'");
}

void parse_panel(const YAML::Node& n, PanelConfig& p) {
  check_keys(n, "panel", {"makers", "lambda0", "c"});
  const auto makers = n["makers"];
  if (!makers || !makers.IsSequence() || makers.size() == 0)
    throw ConfigError("panel.makers", line_of(n), "expected a non-empty list of makers");
  p.makers.clear();
  for (std::size_t i = 0; i < makers.size(); ++i)
    p.makers.push_back(parse_maker(makers[i], "panel.makers[" + std::to_string(i) + "]"));
  if (auto l = n["lambda0"]) {
    p.lambda0 = list<double>(l, "panel.lambda0");
    if (p.lambda0.size() != p.makers.size())
      throw ConfigError("panel.lambda0", line_of(l), "needs one weight per maker");
    for (double v : p.lambda0) positive(v, "panel.lambda0", l);
  }
  if (auto c = n["c"]) {
    p.c = scalar<double>(c, "panel.c");
    const double need = MakerPanel(p.makers).bound_constant();
    if (*p.c < need * (1.0 - 1e-12))
      throw ConfigError("panel.c", line_of(c), "declared bound constant is below the makers' value " + std::to_string(need));
  }
}

void parse_tree(const YAML::Node& n, TreeConfig& t) {
  check_keys(n, "tree", {"steps", "horizon", "dim", "p_up", "sigma0", "psi", "validate"});
  read(n, "steps", "tree", t.spec.steps);
  read(n, "horizon", "tree", t.spec.horizon);
  read(n, "dim", "tree", t.spec.dim);
  read(n, "p_up", "tree", t.spec.p_up);
  read(n, "validate", "tree", t.spec.validate);
  read(n, "sigma0", "tree", t.sigma0);
  if (auto p = n["psi"]) t.psi = list<std::string>(p, "tree.psi");
  if (t.spec.steps < 1) throw ConfigError("tree.steps", line_of(n["steps"]), "must be >= 1");
  if (t.spec.dim < 1 || t.spec.dim > 8) throw ConfigError("tree.dim", line_of(n["dim"]), "must be in [1, 8]");
  if (!(t.spec.horizon > 0.0)) throw ConfigError("tree.horizon", line_of(n["horizon"]), "must be positive");
  if (!(t.spec.p_up > 0.0 && t.spec.p_up < 1.0)) throw ConfigError("tree.p_up", line_of(n["p_up"]), "must lie in (0, 1)");
  if (t.psi.empty()) throw ConfigError("tree.psi", line_of(n), "needs at least one claim");
  try {
    const auto e = Expression::parse(t.sigma0);
    if (e.max_dimension() > t.spec.dim) throw std::invalid_argument("references a Brownian dimension beyond tree.dim");
  } catch (const std::invalid_argument& e) {
    throw ConfigError("tree.sigma0", line_of(n["sigma0"]), e.what());
  }
  for (std::size_t j = 0; j < t.psi.size(); ++j) {
    try {
      const auto e = Expression::parse(t.psi[j]);
      if (e.max_dimension() > t.spec.dim) throw std::invalid_argument("references a Brownian dimension beyond tree.dim");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("tree.psi[" + std::to_string(j) + "]", line_of(n["psi"]), e.what());
    }
  }
}

void parse_strategy(const YAML::Node& n, StrategyConfig& s, std::size_t claims, int steps) {
  check_keys(n, "strategy", {"kind", "position", "rebalance", "table", "expression"});
  const auto kind = n["kind"] ? scalar<std::string>(n["kind"], "strategy.kind") : std::string("zero");
  if (kind == "zero") s.kind = StrategyKind::zero;
  else if (kind == "constant") s.kind = StrategyKind::constant;
  else if (kind == "simple") s.kind = StrategyKind::simple;
  else if (kind == "table") s.kind = StrategyKind::table;
  else if (kind == "expression") s.kind = StrategyKind::expression;
  else throw ConfigError("strategy.kind", line_of(n["kind"]), "unknown strategy kind '" + kind + "'");

  if (auto p = n["position"]) s.position = list<double>(p, "strategy.position");
  if (auto r = n["rebalance"]) s.rebalance = list<int>(r, "strategy.rebalance");
  if (auto e = n["expression"]) s.expression = list<std::string>(e, "strategy.expression");
  if (auto t = n["table"]) {
    if (!t.IsSequence()) throw ConfigError("strategy.table", line_of(t), "expected a list of rows");
    for (std::size_t i = 0; i < t.size(); ++i)
      s.table.push_back(list<double>(t[i], "strategy.table[" + std::to_string(i) + "]"));
  }
  for (int k : s.rebalance)
    if (k < 0 || k >= steps) throw ConfigError("strategy.rebalance", line_of(n["rebalance"]), "levels must lie in [0, steps)");

  auto need = [&](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(std::string("strategy.") + key, line_of(n), what);
  };
  switch (s.kind) {
    case StrategyKind::zero: break;
    case StrategyKind::constant:
    case StrategyKind::simple:
      need(s.position.size() == claims, "position", "needs one entry per claim");
      if (s.kind == StrategyKind::simple) need(!s.rebalance.empty(), "rebalance", "needs rebalance levels");
      break;
    case StrategyKind::table:
      need(s.table.size() == s.rebalance.size(), "table", "needs one row per rebalance level");
      for (const auto& row : s.table) need(row.size() == claims, "table", "rows need one entry per claim");
      break;
    case StrategyKind::expression:
      need(s.expression.size() == claims, "expression", "needs one expression per claim");
      need(!s.rebalance.empty(), "rebalance", "needs rebalance levels");
      for (std::size_t j = 0; j < s.expression.size(); ++j) {
        try {
          Expression::parse(s.expression[j]);
        } catch (const std::invalid_argument& e) {
          throw ConfigError("strategy.expression[" + std::to_string(j) + "]", line_of(n["expression"]), e.what());
        }
      }
      break;
  }
}

void parse_engine(const YAML::Node& n, EngineConfig& e) {
  check_keys(n, "engine", {"scheme", "paths", "seed", "tolerance", "max_iterations", "explode_ratio",
                           "compute_gain", "threads"});
  if (auto s = n["scheme"]) {
    const auto v = scalar<std::string>(s, "engine.scheme");
    if (v == "simple") e.scheme = Scheme::simple;
    else if (v == "euler") e.scheme = Scheme::euler;
    else throw ConfigError("engine.scheme", line_of(s), "expected simple or euler");
  }
  read(n, "paths", "engine", e.paths);
  read(n, "seed", "engine", e.seed);
  read(n, "tolerance", "engine", e.tolerance);
  read(n, "max_iterations", "engine", e.max_iterations);
  read(n, "explode_ratio", "engine", e.explode_ratio);
  read(n, "compute_gain", "engine", e.compute_gain);
  read(n, "threads", "engine", e.threads);
  if (e.paths < 0) throw ConfigError("engine.paths", line_of(n["paths"]), "must be >= 0");
  if (!(e.tolerance > 0.0)) throw ConfigError("engine.tolerance", line_of(n["tolerance"]), "must be positive");
  if (!(e.explode_ratio > 0.0)) throw ConfigError("engine.explode_ratio", line_of(n["explode_ratio"]), "must be positive");
  if (e.max_iterations < 1) throw ConfigError("engine.max_iterations", line_of(n["max_iterations"]), "must be >= 1");
  if (e.threads < 1) throw ConfigError("engine.threads", line_of(n["threads"]), "must be >= 1");
}

void parse_bachelier(const YAML::Node& n, BachelierConfig& b) {
  check_keys(n, "bachelier", {"gamma", "b", "mu", "sigma", "s", "T", "steps", "paths", "q"});
  read(n, "gamma", "bachelier", b.params.gamma);
  read(n, "b", "bachelier", b.params.b);
  read(n, "mu", "bachelier", b.params.mu);
  read(n, "sigma", "bachelier", b.params.sigma);
  read(n, "s", "bachelier", b.params.s);
  read(n, "T", "bachelier", b.params.T);
  read(n, "steps", "bachelier", b.steps);
  read(n, "paths", "bachelier", b.paths);
  read(n, "q", "bachelier", b.q);
  try {
    b.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bachelier", line_of(n), e.what());
  }
  if (b.steps < 1) throw ConfigError("bachelier.steps", line_of(n["steps"]), "must be >= 1");
  if (b.paths < 1) throw ConfigError("bachelier.paths", line_of(n["paths"]), "must be >= 1");
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.panel.makers = {UtilitySpec::exponential(1.0), UtilitySpec::sum_exponential({1.0, 1.0}, {0.5, 2.0})};
  c.tree.spec.steps = 8;
  c.tree.sigma0 = "0.5*B";
  c.tree.psi = {"1 + 0.3*B"};
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.mark.line + 1, e.msg);
  }
  ExperimentConfig c = default_config();
  c.source = source;
  if (root.IsNull()) return c;
  check_keys(root, "", {"panel", "tree", "strategy", "engine", "output", "bachelier"});
  if (auto n = root["panel"]) parse_panel(n, c.panel);
  if (auto n = root["tree"]) parse_tree(n, c.tree);
  if (auto n = root["strategy"]) parse_strategy(n, c.strategy, c.tree.psi.size(), c.tree.spec.steps);
  if (auto n = root["engine"]) parse_engine(n, c.engine);
  if (auto n = root["output"]) {
    check_keys(n, "output", {"directory"});
    read(n, "directory", "output", c.output.directory);
  }
  if (auto n = root["bachelier"]) parse_bachelier(n, c.bachelier);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

MakerPanel make_panel(const PanelConfig& cfg) { return MakerPanel(cfg.makers); }

Lattice make_lattice(const TreeConfig& cfg) {
  return Lattice::from_expressions(cfg.spec, cfg.sigma0, cfg.psi);
}

}  // namespace indiff
