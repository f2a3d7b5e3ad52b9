// Command-line front end: simulate, verify, bachelier, pareto, dump-tree.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "indiff/config.hpp"
#include "indiff/errors.hpp"
#include "indiff/experiment.hpp"
#include "indiff/representative.hpp"
#include "indiff/saddle.hpp"
#include "indiff/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kSuiteFailure = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> paths;
  std::optional<int> steps;
};

indiff::ExperimentConfig load(const Common& c) {
  auto cfg = c.config.empty() ? indiff::default_config() : indiff::load_config(c.config);
  if (c.seed) cfg.engine.seed = *c.seed;
  if (const char* env = std::getenv("INDIFF_OUT")) cfg.output.directory = env;
  if (!c.out.empty()) cfg.output.directory = c.out;
  if (c.paths) {
    cfg.engine.paths = *c.paths;
    cfg.bachelier.paths = *c.paths;
  }
  if (c.steps) {
    if (*c.steps < 1) throw indiff::ConfigError("--steps", 0, "must be >= 1");
    cfg.tree.spec.steps = *c.steps;
    cfg.bachelier.steps = *c.steps;
  }
  return cfg;
}

std::vector<double> parse_list(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw indiff::ConfigError(flag, 0, "cannot parse '" + item + "'");
    }
  }
  return out;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment file (YAML)");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--paths", c.paths, "number of sampled paths (0: full tree)");
  sub->add_option("--steps", c.steps, "lattice steps");
}

int cmd_simulate(const Common& c) {
  const auto cfg = load(c);
  const auto s = indiff::run_simulate(cfg);
  fmt::print("rows={} exploded_paths={} max_preservation={:.3e} martingale={:.3e} wall={:.2f}s\n{}\n{}\n", s.rows,
             s.exploded_paths, s.max_preservation, s.martingale, s.wall_seconds, s.csv_path, s.meta_path);
  return kOk;
}

int cmd_verify(const Common& c, const std::string& suite, const std::string& corrupt, int probes) {
  const auto cfg = load(c);
  indiff::VerifyOptions opt;
  opt.seed = cfg.engine.seed;
  opt.probes = probes;
  opt.corruption = indiff::parse_corruption(corrupt);
  const auto results = indiff::run_verify(cfg, suite, opt);

  std::ostringstream report;
  fmt::print(report, "suite,probes,max_deviation,threshold,verdict,detail\n");
  bool ok = true;
  for (const auto& r : results) {
    fmt::print(report, "{},{},{:.6e},{:.1e},{},\"{}\"\n", r.name, r.probes, r.max_deviation, r.threshold,
               r.passed ? "pass" : "FAIL", r.detail);
    ok = ok && r.passed;
  }
  std::cout << report.str();
  if (!c.out.empty()) {
    std::filesystem::create_directories(cfg.output.directory);
    std::ofstream(std::filesystem::path(cfg.output.directory) / "verify.csv") << report.str();
  }
  return ok ? kOk : kSuiteFailure;
}

int cmd_bachelier(const Common& c, int threads) {
  const auto cfg = load(c);
  std::ofstream csv;
  std::ostream* sink = nullptr;
  if (!c.out.empty() || std::getenv("INDIFF_OUT")) {
    std::filesystem::create_directories(cfg.output.directory);
    csv.open(std::filesystem::path(cfg.output.directory) / "bachelier.csv", std::ios::binary);
    sink = &csv;
  }
  const auto s = indiff::run_bachelier(cfg.bachelier, cfg.engine.seed, threads, sink);
  fmt::print("paths={} steps={}\n", s.paths, s.steps);
  fmt::print("mean |V_engine - V_closed| = {:.6e} (limit {:.6e})\n", s.mean_gain_error, s.gain_threshold);
  fmt::print("xi engine = {:.12f}  closed = {:.12f}  rel error = {:.3e}\n", s.price_engine, s.price_closed,
             s.price_rel_error);
  fmt::print("K(U0, q) engine = {:.10f}  closed = {:.10f}\n", s.kernel_engine, s.kernel_closed);
  fmt::print("wall = {:.2f}s  {}\n", s.wall_seconds, s.passed() ? "pass" : "FAIL");
  return s.passed() ? kOk : kSuiteFailure;
}

int cmd_pareto(const Common& c, const std::string& v, double x, const std::string& u, const std::string& q) {
  const auto cfg = load(c);
  const auto panel = indiff::make_panel(cfg.panel);
  if (!v.empty()) {
    const auto w = parse_list(v, "--v");
    if (static_cast<int>(w.size()) != panel.size()) throw indiff::ConfigError("--v", 0, "needs one weight per maker");
    const indiff::Vector vv = Eigen::Map<const indiff::Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    const auto rep = indiff::representative_utility(panel, vv, x);
    fmt::print("r = {:.17g}\ny = {:.17g}\n", rep.r, rep.y);
    for (int m = 0; m < panel.size(); ++m)
      fmt::print("split[{}] = {:.17g}  dr/dv = {:.17g}\n", m + 1, rep.split[m], rep.r_v[m]);
    const auto lambda = indiff::weights_from_allocation(panel, rep.split);
    for (int m = 0; m < panel.size(); ++m) fmt::print("lambda[{}] = {:.17g}\n", m + 1, lambda[m]);
  }
  if (!u.empty()) {
    const auto lattice = indiff::make_lattice(cfg.tree);
    const indiff::FieldEvaluator field(panel, lattice);
    const indiff::ConjugateSolver solver(field);
    const auto uu = parse_list(u, "--u");
    auto qq = q.empty() ? std::vector<double>(static_cast<std::size_t>(lattice.claims()), 0.0) : parse_list(q, "--q");
    if (static_cast<int>(uu.size()) != panel.size()) throw indiff::ConfigError("--u", 0, "needs one entry per maker");
    if (static_cast<int>(qq.size()) != lattice.claims()) throw indiff::ConfigError("--q", 0, "needs one entry per claim");
    const indiff::DualPoint b{Eigen::Map<const indiff::Vector>(uu.data(), static_cast<Eigen::Index>(uu.size())), 1.0,
                              Eigen::Map<const indiff::Vector>(qq.data(), static_cast<Eigen::Index>(qq.size()))};
    const auto s = solver.solve(b, lattice.root());
    fmt::print("G(u,1,q) at t=0 = {:.17g}  residual = {:.3e}  iterations = {}\n", s.g, s.residual, s.iterations);
    for (int m = 0; m < panel.size(); ++m) fmt::print("w[{}] = {:.17g}\n", m + 1, s.w[m]);
  }
  if (v.empty() && u.empty()) throw indiff::ConfigError("pareto", 0, "give --v (with --x) or --u");
  return kOk;
}

int cmd_dump_tree(const Common& c) {
  const auto cfg = load(c);
  if (c.out.empty()) {
    indiff::dump_tree(cfg.tree, std::cout);
  } else {
    std::filesystem::create_directories(cfg.output.directory);
    std::ofstream out(std::filesystem::path(cfg.output.directory) / "tree.csv", std::ios::binary);
    indiff::dump_tree(cfg.tree, out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-investor trading at market indifference prices"};
  app.require_subcommand(1);
  Common common;

  auto* simulate = app.add_subcommand("simulate", "run the configured strategy engine");
  add_common(simulate, common);

  std::string suite = "all", corrupt = "none";
  int probes = 20;
  auto* verify = app.add_subcommand("verify", "run invariant suites");
  add_common(verify, common);
  verify->add_option("--suite", suite, "suite name or 'all'");
  verify->add_option("--corrupt", corrupt, "negative control: none, probabilities, sign, tolerance");
  verify->add_option("--probes", probes, "random probes per suite");

  int threads = 1;
  auto* bachelier = app.add_subcommand("bachelier", "Euler engine against the closed-form model");
  add_common(bachelier, common);
  bachelier->add_option("--threads", threads, "worker threads");

  std::string v, u, q;
  double x = 0.0;
  auto* pareto = app.add_subcommand("pareto", "one-shot r, allocation and G evaluations");
  add_common(pareto, common);
  pareto->add_option("--v", v, "comma-separated weights");
  pareto->add_option("--x", x, "total endowment");
  pareto->add_option("--u", u, "comma-separated indirect utilities");
  pareto->add_option("--q", q, "comma-separated position");

  auto* dump = app.add_subcommand("dump-tree", "per-node CSV of the scenario tree");
  add_common(dump, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*verify) return cmd_verify(common, suite, corrupt, probes);
    if (*bachelier) return cmd_bachelier(common, threads);
    if (*pareto) return cmd_pareto(common, v, x, u, q);
    if (*dump) return cmd_dump_tree(common);
  } catch (const indiff::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const indiff::TreeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSuiteFailure;
  }
  return kOk;
}
