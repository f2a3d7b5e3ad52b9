#include "indiff/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "indiff/errors.hpp"

namespace indiff {
namespace {

constexpr const char* kPathsFormat = "indiff-paths v1";
constexpr const char* kBachelierFormat = "indiff-bachelier v1";

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Theta chosen at a rebalance level, as a function of (level, B, t).
std::function<Vector(int, const Vector&, double)> theta_of(const StrategyConfig& cfg, int claims) {
  switch (cfg.kind) {
    case StrategyKind::zero:
      return [claims](int, const Vector&, double) { return Vector::Zero(claims).eval(); };
    case StrategyKind::constant:
    case StrategyKind::simple: {
      const Vector q = to_vector(cfg.position);
      return [q](int, const Vector&, double) { return q; };
    }
    case StrategyKind::table: {
      std::vector<int> levels = cfg.rebalance;
      std::vector<Vector> rows;
      for (const auto& r : cfg.table) rows.push_back(to_vector(r));
      return [levels, rows](int k, const Vector&, double) {
        const auto it = std::find(levels.begin(), levels.end(), k);
        return rows[static_cast<std::size_t>(it - levels.begin())];
      };
    }
    case StrategyKind::expression: {
      std::vector<Expression> ex;
      for (const auto& e : cfg.expression) ex.push_back(Expression::parse(e));
      return [ex](int, const Vector& B, double t) {
        Vector q(static_cast<Eigen::Index>(ex.size()));
        const ExpressionContext ctx{std::span<const double>(B.data(), static_cast<std::size_t>(B.size())), 0.0, t};
        for (std::size_t j = 0; j < ex.size(); ++j) q[static_cast<Eigen::Index>(j)] = ex[j](ctx);
        return q;
      };
    }
  }
  throw std::logic_error("unreachable strategy kind");
}

std::vector<int> levels_of(const StrategyConfig& cfg) {
  if (cfg.kind == StrategyKind::zero || cfg.kind == StrategyKind::constant) return {0};
  auto l = cfg.rebalance;
  std::sort(l.begin(), l.end());
  return l;
}

void write_row(std::ostream& out, std::int64_t path, std::int64_t node, const PathTree& tree, const NodeState& s,
               int M, int J) {
  const auto& lat = tree.lattice();
  const int level = tree.level(node);
  fmt::print(out, "{},{},{},{:.17g}", path, node, level, lat.time(level));
  const bool live = s.U.size() == M && s.W.size() == M;
  for (int m = 0; m < M; ++m) fmt::print(out, ",{:.17g}", s.U.size() == M ? s.U[m] : std::nan(""));
  for (int m = 0; m < M; ++m) fmt::print(out, ",{:.17g}", live ? s.W[m] : std::nan(""));
  fmt::print(out, ",{:.17g},{:.17g}", live ? s.X : std::nan(""), s.has_V ? s.V : std::nan(""));
  for (int j = 0; j < J; ++j) fmt::print(out, ",{:.17g}", s.Q.size() == J ? s.Q[j] : std::nan(""));
  fmt::print(out, ",{}\n", s.exploded ? 1 : 0);
}

void write_header(std::ostream& out, int M, int J) {
  fmt::print(out, "# {}\npath_id,node_id,level,t", kPathsFormat);
  for (int m = 1; m <= M; ++m) fmt::print(out, ",U_{}", m);
  for (int m = 1; m <= M; ++m) fmt::print(out, ",W_{}", m);
  fmt::print(out, ",X,V");
  for (int j = 1; j <= J; ++j) fmt::print(out, ",Q_{}", j);
  fmt::print(out, ",exploded\n");
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

const char* version() { return "0.1.0"; }

SimpleStrategy make_strategy(const StrategyConfig& cfg, int claims) {
  if (cfg.kind == StrategyKind::zero) return SimpleStrategy{};
  if (cfg.kind == StrategyKind::constant) return SimpleStrategy::constant(to_vector(cfg.position));
  return SimpleStrategy::on_grid(levels_of(cfg), theta_of(cfg, claims));
}

PositionProcess make_position_process(const StrategyConfig& cfg, int claims) {
  if (cfg.kind == StrategyKind::zero) return [claims](const PathTree&, std::int64_t) { return Vector::Zero(claims).eval(); };
  const auto levels = levels_of(cfg);
  const auto theta = theta_of(cfg, claims);
  return [levels, theta, claims](const PathTree& tree, std::int64_t i) -> Vector {
    const int k = tree.level(i);
    auto it = std::upper_bound(levels.begin(), levels.end(), k);
    if (it == levels.begin()) return Vector::Zero(claims);
    const int decided = *(it - 1);
    while (tree.level(i) > decided) i = tree[i].parent;
    const auto& lat = tree.lattice();
    return theta(decided, lat.brownian(tree[i].lattice), lat.time(decided));
  };
}

Vector initial_weights(const PanelConfig& cfg) {
  const auto M = static_cast<Eigen::Index>(cfg.makers.size());
  if (cfg.lambda0.empty()) return Vector::Constant(M, 1.0 / static_cast<double>(M));
  return normalize_simplex(to_vector(cfg.lambda0));
}

RunSummary run_simulate(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto panel = make_panel(config.panel);
  const auto lattice = make_lattice(config.tree);
  const int M = panel.size();
  const int J = lattice.claims();
  const Vector lambda0 = initial_weights(config.panel);

  SaddleOptions sopt;
  sopt.tolerance = config.engine.tolerance;
  sopt.max_iterations = config.engine.max_iterations;
  EngineOptions eopt;
  eopt.compute_gain = config.engine.compute_gain;
  eopt.explode_ratio = config.engine.explode_ratio;

  const auto strategy = make_strategy(config.strategy, J);
  const auto positions = make_position_process(config.strategy, J);
  const bool euler = config.engine.scheme == Scheme::euler;

  auto run_tree = [&](const FieldEvaluator& field, const PathTree& tree) {
    const ConjugateSolver solver(field, sopt);
    if (euler) {
      const Vector U0 = field.evaluate({lambda0, 0.0, Vector::Zero(J)}, lattice.root()).grad_v;
      return simulate_sde(solver, tree, U0, positions, eopt);
    }
    return execute_simple(solver, tree, lambda0, strategy, eopt);
  };

  std::filesystem::create_directories(config.output.directory);
  RunSummary summary;
  summary.csv_path = (std::filesystem::path(config.output.directory) / "paths.csv").string();
  summary.meta_path = (std::filesystem::path(config.output.directory) / "meta.json").string();
  std::ofstream csv(summary.csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + summary.csv_path);
  write_header(csv, M, J);

  auto absorb = [&](const MarketStatePath& p) {
    summary.max_preservation = std::max(summary.max_preservation, p.max_preservation);
    summary.martingale = std::max(summary.martingale, p.martingale);
    if (p.explosion.exploded) ++summary.exploded_paths;
  };

  if (config.engine.paths == 0) {
    const FieldEvaluator field(panel, lattice);
    const auto tree = PathTree::full(lattice);
    const auto path = run_tree(field, tree);
    absorb(path);
    for (std::int64_t i = 0; i < tree.size(); ++i) write_row(csv, 0, i, tree, path.states[static_cast<std::size_t>(i)], M, J);
    summary.rows = tree.size();
  } else {
    const int P = config.engine.paths;
    const int workers = std::max(1, std::min(config.engine.threads, P));
    std::vector<std::string> chunks(static_cast<std::size_t>(P));
    std::vector<MarketStatePath> results(static_cast<std::size_t>(P));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
      try {
        const FieldEvaluator field(panel, lattice);
        for (int p = w; p < P; p += workers) {
          auto rng = path_rng(config.engine.seed, static_cast<std::uint64_t>(p));
          const auto tree = PathTree::sample(lattice, rng);
          auto path = run_tree(field, tree);
          std::ostringstream rows;
          for (std::int64_t i = 0; i < tree.size(); ++i)
            write_row(rows, p, i, tree, path.states[static_cast<std::size_t>(i)], M, J);
          chunks[static_cast<std::size_t>(p)] = rows.str();
          path.states.clear();
          results[static_cast<std::size_t>(p)] = std::move(path);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (int p = 0; p < P; ++p) {
      csv << chunks[static_cast<std::size_t>(p)];
      absorb(results[static_cast<std::size_t>(p)]);
    }
    summary.rows = static_cast<std::int64_t>(P) * (lattice.steps() + 1);
  }

  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream meta(summary.meta_path);
  fmt::print(meta,
             "{{\n  \"format\": \"{}\",\n  \"version\": \"{}\",\n  \"config\": \"{}\",\n  \"scheme\": \"{}\",\n"
             "  \"seed\": {},\n  \"paths\": {},\n  \"steps\": {},\n  \"saddle_tolerance\": {:.17g},\n"
             "  \"explode_ratio\": {:.17g},\n  \"rows\": {},\n  \"exploded_paths\": {},\n"
             "  \"max_preservation\": {:.17g},\n  \"martingale\": {:.17g},\n  \"wall_seconds\": {:.6f}\n}}\n",
             kPathsFormat, version(), json_escape(config.source), euler ? "euler" : "simple", config.engine.seed,
             config.engine.paths, lattice.steps(), config.engine.tolerance, config.engine.explode_ratio, summary.rows,
             summary.exploded_paths, summary.max_preservation, summary.martingale, summary.wall_seconds);
  return summary;
}

BachelierSummary run_bachelier(const BachelierConfig& cfg, std::uint64_t seed, int threads, std::ostream* csv) {
  const auto start = std::chrono::steady_clock::now();
  const auto& prm = cfg.params;
  const auto panel = bachelier_panel(prm);
  const auto lattice = bachelier_lattice(prm, cfg.steps);
  const int N = cfg.steps;
  const Vector q = Vector::Constant(1, cfg.q);

  BachelierSummary out;
  out.paths = cfg.paths;
  out.steps = N;
  out.gain_threshold = 0.02 * 0.5 * prm.gamma * prm.sigma * prm.sigma * prm.T;
  out.price_closed = bachelier_indifference_price(prm, cfg.q);

  FieldOptions fopt;
  fopt.cache_capacity = std::size_t{1} << 21;
  {
    const FieldEvaluator field(panel, lattice, fopt);
    const ConjugateSolver solver(field);
    const Vector U0 = field.evaluate({Vector::Ones(1), 0.0, Vector::Zero(1)}, lattice.root()).grad_v;
    // xi_1 is the cash held on the first interval after buying q at time 0.
    const std::vector<int> down(static_cast<std::size_t>(N), 0);
    const auto chain = PathTree::chain(lattice, down);
    EngineOptions first;
    first.compute_gain = false;
    out.price_engine = execute_simple(solver, chain, Vector::Ones(1), SimpleStrategy::constant(q), first).states[1].X;
    out.price_rel_error = std::abs(out.price_engine - out.price_closed) / std::abs(out.price_closed);
    out.kernel_engine = kernel_K(solver, U0, q, lattice.root())(0, 0);
    out.kernel_closed = bachelier_K(prm, U0[0], cfg.q);
  }

  const int P = cfg.paths;
  const int workers = std::max(1, std::min(threads, P));
  std::vector<double> engine(static_cast<std::size_t>(P)), closed(static_cast<std::size_t>(P));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  EngineOptions eopt;
  eopt.compute_gain = false;
  eopt.check_martingale = false;
  auto work = [&](int w) {
    try {
      const FieldEvaluator field(panel, lattice, fopt);
      const ConjugateSolver solver(field);
      const Vector U0 = field.evaluate({Vector::Ones(1), 0.0, Vector::Zero(1)}, lattice.root()).grad_v;
      const PositionProcess Q = [&q](const PathTree&, std::int64_t) { return q; };
      std::vector<double> times(static_cast<std::size_t>(N) + 1), B(times.size());
      const std::vector<double> held(static_cast<std::size_t>(N), cfg.q);
      for (int p = w; p < P; p += workers) {
        auto rng = path_rng(seed, static_cast<std::uint64_t>(p));
        const auto tree = PathTree::sample(lattice, rng);
        const auto path = simulate_sde(solver, tree, U0, Q, eopt);
        if (path.explosion.exploded) throw NumericError("bachelier: path exploded", 0.0, p);
        for (int k = 0; k <= N; ++k) {
          times[static_cast<std::size_t>(k)] = lattice.time(k);
          B[static_cast<std::size_t>(k)] = lattice.brownian(tree[k].lattice)[0];
        }
        engine[static_cast<std::size_t>(p)] = path.states.back().V;
        closed[static_cast<std::size_t>(p)] = bachelier_gain(prm, held, times, B);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  double sum = 0.0;
  if (csv) fmt::print(*csv, "# {}\npath_id,V_engine,V_closed,abs_error\n", kBachelierFormat);
  for (int p = 0; p < P; ++p) {
    const double err = std::abs(engine[static_cast<std::size_t>(p)] - closed[static_cast<std::size_t>(p)]);
    sum += err;
    if (csv)
      fmt::print(*csv, "{},{:.17g},{:.17g},{:.17g}\n", p, engine[static_cast<std::size_t>(p)],
                 closed[static_cast<std::size_t>(p)], err);
  }
  out.mean_gain_error = sum / P;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void dump_tree(const TreeConfig& cfg, std::ostream& out) {
  const auto lattice = make_lattice(cfg);
  const auto tree = PathTree::full(lattice, std::int64_t{1} << 16);
  const int d = lattice.dim();
  const int J = lattice.claims();
  fmt::print(out, "# indiff-tree v1\nnode_id,parent_id,level,lattice_index,time,prob");
  for (int i = 1; i <= d; ++i) fmt::print(out, ",dB_{}", i);
  fmt::print(out, ",sigma0");
  for (int j = 1; j <= J; ++j) fmt::print(out, ",psi_{}", j);
  fmt::print(out, "\n");
  for (std::int64_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree[i];
    const double p = n.parent < 0 ? 1.0 : lattice.edge_probability(n.edge);
    fmt::print(out, "{},{},{},{},{:.17g},{:.17g}", i, n.parent, n.lattice.level, n.lattice.index,
               lattice.time(n.lattice.level), p);
    const Vector db = n.parent < 0 ? Vector::Zero(d) : lattice.edge_increment(n.edge);
    for (int k = 0; k < d; ++k) fmt::print(out, ",{:.17g}", db[k]);
    if (lattice.is_leaf(n.lattice)) {
      const auto leaf = static_cast<std::size_t>(lattice.leaf_index(n.lattice));
      fmt::print(out, ",{:.17g}", lattice.sigma0()[leaf]);
      for (int j = 0; j < J; ++j) fmt::print(out, ",{:.17g}", lattice.psi(j)[leaf]);
    } else {
      fmt::print(out, ",");
      for (int j = 0; j < J; ++j) fmt::print(out, ",");
    }
    fmt::print(out, "\n");
  }
}

}  // namespace indiff
