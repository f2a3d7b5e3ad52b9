#pragma once

#include <cstdint>
#include <memory>

#include "indiff/lattice.hpp"
#include "indiff/representative.hpp"
#include "indiff/types.hpp"
#include "indiff/utility.hpp"

namespace indiff {

/// F(a, node) and its derivatives. The Hessian, when requested, is indexed
/// (v^1..v^M, x, q^1..q^J).
struct FieldValue {
  double value = 0.0;
  Vector grad_v;
  double grad_x = 0.0;
  Vector grad_q;
  Matrix hessian;

  bool has_hessian() const noexcept { return hessian.size() > 0; }
  /// (grad_v, grad_x, grad_q) stacked in Hessian order.
  Vector gradient() const;
};

struct Integrand {
  Vector H;        // d
  Matrix dHdv;     // M x d
  double residual = 0.0;       // max_e |dF_e - <H, dB_e>|
  double dHdv_residual = 0.0;
};

struct MarginalPrice {
  Vector S;          // F_q / F_x
  Vector S_density;  // expectation of psi under the normalised pricing density
  double deviation = 0.0;
};

struct FieldOptions {
  bool cache = true;
  std::size_t cache_capacity = 1 << 18;
  SolveMode mode = SolveMode::automatic;
};

/// Conditional expectations of the representative utility over the leaves of
/// a lattice. Node values are binomial-weighted sums over reachable leaves,
/// which coincide with backward recursion because the weight rows obey
/// Pascal's rule. For exponential panels
///   F = -Gamma prod_m (v^m)^beta_m exp(-x / Gamma) E[exp(-(Sigma0 + <q,psi>) / Gamma) | node]
/// and only the exponential moments in q depend on the node; these are
/// computed by the SIMD leaf kernels and memoised per (node, q).
class FieldEvaluator {
 public:
  FieldEvaluator(const MakerPanel& panel, const Lattice& lattice, FieldOptions options = {});
  ~FieldEvaluator();
  FieldEvaluator(const FieldEvaluator&) = delete;
  FieldEvaluator& operator=(const FieldEvaluator&) = delete;

  const MakerPanel& panel() const noexcept { return panel_; }
  const Lattice& lattice() const noexcept { return lattice_; }
  int makers() const noexcept { return panel_.size(); }
  int claims() const noexcept { return lattice_.claims(); }
  int dimension() const noexcept { return makers() + 1 + claims(); }
  bool exponential_fast_path() const noexcept;

  FieldValue terminal(const PrimalPoint& a, std::int64_t leaf, bool hessian = false) const;
  FieldValue evaluate(const PrimalPoint& a, NodeRef node, bool hessian = false) const;

  /// Weighted least-squares fit of F's one-step increments on the Brownian
  /// increments (exact for d = 1), and the same for dF/dv.
  Integrand integrand(const PrimalPoint& a, NodeRef node) const;
  MarginalPrice marginal_price(const PrimalPoint& a, NodeRef node) const;

  void clear_cache() const;
  std::size_t cache_size() const;

  struct Impl;

 private:
  void check_point(const PrimalPoint& a) const;

  const MakerPanel& panel_;
  const Lattice& lattice_;
  FieldOptions options_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace indiff
