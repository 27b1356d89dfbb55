#pragma once

// Zero-and-one inflated beta (BEINF) distribution.
//
// Canonical form: point masses p0 at 0 and p1 at 1, and a Beta(a, b) density
// on (0, 1) carrying the remaining weight 1 - p0 - p1. The regression
// parametrization uses
//   mu = a / (a + b),  sigma = 1 / (a + b + 1),
//   nu = p0 / (1 - p0 - p1),  tau = p1 / (1 - p0 - p1).

#include <beinf/errors.hpp>
#include <beinf/special_functions.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace beinf {

struct BeinfParams {
  double p0 = 0.0;
  double p1 = 0.0;
  double a = 1.0;
  double b = 1.0;
};

struct GamlssParams {
  double mu = 0.5;
  double sigma = 1.0 / 3.0;
  double nu = 0.0;
  double tau = 0.0;
};

/// True when p0, p1 >= 0, p0 + p1 <= 1 and both shapes are positive.
inline bool is_valid(const BeinfParams& p) {
  return p.p0 >= 0.0 && p.p1 >= 0.0 && p.p0 + p.p1 <= 1.0 && std::isfinite(p.a) &&
         std::isfinite(p.b) && p.a > 0.0 && p.b > 0.0;
}

inline bool is_valid(const GamlssParams& g) {
  return g.mu > 0.0 && g.mu < 1.0 && g.sigma > 0.0 && g.sigma < 1.0 && g.nu >= 0.0 &&
         g.tau >= 0.0 && std::isfinite(g.nu) && std::isfinite(g.tau);
}

namespace detail {

inline void validate(const BeinfParams& p, const char* fn) {
  if (!is_valid(p)) throw DomainError(std::string(fn) + ": invalid BEINF parameters");
}

// Weight of the continuous component; rejects p0 + p1 = 1.
inline double beta_weight(const BeinfParams& p, const char* fn) {
  const double w = 1.0 - p.p0 - p.p1;
  if (w <= 0.0) throw DegenerateError(std::string(fn) + ": p0 + p1 = 1 leaves no beta component");
  return w;
}

}  // namespace detail

inline GamlssParams to_gamlss(const BeinfParams& p) {
  detail::validate(p, "to_gamlss");
  const double w = detail::beta_weight(p, "to_gamlss");
  const double ab = p.a + p.b;
  return {p.a / ab, 1.0 / (ab + 1.0), p.p0 / w, p.p1 / w};
}

inline BeinfParams from_gamlss(const GamlssParams& g) {
  if (!(g.mu > 0.0 && g.mu < 1.0)) throw DomainError("from_gamlss: mu must lie in (0, 1)");
  if (!(g.sigma > 0.0 && g.sigma < 1.0)) throw DomainError("from_gamlss: sigma must lie in (0, 1)");
  if (!(g.nu >= 0.0 && g.tau >= 0.0 && std::isfinite(g.nu) && std::isfinite(g.tau))) {
    throw DomainError("from_gamlss: nu and tau must be finite and >= 0");
  }
  const double ab = (1.0 - g.sigma) / g.sigma;
  const double total = 1.0 + g.nu + g.tau;
  return {g.nu / total, g.tau / total, g.mu * ab, (1.0 - g.mu) * ab};
}

/// Beta(a, b) density on the open interval (0, 1).
inline double beta_pdf(double r, double a, double b) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("beta_pdf: r must lie in (0, 1)");
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_pdf: shapes must be > 0");
  return std::exp(-ln_beta_fn(a, b) + (a - 1.0) * std::log(r) + (b - 1.0) * std::log1p(-r));
}

/// Density with respect to the mixture measure (point masses at 0 and 1
/// plus Lebesgue measure on (0, 1)).
inline double beinf_pdf(double r, const BeinfParams& p) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("beinf_pdf: r must lie in [0, 1]");
  detail::validate(p, "beinf_pdf");
  if (r == 0.0) return p.p0;
  if (r == 1.0) return p.p1;
  const double w = 1.0 - p.p0 - p.p1;
  if (w <= 0.0) return 0.0;
  return w * beta_pdf(r, p.a, p.b);
}

inline double beinf_cdf(double r, const BeinfParams& p) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("beinf_cdf: r must lie in [0, 1]");
  detail::validate(p, "beinf_cdf");
  if (r == 1.0) return 1.0;
  const double w = 1.0 - p.p0 - p.p1;
  if (w <= 0.0 || r == 0.0) return p.p0;
  return p.p0 + w * reg_inc_beta(r, p.a, p.b);
}

/// Generalized inverse of the cdf: the smallest r with cdf(r) >= q.
inline double beinf_quantile(double q, const BeinfParams& p) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("beinf_quantile: q must lie in [0, 1]");
  detail::validate(p, "beinf_quantile");
  if (q <= p.p0) return 0.0;
  if (q > 1.0 - p.p1) return 1.0;
  const double w = 1.0 - p.p0 - p.p1;
  double u = (q - p.p0) / w;
  if (u > 1.0) u = 1.0;
  return inv_reg_inc_beta(u, p.a, p.b);
}

/// Uniform double in the open interval (0, 1) from the top 53 bits of a
/// 64-bit generator draw. Bit-identical across standard library implementations.
template <class Engine>
double unit_uniform(Engine& gen) {
  static_assert(Engine::max() - Engine::min() == ~std::uint64_t{0},
                "unit_uniform requires a full 64-bit engine");
  return (static_cast<double>((gen() - Engine::min()) >> 11) + 0.5) * 0x1.0p-53;
}

/// Draws n values by inverse-cdf sampling with a caller-owned engine.
template <class Engine>
std::vector<double> beinf_sample(const BeinfParams& p, std::size_t n, Engine& gen) {
  detail::validate(p, "beinf_sample");
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(beinf_quantile(unit_uniform(gen), p));
  return out;
}

inline std::vector<double> beinf_sample(const BeinfParams& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return beinf_sample(p, n, gen);
}

/// E[R] = p1 + (1 - p0 - p1) a / (a + b).
inline double beinf_mean(const BeinfParams& p) {
  detail::validate(p, "beinf_mean");
  return p.p1 + (1.0 - p.p0 - p.p1) * p.a / (p.a + p.b);
}

}  // namespace beinf
