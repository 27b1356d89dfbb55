#pragma once

// Reimbursement under a deductible and an out-of-pocket maximum, the
// reimbursed proportion (IDR), seeded portfolio simulators and per-class
// summaries.

#include <beinf/distribution.hpp>
#include <beinf/errors.hpp>
#include <beinf/observation.hpp>
#include <beinf/special_functions.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace beinf {

struct ClaimRecord {
  double expenditure = 0.0;  // Y
  double deductible = 0.0;   // f
  double oop_max = 0.0;      // M
  Covariates covariates;
};

inline void validate(const ClaimRecord& c) {
  if (!(std::isfinite(c.expenditure) && c.expenditure >= 0.0)) throw ValidationError("expenditure must be >= 0");
  if (!(std::isfinite(c.deductible) && c.deductible >= 0.0)) throw ValidationError("deductible must be >= 0");
  if (!(c.oop_max > 0.0)) throw ValidationError("out-of-pocket maximum must be > 0");
}

/// Nothing is paid unless Y exceeds the deductible; above it the full
/// expenditure is paid up to the cap M.
inline double reimbursement(const ClaimRecord& c) {
  validate(c);
  if (!(c.expenditure > c.deductible)) return 0.0;
  return std::min(c.expenditure, c.oop_max);
}

/// Reimbursed proportion L / Y.
inline IdrObservation idr(const ClaimRecord& c) {
  validate(c);
  if (c.expenditure == 0.0) throw DegenerateError("idr: expenditure is zero");
  return {reimbursement(c) / c.expenditure, 1.0, c.covariates};
}

inline std::vector<IdrObservation> to_observations(std::span<const ClaimRecord> claims) {
  std::vector<IdrObservation> out;
  out.reserve(claims.size());
  for (const auto& c : claims) out.push_back(idr(c));
  return out;
}

struct SeverityModel {
  double meanlog = 0.0;
  double sdlog = 1.0;

  double cdf(double y) const {
    if (y <= 0.0) return 0.0;
    return 0.5 * std::erfc(-(std::log(y) - meanlog) / (sdlog * std::numbers::sqrt2));
  }
};

struct ClaimClassConfig {
  Covariates covariates;
  std::size_t exposure = 0;
  double deductible = 0.0;
  double oop_max = std::numeric_limits<double>::max();
  SeverityModel severity;
};

struct PortfolioConfig {
  std::vector<ClaimClassConfig> classes;
  std::uint64_t seed = 0;
};

struct IdrClassConfig {
  Covariates covariates;
  std::size_t exposure = 0;
  BeinfParams params;
};

struct IdrPortfolioConfig {
  std::vector<IdrClassConfig> classes;
  std::uint64_t seed = 0;
  // Exact per-class counts round(n p0) and round(n p1) instead of random draws.
  bool stratified = false;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream per class.
inline std::mt19937_64 class_engine(std::uint64_t seed, std::size_t class_index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (0xD1B54A32D192ED03ULL * (class_index + 1))));
}

// Box-Muller, one variate per pair of uniforms.
inline double standard_normal(std::mt19937_64& gen) {
  const double u1 = unit_uniform(gen);
  const double u2 = unit_uniform(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

/// Claim-level portfolio with lognormal severities; records are emitted class
/// by class in configuration order.
inline std::vector<ClaimRecord> simulate_portfolio(const PortfolioConfig& config) {
  if (config.classes.empty()) throw ValidationError("simulate_portfolio: no classes configured");
  std::vector<ClaimRecord> out;
  for (std::size_t h = 0; h < config.classes.size(); ++h) {
    const auto& cls = config.classes[h];
    const std::string where = "class " + std::to_string(h + 1) + " (" + format_class(cls.covariates) + ")";
    if (!(std::isfinite(cls.severity.meanlog) && std::isfinite(cls.severity.sdlog) && cls.severity.sdlog > 0.0)) {
      throw ValidationError(where + ": severity needs finite meanlog and sdlog > 0");
    }
    if (!(std::isfinite(cls.deductible) && cls.deductible >= 0.0)) throw ValidationError(where + ": deductible must be >= 0");
    if (!(cls.oop_max > 0.0)) throw ValidationError(where + ": oop_max must be > 0");

    auto gen = detail::class_engine(config.seed, h);
    for (std::size_t i = 0; i < cls.exposure; ++i) {
      const double y = std::exp(cls.severity.meanlog + cls.severity.sdlog * detail::standard_normal(gen));
      out.push_back({y, cls.deductible, cls.oop_max, cls.covariates});
    }
  }
  return out;
}

/// IDR-level portfolio drawn directly from per-class BEINF parameters.
inline std::vector<IdrObservation> simulate_idr(const IdrPortfolioConfig& config) {
  if (config.classes.empty()) throw ValidationError("simulate_idr: no classes configured");
  std::vector<IdrObservation> out;
  for (std::size_t h = 0; h < config.classes.size(); ++h) {
    const auto& cls = config.classes[h];
    if (!is_valid(cls.params)) {
      throw ValidationError("class " + std::to_string(h + 1) + " (" + format_class(cls.covariates) +
                            "): invalid BEINF parameters");
    }
    auto gen = detail::class_engine(config.seed, h);
    if (!config.stratified) {
      for (double r : beinf_sample(cls.params, cls.exposure, gen)) out.push_back({r, 1.0, cls.covariates});
      continue;
    }
    const auto n = static_cast<double>(cls.exposure);
    auto n0 = static_cast<std::size_t>(std::llround(n * cls.params.p0));
    auto n1 = static_cast<std::size_t>(std::llround(n * cls.params.p1));
    n0 = std::min(n0, cls.exposure);
    n1 = std::min(n1, cls.exposure - n0);
    for (std::size_t i = 0; i < n0; ++i) out.push_back({0.0, 1.0, cls.covariates});
    for (std::size_t i = 0; i < n1; ++i) out.push_back({1.0, 1.0, cls.covariates});
    for (std::size_t i = n0 + n1; i < cls.exposure; ++i) {
      // Extreme shapes can push a quantile onto an endpoint; keep the counts exact.
      const double r = inv_reg_inc_beta(unit_uniform(gen), cls.params.a, cls.params.b);
      out.push_back({std::clamp(r, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0)), 1.0, cls.covariates});
    }
  }
  return out;
}

struct ClassSummary {
  double exposure = 0.0;           // total weight
  double exposure_zero = 0.0;      // weight at r = 0
  double exposure_one = 0.0;       // weight at r = 1
  double exposure_interior = 0.0;  // weight in (0, 1)
  double frac0 = 0.0;
  double frac1 = 0.0;
  double interior_mean = std::numeric_limits<double>::quiet_NaN();  // NaN without interior values
};

/// Per-class exposures, 0/1 fractions and interior mean. Classes are keyed by
/// the covariates named in `keys`, or by all covariates when `keys` is empty.
inline std::map<Covariates, ClassSummary> class_summary(std::span<const IdrObservation> obs,
                                                        const std::vector<std::string>& keys = {}) {
  if (obs.empty()) throw ValidationError("class_summary: no observations");
  std::map<Covariates, ClassSummary> out;
  std::map<Covariates, double> interior_sum;
  for (const auto& o : obs) {
    if (!(o.r >= 0.0 && o.r <= 1.0)) throw ValidationError("class_summary: response outside [0, 1]");
    const Covariates key = keys.empty() ? o.covariates : project(o.covariates, keys);
    auto& s = out[key];
    s.exposure += o.weight;
    if (o.r == 0.0) {
      s.exposure_zero += o.weight;
    } else if (o.r == 1.0) {
      s.exposure_one += o.weight;
    } else {
      s.exposure_interior += o.weight;
      interior_sum[key] += o.weight * o.r;
    }
  }
  for (auto& [key, s] : out) {
    if (!(s.exposure > 0.0)) throw ValidationError("class_summary: empty class " + format_class(key));
    s.frac0 = s.exposure_zero / s.exposure;
    s.frac1 = s.exposure_one / s.exposure;
    if (s.exposure_interior > 0.0) s.interior_mean = interior_sum[key] / s.exposure_interior;
  }
  return out;
}

}  // namespace beinf
