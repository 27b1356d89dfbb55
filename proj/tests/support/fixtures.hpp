#pragma once

// Synthetic datasets shared by the unit and acceptance suites.

#include <beinf/claims.hpp>
#include <beinf/design.hpp>
#include <beinf/distribution.hpp>
#include <beinf/link.hpp>
#include <beinf/observation.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace fixtures {

// One row of the published observed-vs-fitted table.
struct TableRow {
  std::string branch;
  std::string level;
  std::size_t exposure;
  double p0;
  double p1;
  double beta_mean;
};

inline const std::array<TableRow, 6>& table1() {
  static const std::array<TableRow, 6> rows{{
      {"surgery", "1", 47845, 0.9788, 0.0135, 0.8872},
      {"surgery", "2", 9566, 0.9824, 0.0001, 0.7966},
      {"surgery", "3", 6379, 0.8641, 0.0000, 0.7690},
      {"diagnostic", "1", 44245, 0.5267, 0.1488, 0.7704},
      {"diagnostic", "2", 8889, 0.0270, 0.0000, 0.7008},
      {"diagnostic", "3", 5860, 0.2666, 0.0000, 0.6410},
  }};
  return rows;
}

// Beta dispersion sigma = 1 / (a + b + 1) used for every synthetic class.
inline constexpr double kTableSigma = 0.1;

/// IDR portfolio with the table's exposures, 0/1 fractions and interior means.
inline std::vector<beinf::IdrObservation> table1_dataset(std::uint64_t seed, bool stratified = true) {
  beinf::IdrPortfolioConfig cfg;
  cfg.seed = seed;
  cfg.stratified = stratified;
  for (const auto& row : table1()) {
    const double ab = (1.0 - kTableSigma) / kTableSigma;
    beinf::BeinfParams p{row.p0, row.p1, row.beta_mean * ab, (1.0 - row.beta_mean) * ab};
    cfg.classes.push_back({{{"branch", row.branch}, {"deductible_level", row.level}}, row.exposure, p});
  }
  return beinf::simulate_idr(cfg);
}

inline std::vector<beinf::IdrObservation> filter_branch(const std::vector<beinf::IdrObservation>& data,
                                                        const std::string& branch) {
  std::vector<beinf::IdrObservation> out;
  for (const auto& o : data) {
    if (o.covariates.at("branch") == branch) out.push_back(o);
  }
  return out;
}

// Coefficients of the deductible model, in the order
// mu: (b10, b11, b12), sigma: (b20), nu: (b30, b31, b32), tau: (b40, b41, b42).
struct DeductibleTruth {
  std::array<double, 3> mu{0.8, -0.4, -0.9};
  double sigma = -1.5;
  std::array<double, 3> nu{-0.5, 0.6, 1.1};
  std::array<double, 3> tau{-1.0, -0.5, 0.4};

  std::vector<double> flat() const {
    return {mu[0], mu[1], mu[2], sigma, nu[0], nu[1], nu[2], tau[0], tau[1], tau[2]};
  }

  beinf::BeinfParams class_params(int level) const {
    auto eta = [&](const std::array<double, 3>& c) { return c[0] + (level == 2 ? c[1] : 0.0) + (level == 3 ? c[2] : 0.0); };
    const beinf::GamlssParams g{beinf::link_inverse(beinf::LinkKind::logit, eta(mu)),
                                beinf::link_inverse(beinf::LinkKind::logit, sigma),
                                beinf::link_inverse(beinf::LinkKind::log, eta(nu)),
                                beinf::link_inverse(beinf::LinkKind::log, eta(tau))};
    return beinf::from_gamlss(g);
  }
};

/// n observations split evenly over three deductible levels, drawn from the truth.
inline std::vector<beinf::IdrObservation> deductible_dataset(const DeductibleTruth& truth, std::size_t n,
                                                             std::uint64_t seed) {
  beinf::IdrPortfolioConfig cfg;
  cfg.seed = seed;
  for (int level = 1; level <= 3; ++level) {
    const std::size_t count = n / 3 + (static_cast<std::size_t>(level) <= n % 3 ? 1 : 0);
    cfg.classes.push_back({{{"deductible_level", std::to_string(level)}}, count, truth.class_params(level)});
  }
  return beinf::simulate_idr(cfg);
}

}  // namespace fixtures
