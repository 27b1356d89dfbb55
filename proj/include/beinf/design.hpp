#pragma once

// Model specification and dummy-coded design matrices for the four
// distribution parameters (mu, sigma, nu, tau).

#include <beinf/errors.hpp>
#include <beinf/link.hpp>
#include <beinf/observation.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace beinf {

enum class Param : std::size_t { mu = 0, sigma = 1, nu = 2, tau = 3 };

inline constexpr std::size_t kNumParams = 4;
inline constexpr std::array<std::string_view, kNumParams> kParamNames{"mu", "sigma", "nu", "tau"};

inline Param parse_param(std::string_view name) {
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (kParamNames[k] == name) return static_cast<Param>(k);
  }
  throw ValidationError("unknown distribution parameter '" + std::string(name) + "'");
}

struct ParameterSpec {
  LinkKind link = LinkKind::identity;
  std::vector<std::string> covariates;  // empty: intercept only
};

struct ModelSpec {
  std::array<ParameterSpec, kNumParams> params;

  ParameterSpec& operator[](Param p) { return params[static_cast<std::size_t>(p)]; }
  const ParameterSpec& operator[](Param p) const { return params[static_cast<std::size_t>(p)]; }

  /// Union of covariate names over the four predictors, sorted.
  std::vector<std::string> covariate_names() const {
    std::set<std::string> names;
    for (const auto& p : params) names.insert(p.covariates.begin(), p.covariates.end());
    return {names.begin(), names.end()};
  }
};

/// logit(mu) and log(nu), log(tau) on the given factor; logit(sigma) intercept only.
inline ModelSpec deductible_model(const std::string& factor = "deductible_level") {
  ModelSpec spec;
  spec[Param::mu] = {LinkKind::logit, {factor}};
  spec[Param::sigma] = {LinkKind::logit, {}};
  spec[Param::nu] = {LinkKind::log, {factor}};
  spec[Param::tau] = {LinkKind::log, {factor}};
  return spec;
}

struct FactorCoding {
  std::string name;
  std::vector<std::string> levels;  // levels[0] is the reference
};

// Column layout of one predictor; enough to rebuild a design row for any class.
struct DesignCoding {
  LinkKind link = LinkKind::identity;
  std::vector<FactorCoding> factors;
  std::vector<std::string> labels;  // "(Intercept)", then "<factor>_<level>"

  std::size_t cols() const { return labels.size(); }
};

struct DesignMatrix {
  DesignCoding coding;
  Eigen::MatrixXd X;
};

struct DesignMatrices {
  std::array<DesignMatrix, kNumParams> params;
  std::vector<std::string> warnings;

  const DesignMatrix& operator[](Param p) const { return params[static_cast<std::size_t>(p)]; }
  std::size_t rows() const { return static_cast<std::size_t>(params[0].X.rows()); }
  std::size_t total_cols() const {
    std::size_t n = 0;
    for (const auto& d : params) n += d.coding.cols();
    return n;
  }
};

/// Dummy-coded row for a covariate combination. Throws UnseenLevelError for
/// levels that were not present when the coding was built.
inline Eigen::VectorXd design_row(const DesignCoding& coding, const Covariates& cov) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(coding.cols()));
  row(0) = 1.0;
  Eigen::Index col = 1;
  for (const auto& f : coding.factors) {
    const auto it = cov.find(f.name);
    if (it == cov.end()) throw UnseenLevelError("missing covariate '" + f.name + "'");
    const auto lvl = std::find(f.levels.begin(), f.levels.end(), it->second);
    if (lvl == f.levels.end()) {
      throw UnseenLevelError("level '" + it->second + "' of '" + f.name + "' was not seen at fit time");
    }
    const auto idx = static_cast<Eigen::Index>(lvl - f.levels.begin());
    if (idx > 0) row(col + idx - 1) = 1.0;
    col += static_cast<Eigen::Index>(f.levels.size()) - 1;
  }
  return row;
}

/// Builds the four design matrices. Reference level of each factor is its
/// first level in numeric (or lexicographic) order.
inline DesignMatrices build_design(std::span<const IdrObservation> data, const ModelSpec& spec) {
  if (data.empty()) throw ValidationError("build_design: dataset is empty");
  DesignMatrices dm;
  const auto n = static_cast<Eigen::Index>(data.size());

  for (std::size_t k = 0; k < kNumParams; ++k) {
    const auto& ps = spec.params[k];
    DesignCoding coding;
    coding.link = ps.link;
    coding.labels.push_back("(Intercept)");

    std::set<std::string> seen_names;
    for (const auto& name : ps.covariates) {
      if (!seen_names.insert(name).second) {
        throw ValidationError("covariate '" + name + "' listed twice for " + std::string(kParamNames[k]));
      }
      std::set<std::string> level_set;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto it = data[i].covariates.find(name);
        if (it == data[i].covariates.end()) {
          throw ValidationError("unknown covariate '" + name + "' (missing in observation " +
                                std::to_string(i + 1) + ")");
        }
        level_set.insert(it->second);
      }
      FactorCoding f{name, {level_set.begin(), level_set.end()}};
      sort_levels(f.levels);
      if (f.levels.size() == 1) {
        dm.warnings.push_back("covariate '" + name + "' has a single level '" + f.levels[0] +
                              "'; dropped from the " + std::string(kParamNames[k]) + " predictor");
        continue;
      }
      for (std::size_t l = 1; l < f.levels.size(); ++l) coding.labels.push_back(name + "_" + f.levels[l]);
      coding.factors.push_back(std::move(f));
    }

    DesignMatrix d;
    d.X.resize(n, static_cast<Eigen::Index>(coding.cols()));
    for (Eigen::Index i = 0; i < n; ++i) {
      d.X.row(i) = design_row(coding, data[static_cast<std::size_t>(i)].covariates).transpose();
    }

    if (d.X.cols() > 1) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
      if (qr.rank() < d.X.cols()) {
        throw RankDeficientError("design matrix for " + std::string(kParamNames[k]) +
                                 " is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                                 std::to_string(d.X.cols()) + " columns)");
      }
    }
    d.coding = std::move(coding);
    dm.params[k] = std::move(d);
  }
  return dm;
}

}  // namespace beinf
