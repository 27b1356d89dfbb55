#pragma once

// Fixed-effects BEINF regression: maximum-likelihood fit of the four
// linear predictors, AIC, numeric standard errors and per-class parameters.

#include <beinf/design.hpp>
#include <beinf/distribution.hpp>
#include <beinf/errors.hpp>
#include <beinf/likelihood.hpp>
#include <beinf/link.hpp>
#include <beinf/observation.hpp>
#include <beinf/optimizer.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beinf {

struct ClassFit {
  GamlssParams gamlss;
  BeinfParams beinf;
};

struct FitResult {
  ModelSpec spec;
  std::array<DesignCoding, kNumParams> codings;
  CoefficientSet coefficients;
  CoefficientSet standard_errors;  // NaN where the observed information is not positive definite
  double log_likelihood = 0.0;
  double aic = 0.0;
  std::size_t n_params = 0;
  std::size_t n_observations = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // max-norm at the returned coefficients
  std::string termination;
  std::vector<double> trace;
  std::map<Covariates, ClassFit> fitted_class_params;  // keyed by the model covariates
  std::vector<std::string> warnings;
};

struct FitOptions {
  BfgsOptions optimizer;
  bool compute_standard_errors = true;
};

inline double aic(double log_likelihood, std::size_t n_params) {
  return -2.0 * log_likelihood + 2.0 * static_cast<double>(n_params);
}

inline double aic(const FitResult& fit) { return aic(fit.log_likelihood, fit.n_params); }

/// eta_k = x_h beta_k, theta_k = g_k^{-1}(eta_k), then the canonical parameters.
inline ClassFit predict_class(const FitResult& fit, const Covariates& cov) {
  std::array<double, kNumParams> eta{};
  std::array<LinkKind, kNumParams> links{};
  for (std::size_t k = 0; k < kNumParams; ++k) {
    eta[k] = design_row(fit.codings[k], cov).dot(fit.coefficients.beta[k]);
    links[k] = fit.codings[k].link;
  }
  const auto g = gamlss_from_predictors(eta, links);
  if (!g) throw DomainError("predicted parameters for class " + format_class(cov) + " leave their domain");
  return {*g, from_gamlss(*g)};
}

inline BeinfParams predict_class_params(const FitResult& fit, const Covariates& cov) {
  return predict_class(fit, cov).beinf;
}

/// Negative Hessian of the log-likelihood by central differences of the
/// finite-difference gradient, symmetrized.
inline Eigen::MatrixXd observed_information(const BeinfLikelihood& lik, const Eigen::VectorXd& beta) {
  const Eigen::Index p = beta.size();
  Eigen::MatrixXd hess(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double h = 1e-4 * std::max(1.0, std::fabs(beta(j)));
    Eigen::VectorXd plus = beta;
    Eigen::VectorXd minus = beta;
    plus(j) += h;
    minus(j) -= h;
    hess.col(j) = (lik.gradient(plus) - lik.gradient(minus)) / (plus(j) - minus(j));
  }
  return -0.5 * (hess + hess.transpose());
}

namespace detail {

// Order-independent sum: sort, then pairwise.
inline double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return pairwise_sum(v);
}

inline double weighted_interior_moments(std::span<const IdrObservation> data, double& variance) {
  std::vector<double> w, s;
  for (const auto& o : data) {
    if (o.r > 0.0 && o.r < 1.0) {
      w.push_back(o.weight);
      s.push_back(o.weight * o.r);
    }
  }
  const double w_total = sorted_sum(w);
  const double mean = sorted_sum(std::move(s)) / w_total;
  std::vector<double> ss;
  for (const auto& o : data) {
    if (o.r > 0.0 && o.r < 1.0) ss.push_back(o.weight * (o.r - mean) * (o.r - mean));
  }
  variance = sorted_sum(std::move(ss)) / w_total;
  return mean;
}

// Each mu / sigma column needs interior observations among the rows it touches.
inline void check_identifiable(std::span<const IdrObservation> data, const DesignMatrices& dm) {
  for (const Param p : {Param::mu, Param::sigma}) {
    const auto& d = dm[p];
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) {
      double w = 0.0;
      for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
        const auto& o = data[static_cast<std::size_t>(i)];
        if (d.X(i, j) != 0.0 && o.r > 0.0 && o.r < 1.0) w += o.weight;
      }
      if (w <= 0.0) {
        throw NonIdentifiableError("no interior observations for " + std::string(kParamNames[static_cast<std::size_t>(p)]) +
                                   " column '" + d.coding.labels[static_cast<std::size_t>(j)] + "'");
      }
    }
  }
}

inline double initial_intercept(LinkKind link, double theta, std::string_view name) {
  try {
    return link_apply(link, theta);
  } catch (const DomainError&) {
    throw ValidationError("starting value " + std::to_string(theta) + " for " + std::string(name) +
                          " is outside the domain of the " + std::string(to_string(link)) + " link");
  }
}

}  // namespace detail

/// Starting coefficients: nu, tau from the overall 0/1 frequencies, mu and sigma
/// by moments of the interior observations, all slopes zero.
inline CoefficientSet initial_coefficients(std::span<const IdrObservation> data, const DesignMatrices& dm) {
  std::vector<double> all, zeros, ones;
  for (const auto& o : data) {
    all.push_back(o.weight);
    if (o.r == 0.0) zeros.push_back(o.weight);
    if (o.r == 1.0) ones.push_back(o.weight);
  }
  const double w_all = detail::sorted_sum(std::move(all));
  const double w0 = detail::sorted_sum(std::move(zeros));
  const double w1 = detail::sorted_sum(std::move(ones));
  const double f0 = w0 / w_all;
  const double f1 = w1 / w_all;
  const double f_int = std::max(1.0 - f0 - f1, 1e-8);

  double variance = 0.0;
  const double mu0 = std::clamp(detail::weighted_interior_moments(data, variance), 1e-3, 1.0 - 1e-3);
  // Beta variance is mu (1 - mu) sigma under this parametrization.
  const double sigma0 = std::clamp(variance / (mu0 * (1.0 - mu0)), 0.01, 0.99);
  const double nu0 = std::max(f0, 1e-8) / f_int;
  const double tau0 = std::max(f1, 1e-8) / f_int;

  CoefficientSet c = CoefficientSet::zeros(dm);
  const std::array<double, kNumParams> theta0{mu0, sigma0, nu0, tau0};
  for (std::size_t k = 0; k < kNumParams; ++k) {
    c.beta[k](0) = detail::initial_intercept(dm.params[k].coding.link, theta0[k], kParamNames[k]);
  }
  return c;
}

inline FitResult fit(std::span<const IdrObservation> data, const ModelSpec& spec,
                     const std::optional<CoefficientSet>& init = std::nullopt, const FitOptions& options = {}) {
  const DesignMatrices dm = build_design(data, spec);
  detail::check_identifiable(data, dm);
  const BeinfLikelihood lik(data, dm);

  CoefficientSet start = initial_coefficients(data, dm);
  if (init) {
    detail::check_shape(dm, *init);
    start = start.with_values(init->flatten());
  }
  if (lik.value(start.flatten()) <= kLogLikSentinel) {
    throw ValidationError("starting coefficients lie outside the parameter domain");
  }

  const auto opt = bfgs_maximize([&](const Eigen::VectorXd& b) { return lik.value(b); },
                                 [&](const Eigen::VectorXd& b) { return lik.gradient(b); }, start.flatten(),
                                 options.optimizer);

  FitResult res;
  res.spec = spec;
  for (std::size_t k = 0; k < kNumParams; ++k) res.codings[k] = dm.params[k].coding;
  res.coefficients = start.with_values(opt.x);
  res.log_likelihood = opt.value;
  res.n_params = start.size();
  res.n_observations = data.size();
  res.aic = aic(res.log_likelihood, res.n_params);
  res.converged = opt.converged;
  res.iterations = opt.iterations;
  res.gradient_norm = opt.grad.size() ? opt.grad.cwiseAbs().maxCoeff() : 0.0;
  res.termination = opt.termination;
  res.trace = opt.trace;
  res.warnings = dm.warnings;

  Eigen::VectorXd se = Eigen::VectorXd::Constant(opt.x.size(), std::numeric_limits<double>::quiet_NaN());
  if (options.compute_standard_errors) {
    const Eigen::MatrixXd info = observed_information(lik, opt.x);
    // Coefficients pushed to the edge of the domain (a class with no zeros or
    // no ones) carry no information; invert the rest on its own.
    const double scale = info.diagonal().cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < info.rows(); ++j) {
      if (info(j, j) > 1e-8 * scale) keep.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = info(keep[i], keep[j]);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (m > 0 && llt.info() == Eigen::Success) {
      const Eigen::VectorXd var = llt.solve(Eigen::MatrixXd::Identity(m, m)).diagonal();
      for (Eigen::Index i = 0; i < m; ++i) se(keep[i]) = std::sqrt(var(i));
    }
    if (m < info.rows()) {
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < kNumParams; ++k) {
        for (const auto& l : start.labels[k]) labels.push_back(std::string(kParamNames[k]) + " " + l);
      }
      std::string dropped;
      for (Eigen::Index j = 0; j < info.rows(); ++j) {
        if (std::find(keep.begin(), keep.end(), j) == keep.end()) {
          dropped += (dropped.empty() ? "" : ", ") + labels[static_cast<std::size_t>(j)];
        }
      }
      res.warnings.push_back("no standard error for boundary coefficients: " + dropped);
    }
  }
  res.standard_errors = start.with_values(se);

  const auto names = spec.covariate_names();
  for (const auto& o : data) {
    Covariates key = project(o.covariates, names);
    if (!res.fitted_class_params.contains(key)) {
      res.fitted_class_params.emplace(key, predict_class(res, key));
    }
  }
  return res;
}

}  // namespace beinf
