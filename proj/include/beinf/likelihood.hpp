#pragma once

// BEINF log-likelihood of the four-predictor regression model and its
// central finite-difference gradient.
//
// Observations sharing the same four design rows form a cell. A cell keeps
// only the sufficient statistics of its observations (weights at 0, at 1 and
// in the interior, plus sum of w ln r and w ln(1 - r)), so one evaluation
// costs O(cells) instead of O(observations). Cells and the values inside
// each cell are summed in a fixed order independent of the input row order.

#include <beinf/design.hpp>
#include <beinf/distribution.hpp>
#include <beinf/errors.hpp>
#include <beinf/link.hpp>
#include <beinf/observation.hpp>
#include <beinf/special_functions.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beinf {

// Returned instead of -infinity when any parameter leaves its domain.
inline constexpr double kLogLikSentinel = -1e300;

// Interior responses are clamped to [kInteriorClamp, 1 - kInteriorClamp].
inline constexpr double kInteriorClamp = 1e-10;

struct CoefficientSet {
  std::array<Eigen::VectorXd, kNumParams> beta;
  std::array<std::vector<std::string>, kNumParams> labels;

  Eigen::VectorXd& operator[](Param p) { return beta[static_cast<std::size_t>(p)]; }
  const Eigen::VectorXd& operator[](Param p) const { return beta[static_cast<std::size_t>(p)]; }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& b : beta) n += static_cast<std::size_t>(b.size());
    return n;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    Eigen::Index off = 0;
    for (const auto& b : beta) {
      out.segment(off, b.size()) = b;
      off += b.size();
    }
    return out;
  }

  /// Same shape and labels, values taken from a flat vector.
  CoefficientSet with_values(const Eigen::VectorXd& flat) const {
    if (static_cast<std::size_t>(flat.size()) != size()) {
      throw DimensionError("coefficient vector has wrong length");
    }
    CoefficientSet out = *this;
    Eigen::Index off = 0;
    for (auto& b : out.beta) {
      b = flat.segment(off, b.size());
      off += b.size();
    }
    return out;
  }

  static CoefficientSet zeros(const DesignMatrices& dm) {
    CoefficientSet c;
    for (std::size_t k = 0; k < kNumParams; ++k) {
      c.beta[k] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dm.params[k].coding.cols()));
      c.labels[k] = dm.params[k].coding.labels;
    }
    return c;
  }
};

/// Distribution parameters from linear predictors. Returns nullopt when any
/// parameter leaves its domain or the beta shapes exceed kMaxShape.
inline std::optional<GamlssParams> gamlss_from_predictors(const std::array<double, kNumParams>& eta,
                                                          const std::array<LinkKind, kNumParams>& links) {
  std::array<double, kNumParams> theta{};
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (!std::isfinite(eta[k])) return std::nullopt;
    if (links[k] == LinkKind::log && eta[k] > kMaxLogEta) return std::nullopt;
    theta[k] = link_inverse(links[k], eta[k]);
  }
  GamlssParams g{theta[0], theta[1], theta[2], theta[3]};
  if (!is_valid(g)) return std::nullopt;
  const double ab = (1.0 - g.sigma) / g.sigma;
  const double a = g.mu * ab;
  const double b = (1.0 - g.mu) * ab;
  if (!(a > 0.0 && b > 0.0 && a <= kMaxShape && b <= kMaxShape)) return std::nullopt;
  return g;
}

namespace detail {

// Pairwise (cascade) summation over a fixed sequence.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace detail

class BeinfLikelihood {
 public:
  struct Cell {
    std::array<Eigen::VectorXd, kNumParams> x;  // design rows
    double w0 = 0.0;
    double w1 = 0.0;
    double w_interior = 0.0;
    double sum_log = 0.0;    // sum of w ln r over interior observations
    double sum_log1m = 0.0;  // sum of w ln(1 - r)
  };

  BeinfLikelihood(std::span<const IdrObservation> data, const DesignMatrices& dm) {
    if (dm.rows() != data.size()) {
      throw DimensionError("design matrices have " + std::to_string(dm.rows()) + " rows but data has " +
                           std::to_string(data.size()) + " observations");
    }
    for (std::size_t k = 0; k < kNumParams; ++k) {
      links_[k] = dm.params[k].coding.link;
      cols_[k] = static_cast<Eigen::Index>(dm.params[k].coding.cols());
      offsets_[k] = k == 0 ? 0 : offsets_[k - 1] + cols_[k - 1];
    }

    std::map<std::vector<double>, std::size_t> index;
    std::vector<std::vector<std::array<double, 3>>> interior;  // per cell: (log r, log(1-r), w)
    std::vector<WeightEntry> zeros;
    std::vector<WeightEntry> ones;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& obs = data[i];
      if (!(obs.r >= 0.0 && obs.r <= 1.0)) {
        throw ValidationError("observation " + std::to_string(i + 1) + ": response must lie in [0, 1]");
      }
      if (!(std::isfinite(obs.weight) && obs.weight > 0.0)) {
        throw ValidationError("observation " + std::to_string(i + 1) + ": weight must be positive");
      }
      std::vector<double> key;
      for (std::size_t k = 0; k < kNumParams; ++k) {
        const auto row = dm.params[k].X.row(static_cast<Eigen::Index>(i));
        for (Eigen::Index j = 0; j < row.size(); ++j) key.push_back(row(j));
      }
      auto [it, inserted] = index.try_emplace(std::move(key), cells_.size());
      if (inserted) {
        Cell c;
        for (std::size_t k = 0; k < kNumParams; ++k) {
          c.x[k] = dm.params[k].X.row(static_cast<Eigen::Index>(i)).transpose();
        }
        cells_.push_back(std::move(c));
        interior.emplace_back();
      }
      const std::size_t ci = it->second;
      if (obs.r == 0.0) {
        zeros.push_back({ci, obs.weight});
      } else if (obs.r == 1.0) {
        ones.push_back({ci, obs.weight});
      } else {
        const double r = std::clamp(obs.r, kInteriorClamp, 1.0 - kInteriorClamp);
        interior[ci].push_back({std::log(r), std::log1p(-r), obs.weight});
      }
    }

    // Order cells by their design rows, then accumulate sorted values.
    std::vector<std::size_t> order;
    order.reserve(index.size());
    for (const auto& kv : index) order.push_back(kv.second);
    std::vector<std::size_t> rank(cells_.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;

    std::vector<std::vector<double>> w0(cells_.size()), w1(cells_.size());
    for (const auto& [c, w] : zeros) w0[c].push_back(w);
    for (const auto& [c, w] : ones) w1[c].push_back(w);

    std::vector<Cell> sorted(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      Cell cell = std::move(cells_[c]);
      std::sort(w0[c].begin(), w0[c].end());
      std::sort(w1[c].begin(), w1[c].end());
      cell.w0 = detail::pairwise_sum(w0[c]);
      cell.w1 = detail::pairwise_sum(w1[c]);
      auto& in = interior[c];
      std::sort(in.begin(), in.end());
      std::vector<double> ws, ls, l1s;
      for (const auto& [lr, l1r, w] : in) {
        ws.push_back(w);
        ls.push_back(w * lr);
        l1s.push_back(w * l1r);
      }
      cell.w_interior = detail::pairwise_sum(ws);
      cell.sum_log = detail::pairwise_sum(ls);
      cell.sum_log1m = detail::pairwise_sum(l1s);
      sorted[rank[c]] = std::move(cell);
    }
    cells_ = std::move(sorted);
  }

  std::span<const Cell> cells() const { return cells_; }
  std::size_t n_coefficients() const {
    return static_cast<std::size_t>(offsets_[kNumParams - 1] + cols_[kNumParams - 1]);
  }
  const std::array<LinkKind, kNumParams>& links() const { return links_; }

  /// Log-likelihood contribution of one cell; nullopt outside the parameter domain.
  std::optional<double> cell_value(const Cell& c, const Eigen::VectorXd& beta) const {
    const auto v = cell_value_extended(c, beta);
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
  }

  double value(const Eigen::VectorXd& beta) const {
    check_size(beta);
    std::vector<double> parts;
    parts.reserve(cells_.size());
    for (const auto& c : cells_) {
      const auto v = cell_value(c, beta);
      if (!v) return kLogLikSentinel;
      parts.push_back(*v);
    }
    return detail::pairwise_sum(parts);
  }

  /// Central differences with step max(1e-6, 1e-7 |beta_j|). The difference
  /// L(beta + h e_j) - L(beta - h e_j) is accumulated cell by cell in extended
  /// precision, which keeps the cancellation error far below the gradient
  /// tolerances even for large cells; cells whose design row is zero in
  /// coordinate j contribute exactly zero.
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const {
    check_size(beta);
    const Eigen::Index p = beta.size();
    Eigen::VectorXd grad(p);
    const bool base_valid = all_valid(beta);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double h = std::max(1e-6, 1e-7 * std::fabs(beta(j)));
      Eigen::VectorXd plus = beta;
      Eigen::VectorXd minus = beta;
      plus(j) += h;
      minus(j) -= h;
      const double span = plus(j) - minus(j);
      const auto [k, local] = locate(j);

      std::vector<double> diffs;
      bool valid = base_valid;
      for (const auto& c : cells_) {
        if (!valid) break;
        if (c.x[k](local) == 0.0) continue;
        const auto vp = cell_value_extended(c, plus);
        const auto vm = cell_value_extended(c, minus);
        if (!vp || !vm) {
          valid = false;
          break;
        }
        diffs.push_back(static_cast<double>(*vp - *vm));
      }
      if (valid) {
        grad(j) = detail::pairwise_sum(diffs) / span;
      } else {
        grad(j) = (value(plus) - value(minus)) / span;
      }
    }
    return grad;
  }

 private:
  struct WeightEntry {
    std::size_t cell;
    double w;
  };

  static long double inverse_extended(LinkKind k, long double eta) {
    switch (k) {
      case LinkKind::logit:
        if (eta >= 0.0L) return 1.0L / (1.0L + std::exp(-eta));
        return std::exp(eta) / (1.0L + std::exp(eta));
      case LinkKind::log:
        return std::exp(eta);
      case LinkKind::identity:
        return eta;
    }
    return 0.0L;
  }

  // Domain checks run in double precision so that value() and gradient()
  // agree on which points are admissible; the arithmetic runs in long double.
  std::optional<long double> cell_value_extended(const Cell& c, const Eigen::VectorXd& beta) const {
    std::array<long double, kNumParams> eta{};
    std::array<double, kNumParams> eta_d{};
    for (std::size_t k = 0; k < kNumParams; ++k) {
      long double e = 0.0L;
      for (Eigen::Index j = 0; j < cols_[k]; ++j) {
        e += static_cast<long double>(c.x[k](j)) * static_cast<long double>(beta(offsets_[k] + j));
      }
      eta[k] = e;
      eta_d[k] = static_cast<double>(e);
    }
    if (!gamlss_from_predictors(eta_d, links_)) return std::nullopt;

    std::array<long double, kNumParams> theta{};
    for (std::size_t k = 0; k < kNumParams; ++k) theta[k] = inverse_extended(links_[k], eta[k]);
    const long double mu = theta[0], sigma = theta[1], nu = theta[2], tau = theta[3];
    const long double log_total = std::log1p(nu + tau);  // -ln(1 - p0 - p1)

    long double ll = 0.0L;
    if (c.w0 > 0.0) {
      if (nu <= 0.0L) return std::nullopt;
      ll += c.w0 * ((links_[2] == LinkKind::log ? eta[2] : std::log(nu)) - log_total);
    }
    if (c.w1 > 0.0) {
      if (tau <= 0.0L) return std::nullopt;
      ll += c.w1 * ((links_[3] == LinkKind::log ? eta[3] : std::log(tau)) - log_total);
    }
    if (c.w_interior > 0.0) {
      const long double ab = (1.0L - sigma) / sigma;
      const long double a = mu * ab;
      const long double b = (1.0L - mu) * ab;
      if (!(a > 0.0L && b > 0.0L)) return std::nullopt;
      const long double ln_b =
          detail::ln_gamma_extended(a) + detail::ln_gamma_extended(b) - detail::ln_gamma_extended(a + b);
      ll += c.w_interior * (-log_total - ln_b) + (a - 1.0L) * c.sum_log + (b - 1.0L) * c.sum_log1m;
    }
    if (!std::isfinite(ll)) return std::nullopt;
    return ll;
  }

  std::pair<std::size_t, Eigen::Index> locate(Eigen::Index j) const {
    for (std::size_t k = kNumParams; k-- > 0;) {
      if (j >= offsets_[k]) return {k, j - offsets_[k]};
    }
    return {0, j};
  }

  bool all_valid(const Eigen::VectorXd& beta) const {
    return std::all_of(cells_.begin(), cells_.end(),
                       [&](const Cell& c) { return cell_value_extended(c, beta).has_value(); });
  }

  void check_size(const Eigen::VectorXd& beta) const {
    if (static_cast<std::size_t>(beta.size()) != n_coefficients()) {
      throw DimensionError("coefficient vector has length " + std::to_string(beta.size()) + ", expected " +
                           std::to_string(n_coefficients()));
    }
  }

  std::vector<Cell> cells_;
  std::array<LinkKind, kNumParams> links_{};
  std::array<Eigen::Index, kNumParams> cols_{};
  std::array<Eigen::Index, kNumParams> offsets_{};
};

namespace detail {

inline void check_shape(const DesignMatrices& dm, const CoefficientSet& beta) {
  for (std::size_t k = 0; k < kNumParams; ++k) {
    if (static_cast<std::size_t>(beta.beta[k].size()) != dm.params[k].coding.cols()) {
      throw DimensionError("coefficients for " + std::string(kParamNames[k]) + " have length " +
                           std::to_string(beta.beta[k].size()) + ", design has " +
                           std::to_string(dm.params[k].coding.cols()) + " columns");
    }
  }
}

}  // namespace detail

/// Sum over observations of w_i ln beinf_pdf(r_i; theta_i), or kLogLikSentinel
/// if any parameter leaves its domain.
inline double log_likelihood(std::span<const IdrObservation> data, const DesignMatrices& dm,
                             const CoefficientSet& beta) {
  detail::check_shape(dm, beta);
  return BeinfLikelihood(data, dm).value(beta.flatten());
}

/// Central finite-difference gradient, shaped like the coefficients.
inline CoefficientSet gradient(std::span<const IdrObservation> data, const DesignMatrices& dm,
                               const CoefficientSet& beta) {
  detail::check_shape(dm, beta);
  return beta.with_values(BeinfLikelihood(data, dm).gradient(beta.flatten()));
}

}  // namespace beinf
