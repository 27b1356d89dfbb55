#pragma once

#include <beinf/errors.hpp>

#include <cmath>
#include <string>
#include <string_view>

namespace beinf {

enum class LinkKind { logit, log, identity };

// exp() argument limit for the log link.
inline constexpr double kMaxLogEta = 700.0;

inline std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::logit: return "logit";
    case LinkKind::log: return "log";
    case LinkKind::identity: return "identity";
  }
  return "?";
}

inline LinkKind parse_link(std::string_view name) {
  if (name == "logit") return LinkKind::logit;
  if (name == "log") return LinkKind::log;
  if (name == "identity") return LinkKind::identity;
  throw ValidationError("unknown link function '" + std::string(name) + "'");
}

/// g(theta): maps a parameter value onto the linear-predictor scale.
inline double link_apply(LinkKind k, double theta) {
  switch (k) {
    case LinkKind::logit:
      if (!(theta > 0.0 && theta < 1.0)) throw DomainError("logit link: theta must lie in (0, 1)");
      return std::log(theta) - std::log1p(-theta);
    case LinkKind::log:
      if (!(theta > 0.0)) throw DomainError("log link: theta must be > 0");
      return std::log(theta);
    case LinkKind::identity:
      if (!std::isfinite(theta)) throw DomainError("identity link: theta must be finite");
      return theta;
  }
  throw DomainError("unknown link");
}

/// g^{-1}(eta).
inline double link_inverse(LinkKind k, double eta) {
  if (!std::isfinite(eta)) throw DomainError("link_inverse: eta must be finite");
  switch (k) {
    case LinkKind::logit:
      // Sign split keeps exp() argument non-positive.
      if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
      else {
        const double e = std::exp(eta);
        return e / (1.0 + e);
      }
    case LinkKind::log:
      if (eta > kMaxLogEta) throw OverflowError("log link: eta exceeds 700");
      return std::exp(eta);
    case LinkKind::identity:
      return eta;
  }
  throw DomainError("unknown link");
}

/// d g^{-1}(eta) / d eta.
inline double link_inverse_deriv(LinkKind k, double eta) {
  switch (k) {
    case LinkKind::logit: {
      // p (1 - p), symmetric in eta
      if (!std::isfinite(eta)) throw DomainError("link_inverse: eta must be finite");
      const double e = std::exp(-std::fabs(eta));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case LinkKind::log:
      return link_inverse(k, eta);
    case LinkKind::identity:
      if (!std::isfinite(eta)) throw DomainError("link_inverse: eta must be finite");
      return 1.0;
  }
  throw DomainError("unknown link");
}

}  // namespace beinf
