#pragma once

#include <algorithm>
#include <charconv>
#include <map>
#include <string>
#include <vector>

namespace beinf {

// Categorical rating factors of a record, e.g. {"branch": "surgery", "deductible_level": "2"}.
using Covariates = std::map<std::string, std::string>;

// One observed reimbursement ratio.
struct IdrObservation {
  double r = 0.0;
  double weight = 1.0;
  Covariates covariates;
};

namespace detail {

inline bool parse_number(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace detail

/// Sorts factor levels: numerically when every level parses as a number,
/// lexicographically otherwise. The first element is the reference level.
inline void sort_levels(std::vector<std::string>& levels) {
  const bool numeric = std::all_of(levels.begin(), levels.end(), [](const std::string& s) {
    double v;
    return detail::parse_number(s, v);
  });
  if (numeric) {
    std::stable_sort(levels.begin(), levels.end(), [](const std::string& x, const std::string& y) {
      double vx = 0.0;
      double vy = 0.0;
      detail::parse_number(x, vx);
      detail::parse_number(y, vy);
      return vx < vy || (vx == vy && x < y);
    });
  } else {
    std::sort(levels.begin(), levels.end());
  }
}

/// Restricts a covariate map to the given names (missing names are skipped).
inline Covariates project(const Covariates& cov, const std::vector<std::string>& names) {
  Covariates out;
  for (const auto& n : names) {
    if (auto it = cov.find(n); it != cov.end()) out.emplace(n, it->second);
  }
  return out;
}

inline std::string format_class(const Covariates& cov) {
  std::string s;
  for (const auto& [k, v] : cov) {
    if (!s.empty()) s += ",";
    s += k + "=" + v;
  }
  return s.empty() ? std::string("(all)") : s;
}

}  // namespace beinf
