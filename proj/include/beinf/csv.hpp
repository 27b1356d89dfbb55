#pragma once

// CSV files for claims and IDR observations.
//
//   claims: branch,deductible_level,expenditure,deductible,oop_max
//   idr:    branch,deductible_level,idr[,weight]
//
// Headers are mandatory and columns may appear in any order. Columns outside
// the schema are read as additional categorical covariates. Numbers are
// written in the shortest form that round-trips.

#include <beinf/claims.hpp>
#include <beinf/errors.hpp>
#include <beinf/observation.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace beinf::csv {

inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ValidationError("cannot format number");
  return std::string(buf, ptr);
}

/// Splits one record. Fields may be double-quoted; "" inside quotes is a quote.
inline std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      if (!cur.empty() || was_quoted) {
        throw ValidationError("line " + std::to_string(line_no) + ": stray quote");
      }
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw ValidationError("line " + std::to_string(line_no) + ": text after closing quote");
      cur += ch;
    }
  }
  if (quoted) throw ValidationError("line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// Header plus rows with line numbers; blank lines are skipped.
struct Table {
  std::size_t header_line = 0;
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_record(line, line_no);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty column name");
        for (std::size_t j = 0; j < i; ++j) {
          if (fields[j] == fields[i]) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate column '" + fields[i] + "'");
          }
        }
      }
      t.header = std::move(fields);
      t.header_line = line_no;
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    t.rows.emplace_back(line_no, std::move(fields));
  }
  if (in.bad()) throw IoError("read error");
  if (!have_header) throw ValidationError("missing header line");
  return t;
}

namespace detail {

inline double parse_field(const std::string& s, std::string_view column, std::size_t line_no) {
  double v = 0.0;
  if (!beinf::detail::parse_number(s, v) || !std::isfinite(v)) {
    throw ValidationError("line " + std::to_string(line_no) + ": column '" + std::string(column) +
                          "' is not a finite number: '" + s + "'");
  }
  return v;
}

inline std::vector<std::size_t> require_columns(const Table& t, std::initializer_list<std::string_view> names) {
  std::vector<std::size_t> idx;
  for (auto n : names) {
    const auto c = t.column(n);
    if (!c) {
      throw ValidationError("line " + std::to_string(t.header_line) + ": missing required column '" +
                            std::string(n) + "'");
    }
    idx.push_back(*c);
  }
  return idx;
}

// Every column not in `numeric` becomes a covariate.
inline Covariates row_covariates(const Table& t, const std::vector<std::string>& row,
                                 std::initializer_list<std::string_view> numeric, std::size_t line_no) {
  Covariates cov;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    bool skip = false;
    for (auto n : numeric) skip = skip || t.header[i] == n;
    if (skip) continue;
    if (row[i].empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": empty value for '" + t.header[i] + "'");
    }
    cov.emplace(t.header[i], row[i]);
  }
  return cov;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void with_path(const std::filesystem::path& path, auto&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline bool is_idr_table(const Table& t) { return t.column("idr").has_value(); }

inline std::vector<ClaimRecord> claims_from_table(const Table& t) {
  const auto idx = detail::require_columns(t, {"branch", "deductible_level", "expenditure", "deductible", "oop_max"});
  std::vector<ClaimRecord> out;
  out.reserve(t.rows.size());
  for (const auto& [line_no, row] : t.rows) {
    ClaimRecord c;
    c.expenditure = detail::parse_field(row[idx[2]], "expenditure", line_no);
    c.deductible = detail::parse_field(row[idx[3]], "deductible", line_no);
    c.oop_max = detail::parse_field(row[idx[4]], "oop_max", line_no);
    c.covariates = detail::row_covariates(t, row, {"expenditure", "deductible", "oop_max"}, line_no);
    try {
      validate(c);
      if (c.expenditure == 0.0) throw ValidationError("expenditure must be > 0 to define a reimbursement ratio");
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<IdrObservation> idr_from_table(const Table& t) {
  const auto idx = detail::require_columns(t, {"branch", "deductible_level", "idr"});
  const auto weight_col = t.column("weight");
  std::vector<IdrObservation> out;
  out.reserve(t.rows.size());
  for (const auto& [line_no, row] : t.rows) {
    IdrObservation o;
    o.r = detail::parse_field(row[idx[2]], "idr", line_no);
    if (!(o.r >= 0.0 && o.r <= 1.0)) {
      throw ValidationError("line " + std::to_string(line_no) + ": idr must lie in [0, 1], got " + row[idx[2]]);
    }
    if (weight_col) {
      o.weight = detail::parse_field(row[*weight_col], "weight", line_no);
      if (!(o.weight > 0.0)) throw ValidationError("line " + std::to_string(line_no) + ": weight must be > 0");
    }
    o.covariates = detail::row_covariates(t, row, {"idr", "weight"}, line_no);
    out.push_back(std::move(o));
  }
  return out;
}

inline std::vector<ClaimRecord> read_claims(std::istream& in) { return claims_from_table(read_table(in)); }
inline std::vector<IdrObservation> read_idr(std::istream& in) { return idr_from_table(read_table(in)); }

/// IDR observations from either schema; claim files are transformed with idr().
inline std::vector<IdrObservation> read_observations(std::istream& in) {
  const Table t = read_table(in);
  if (is_idr_table(t)) return idr_from_table(t);
  return to_observations(claims_from_table(t));
}

inline std::vector<IdrObservation> read_observations(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<IdrObservation> out;
  detail::with_path(path, [&] { out = read_observations(in); });
  return out;
}

namespace detail {

inline std::string covariate(const Covariates& cov, const std::string& name) {
  auto it = cov.find(name);
  if (it == cov.end()) throw ValidationError("record lacks covariate '" + name + "'");
  return quote_field(it->second);
}

}  // namespace detail

inline void write_claims(std::ostream& out, std::span<const ClaimRecord> claims) {
  out << "branch,deductible_level,expenditure,deductible,oop_max\n";
  for (const auto& c : claims) {
    out << detail::covariate(c.covariates, "branch") << ',' << detail::covariate(c.covariates, "deductible_level")
        << ',' << format_number(c.expenditure) << ',' << format_number(c.deductible) << ','
        << format_number(c.oop_max) << '\n';
  }
}

/// Writes the weight column only when some weight differs from 1.
inline void write_idr(std::ostream& out, std::span<const IdrObservation> obs) {
  bool weighted = false;
  for (const auto& o : obs) weighted = weighted || o.weight != 1.0;
  out << "branch,deductible_level,idr" << (weighted ? ",weight" : "") << '\n';
  for (const auto& o : obs) {
    out << detail::covariate(o.covariates, "branch") << ',' << detail::covariate(o.covariates, "deductible_level")
        << ',' << format_number(o.r);
    if (weighted) out << ',' << format_number(o.weight);
    out << '\n';
  }
}

inline void write_claims(const std::filesystem::path& path, std::span<const ClaimRecord> claims) {
  auto out = detail::open_out(path);
  write_claims(out, claims);
  if (!out.flush()) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_idr(const std::filesystem::path& path, std::span<const IdrObservation> obs) {
  auto out = detail::open_out(path);
  write_idr(out, obs);
  if (!out.flush()) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace beinf::csv
