#include "shapsel/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace shapsel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record; double quotes may wrap a field ("" escapes a quote).
std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
  fields.emplace_back(trim(cur));
  return fields;
}

bool is_missing_token(std::string_view s) { return s.empty() || s == "NaN" || s == "nan"; }

double parse_number(std::string_view s, std::size_t line_no, const std::string& column) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line_no) + ", column \"" + column +
                    "\": cannot parse \"" + std::string(s) + "\" as a number");
  }
  return v;
}

}  // namespace

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<std::vector<double>> columns,
                 std::vector<double> target)
    : names_(std::move(feature_names)), columns_(std::move(columns)), target_(std::move(target)) {
  if (names_.size() != columns_.size()) {
    throw DataError("feature name count does not match column count");
  }
  std::set<std::string> seen;
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (!seen.insert(names_[j]).second) throw DataError("duplicate column \"" + names_[j] + "\"");
    if (columns_[j].size() != target_.size()) {
      throw DataError("column \"" + names_[j] + "\" length differs from target length");
    }
  }
  for (std::size_t i = 0; i < target_.size(); ++i) {
    if (std::isnan(target_[i])) {
      throw DataError("target value missing at row " + std::to_string(i));
    }
  }
}

std::optional<std::size_t> Dataset::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j] == name) return j;
  }
  return std::nullopt;
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
  std::vector<std::vector<double>> cols;
  cols.reserve(names.size());
  for (const auto& name : names) {
    auto j = index_of(name);
    if (!j) throw ArgumentError("dataset has no column \"" + name + "\"");
    cols.push_back(columns_[*j]);
  }
  return Dataset(names, std::move(cols), target_);
}

Dataset Dataset::take(const std::vector<std::size_t>& rows) const {
  std::vector<std::vector<double>> cols(columns_.size());
  std::vector<double> target;
  target.reserve(rows.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    cols[j].reserve(rows.size());
    for (std::size_t r : rows) cols[j].push_back(columns_[j][r]);
  }
  for (std::size_t r : rows) target.push_back(target_[r]);
  return Dataset(names_, std::move(cols), std::move(target));
}

void Dataset::row(std::size_t i, std::vector<double>& out) const {
  out.resize(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) out[j] = columns_[j][i];
}

Dataset parse_csv(const std::string& text, const std::string& target_column) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_record(line, line_no);
      break;
    }
  }
  if (header.empty()) throw DataError("CSV has no header row");
  if (line_no == 1 && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  std::ptrdiff_t target_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!target_column.empty() && header[j] == target_column) target_idx = static_cast<std::ptrdiff_t>(j);
  }
  if (target_idx < 0 && !target_column.empty()) {
    throw MissingColumnError("target column \"" + target_column + "\" not found in CSV header");
  }

  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<std::ptrdiff_t>(j) != target_idx) names.push_back(header[j]);
  }
  std::vector<std::vector<double>> cols(names.size());
  std::vector<double> target;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    if (target_idx < 0) target.push_back(0.0);
    std::size_t c = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == target_idx) {
        if (is_missing_token(fields[j])) {
          throw DataError("line " + std::to_string(line_no) + ": target value missing");
        }
        target.push_back(parse_number(fields[j], line_no, header[j]));
      } else {
        cols[c++].push_back(is_missing_token(fields[j]) ? kNaN
                                                         : parse_number(fields[j], line_no, header[j]));
      }
    }
  }
  return Dataset(std::move(names), std::move(cols), std::move(target));
}

Dataset read_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), target_column);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(const Dataset& data, const std::string& target_column, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& name : data.feature_names()) out << name << ',';
  out << target_column << '\n';
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    for (std::size_t j = 0; j < data.n_features(); ++j) {
      const double v = data.column(j)[i];
      if (!std::isnan(v)) out << format_double(v);
      out << ',';
    }
    out << format_double(data.target()[i]) << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace shapsel
