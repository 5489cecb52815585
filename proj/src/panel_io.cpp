#include "cqfm/panel_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <unordered_map>

#include "cqfm/error.hpp"

namespace cqfm {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_record(const std::string& line, std::size_t row, const std::string& source) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cell : trim(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell += c;
    }
  }
  if (quoted) throw DataError(source + ": unterminated quote", row);
  cells.push_back(was_quoted ? cell : trim(cell));
  return cells;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t row = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_record(line, row, source);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw DataError(source + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                          std::to_string(table.header.size()),
                      row);
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw DataError(source + ": file is empty");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, path.string());
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j > 0) out << ',';
      out << quote_if_needed(cells[j]);
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col, const std::string& source) {
  const std::string s = trim(cell);
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "." || s == "null")
    throw DataError(source + ": missing value at row " + std::to_string(row) + ", column " + std::to_string(col),
                    row, col);
  double v = 0.0;
  const char* begin = s.data() + (s.front() == '+' ? 1 : 0);
  const auto res = std::from_chars(begin, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError(source + ": non-numeric value '" + s + "' at row " + std::to_string(row) + ", column " +
                        std::to_string(col),
                    row, col);
  return v;
}

PanelData load_panel(const std::filesystem::path& returns_csv, const std::filesystem::path& characteristics_csv) {
  const auto returns = read_csv(returns_csv);
  const auto chars = read_csv(characteristics_csv);
  const std::string rsrc = returns_csv.string();
  const std::string csrc = characteristics_csv.string();
  if (returns.header.size() < 2) throw DataError(rsrc + ": need an id column and at least one date column", 1);
  if (chars.header.size() < 2) throw DataError(csrc + ": need an id column and at least one characteristic", 1);

  PanelData panel;
  panel.time_ids.assign(returns.header.begin() + 1, returns.header.end());
  panel.characteristic_names.assign(chars.header.begin() + 1, chars.header.end());
  const std::size_t n = chars.rows.size();
  const std::size_t T = panel.time_ids.size();
  const std::size_t D = panel.characteristic_names.size();

  std::unordered_map<std::string, std::size_t> returns_row;
  for (std::size_t i = 0; i < returns.rows.size(); ++i) {
    const auto& id = returns.rows[i][0];
    if (!returns_row.emplace(id, i).second)
      throw DataError(rsrc + ": duplicate unit id '" + id + "'", i + 2, 1);
  }

  panel.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  panel.Y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T));
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = chars.rows[i];
    const auto& id = row[0];
    if (!seen.emplace(id, i).second) throw DataError(csrc + ": duplicate unit id '" + id + "'", i + 2, 1);
    for (std::size_t d = 0; d < D; ++d)
      panel.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = parse_cell(row[d + 1], i + 2, d + 2, csrc);
    const auto it = returns_row.find(id);
    if (it == returns_row.end())
      throw DataError("unit '" + id + "' is in " + csrc + " but not in " + rsrc, i + 2, 1);
    const auto& rrow = returns.rows[it->second];
    for (std::size_t t = 0; t < T; ++t)
      panel.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          parse_cell(rrow[t + 1], it->second + 2, t + 2, rsrc);
    panel.unit_ids.push_back(id);
  }
  for (std::size_t i = 0; i < returns.rows.size(); ++i) {
    const auto& id = returns.rows[i][0];
    if (!seen.count(id)) throw DataError("unit '" + id + "' is in " + rsrc + " but not in " + csrc, i + 2, 1);
  }
  panel.validate();
  return panel;
}

void write_unit_panel(const std::filesystem::path& path, const Eigen::Ref<const Eigen::MatrixXd>& values,
                      const std::vector<std::string>& unit_ids, const std::vector<std::string>& time_ids) {
  CsvTable table;
  table.header.push_back("id");
  table.header.insert(table.header.end(), time_ids.begin(), time_ids.end());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    std::vector<std::string> row{unit_ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index t = 0; t < values.cols(); ++t) row.push_back(format_double(values(i, t)));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

void save_panel(const PanelData& panel, const std::filesystem::path& returns_csv,
                const std::filesystem::path& characteristics_csv) {
  PanelData copy = panel;
  copy.validate();
  write_unit_panel(returns_csv, copy.Y, copy.unit_ids, copy.time_ids);
  write_unit_panel(characteristics_csv, copy.X, copy.unit_ids, copy.characteristic_names);
}

}  // namespace cqfm
