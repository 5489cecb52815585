#ifndef CQFM_PANEL_IO_HPP
#define CQFM_PANEL_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqfm/panel.hpp"

namespace cqfm {

/// A CSV file with a header row. Cells are kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated, optional double quotes with "" escapes, CRLF tolerated.
/// Every row must have as many cells as the header.
CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Parses a numeric cell. Empty, NA and NaN cells are missing values;
/// both are reported as DataError with the 1-based file row and column.
double parse_cell(const std::string& cell, std::size_t row, std::size_t col, const std::string& source);

/// Returns file: header "id,<time ids...>", one row per unit.
/// Characteristics file: header "id,<names...>", one row per unit.
/// Units must match one-to-one; rows follow the characteristics file.
PanelData load_panel(const std::filesystem::path& returns_csv, const std::filesystem::path& characteristics_csv);
void save_panel(const PanelData& panel, const std::filesystem::path& returns_csv,
                const std::filesystem::path& characteristics_csv);

/// Writes an n x T matrix in the returns layout.
void write_unit_panel(const std::filesystem::path& path, const Eigen::Ref<const Eigen::MatrixXd>& values,
                      const std::vector<std::string>& unit_ids, const std::vector<std::string>& time_ids);

}  // namespace cqfm

#endif  // CQFM_PANEL_IO_HPP
