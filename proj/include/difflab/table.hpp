#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace difflab {

/// Shortest round-trip decimal form; identical bits always print identically.
std::string format_double(double v);

/// Small typed table written as CSV. Cells keep their value type so the same
/// rows can be emitted as JSON.
class Table {
 public:
  using Cell = std::variant<std::string, double, long long>;

  explicit Table(std::vector<std::string> columns);

  void add_row(std::vector<Cell> row);

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace difflab
