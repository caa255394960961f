#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace transcap::harness {

inline constexpr int kSchemaVersion = 1;

using Cell = std::variant<double, std::int64_t, bool, std::string>;

/// Formats doubles with %.17g (round-trip exact), infinities as "inf"/"-inf".
std::string format_cell(const Cell& cell);

/// A CSV table with a fixed column list. Rows are stored already formatted.
class Table {
public:
    Table(std::string name, std::vector<std::string> columns, std::string units = {});

    void add_row(const std::vector<Cell>& row);

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }
    const std::string& units() const noexcept { return units_; }
    std::size_t n_rows() const noexcept { return rows_.size(); }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

    /// RFC 4180 text with a header line and CRLF-free "\n" line endings.
    std::string to_csv() const;

private:
    std::string name_;
    std::vector<std::string> columns_;
    std::string units_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes <dir>/<name>.csv and the sidecar <dir>/<name>.csv.json; returns the CSV path.
std::filesystem::path write_table(const Table& table, const std::filesystem::path& dir,
                                  const std::string& config_hash);

/// Writes pretty-printed JSON followed by a newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

} // namespace transcap::harness
