#include "transcap/io.hpp"

#include "transcap/errors.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

namespace transcap::harness {

namespace {

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string hex(const unsigned char* data, unsigned int n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * n);
    for (unsigned int i = 0; i < n; ++i) {
        out += digits[data[i] >> 4];
        out += digits[data[i] & 0xF];
    }
    return out;
}

} // namespace

std::string format_cell(const Cell& cell) {
    if (const double* d = std::get_if<double>(&cell)) {
        if (std::isnan(*d)) {
            return "nan";
        }
        if (std::isinf(*d)) {
            return *d > 0 ? "inf" : "-inf";
        }
        std::array<char, 32> buf{};
        std::snprintf(buf.data(), buf.size(), "%.17g", *d);
        return buf.data();
    }
    if (const auto* i = std::get_if<std::int64_t>(&cell)) {
        return std::to_string(*i);
    }
    if (const bool* b = std::get_if<bool>(&cell)) {
        return *b ? "true" : "false";
    }
    return std::get<std::string>(cell);
}

Table::Table(std::string name, std::vector<std::string> columns, std::string units)
    : name_(std::move(name)), columns_(std::move(columns)), units_(std::move(units)) {}

void Table::add_row(const std::vector<Cell>& row) {
    if (row.size() != columns_.size()) {
        throw DimensionError("table '" + name_ + "': row has " + std::to_string(row.size()) +
                             " cells, expected " + std::to_string(columns_.size()));
    }
    std::vector<std::string> formatted;
    formatted.reserve(row.size());
    for (const Cell& c : row) {
        formatted.push_back(format_cell(c));
    }
    rows_.push_back(std::move(formatted));
}

std::string Table::to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) {
                out += ',';
            }
            out += quote(fields[i]);
        }
        out += '\n';
    };
    line(columns_);
    for (const auto& r : rows_) {
        line(r);
    }
    return out;
}

std::filesystem::path write_table(const Table& table, const std::filesystem::path& dir,
                                  const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / (table.name() + ".csv");
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) {
            throw Error("cannot write '" + csv_path.string() + "'");
        }
        out << table.to_csv();
    }
    nlohmann::json meta{
        {"schema_version", kSchemaVersion},
        {"table", table.name()},
        {"columns", table.columns()},
        {"rows", table.n_rows()},
        {"config_hash", config_hash},
        {"unit_convention", table.units()},
    };
    write_json(meta, dir / (table.name() + ".csv.json"));
    return csv_path;
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << doc.dump(2) << '\n';
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    return hex(md.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read '" + path.string() + "'");
    }
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(content);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf.data();
}

} // namespace transcap::harness
