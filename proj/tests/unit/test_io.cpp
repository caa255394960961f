#include "transcap/errors.hpp"
#include "transcap/io.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <sstream>

using namespace transcap::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(FormatCell, RoundTripsDoubles) {
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_cell(x)), x);
    EXPECT_EQ(format_cell(std::int64_t{-7}), "-7");
    EXPECT_EQ(format_cell(true), "true");
    EXPECT_EQ(format_cell(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_cell(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Table, CsvQuoting) {
    Table t("demo", {"name", "value"});
    t.add_row({std::string("plain"), 1.5});
    t.add_row({std::string("a,b \"q\""), std::int64_t{2}});
    EXPECT_EQ(t.to_csv(), "name,value\nplain,1.5\n\"a,b \"\"q\"\"\",2\n");
    EXPECT_THROW(t.add_row({1.0}), std::exception);
}

TEST(Table, WriteWithSidecar) {
    const auto dir = std::filesystem::temp_directory_path() / "transcap_io_test";
    std::filesystem::remove_all(dir);
    Table t("series", {"step", "x"}, "x in units of demo");
    t.add_row({std::int64_t{0}, 0.25});
    const auto csv = write_table(t, dir, "abc");
    EXPECT_EQ(slurp(csv), "step,x\n0,0.25\n");
    const auto side = nlohmann::json::parse(slurp(dir / "series.csv.json"));
    EXPECT_EQ(side["schema_version"], kSchemaVersion);
    EXPECT_EQ(side["columns"], nlohmann::json({"step", "x"}));
    EXPECT_EQ(side["rows"], 1);
    EXPECT_EQ(side["config_hash"], "abc");
    std::filesystem::remove_all(dir);
}

TEST(Sha256, KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Timestamp, Format) {
    const std::string ts = utc_timestamp();
    ASSERT_EQ(ts.size(), 20u);
    EXPECT_EQ(ts[4], '-');
    EXPECT_EQ(ts[10], 'T');
    EXPECT_EQ(ts.back(), 'Z');
}
