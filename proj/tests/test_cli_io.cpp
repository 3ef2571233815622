#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "config.hpp"
#include "csv.hpp"

using namespace htpy;
using namespace htpy::cli;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("htpy_io_" + name)).string();
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = temp_path(name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Csv, QuoteField) {
  EXPECT_EQ(quote_field("plain"), "plain");
  EXPECT_EQ(quote_field("a,b"), "\"a,b\"");
  EXPECT_EQ(quote_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(quote_field("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, WriteThenRead) {
  const auto p = temp_path("rt.csv");
  {
    CsvWriter w(p, "1.0", 42, {"y1", "label"});
    w.row_strings({"0.5", "a,\"b\"\nc"});
    w.row({1.25, 3.0});
    EXPECT_THROW(w.row({1.0}), InvariantError);
  }
  const auto text = slurp(p);
  EXPECT_EQ(text.rfind("# htpy 1.0 seed=42\n", 0), 0u);
  const auto t = read_csv(p);
  EXPECT_EQ(t.header, (std::vector<std::string>{"y1", "label"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "a,\"b\"\nc");
  EXPECT_EQ(t.column("label"), 1);
  EXPECT_EQ(t.column("missing"), -1);
  EXPECT_EQ(t.numeric(0), (std::vector<double>{0.5, 1.25}));
  EXPECT_THROW((void)t.numeric(1), InputError);
  std::remove(p.c_str());
}

TEST(Csv, ReaderSkipsCommentsAndBlankLinesAndCrlf) {
  const auto p = write_file("crlf.csv", "# note\r\n\r\ny\r\n1\r\n\n2e-3\r\n");
  const auto t = read_csv(p);
  EXPECT_EQ(t.numeric(0), (std::vector<double>{1.0, 2e-3}));
  std::remove(p.c_str());
}

TEST(Csv, ReaderErrors) {
  EXPECT_THROW((void)read_csv(temp_path("does_not_exist.csv")), InputError);
  const auto ragged = write_file("ragged.csv", "a,b\n1,2\n3\n");
  EXPECT_THROW((void)read_csv(ragged), InputError);
  const auto open = write_file("open.csv", "a\n\"unterminated\n");
  EXPECT_THROW((void)read_csv(open), InputError);
  const auto empty = write_file("empty.csv", "# only a comment\n");
  EXPECT_THROW((void)read_csv(empty), InputError);
  const auto partial = write_file("partial.csv", "y\n1.5x\n");
  EXPECT_THROW((void)read_csv(partial).numeric(0), InputError);
  for (const auto& p : {ragged, open, empty, partial}) std::remove(p.c_str());
}

TEST(Config, ParsesEntries) {
  const auto p = write_file("run.cfg",
                            "# comment\n"
                            "\n"
                            "burn_in = 200   # trailing comment\n"
                            "quantiles = 0.5 0.99\n"
                            "x-values = 0.25, 0.75\n"
                            "output = \"my file.csv\"\n"
                            "label=a#b\n");
  const auto e = read_config(p);
  ASSERT_EQ(e.size(), 5u);
  EXPECT_EQ(e[0].key, "burn-in");
  EXPECT_EQ(e[0].tokens, (std::vector<std::string>{"200"}));
  EXPECT_EQ(e[0].line, 3u);
  EXPECT_EQ(e[1].tokens, (std::vector<std::string>{"0.5", "0.99"}));
  EXPECT_EQ(e[2].key, "x-values");
  EXPECT_EQ(e[2].tokens, (std::vector<std::string>{"0.25", "0.75"}));
  EXPECT_EQ(e[3].tokens, (std::vector<std::string>{"my file.csv"}));
  EXPECT_EQ(e[4].tokens, (std::vector<std::string>{"a#b"}));
  std::remove(p.c_str());
}

TEST(Config, Errors) {
  EXPECT_THROW((void)read_config(temp_path("missing.cfg")), InputError);
  for (const auto* text : {"seed\n", "= 3\n", "seed =\n", "seed = 1\nseed = 2\n", "seed = 1\nseed_x = 1\nseed = 3\n",
                           "output = \"open\n"}) {
    const auto p = write_file("bad.cfg", text);
    EXPECT_THROW((void)read_config(p), InputError) << text;
    std::remove(p.c_str());
  }
  const auto dup = write_file("dup.cfg", "burn_in = 1\nburn-in = 2\n");
  try {
    (void)read_config(dup);
    FAIL();
  } catch (const InputError& err) {
    EXPECT_NE(std::string(err.what()).find(":2: duplicate key 'burn-in'"), std::string::npos) << err.what();
  }
  std::remove(dup.c_str());
}

TEST(Config, GivenFlags) {
  EXPECT_EQ(normalize_key("burn_in"), "burn-in");
  const auto g = given_flags({"fit", "--burn_in", "5", "--seed=3", "-v", "--", "value"});
  EXPECT_EQ(g, (std::set<std::string>{"burn-in", "seed"}));
}
