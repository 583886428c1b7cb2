#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli_app.hpp"
#include "test_util.hpp"

using namespace bsp_test;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = bsp_cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

const char* sample_mtx =
    "%%MatrixMarket matrix coordinate real general\n"
    "4 5 6\n1 1 0.5\n1 4 2.25\n2 2 -1\n3 5 1e308\n4 1 3\n4 3 0.7\n";

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST(Cli, ConvertMtxToCsrAndBack) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  auto r = cli({"convert", (dir / "m.mtx").string(), (dir / "m.csr.bsp").string(), "--format", "csr"});
  ASSERT_EQ(r.code, 0) << r.err;
  NpzContainer c(dir / "m.csr.bsp", OpenMode::read);
  SparseTensor t = read_tensor(c);
  EXPECT_EQ(t.format(), Format::CSR);

  EXPECT_EQ(cli({"validate", (dir / "m.csr.bsp").string()}).code, 0);
  auto v = cli({"validate", (dir / "m.csr.bsp").string(), "--against", (dir / "m.mtx").string()});
  EXPECT_EQ(v.code, 0) << v.err;

  ASSERT_EQ(cli({"convert", (dir / "m.csr.bsp").string(), (dir / "back.mtx").string()}).code, 0);
  std::ifstream a(dir / "m.mtx"), b(dir / "back.mtx");
  EXPECT_TRUE(canonical_equal(read_matrix_market(a), read_matrix_market(b)));
}

TEST(Cli, ConvertTnsToCompressedCsf) {
  TempDir dir;
  write_text(dir / "t.tns", "1 1 1 1.5\n1 2 1 2\n2 1 2 3\n2 2 1 4\n2 2 2 5\n");
  auto r = cli({"convert", (dir / "t.tns").string(), (dir / "t.csf.bsp.gz").string(), "--format", "csf", "--compress"});
  ASSERT_EQ(r.code, 0) << r.err;
  NpzContainer c(dir / "t.csf.bsp.gz", OpenMode::read);
  EXPECT_TRUE(c.is_compressed({}, "values"));
  SparseTensor t = read_tensor(c);
  EXPECT_EQ(t.levels, csf_levels(3));
  std::ifstream in(dir / "t.tns");
  EXPECT_TRUE(canonical_equal(t, downcast_values(convert(read_tns(in), csf_levels(3)))));
  auto ls = cli({"ls", (dir / "t.csf.bsp.gz").string()});
  EXPECT_NE(ls.out.find("CSF"), std::string::npos);
}

TEST(Cli, ConvertCooToMtx) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.coo.bsp").string(), "--no-downcast"}).code, 0);
  ASSERT_EQ(cli({"convert", (dir / "m.coo.bsp").string(), (dir / "out.mtx").string(), "--format", "coo"}).code, 0);
  std::ifstream a(dir / "m.mtx"), b(dir / "out.mtx");
  EXPECT_TRUE(canonical_equal(read_matrix_market(a), read_matrix_market(b)));
}

TEST(Cli, CustomFormatFile) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  write_text(dir / "dcsc.json",
             R"({"custom": {"transpose": [1, 0], "level": {"level_desc": "sparse", "rank": 1,
                 "level": {"level_desc": "sparse", "rank": 1, "level": {"level_desc": "element"}}}}})");
  auto r = cli({"convert", (dir / "m.mtx").string(), (dir / "m.bsp").string(), "--format",
                "custom:" + (dir / "dcsc.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  NpzContainer c(dir / "m.bsp", OpenMode::read);
  EXPECT_EQ(parse_descriptor(c.read_descriptor({})).format, (std::variant<Format, LevelTree>(Format::DCSC)));
}

TEST(Cli, LsMultiMatrixAndEmpty) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.bsp").string()}).code, 0);
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.bsp").string(), "--group", "aux/b", "--append",
                 "--format", "csc"})
                .code,
            0);
  auto r = cli({"ls", (dir / "m.bsp").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::vector<std::string> ls;
  for (std::string l; std::getline(lines, l);) ls.push_back(l);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_TRUE(ls[0].starts_with("/\tCOO\t4x5\t6\t")) << ls[0];
  EXPECT_TRUE(ls[1].starts_with("/aux/b\tCSC\t4x5\t6\t")) << ls[1];

  { NpzContainer e(dir / "empty.bsp", OpenMode::create); }
  auto empty = cli({"ls", (dir / "empty.bsp").string()});
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(empty.out, "");

  write_text(dir / "junk.bsp", "this is not a zip archive");
  auto junk = cli({"ls", (dir / "junk.bsp").string()});
  EXPECT_NE(junk.code, 0);
  EXPECT_FALSE(junk.err.empty());
}

TEST(Cli, ValidateReportsCorruptPointers) {
  TempDir dir;
  SparseTensor t = small_csr();
  t.arrays.at("pointers_to_1") = TypedArray::from<std::uint8_t>(ScalarType::uint8, {0, 3, 2});
  {
    // Bypass write_tensor's own validation to produce the broken fixture.
    NpzContainer c(dir / "bad.bsp", OpenMode::create);
    c.write_descriptor({}, emit_descriptor(describe(t)));
    for (const auto& [name, a] : t.arrays) c.write_array({}, name, a, {});
  }
  auto r = cli({"validate", (dir / "bad.bsp").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("non-monotone pointers"), std::string::npos) << r.err;
}

TEST(Cli, ValidateAgainstMismatch) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  write_text(dir / "other.mtx", "%%MatrixMarket matrix coordinate real general\n4 5 1\n1 1 9\n");
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.bsp").string()}).code, 0);
  EXPECT_EQ(cli({"validate", (dir / "m.bsp").string(), "--against", (dir / "other.mtx").string()}).code, 1);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"convert", "only-one-arg"}).code, 2);
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  EXPECT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "x.bsp").string(), "--format", "bogus"}).code, 2);
  EXPECT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "x.bsp").string(), "--format", "dvec"}).code, 2);
}

TEST(Cli, DataErrorsExitOne) {
  TempDir dir;
  write_text(dir / "bad.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 3 1\n");
  EXPECT_EQ(cli({"convert", (dir / "bad.mtx").string(), (dir / "x.bsp").string()}).code, 1);
}

TEST(Cli, BenchReadWarm) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.csr.bsp").string(), "--format", "csr"}).code, 0);
  auto r = cli({"bench", "read", (dir / "m.csr.bsp").string(), "--cache", "warm", "--trials", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 1u);
  auto f = csv_fields(rows[0]);
  ASSERT_EQ(f.size(), 11u);
  EXPECT_EQ(f[1], "read");
  EXPECT_EQ(f[2], "CSR");
  EXPECT_EQ(f[5], "warm");
  EXPECT_EQ(f[6], "10");
  double mean = std::stod(f[7]), mn = std::stod(f[8]), mx = std::stod(f[9]);
  EXPECT_LE(mn, mean);
  EXPECT_LE(mean, mx);
}

TEST(Cli, BenchColdNeedsFlushCommand) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.bsp").string()}).code, 0);
  EXPECT_EQ(cli({"bench", "read", (dir / "m.bsp").string(), "--cache", "cold"}).code, 2);
  EXPECT_EQ(cli({"bench", "write", (dir / "m.mtx").string(), "--sync", "flushed"}).code, 2);
  auto cold = cli({"bench", "read", (dir / "m.bsp").string(), "--cache", "cold", "--flush-cmd", "true", "--trials", "2"});
  EXPECT_EQ(cold.code, 0) << cold.err;
}

TEST(Cli, BenchWriteFlushed) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  auto r = cli({"bench", "write", (dir / "m.mtx").string(), "--sync", "flushed", "--flush-cmd", "sync", "--trials",
                "3", "--out", (dir / "w.bsp").string(), "--format", "csr", "--header"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string head, row;
  std::getline(in, head);
  std::getline(in, row);
  EXPECT_EQ(head, bsp_cli::bench_csv_header);
  auto f = csv_fields(row);
  EXPECT_EQ(f[1], "write");
  EXPECT_EQ(f[2], "CSR");
  EXPECT_EQ(f[5], "flushed");
  EXPECT_EQ(f[6], "3");
  EXPECT_EQ(std::stoull(f[10]), std::filesystem::file_size(dir / "w.bsp"));
}

TEST(Cli, BenchParallelRead) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  ASSERT_EQ(cli({"convert", (dir / "m.mtx").string(), (dir / "m.bsp").string(), "--compress", "6"}).code, 0);
  auto r = cli({"bench", "read", (dir / "m.bsp").string(), "--parallel", "4", "--trials", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto f = csv_fields(r.out.substr(0, r.out.find('\n')));
  EXPECT_EQ(f[3], "true");
  EXPECT_EQ(f[4], "4");
}

TEST(Cli, DirectoryOutput) {
  TempDir dir;
  write_text(dir / "m.mtx", sample_mtx);
  auto r = cli({"convert", (dir / "m.mtx").string(), (dir / "mdir").string(), "--to", "dir", "--format", "dcsr"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "mdir" / "binsparse.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "mdir" / "indices_0.npy"));
  EXPECT_EQ(cli({"validate", (dir / "mdir").string(), "--against", (dir / "m.mtx").string()}).code, 0);
}
