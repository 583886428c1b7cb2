#include <gtest/gtest.h>

#include "binsparse/descriptor.hpp"
#include "fixtures.hpp"

using namespace binsparse;
using nlohmann::ordered_json;

namespace {

Descriptor csr_descriptor(std::uint64_t rows, std::uint64_t cols, std::uint64_t nnz) {
  Descriptor d;
  d.format = Format::CSR;
  d.shape = {rows, cols};
  d.number_of_stored_values = nnz;
  d.data_types = {{"values", dtype(ScalarType::float64)},
                  {"pointers_to_1", dtype(ScalarType::uint8)},
                  {"indices_1", dtype(ScalarType::uint8)}};
  return d;
}

bool mentions(const std::vector<std::string>& report, const std::string& needle) {
  for (const auto& r : report)
    if (r.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Descriptor, ParseListing1) {
  Descriptor d = parse_descriptor(bsp_test::listing1_json);
  EXPECT_EQ(d.version, "0.1");
  EXPECT_EQ(std::get<Format>(d.format), Format::COO);
  EXPECT_EQ(d.shape, (std::vector<std::uint64_t>{428440, 896308}));
  EXPECT_EQ(d.number_of_stored_values, 3782463u);
  DataTypeMap want{{"values", {ScalarType::bint8, true, false}},
                   {"indices_0", dtype(ScalarType::uint32)},
                   {"indices_1", dtype(ScalarType::uint32)}};
  EXPECT_EQ(d.data_types, want);
  EXPECT_EQ(d.extra.at("comment"), "[omitted for brevity]");
  EXPECT_TRUE(validate_descriptor(d).empty());
}

TEST(Descriptor, EmitListing1KeyForKey) {
  Descriptor d = parse_descriptor(bsp_test::listing1_json);
  ordered_json emitted = ordered_json::parse(emit_descriptor(d));
  ordered_json expected = ordered_json::parse(bsp_test::listing1_json);
  EXPECT_EQ(emitted, expected);
}

TEST(Descriptor, ParseListing2Custom) {
  std::string doc = std::string(R"({"binsparse": {"version": "0.1", "format": {"custom": )") +
                    bsp_test::listing2_custom +
                    R"(}, "shape": [3, 4], "number_of_stored_values": 0, "data_types": {
                     "values": "float64", "indices_0": "uint8", "pointers_to_1": "uint8", "indices_1": "uint8"}}})";
  Descriptor d = parse_descriptor(doc);
  ASSERT_TRUE(std::holds_alternative<LevelTree>(d.format));
  EXPECT_EQ(std::get<LevelTree>(d.format), levels_of_predefined(Format::DCSC));
  EXPECT_TRUE(validate_descriptor(d).empty());
}

TEST(Descriptor, MissingShapeIsError) {
  EXPECT_THROW(parse_descriptor(R"({"binsparse": {"version": "0.1", "format": "COO",
      "number_of_stored_values": 0, "data_types": {}}})"),
               Error);
}

TEST(Descriptor, UnknownBinsparseKeyIsError) {
  EXPECT_THROW(parse_descriptor(R"({"binsparse": {"version": "0.1", "format": "COO", "shape": [1,1],
      "number_of_stored_values": 0, "data_types": {}, "colour": "red"}})"),
               Error);
}

TEST(Descriptor, EmptyCsrEmitsPointerType) {
  Descriptor d = csr_descriptor(1, 1, 0);
  auto j = ordered_json::parse(emit_descriptor(d));
  EXPECT_TRUE(j["binsparse"]["data_types"].contains("pointers_to_1"));
}

TEST(Descriptor, FillWithoutFillTypeIsError) {
  Descriptor d = csr_descriptor(2, 2, 1);
  d.fill = true;
  EXPECT_THROW(emit_descriptor(d), Error);
  EXPECT_TRUE(mentions(validate_descriptor(d), "fill_value"));
}

TEST(Descriptor, ValidateReportsMissingArray) {
  Descriptor d = csr_descriptor(2, 2, 1);
  d.data_types.erase(d.data_types.begin() + 1);
  EXPECT_TRUE(mentions(validate_descriptor(d), "missing array pointers_to_1"));
}

TEST(Descriptor, ValidateReportsHermitianReal) {
  Descriptor d = csr_descriptor(2, 2, 1);
  d.structure = Structure::hermitian;
  EXPECT_TRUE(mentions(validate_descriptor(d), "hermitian"));
}

TEST(Descriptor, ValidateReportsNonSquareStructure) {
  Descriptor d = csr_descriptor(2, 3, 1);
  d.structure = Structure::symmetric;
  EXPECT_TRUE(mentions(validate_descriptor(d), "square"));
}

TEST(Descriptor, ValidateReportsSignedIndices) {
  Descriptor d = csr_descriptor(2, 2, 1);
  d.data_types[2].second = dtype(ScalarType::int32);
  EXPECT_TRUE(mentions(validate_descriptor(d), "unsigned"));
}

TEST(Descriptor, ValidateReportsUnexpectedArray) {
  Descriptor d = csr_descriptor(2, 2, 1);
  d.data_types.emplace_back("indices_0", dtype(ScalarType::uint8));
  EXPECT_TRUE(mentions(validate_descriptor(d), "unexpected array indices_0"));
}

TEST(Descriptor, DenseNnzMustEqualElementCount) {
  Descriptor d;
  d.format = Format::DMAT;
  d.shape = {3, 4};
  d.number_of_stored_values = 11;
  d.data_types = {{"values", dtype(ScalarType::int32)}};
  EXPECT_FALSE(validate_descriptor(d).empty());
  d.number_of_stored_values = 12;
  EXPECT_TRUE(validate_descriptor(d).empty());
}

TEST(Descriptor, JsonRoundTripPreservesExtras) {
  Descriptor d = csr_descriptor(5, 6, 4);
  d.structure = Structure::symmetric;
  d.shape = {6, 6};
  d.fill = true;
  d.data_types.emplace_back("fill_value", dtype(ScalarType::float64));
  d.extra["note"] = "kept";
  EXPECT_EQ(parse_descriptor(emit_descriptor(d)), d);
}

TEST(Descriptor, CustomTreeRoundTrip) {
  Descriptor d;
  d.format = csf_levels(3);
  d.shape = {2, 3, 4};
  d.number_of_stored_values = 5;
  d.data_types = {{"values", dtype(ScalarType::float32)}, {"indices_0", dtype(ScalarType::uint8)},
                  {"pointers_to_1", dtype(ScalarType::uint8)}, {"indices_1", dtype(ScalarType::uint8)},
                  {"pointers_to_2", dtype(ScalarType::uint8)}, {"indices_2", dtype(ScalarType::uint8)}};
  EXPECT_TRUE(validate_descriptor(d).empty());
  EXPECT_EQ(parse_descriptor(emit_descriptor(d)), d);
}
