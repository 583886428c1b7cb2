#include <gtest/gtest.h>

#include <algorithm>

#include "binsparse/dtypes.hpp"
#include "binsparse/typed_array.hpp"

using namespace binsparse;

namespace {

// Independent oracle: first unsigned width w in {8,16,32,64} with v < 2^w.
ScalarType scan_width(std::uint64_t v) {
  const std::pair<unsigned, ScalarType> widths[] = {
      {8, ScalarType::uint8}, {16, ScalarType::uint16}, {32, ScalarType::uint32}};
  for (auto [w, t] : widths)
    if (v < (std::uint64_t{1} << w)) return t;
  return ScalarType::uint64;
}

}  // namespace

TEST(Dtypes, ParseListingStrings) {
  EXPECT_EQ(parse_dtype("iso[bint8]"), (DataType{ScalarType::bint8, true, false}));
  EXPECT_EQ(parse_dtype("uint32"), dtype(ScalarType::uint32));
  EXPECT_EQ(parse_dtype("complex[float32]"), (DataType{ScalarType::float32, false, true}));
}

TEST(Dtypes, ParseRejects) {
  EXPECT_THROW(parse_dtype("complex[int16]"), Error);
  EXPECT_THROW(parse_dtype("iso[iso[int8]]"), Error);
  EXPECT_THROW(parse_dtype("iso[int8"), Error);
  EXPECT_THROW(parse_dtype("float16"), Error);
  EXPECT_THROW(parse_dtype(""), Error);
}

TEST(Dtypes, BothModifierOrdersAccepted) {
  DataType want{ScalarType::float32, true, true};
  EXPECT_EQ(parse_dtype("iso[complex[float32]]"), want);
  EXPECT_EQ(parse_dtype("complex[iso[float32]]"), want);
  EXPECT_EQ(format_dtype(want), "iso[complex[float32]]");
}

TEST(Dtypes, Format) {
  EXPECT_EQ(format_dtype({ScalarType::bint8, true, false}), "iso[bint8]");
  EXPECT_EQ(format_dtype(dtype(ScalarType::float64)), "float64");
}

TEST(Dtypes, FormatParseRoundTripAllTypes) {
  for (ScalarType s : all_scalar_types)
    for (bool iso : {false, true})
      for (bool cx : {false, true}) {
        if (cx && !is_float(s)) continue;
        DataType dt{s, iso, cx};
        EXPECT_EQ(parse_dtype(format_dtype(dt)), dt) << format_dtype(dt);
      }
}

TEST(Dtypes, StorageElementCount) {
  EXPECT_EQ(storage_element_count({ScalarType::bint8, true, false}, 3782463), 1u);
  EXPECT_EQ(storage_element_count({ScalarType::float64, false, true}, 5), 10u);
  EXPECT_EQ(storage_element_count(dtype(ScalarType::float64), 0), 0u);
  EXPECT_EQ(storage_element_count({ScalarType::float64, true, true}, 7), 2u);
}

TEST(Dtypes, MinIndexDtype) {
  std::uint64_t imdb[] = {428440, 896308};
  EXPECT_EQ(min_index_dtype(imdb).base, ScalarType::uint32);
  std::uint64_t one[] = {1, 1};
  EXPECT_EQ(min_index_dtype(one).base, ScalarType::uint8);
  std::uint64_t s[] = {256, 10};
  EXPECT_EQ(min_index_dtype(s).base, scan_width(std::max<std::uint64_t>(256, 10)));
  EXPECT_EQ(min_index_dtype(s).base, ScalarType::uint16);
}

TEST(Dtypes, MinPointerDtype) {
  EXPECT_EQ(min_pointer_dtype(3782463).base, scan_width(3782463));
  EXPECT_EQ(min_pointer_dtype(3782463).base, ScalarType::uint32);
  EXPECT_EQ(min_pointer_dtype(0).base, ScalarType::uint8);
  EXPECT_EQ(min_pointer_dtype(std::uint64_t{1} << 32).base, scan_width(std::uint64_t{1} << 32));
  EXPECT_EQ(min_pointer_dtype(std::uint64_t{1} << 32).base, ScalarType::uint64);
}

TEST(Dtypes, WidthRuleAgreesWithScanAtBoundaries) {
  for (unsigned w : {8u, 16u, 32u}) {
    std::uint64_t edge = std::uint64_t{1} << w;
    for (std::uint64_t v : {edge - 2, edge - 1, edge, edge + 1}) {
      EXPECT_EQ(min_pointer_dtype(v).base, scan_width(v)) << v;
      std::uint64_t dims[] = {v};
      EXPECT_EQ(min_index_dtype(dims).base, scan_width(v)) << v;
    }
  }
}

TEST(TypedArray, GetSetPerType) {
  TypedArray a(ScalarType::int16, 3);
  a.set_int(0, -5);
  a.set_int(2, 300);
  EXPECT_EQ(a.get_int(0), -5);
  EXPECT_EQ(a.get_int(1), 0);
  EXPECT_EQ(a.get_int(2), 300);
  TypedArray f = TypedArray::from<float>(ScalarType::float32, {0.5f, -2.0f});
  EXPECT_EQ(f.get_float(1), -2.0);
  EXPECT_EQ(f.bytes().size(), 8u);
}

TEST(TypedArray, ByteLengthMustMatchWidth) {
  EXPECT_THROW(TypedArray(ScalarType::uint32, std::vector<std::byte>(6)), Error);
}
