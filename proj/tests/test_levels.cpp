#include <gtest/gtest.h>

#include "binsparse/levels.hpp"

using namespace binsparse;

namespace {

std::vector<std::pair<std::string, std::uint64_t>> lengths(const ArrayPlan& p) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& e : p.entries) out.emplace_back(e.name, e.length.value_or(~0ull));
  return out;
}

DataTypeMap types_for(const LevelTree& t) {
  DataTypeMap m{{"values", dtype(ScalarType::float64)}};
  for (const auto& L : level_layout(t)) {
    if (L.level.kind != LevelKind::sparse) continue;
    if (L.depth > 0) m.emplace_back("pointers_to_" + std::to_string(L.first_slot), dtype(ScalarType::uint8));
    for (std::size_t s = 0; s < L.level.rank; ++s)
      m.emplace_back("indices_" + std::to_string(L.first_slot + s), dtype(ScalarType::uint8));
  }
  return m;
}

}  // namespace

TEST(Levels, PredefinedTrees) {
  auto dcsc = levels_of_predefined(Format::DCSC);
  ASSERT_EQ(dcsc.levels.size(), 3u);
  EXPECT_EQ(dcsc.levels[0].kind, LevelKind::sparse);
  EXPECT_EQ(dcsc.levels[1].kind, LevelKind::sparse);
  EXPECT_EQ(dcsc.levels[2].kind, LevelKind::element);
  EXPECT_EQ(dcsc.transpose, (std::vector<std::size_t>{1, 0}));

  auto csr = levels_of_predefined(Format::CSR);
  EXPECT_EQ(csr.levels[0].kind, LevelKind::dense);
  EXPECT_EQ(csr.levels[1].kind, LevelKind::sparse);
  EXPECT_EQ(csr.transpose, (std::vector<std::size_t>{0, 1}));

  auto coo = levels_of_predefined(Format::COO);
  ASSERT_EQ(coo.levels.size(), 2u);
  EXPECT_EQ(coo.levels[0].kind, LevelKind::sparse);
  EXPECT_EQ(coo.levels[0].rank, 2u);
}

TEST(Levels, AliasSubstitution) {
  auto listing2 = LevelTree::make({sparse(), sparse()}, {1, 0});
  EXPECT_EQ(alias_of_levels(listing2), Format::DCSC);
  EXPECT_EQ(alias_of_levels(csf_levels(3)), std::nullopt);
  EXPECT_EQ(alias_of_levels(LevelTree::make({dense(), sparse()}, {0, 1})), Format::CSR);
  for (Format f : all_formats) EXPECT_EQ(alias_of_levels(levels_of_predefined(f)), f) << to_string(f);
}

TEST(Levels, RejectsDenseBelowSparse) {
  EXPECT_THROW(check_level_tree(LevelTree::make({sparse(), dense()}, {0, 1})), Error);
  EXPECT_THROW(check_level_tree(LevelTree::make({dense(), sparse()}, {0, 0})), Error);
}

TEST(Levels, CsfPlanMatchesHandCount) {
  // Entries {(0,0,0),(0,1,0),(1,0,1),(1,1,0),(1,1,1)}: two distinct i, four
  // distinct (i,j) pairs, five leaves.
  auto t = csf_levels(3);
  std::uint64_t shape[] = {2, 2, 2};
  std::uint64_t counts[] = {2, 4, 5};
  auto plan = array_plan_levels(t, shape, 5, types_for(t), counts);
  using P = std::pair<std::string, std::uint64_t>;
  EXPECT_EQ(lengths(plan), (std::vector<P>{{"indices_0", 2}, {"pointers_to_1", 3}, {"indices_1", 4},
                                           {"pointers_to_2", 5}, {"indices_2", 5}, {"values", 5}}));
}

TEST(Levels, CooPlanHasNoPointers) {
  auto t = levels_of_predefined(Format::COO);
  std::uint64_t shape[] = {10, 10};
  auto plan = array_plan_levels(t, shape, 7, types_for(t));
  using P = std::pair<std::string, std::uint64_t>;
  EXPECT_EQ(lengths(plan), (std::vector<P>{{"indices_0", 7}, {"indices_1", 7}, {"values", 7}}));
}

TEST(Levels, CsrPlanPointerLengthIsRowsPlusOne) {
  auto t = levels_of_predefined(Format::CSR);
  std::uint64_t shape[] = {2, 3};
  auto plan = array_plan_levels(t, shape, 3, types_for(t));
  using P = std::pair<std::string, std::uint64_t>;
  EXPECT_EQ(lengths(plan), (std::vector<P>{{"pointers_to_1", 3}, {"indices_1", 3}, {"values", 3}}));
}

TEST(Levels, DcsrPlanWithCounts) {
  auto t = levels_of_predefined(Format::DCSR);
  std::uint64_t shape[] = {4, 4};
  std::uint64_t counts[] = {2, 5};
  auto plan = array_plan_levels(t, shape, 5, types_for(t), counts);
  EXPECT_EQ(plan.find("indices_0")->length, 2u);
  EXPECT_EQ(plan.find("pointers_to_1")->length, 3u);
}

TEST(Levels, DensePlanValuesOnly) {
  auto t = levels_of_predefined(Format::DMAT);
  std::uint64_t shape[] = {3, 4};
  auto plan = array_plan_levels(t, shape, 12, types_for(t));
  ASSERT_EQ(plan.entries.size(), 1u);
  EXPECT_EQ(plan.entries[0].name, "values");
  EXPECT_EQ(plan.entries[0].length, 12u);
}

TEST(Levels, ApplyTranspose) {
  std::uint64_t ij[] = {3, 7};
  EXPECT_EQ(apply_transpose(ij, levels_of_predefined(Format::DCSC)), (std::vector<std::uint64_t>{7, 3}));
  std::uint64_t ijk[] = {1, 2, 3};
  auto t = csf_levels(3);
  EXPECT_EQ(apply_transpose(ijk, t), (std::vector<std::uint64_t>{1, 2, 3}));
  t.transpose = {2, 1, 0};
  EXPECT_EQ(apply_transpose(ijk, t), (std::vector<std::uint64_t>{3, 2, 1}));
}

TEST(Levels, JsonRoundTrip) {
  for (const auto& t : {csf_levels(3), levels_of_predefined(Format::CSC), levels_of_predefined(Format::COO),
                        LevelTree::make({dense(), sparse(2)}, {2, 0, 1})})
    EXPECT_EQ(level_tree_from_json(level_tree_to_json(t)), t);
}

TEST(Levels, Listing2Json) {
  auto j = nlohmann::ordered_json::parse(R"({
    "transpose": [1, 0],
    "level": {"level_desc": "sparse", "rank": 1,
              "level": {"level_desc": "sparse", "rank": 1,
                        "level": {"level_desc": "element"}}}})");
  EXPECT_EQ(level_tree_from_json(j), levels_of_predefined(Format::DCSC));
}
