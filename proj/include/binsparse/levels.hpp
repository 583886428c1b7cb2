#pragma once

// Fibertree level formats: a chain of dense/sparse levels ending in an element
// level, plus a transpose map from level slots to tensor dimensions.

#include <algorithm>
#include <array>
#include <limits>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "binsparse/dtypes.hpp"
#include "binsparse/error.hpp"

namespace binsparse {

enum class Format : std::uint8_t { DVEC, DMAT, CVEC, COO, CSR, CSC, DCSR, DCSC };

inline constexpr std::array<Format, 8> all_formats = {
    Format::DVEC, Format::DMAT, Format::CVEC, Format::COO,
    Format::CSR,  Format::CSC,  Format::DCSR, Format::DCSC};

constexpr std::string_view to_string(Format f) noexcept {
  switch (f) {
    case Format::DVEC: return "DVEC";
    case Format::DMAT: return "DMAT";
    case Format::CVEC: return "CVEC";
    case Format::COO: return "COO";
    case Format::CSR: return "CSR";
    case Format::CSC: return "CSC";
    case Format::DCSR: return "DCSR";
    case Format::DCSC: return "DCSC";
  }
  return "?";
}

inline std::optional<Format> parse_format(std::string_view s) {
  for (Format f : all_formats)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

enum class LevelKind : std::uint8_t { dense, sparse, element };

constexpr std::string_view to_string(LevelKind k) noexcept {
  switch (k) {
    case LevelKind::dense: return "dense";
    case LevelKind::sparse: return "sparse";
    case LevelKind::element: return "element";
  }
  return "?";
}

struct Level {
  LevelKind kind = LevelKind::element;
  std::size_t rank = 0;  // ignored for element

  friend bool operator==(const Level&, const Level&) = default;
};

/// Levels ordered outermost first; the last one is always the element level.
struct LevelTree {
  std::vector<Level> levels;
  std::vector<std::size_t> transpose;

  friend bool operator==(const LevelTree&, const LevelTree&) = default;

  std::size_t rank() const noexcept {
    std::size_t r = 0;
    for (const auto& l : levels)
      if (l.kind != LevelKind::element) r += l.rank;
    return r;
  }

  /// Builds a tree from non-element levels; appends the element leaf.
  static LevelTree make(std::initializer_list<Level> inner, std::vector<std::size_t> transpose) {
    LevelTree t{std::vector<Level>(inner), std::move(transpose)};
    t.levels.push_back({LevelKind::element, 0});
    return t;
  }
};

inline Level dense(std::size_t rank = 1) { return {LevelKind::dense, rank}; }
inline Level sparse(std::size_t rank = 1) { return {LevelKind::sparse, rank}; }

/// Throws Error(levels) unless the tree is well formed and supported.
inline void check_level_tree(const LevelTree& t) {
  auto fail = [](const std::string& m) { throw Error(Error::Kind::levels, m); };
  if (t.levels.size() < 2) fail("level tree needs at least one dense or sparse level");
  for (std::size_t i = 0; i < t.levels.size(); ++i) {
    const Level& l = t.levels[i];
    bool last = i + 1 == t.levels.size();
    if ((l.kind == LevelKind::element) != last)
      fail("exactly one element level is required, at the innermost position");
    if (!last && l.rank == 0) fail("dense and sparse levels need rank >= 1");
    if (i > 0 && l.kind == LevelKind::dense && t.levels[i - 1].kind == LevelKind::sparse)
      fail("unsupported level composition: dense level below a sparse level");
  }
  std::size_t r = t.rank();
  if (t.transpose.size() != r)
    fail("transpose length " + std::to_string(t.transpose.size()) + " does not match rank " +
         std::to_string(r));
  std::vector<bool> seen(r, false);
  for (auto d : t.transpose) {
    if (d >= r || seen[d]) fail("transpose is not a permutation");
    seen[d] = true;
  }
}

inline LevelTree levels_of_predefined(Format f) {
  switch (f) {
    case Format::DVEC: return LevelTree::make({dense(1)}, {0});
    case Format::DMAT: return LevelTree::make({dense(2)}, {0, 1});
    case Format::CVEC: return LevelTree::make({sparse(1)}, {0});
    case Format::COO: return LevelTree::make({sparse(2)}, {0, 1});
    case Format::CSR: return LevelTree::make({dense(1), sparse(1)}, {0, 1});
    case Format::CSC: return LevelTree::make({dense(1), sparse(1)}, {1, 0});
    case Format::DCSR: return LevelTree::make({sparse(1), sparse(1)}, {0, 1});
    case Format::DCSC: return LevelTree::make({sparse(1), sparse(1)}, {1, 0});
  }
  return {};
}

inline std::optional<Format> alias_of_levels(const LevelTree& t) {
  for (Format f : all_formats)
    if (levels_of_predefined(f) == t) return f;
  return std::nullopt;
}

/// Compressed sparse fiber tree of the given rank, identity transpose.
inline LevelTree csf_levels(std::size_t rank) {
  LevelTree t;
  for (std::size_t i = 0; i < rank; ++i) t.levels.push_back(sparse(1));
  t.levels.push_back({LevelKind::element, 0});
  t.transpose.resize(rank);
  std::iota(t.transpose.begin(), t.transpose.end(), std::size_t{0});
  return t;
}

/// Slot s of the result holds coords[transpose[s]].
inline std::vector<std::uint64_t> apply_transpose(std::span<const std::uint64_t> coords,
                                                  const LevelTree& t) {
  if (coords.size() != t.transpose.size())
    throw Error(Error::Kind::levels, "coordinate length does not match tree rank");
  std::vector<std::uint64_t> out(coords.size());
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = coords[t.transpose[s]];
  return out;
}

// ---------------------------------------------------------------------------
// Array planning

using DataTypeMap = std::vector<std::pair<std::string, DataType>>;

inline const DataType* find_dtype(const DataTypeMap& m, std::string_view name) {
  for (const auto& [k, v] : m)
    if (k == name) return &v;
  return nullptr;
}

struct PlannedArray {
  std::string name;
  DataType dtype;
  /// Number of stored base scalars; empty when it depends on data not
  /// recorded in the descriptor (outer counts of doubly compressed levels).
  std::optional<std::uint64_t> length;

  friend bool operator==(const PlannedArray&, const PlannedArray&) = default;
};

struct ArrayPlan {
  std::vector<PlannedArray> entries;

  const PlannedArray* find(std::string_view name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  friend bool operator==(const ArrayPlan&, const ArrayPlan&) = default;
};

/// Where each level's arrays live and how many positions it has.
struct LevelLayout {
  std::size_t depth = 0;
  std::size_t first_slot = 0;
  Level level;
};

inline std::vector<LevelLayout> level_layout(const LevelTree& t) {
  std::vector<LevelLayout> out;
  std::size_t slot = 0;
  for (std::size_t d = 0; d + 1 < t.levels.size(); ++d) {
    out.push_back({d, slot, t.levels[d]});
    slot += t.levels[d].rank;
  }
  return out;
}

namespace detail {

inline std::optional<std::uint64_t> checked_mul(std::optional<std::uint64_t> a, std::uint64_t b) {
  if (!a) return std::nullopt;
  unsigned __int128 p = static_cast<unsigned __int128>(*a) * b;
  if (p > std::numeric_limits<std::uint64_t>::max())
    throw Error(Error::Kind::levels, "dense extent product overflows 64 bits");
  return static_cast<std::uint64_t>(p);
}

}  // namespace detail

/// Plans the binary arrays for a level tree. `sparse_counts` optionally gives
/// the stored coordinate count of each sparse level (outermost first); the
/// innermost sparse level always holds `nnz` coordinates.
inline ArrayPlan array_plan_levels(const LevelTree& t, std::span<const std::uint64_t> shape,
                                   std::uint64_t nnz, const DataTypeMap& dtypes,
                                   std::span<const std::uint64_t> sparse_counts = {}) {
  check_level_tree(t);
  if (shape.size() != t.rank())
    throw Error(Error::Kind::levels, "shape length does not match tree rank");
  auto need = [&](const std::string& name) {
    const DataType* dt = find_dtype(dtypes, name);
    if (!dt) throw Error(Error::Kind::levels, "no data type given for array '" + name + "'");
    return *dt;
  };

  const auto layout = level_layout(t);
  std::size_t innermost_sparse = layout.size();
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].level.kind == LevelKind::sparse) innermost_sparse = i;

  ArrayPlan plan;
  std::optional<std::uint64_t> positions = 1;
  std::size_t sparse_index = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& L = layout[i];
    if (L.level.kind == LevelKind::dense) {
      for (std::size_t s = 0; s < L.level.rank; ++s)
        positions = detail::checked_mul(positions, shape[t.transpose[L.first_slot + s]]);
      continue;
    }
    std::optional<std::uint64_t> count;
    if (i == innermost_sparse)
      count = nnz;
    else if (sparse_index < sparse_counts.size())
      count = sparse_counts[sparse_index];
    ++sparse_index;
    if (L.depth > 0) {
      std::string name = "pointers_to_" + std::to_string(L.first_slot);
      std::optional<std::uint64_t> len;
      if (positions) len = *positions + 1;
      plan.entries.push_back({name, need(name), len});
    }
    for (std::size_t s = 0; s < L.level.rank; ++s) {
      std::string name = "indices_" + std::to_string(L.first_slot + s);
      plan.entries.push_back({name, need(name), count});
    }
    positions = count;
  }
  DataType vt = need("values");
  std::optional<std::uint64_t> vlen;
  if (positions) vlen = storage_element_count(vt, *positions);
  plan.entries.push_back({"values", vt, vlen});
  return plan;
}

// ---------------------------------------------------------------------------
// JSON form: {"transpose": [...], "level": {"level_desc": ..., "rank": ..., "level": {...}}}

inline nlohmann::ordered_json level_tree_to_json(const LevelTree& t) {
  nlohmann::ordered_json node = {{"level_desc", "element"}};
  for (std::size_t i = t.levels.size() - 1; i-- > 0;) {
    nlohmann::ordered_json parent;
    parent["level_desc"] = std::string(to_string(t.levels[i].kind));
    parent["rank"] = t.levels[i].rank;
    parent["level"] = std::move(node);
    node = std::move(parent);
  }
  nlohmann::ordered_json out;
  out["transpose"] = t.transpose;
  out["level"] = std::move(node);
  return out;
}

inline LevelTree level_tree_from_json(const nlohmann::ordered_json& j) {
  auto fail = [](const std::string& m) { throw Error(Error::Kind::levels, "custom format: " + m); };
  if (!j.is_object()) fail("expected an object");
  if (!j.contains("level")) fail("missing 'level'");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "level" && it.key() != "transpose") fail("unknown key '" + it.key() + "'");

  LevelTree t;
  const nlohmann::ordered_json* node = &j.at("level");
  for (;;) {
    if (!node->is_object() || !node->contains("level_desc") || !node->at("level_desc").is_string())
      fail("level object needs a string 'level_desc'");
    const std::string desc = node->at("level_desc").get<std::string>();
    Level l;
    if (desc == "element") {
      l.kind = LevelKind::element;
      t.levels.push_back(l);
      if (node->contains("level")) fail("element level cannot have a child");
      break;
    }
    if (desc == "dense")
      l.kind = LevelKind::dense;
    else if (desc == "sparse")
      l.kind = LevelKind::sparse;
    else
      fail("unknown level_desc '" + desc + "'");
    l.rank = 1;
    if (node->contains("rank")) {
      const auto& r = node->at("rank");
      if (!r.is_number_unsigned() || r.get<std::uint64_t>() == 0) fail("rank must be a positive integer");
      l.rank = r.get<std::size_t>();
    }
    t.levels.push_back(l);
    if (!node->contains("level")) fail("non-element level needs a child 'level'");
    node = &node->at("level");
  }
  std::size_t r = t.rank();
  if (j.contains("transpose")) {
    const auto& tr = j.at("transpose");
    if (!tr.is_array()) fail("'transpose' must be an array");
    for (const auto& v : tr) {
      if (!v.is_number_unsigned()) fail("'transpose' entries must be nonnegative integers");
      t.transpose.push_back(v.get<std::size_t>());
    }
  } else {
    t.transpose.resize(r);
    std::iota(t.transpose.begin(), t.transpose.end(), std::size_t{0});
  }
  check_level_tree(t);
  return t;
}

}  // namespace binsparse
