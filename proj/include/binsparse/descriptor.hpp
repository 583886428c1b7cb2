#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "binsparse/dtypes.hpp"
#include "binsparse/error.hpp"
#include "binsparse/levels.hpp"

namespace binsparse {

inline constexpr std::string_view binsparse_version = "0.1";

enum class Structure : std::uint8_t { general, symmetric, skew_symmetric, hermitian };

constexpr std::string_view to_string(Structure s) noexcept {
  switch (s) {
    case Structure::general: return "general";
    case Structure::symmetric: return "symmetric";
    case Structure::skew_symmetric: return "skew_symmetric";
    case Structure::hermitian: return "hermitian";
  }
  return "?";
}

inline std::optional<Structure> parse_structure(std::string_view s) {
  for (Structure v : {Structure::general, Structure::symmetric, Structure::skew_symmetric,
                      Structure::hermitian})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

/// The `binsparse` object of a JSON header, plus any sibling top-level keys.
struct Descriptor {
  std::string version{binsparse_version};
  std::variant<Format, LevelTree> format = Format::COO;
  std::vector<std::uint64_t> shape;
  std::uint64_t number_of_stored_values = 0;
  DataTypeMap data_types;
  std::optional<Structure> structure;
  std::optional<bool> fill;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  LevelTree tree() const {
    if (auto* f = std::get_if<Format>(&format)) return levels_of_predefined(*f);
    return std::get<LevelTree>(format);
  }
  Structure structure_or_general() const { return structure.value_or(Structure::general); }
  bool has_fill() const { return fill.value_or(false); }

  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

/// Format tag as written in the header: the predefined name or "custom".
inline std::string format_name(const Descriptor& d) {
  if (auto* f = std::get_if<Format>(&d.format)) return std::string(to_string(*f));
  return "custom";
}

// ---------------------------------------------------------------------------

inline Descriptor parse_descriptor(std::string_view text) {
  auto fail = [](const std::string& m) -> void { throw Error(Error::Kind::descriptor, m); };
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Error::Kind::descriptor, std::string("descriptor is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("binsparse")) fail("missing \"binsparse\" key");
  const auto& b = root.at("binsparse");
  if (!b.is_object()) fail("\"binsparse\" must be an object");

  static constexpr std::string_view known[] = {"version", "format", "shape",
                                               "number_of_stored_values", "data_types",
                                               "structure", "fill"};
  for (auto it = b.begin(); it != b.end(); ++it)
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known))
      fail("unknown key \"" + it.key() + "\" in binsparse object");
  for (std::string_view k : {"version", "format", "shape", "number_of_stored_values", "data_types"})
    if (!b.contains(k)) fail("missing required key \"" + std::string(k) + "\"");

  Descriptor d;
  if (!b.at("version").is_string()) fail("\"version\" must be a string");
  d.version = b.at("version").get<std::string>();

  const auto& f = b.at("format");
  if (f.is_string()) {
    auto tag = parse_format(f.get<std::string>());
    if (!tag) fail("unknown format tag \"" + f.get<std::string>() + "\"");
    d.format = *tag;
  } else if (f.is_object() && f.size() == 1 && f.contains("custom")) {
    try {
      d.format = level_tree_from_json(f.at("custom"));
    } catch (const Error& e) {
      throw Error(Error::Kind::descriptor, e.what());
    }
  } else {
    fail("\"format\" must be a predefined tag or {\"custom\": {...}}");
  }

  const auto& s = b.at("shape");
  if (!s.is_array()) fail("\"shape\" must be an array");
  for (const auto& v : s) {
    if (!v.is_number_unsigned())
      fail("\"shape\" entries must be nonnegative integers");
    d.shape.push_back(v.get<std::uint64_t>());
  }
  const auto& n = b.at("number_of_stored_values");
  if (!n.is_number_unsigned()) fail("\"number_of_stored_values\" must be a nonnegative integer");
  d.number_of_stored_values = n.get<std::uint64_t>();

  const auto& dt = b.at("data_types");
  if (!dt.is_object()) fail("\"data_types\" must be an object");
  for (auto it = dt.begin(); it != dt.end(); ++it) {
    if (!it.value().is_string()) fail("data type of \"" + it.key() + "\" must be a string");
    try {
      d.data_types.emplace_back(it.key(), parse_dtype(it.value().get<std::string>()));
    } catch (const Error& e) {
      throw Error(Error::Kind::descriptor, e.what());
    }
  }
  if (b.contains("structure")) {
    const auto& st = b.at("structure");
    if (!st.is_string()) fail("\"structure\" must be a string");
    auto v = parse_structure(st.get<std::string>());
    if (!v) fail("unknown structure \"" + st.get<std::string>() + "\"");
    d.structure = *v;
  }
  if (b.contains("fill")) {
    if (!b.at("fill").is_boolean()) fail("\"fill\" must be a boolean");
    d.fill = b.at("fill").get<bool>();
  }
  for (auto it = root.begin(); it != root.end(); ++it)
    if (it.key() != "binsparse") d.extra[it.key()] = it.value();
  return d;
}

// ---------------------------------------------------------------------------

/// Arrays implied by a descriptor. `sparse_counts` supplies the data-dependent
/// outer counts (see array_plan_levels); without them those lengths are empty.
inline ArrayPlan array_plan(const Descriptor& d, std::span<const std::uint64_t> sparse_counts = {}) {
  ArrayPlan plan;
  try {
    plan = array_plan_levels(d.tree(), d.shape, d.number_of_stored_values, d.data_types, sparse_counts);
  } catch (const Error& e) {
    throw Error(Error::Kind::descriptor, e.what());
  }
  if (d.has_fill()) {
    const DataType* ft = find_dtype(d.data_types, "fill_value");
    if (!ft) throw Error(Error::Kind::descriptor, "fill is true but no fill_value data type is given");
    plan.entries.push_back({"fill_value", *ft, storage_element_count(ft->without_iso(), 1)});
  }
  return plan;
}

/// Empty iff the descriptor is self-consistent.
inline std::vector<std::string> validate_descriptor(const Descriptor& d) {
  std::vector<std::string> report;
  if (d.version.empty()) report.push_back("empty version");

  LevelTree tree;
  try {
    tree = d.tree();
    check_level_tree(tree);
  } catch (const Error& e) {
    report.push_back(std::string("invalid level tree: ") + e.what());
    return report;
  }
  if (d.shape.size() != tree.rank()) {
    report.push_back("shape has " + std::to_string(d.shape.size()) + " dimensions, format needs " +
                     std::to_string(tree.rank()));
    return report;
  }
  unsigned __int128 dense_size = 1;
  for (auto e : d.shape) {
    dense_size *= e;
    if (dense_size > std::numeric_limits<std::uint64_t>::max()) dense_size = std::numeric_limits<std::uint64_t>::max();
  }
  bool all_dense = std::all_of(tree.levels.begin(), tree.levels.end() - 1,
                               [](const Level& l) { return l.kind == LevelKind::dense; });
  if (all_dense && d.number_of_stored_values != dense_size)
    report.push_back("dense format must store every element (number_of_stored_values mismatch)");
  if (d.number_of_stored_values > dense_size)
    report.push_back("number_of_stored_values exceeds the number of tensor elements");

  const DataType* vt = find_dtype(d.data_types, "values");
  Structure st = d.structure_or_general();
  if (st != Structure::general) {
    if (d.shape.size() != 2 || d.shape[0] != d.shape[1])
      report.push_back(std::string(to_string(st)) + " structure requires a square matrix");
    if (st == Structure::hermitian && vt && !vt->complex)
      report.push_back("hermitian structure requires complex values");
  }

  ArrayPlan plan;
  try {
    plan = array_plan_levels(tree, d.shape, d.number_of_stored_values, d.data_types);
  } catch (const Error& e) {
    // Only missing data types can fail here; list each one.
    DataTypeMap all = d.data_types;
    for (const auto& L : level_layout(tree)) {
      if (L.level.kind != LevelKind::sparse) continue;
      if (L.depth > 0) {
        std::string n = "pointers_to_" + std::to_string(L.first_slot);
        if (!find_dtype(all, n)) report.push_back("missing array " + n);
      }
      for (std::size_t s = 0; s < L.level.rank; ++s) {
        std::string n = "indices_" + std::to_string(L.first_slot + s);
        if (!find_dtype(all, n)) report.push_back("missing array " + n);
      }
    }
    if (!vt) report.push_back("missing array values");
    return report;
  }
  if (d.has_fill()) {
    const DataType* ft = find_dtype(d.data_types, "fill_value");
    if (!ft)
      report.push_back("missing array fill_value (fill is true)");
    else
      plan.entries.push_back({"fill_value", *ft, std::nullopt});
  }
  for (const auto& [name, dt] : d.data_types)
    if (!plan.find(name)) report.push_back("unexpected array " + name);

  for (const auto& e : plan.entries) {
    if (e.name.starts_with("indices_") || e.name.starts_with("pointers_to_")) {
      if (!is_unsigned_int(e.dtype.base) || e.dtype.iso || e.dtype.complex)
        report.push_back(e.name + " must have a plain unsigned integer type");
    }
  }
  if (vt && d.has_fill()) {
    const DataType* ft = find_dtype(d.data_types, "fill_value");
    if (ft && *ft != vt->without_iso())
      report.push_back("fill_value type must match the values type (without iso)");
  }
  return report;
}

// ---------------------------------------------------------------------------

inline nlohmann::ordered_json descriptor_to_json(const Descriptor& d) {
  nlohmann::ordered_json b;
  b["version"] = d.version;
  if (auto* f = std::get_if<Format>(&d.format))
    b["format"] = std::string(to_string(*f));
  else
    b["format"] = nlohmann::ordered_json{{"custom", level_tree_to_json(std::get<LevelTree>(d.format))}};
  b["shape"] = d.shape;
  b["number_of_stored_values"] = d.number_of_stored_values;
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (const auto& [name, dt] : d.data_types) types[name] = format_dtype(dt);
  b["data_types"] = std::move(types);
  if (d.structure) b["structure"] = std::string(to_string(*d.structure));
  if (d.fill) b["fill"] = *d.fill;

  nlohmann::ordered_json root;
  root["binsparse"] = std::move(b);
  for (auto it = d.extra.begin(); it != d.extra.end(); ++it) root[it.key()] = it.value();
  return root;
}

inline std::string emit_descriptor(const Descriptor& d) {
  auto report = validate_descriptor(d);
  if (!report.empty()) throw Error(Error::Kind::descriptor, "invalid descriptor: " + report.front());
  return descriptor_to_json(d).dump(2);
}

}  // namespace binsparse
