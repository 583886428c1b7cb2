#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binsparse/descriptor.hpp"
#include "binsparse/dtypes.hpp"
#include "binsparse/error.hpp"
#include "binsparse/levels.hpp"
#include "binsparse/typed_array.hpp"

namespace binsparse {

/// Coordinate/value pairs, the hub every conversion goes through. Values are
/// raw bytes of `value_type` (complex values carry both halves).
struct EntryList {
  std::size_t rank = 0;
  DataType value_type;  // never iso
  std::vector<std::uint64_t> coords;
  std::vector<std::byte> values;

  EntryList() = default;
  EntryList(std::size_t r, DataType vt) : rank(r), value_type(vt.without_iso()) {}

  std::size_t size() const noexcept {
    return rank == 0 ? 0 : coords.size() / rank;
  }
  std::span<const std::uint64_t> coord(std::size_t i) const noexcept {
    return {coords.data() + i * rank, rank};
  }
  std::span<const std::byte> value(std::size_t i) const noexcept {
    std::size_t w = value_type.element_bytes();
    return {values.data() + i * w, w};
  }
  void reserve(std::size_t n) {
    coords.reserve(n * rank);
    values.reserve(n * value_type.element_bytes());
  }
  void push_back(std::span<const std::uint64_t> c, std::span<const std::byte> v) {
    coords.insert(coords.end(), c.begin(), c.end());
    values.insert(values.end(), v.begin(), v.end());
  }

  friend bool operator==(const EntryList&, const EntryList&) = default;
};

/// Bytes of one logical element of `vt` holding re (+ i·im for complex).
inline std::vector<std::byte> scalar_bytes(DataType vt, double re, double im = 0.0) {
  TypedArray a(vt.base, vt.complex ? 2 : 1);
  a.set_float(0, re);
  if (vt.complex) a.set_float(1, im);
  return std::move(a).release();
}

struct SparseTensor {
  std::vector<std::uint64_t> shape;
  Structure structure = Structure::general;
  LevelTree levels;
  DataType value_dtype;
  std::uint64_t number_of_stored_values = 0;
  std::optional<std::vector<std::byte>> fill_value;  // one element of value_dtype.without_iso()
  std::map<std::string, TypedArray> arrays;

  std::size_t rank() const noexcept { return shape.size(); }
  std::uint64_t nnz() const noexcept { return number_of_stored_values; }
  std::optional<Format> format() const { return alias_of_levels(levels); }

  const TypedArray& array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw Error(Error::Kind::tensor, "tensor has no array '" + name + "'");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Descriptor <-> tensor

/// Header describing `t`; predefined aliases are substituted for custom trees.
inline Descriptor describe(const SparseTensor& t) {
  Descriptor d;
  if (auto f = alias_of_levels(t.levels))
    d.format = *f;
  else
    d.format = t.levels;
  d.shape = t.shape;
  d.number_of_stored_values = t.number_of_stored_values;
  d.data_types.emplace_back("values", t.value_dtype);
  DataTypeMap tmp{{"values", t.value_dtype}};
  for (const auto& [name, a] : t.arrays)
    if (name != "values" && name != "fill_value") tmp.emplace_back(name, dtype(a.type()));
  // Level arrays in plan order.
  ArrayPlan plan = array_plan_levels(t.levels, t.shape, t.number_of_stored_values, tmp);
  for (const auto& e : plan.entries)
    if (e.name != "values") d.data_types.emplace_back(e.name, e.dtype);
  if (t.structure != Structure::general) d.structure = t.structure;
  if (t.fill_value) {
    d.fill = true;
    d.data_types.emplace_back("fill_value", t.value_dtype.without_iso());
  }
  return d;
}

/// Counts of every sparse level (outermost first), read off the arrays.
inline std::vector<std::uint64_t> sparse_level_counts(const LevelTree& tree,
                                                      const std::map<std::string, TypedArray>& arrays) {
  std::vector<std::uint64_t> counts;
  for (const auto& L : level_layout(tree)) {
    if (L.level.kind != LevelKind::sparse) continue;
    auto it = arrays.find("indices_" + std::to_string(L.first_slot));
    counts.push_back(it == arrays.end() ? 0 : it->second.size());
  }
  return counts;
}

/// Full array plan for a tensor, including data-dependent lengths.
inline ArrayPlan array_plan(const SparseTensor& t) {
  Descriptor d = describe(t);
  auto counts = sparse_level_counts(t.levels, t.arrays);
  return array_plan(d, counts);
}

inline std::vector<std::string> validate_tensor(const SparseTensor& t);

/// Assembles a tensor from a parsed header and its arrays, checking each
/// array against the plan but not the array contents.
inline SparseTensor assemble_tensor_unchecked(const Descriptor& d, std::map<std::string, TypedArray> arrays) {
  auto report = validate_descriptor(d);
  if (!report.empty()) throw Error(Error::Kind::descriptor, "invalid descriptor: " + report.front());
  SparseTensor t;
  t.shape = d.shape;
  t.structure = d.structure_or_general();
  t.levels = d.tree();
  t.value_dtype = *find_dtype(d.data_types, "values");
  t.number_of_stored_values = d.number_of_stored_values;

  auto counts = sparse_level_counts(t.levels, arrays);
  ArrayPlan plan = array_plan(d, counts);
  for (const auto& e : plan.entries) {
    auto it = arrays.find(e.name);
    if (it == arrays.end()) throw Error(Error::Kind::tensor, "missing array " + e.name);
    TypedArray& a = it->second;
    if (byte_width(a.type()) != byte_width(e.dtype.base) ||
        (a.type() != e.dtype.base &&
         !(e.dtype.base == ScalarType::bint8 && a.type() == ScalarType::uint8)))
      throw Error(Error::Kind::tensor, "data type mismatch for " + e.name + ": header says " +
                                           format_dtype(e.dtype) + ", array holds " +
                                           std::string(to_string(a.type())));
    a.retag(e.dtype.base);
    if (e.length && a.size() != *e.length)
      throw Error(Error::Kind::tensor, "length mismatch for " + e.name + ": expected " +
                                           std::to_string(*e.length) + ", found " +
                                           std::to_string(a.size()));
  }
  for (const auto& [name, a] : arrays)
    if (!plan.find(name)) throw Error(Error::Kind::tensor, "unexpected array " + name);
  if (d.has_fill()) {
    auto node = arrays.extract("fill_value");
    t.fill_value = std::move(node.mapped()).release();
  }
  t.arrays = std::move(arrays);
  return t;
}

/// assemble_tensor_unchecked followed by validate_tensor.
inline SparseTensor assemble_tensor(const Descriptor& d, std::map<std::string, TypedArray> arrays) {
  SparseTensor t = assemble_tensor_unchecked(d, std::move(arrays));
  auto report = validate_tensor(t);
  if (!report.empty()) throw Error(Error::Kind::tensor, "invalid tensor: " + report.front());
  return t;
}

// ---------------------------------------------------------------------------
// Building

namespace detail {

inline bool lex_less(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Permutation sorting rows of a flat row-major table; identity if already sorted.
inline std::vector<std::size_t> sort_rows(const std::vector<std::uint64_t>& flat, std::size_t width,
                                          std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto row = [&](std::size_t i) { return std::span<const std::uint64_t>(flat.data() + i * width, width); };
  bool sorted = true;
  for (std::size_t i = 1; i < n && sorted; ++i)
    if (lex_less(row(i), row(i - 1))) sorted = false;
  if (!sorted)
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return lex_less(row(a), row(b)); });
  return perm;
}

}  // namespace detail

/// Lays out `entries` according to `tree`. Entries may arrive in any order;
/// duplicates and out-of-range coordinates are rejected. Positions of a
/// trailing dense level with no entry receive `fill` (or zero).
inline SparseTensor build_tensor(const EntryList& entries, std::vector<std::uint64_t> shape,
                                 Structure structure, DataType value_dtype, const LevelTree& tree,
                                 std::optional<std::vector<std::byte>> fill = std::nullopt) {
  auto fail = [](const std::string& m) -> void { throw Error(Error::Kind::tensor, m); };
  check_level_tree(tree);
  const std::size_t rank = tree.rank();
  if (shape.size() != rank) fail("shape length does not match format rank");
  if (entries.rank != rank && entries.size() > 0) fail("entry rank does not match shape");
  if (entries.value_type != value_dtype.without_iso())
    fail("entry value type " + format_dtype(entries.value_type) + " does not match " +
         format_dtype(value_dtype));
  const std::size_t n = entries.size();
  const std::size_t vbytes = value_dtype.element_bytes();

  for (std::size_t i = 0; i < n; ++i) {
    auto c = entries.coord(i);
    for (std::size_t d = 0; d < rank; ++d)
      if (c[d] >= shape[d])
        fail("coordinate " + std::to_string(c[d]) + " out of range for dimension " + std::to_string(d) +
             " of extent " + std::to_string(shape[d]));
  }

  // Slot-ordered coordinates, sorted.
  std::vector<std::uint64_t> slots(n * rank);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = entries.coord(i);
    for (std::size_t s = 0; s < rank; ++s) slots[i * rank + s] = c[tree.transpose[s]];
  }
  auto perm = detail::sort_rows(slots, rank, n);
  auto key = [&](std::size_t k) { return std::span<const std::uint64_t>(slots.data() + perm[k] * rank, rank); };
  for (std::size_t k = 1; k < n; ++k)
    if (std::ranges::equal(key(k), key(k - 1))) {
      auto c = entries.coord(perm[k]);
      std::string s;
      for (auto v : c) s += (s.empty() ? "" : ",") + std::to_string(v);
      fail("duplicate coordinate (" + s + ")");
    }

  if (value_dtype.iso && n > 1) {
    auto first = entries.value(0);
    for (std::size_t i = 1; i < n; ++i)
      if (!std::ranges::equal(entries.value(i), first)) fail("iso value type declared but stored values differ");
  }
  if (fill && fill->size() != vbytes) fail("fill value has the wrong width");

  SparseTensor t;
  t.shape = std::move(shape);
  t.structure = structure;
  t.levels = tree;
  t.value_dtype = value_dtype;
  t.fill_value = fill;

  const ScalarType index_type = min_index_dtype(t.shape).base;
  const auto layout = level_layout(tree);
  std::size_t first_sparse = layout.size();
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].level.kind == LevelKind::sparse) {
      first_sparse = i;
      break;
    }
  const std::size_t dense_slots = first_sparse == layout.size() ? rank : layout[first_sparse].first_slot;

  // Linear position of each sorted entry within the dense prefix.
  std::uint64_t dense_positions = 1;
  for (std::size_t s = 0; s < dense_slots; ++s) dense_positions *= t.shape[tree.transpose[s]];
  auto dense_linear = [&](std::size_t k) {
    auto c = key(k);
    std::uint64_t lin = 0;
    for (std::size_t s = 0; s < dense_slots; ++s) lin = lin * t.shape[tree.transpose[s]] + c[s];
    return lin;
  };

  auto value_of = [&](std::size_t k) { return entries.value(perm[k]); };

  if (first_sparse == layout.size()) {
    // Fully dense: every position is stored.
    if (value_dtype.iso && n != dense_positions)
      fail("cannot store an incomplete iso tensor densely");
    t.number_of_stored_values = dense_positions;
    std::vector<std::byte> vals;
    if (value_dtype.iso) {
      vals.assign(vbytes, std::byte{0});
      if (n > 0) std::memcpy(vals.data(), value_of(0).data(), vbytes);
    } else {
      vals.resize(dense_positions * vbytes);
      for (std::uint64_t p = 0; p < dense_positions; ++p)
        if (fill) std::memcpy(vals.data() + p * vbytes, fill->data(), vbytes);
      for (std::size_t k = 0; k < n; ++k)
        std::memcpy(vals.data() + dense_linear(k) * vbytes, value_of(k).data(), vbytes);
    }
    t.arrays.emplace("values", TypedArray(value_dtype.base, std::move(vals)));
    return t;
  }

  t.number_of_stored_values = n;
  const ScalarType pointer_type = min_pointer_dtype(n).base;
  // parent[k]: position of entry k's fiber in the enclosing level.
  std::vector<std::uint64_t> parent(n);
  for (std::size_t k = 0; k < n; ++k) parent[k] = dense_linear(k);
  std::uint64_t parent_positions = dense_positions;

  for (std::size_t li = first_sparse; li < layout.size(); ++li) {
    const auto& L = layout[li];
    const std::size_t end_slot = L.first_slot + L.level.rank;
    std::vector<std::uint64_t> ptr;
    if (L.depth > 0) ptr.assign(parent_positions + 1, 0);
    std::vector<std::vector<std::uint64_t>> idx(L.level.rank);
    std::uint64_t count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      bool fresh = k == 0 || !std::equal(key(k).begin(), key(k).begin() + end_slot, key(k - 1).begin());
      if (fresh) {
        if (L.depth > 0) ++ptr[parent[k] + 1];
        for (std::size_t s = 0; s < L.level.rank; ++s) idx[s].push_back(key(k)[L.first_slot + s]);
        ++count;
      }
      parent[k] = count - 1;
    }
    if (L.depth > 0) {
      std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
      t.arrays.emplace("pointers_to_" + std::to_string(L.first_slot),
                       TypedArray::from<std::uint64_t>(pointer_type, ptr));
    }
    for (std::size_t s = 0; s < L.level.rank; ++s)
      t.arrays.emplace("indices_" + std::to_string(L.first_slot + s),
                       TypedArray::from<std::uint64_t>(index_type, idx[s]));
    parent_positions = count;
  }

  std::vector<std::byte> vals;
  if (value_dtype.iso) {
    vals.assign(vbytes, std::byte{0});
    if (n > 0) std::memcpy(vals.data(), value_of(0).data(), vbytes);
  } else {
    vals.resize(n * vbytes);
    for (std::size_t k = 0; k < n; ++k) std::memcpy(vals.data() + k * vbytes, value_of(k).data(), vbytes);
  }
  t.arrays.emplace("values", TypedArray(value_dtype.base, std::move(vals)));
  return t;
}

/// Coordinate tensor (one rank-r sparse level). Rank 2 is the COO format.
inline SparseTensor build_coo(const EntryList& entries, std::vector<std::uint64_t> shape,
                              Structure structure, DataType value_dtype) {
  LevelTree tree;
  tree.levels = {sparse(shape.size()), {LevelKind::element, 0}};
  tree.transpose.resize(shape.size());
  std::iota(tree.transpose.begin(), tree.transpose.end(), std::size_t{0});
  return build_tensor(entries, std::move(shape), structure, value_dtype, tree);
}

// ---------------------------------------------------------------------------
// Reading back

/// Entries in lexicographic coordinate order. Iso values are expanded;
/// structure is not (only the stored triangle comes back).
inline EntryList to_entry_list(const SparseTensor& t) {
  const LevelTree& tree = t.levels;
  check_level_tree(tree);
  const std::size_t rank = tree.rank();
  EntryList out(rank, t.value_dtype);

  std::uint64_t positions = 1;
  std::size_t width = 0;  // slots resolved so far
  std::vector<std::uint64_t> prefix;  // positions x width

  for (const auto& L : level_layout(tree)) {
    const std::size_t r = L.level.rank;
    std::vector<std::uint64_t> next;
    std::uint64_t next_positions = 0;
    if (L.level.kind == LevelKind::dense) {
      std::vector<std::uint64_t> ext(r);
      std::uint64_t span = 1;
      for (std::size_t s = 0; s < r; ++s) span *= (ext[s] = t.shape[tree.transpose[L.first_slot + s]]);
      next_positions = positions * span;
      next.reserve(next_positions * (width + r));
      std::vector<std::uint64_t> digits(r);
      for (std::uint64_t p = 0; p < positions; ++p)
        for (std::uint64_t lin = 0; lin < span; ++lin) {
          std::uint64_t rem = lin;
          for (std::size_t s = r; s-- > 0;) {
            digits[s] = rem % ext[s];
            rem /= ext[s];
          }
          next.insert(next.end(), prefix.begin() + p * width, prefix.begin() + (p + 1) * width);
          next.insert(next.end(), digits.begin(), digits.end());
        }
    } else {
      std::vector<const TypedArray*> idx(r);
      for (std::size_t s = 0; s < r; ++s) idx[s] = &t.array("indices_" + std::to_string(L.first_slot + s));
      const std::size_t count = idx[0]->size();
      next_positions = count;
      next.reserve(count * (width + r));
      auto emit = [&](std::uint64_t p, std::uint64_t q) {
        next.insert(next.end(), prefix.begin() + p * width, prefix.begin() + (p + 1) * width);
        for (std::size_t s = 0; s < r; ++s) next.push_back(idx[s]->get_uint(q));
      };
      if (L.depth == 0) {
        for (std::uint64_t q = 0; q < count; ++q) emit(0, q);
      } else {
        const TypedArray& ptr = t.array("pointers_to_" + std::to_string(L.first_slot));
        for (std::uint64_t p = 0; p < positions; ++p)
          for (std::uint64_t q = ptr.get_uint(p); q < ptr.get_uint(p + 1); ++q) emit(p, q);
      }
    }
    prefix = std::move(next);
    positions = next_positions;
    width += r;
  }

  // Back to tensor dimension order.
  std::vector<std::uint64_t> coords(positions * rank);
  for (std::uint64_t p = 0; p < positions; ++p)
    for (std::size_t s = 0; s < rank; ++s) coords[p * rank + tree.transpose[s]] = prefix[p * rank + s];
  auto perm = detail::sort_rows(coords, rank, positions);

  const TypedArray& vals = t.array("values");
  const std::size_t vbytes = t.value_dtype.element_bytes();
  out.coords.resize(positions * rank);
  out.values.resize(positions * vbytes);
  for (std::uint64_t k = 0; k < positions; ++k) {
    std::uint64_t p = perm[k];
    std::copy_n(coords.begin() + p * rank, rank, out.coords.begin() + k * rank);
    std::uint64_t src = t.value_dtype.iso ? 0 : p;
    std::memcpy(out.values.data() + k * vbytes, vals.bytes().data() + src * vbytes, vbytes);
  }
  return out;
}

/// Same logical tensor in another layout.
inline SparseTensor convert(const SparseTensor& t, const LevelTree& target) {
  if (target.rank() != t.rank()) throw Error(Error::Kind::tensor, "target format rank differs from tensor rank");
  return build_tensor(to_entry_list(t), t.shape, t.structure, t.value_dtype, target, t.fill_value);
}

inline SparseTensor convert(const SparseTensor& t, Format target) {
  return convert(t, levels_of_predefined(target));
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline bool valid_index_type(ScalarType s) { return is_unsigned_int(s); }

}  // namespace detail

/// Empty iff every structural invariant of the tensor holds.
inline std::vector<std::string> validate_tensor(const SparseTensor& t) {
  std::vector<std::string> report;
  try {
    check_level_tree(t.levels);
  } catch (const Error& e) {
    report.push_back(e.what());
    return report;
  }
  if (t.shape.size() != t.levels.rank()) {
    report.push_back("shape length does not match format rank");
    return report;
  }
  auto get = [&](const std::string& name) -> const TypedArray* {
    auto it = t.arrays.find(name);
    if (it == t.arrays.end()) {
      report.push_back("missing array " + name);
      return nullptr;
    }
    return &it->second;
  };

  std::vector<std::string> expected_names{"values"};
  std::uint64_t positions = 1;
  bool ok = true;
  for (const auto& L : level_layout(t.levels)) {
    const std::size_t r = L.level.rank;
    if (L.level.kind == LevelKind::dense) {
      for (std::size_t s = 0; s < r; ++s) positions *= t.shape[t.levels.transpose[L.first_slot + s]];
      continue;
    }
    std::vector<const TypedArray*> idx(r);
    std::vector<std::uint64_t> ext(r);
    for (std::size_t s = 0; s < r; ++s) {
      std::string name = "indices_" + std::to_string(L.first_slot + s);
      expected_names.push_back(name);
      idx[s] = get(name);
      ext[s] = t.shape[t.levels.transpose[L.first_slot + s]];
      if (idx[s] && !detail::valid_index_type(idx[s]->type()))
        report.push_back(name + " must have an unsigned integer type");
    }
    const TypedArray* ptr = nullptr;
    if (L.depth > 0) {
      std::string name = "pointers_to_" + std::to_string(L.first_slot);
      expected_names.push_back(name);
      ptr = get(name);
      if (ptr && !detail::valid_index_type(ptr->type()))
        report.push_back(name + " must have an unsigned integer type");
    }
    if (std::ranges::any_of(idx, [](auto* p) { return p == nullptr; }) || (L.depth > 0 && !ptr)) {
      ok = false;
      break;
    }
    const std::uint64_t count = idx[0]->size();
    bool lengths_ok = true;
    for (std::size_t s = 1; s < r; ++s)
      if (idx[s]->size() != count) {
        report.push_back("indices arrays of one level differ in length");
        lengths_ok = false;
      }
    // Fiber boundaries.
    std::vector<std::uint64_t> bounds;
    if (ptr) {
      if (ptr->size() != positions + 1) {
        report.push_back("pointers_to_" + std::to_string(L.first_slot) + " has length " +
                         std::to_string(ptr->size()) + ", expected " + std::to_string(positions + 1));
        lengths_ok = false;
      } else {
        if (ptr->get_uint(0) != 0) report.push_back("pointers do not start at 0");
        bool mono = true;
        for (std::uint64_t p = 0; p < positions; ++p)
          if (ptr->get_uint(p + 1) < ptr->get_uint(p)) mono = false;
        if (!mono) {
          report.push_back("non-monotone pointers in pointers_to_" + std::to_string(L.first_slot));
          lengths_ok = false;
        } else if (ptr->get_uint(positions) != count) {
          report.push_back("pointers_to_" + std::to_string(L.first_slot) + " ends at " +
                           std::to_string(ptr->get_uint(positions)) + " but the level stores " +
                           std::to_string(count));
          lengths_ok = false;
        }
        if (lengths_ok)
          for (std::uint64_t p = 0; p <= positions; ++p) bounds.push_back(ptr->get_uint(p));
      }
    } else {
      bounds = {0, count};
    }
    bool range_ok = true;
    for (std::size_t s = 0; s < r && lengths_ok; ++s)
      for (std::uint64_t q = 0; q < count; ++q)
        if (idx[s]->get_uint(q) >= ext[s]) {
          report.push_back("index out of range in indices_" + std::to_string(L.first_slot + s) + ": " +
                           std::to_string(idx[s]->get_uint(q)) + " >= " + std::to_string(ext[s]));
          range_ok = false;
          break;
        }
    if (!lengths_ok) {
      ok = false;
      break;
    }
    if (range_ok) {
      std::vector<std::uint64_t> a(r), b(r);
      bool ordered = true;
      for (std::size_t f = 0; f + 1 < bounds.size() && ordered; ++f)
        for (std::uint64_t q = bounds[f] + 1; q < bounds[f + 1]; ++q) {
          for (std::size_t s = 0; s < r; ++s) {
            a[s] = idx[s]->get_uint(q - 1);
            b[s] = idx[s]->get_uint(q);
          }
          if (!detail::lex_less(a, b)) {
            ordered = false;
            break;
          }
        }
      if (!ordered)
        report.push_back("indices at level " + std::to_string(L.depth) +
                         " are not strictly increasing within a fiber");
    }
    positions = count;
  }
  if (!ok) return report;

  if (positions != t.number_of_stored_values)
    report.push_back("number_of_stored_values is " + std::to_string(t.number_of_stored_values) +
                     " but the levels store " + std::to_string(positions));
  if (const TypedArray* v = get("values")) {
    if (v->type() != t.value_dtype.base)
      report.push_back("values array type does not match the value data type");
    std::uint64_t want = storage_element_count(t.value_dtype, positions);
    if (v->size() != want)
      report.push_back("values has " + std::to_string(v->size()) + " elements, expected " + std::to_string(want));
  }
  if (t.value_dtype.complex && !is_float(t.value_dtype.base)) report.push_back("complex requires a float base");
  if (t.fill_value && t.fill_value->size() != t.value_dtype.element_bytes())
    report.push_back("fill value has the wrong width");
  for (const auto& [name, a] : t.arrays)
    if (std::ranges::find(expected_names, name) == expected_names.end()) report.push_back("unexpected array " + name);

  if (t.structure != Structure::general) {
    if (t.rank() != 2 || t.shape[0] != t.shape[1])
      report.push_back(std::string(to_string(t.structure)) + " structure requires a square matrix");
    else if (t.structure == Structure::hermitian && !t.value_dtype.complex)
      report.push_back("hermitian structure requires complex values");
    else if (report.empty()) {
      EntryList e = to_entry_list(t);
      for (std::size_t i = 0; i < e.size(); ++i)
        if (e.coord(i)[0] < e.coord(i)[1]) {
          report.push_back("entry above the diagonal in a " + std::string(to_string(t.structure)) + " matrix");
          break;
        }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Equality and downcasting

/// Same shape, structure, fill, value type and bitwise-identical entries.
inline bool canonical_equal(const SparseTensor& a, const SparseTensor& b) {
  if (a.shape != b.shape || a.structure != b.structure || a.value_dtype != b.value_dtype ||
      a.fill_value != b.fill_value)
    return false;
  return to_entry_list(a) == to_entry_list(b);
}

namespace detail {

inline std::optional<ScalarType> narrower(ScalarType t) {
  switch (t) {
    case ScalarType::float64: return ScalarType::float32;
    case ScalarType::int64: return ScalarType::int32;
    case ScalarType::int32: return ScalarType::int16;
    case ScalarType::int16: return ScalarType::int8;
    case ScalarType::uint64: return ScalarType::uint32;
    case ScalarType::uint32: return ScalarType::uint16;
    case ScalarType::uint16: return ScalarType::uint8;
    default: return std::nullopt;
  }
}

/// Casts every element to `to`; empty result if any element changes.
inline std::optional<TypedArray> exact_cast(const TypedArray& a, ScalarType to) {
  TypedArray out(to, a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_float(a.type())) {
      double v = a.get_float(i);
      out.set_float(i, v);
      double back = out.get_float(i);
      if (std::memcmp(&v, &back, sizeof v) != 0) return std::nullopt;
    } else if (is_signed_int(a.type())) {
      std::int64_t v = a.get_int(i);
      out.set_int(i, v);
      if (out.get_int(i) != v) return std::nullopt;
    } else {
      std::uint64_t v = a.get_uint(i);
      out.set_uint(i, v);
      if (out.get_uint(i) != v) return std::nullopt;
    }
  }
  return out;
}

}  // namespace detail

/// Narrows the values array as far as every stored value survives a cast
/// and cast back bit for bit. Signedness never changes.
inline SparseTensor downcast_values(const SparseTensor& t) {
  SparseTensor out = t;
  const TypedArray* vals = &out.array("values");
  for (auto next = detail::narrower(vals->type()); next; next = detail::narrower(*next)) {
    auto narrowed = detail::exact_cast(*vals, *next);
    if (!narrowed) break;
    std::optional<TypedArray> fill;
    if (out.fill_value) {
      fill = detail::exact_cast(TypedArray(vals->type(), *out.fill_value), *next);
      if (!fill) break;
      out.fill_value = std::move(*fill).release();
    }
    out.arrays["values"] = std::move(*narrowed);
    out.value_dtype.base = *next;
    vals = &out.array("values");
  }
  return out;
}

}  // namespace binsparse
