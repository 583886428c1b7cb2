#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "binsparse/error.hpp"

namespace binsparse {

/// Element type of a stored binary array.
enum class ScalarType : std::uint8_t {
  uint8,
  uint16,
  uint32,
  uint64,
  int8,
  int16,
  int32,
  int64,
  float32,
  float64,
  bint8,
};

inline constexpr std::array<ScalarType, 11> all_scalar_types = {
    ScalarType::uint8,   ScalarType::uint16,  ScalarType::uint32,
    ScalarType::uint64,  ScalarType::int8,    ScalarType::int16,
    ScalarType::int32,   ScalarType::int64,   ScalarType::float32,
    ScalarType::float64, ScalarType::bint8};

constexpr std::size_t bit_width(ScalarType t) noexcept {
  switch (t) {
    case ScalarType::uint8:
    case ScalarType::int8:
    case ScalarType::bint8:
      return 8;
    case ScalarType::uint16:
    case ScalarType::int16:
      return 16;
    case ScalarType::uint32:
    case ScalarType::int32:
    case ScalarType::float32:
      return 32;
    case ScalarType::uint64:
    case ScalarType::int64:
    case ScalarType::float64:
      return 64;
  }
  return 0;
}

constexpr std::size_t byte_width(ScalarType t) noexcept {
  return bit_width(t) / 8;
}

constexpr bool is_float(ScalarType t) noexcept {
  return t == ScalarType::float32 || t == ScalarType::float64;
}

constexpr bool is_signed_int(ScalarType t) noexcept {
  return t == ScalarType::int8 || t == ScalarType::int16 ||
         t == ScalarType::int32 || t == ScalarType::int64;
}

constexpr bool is_unsigned_int(ScalarType t) noexcept {
  return t == ScalarType::uint8 || t == ScalarType::uint16 ||
         t == ScalarType::uint32 || t == ScalarType::uint64;
}

constexpr std::string_view to_string(ScalarType t) noexcept {
  switch (t) {
    case ScalarType::uint8: return "uint8";
    case ScalarType::uint16: return "uint16";
    case ScalarType::uint32: return "uint32";
    case ScalarType::uint64: return "uint64";
    case ScalarType::int8: return "int8";
    case ScalarType::int16: return "int16";
    case ScalarType::int32: return "int32";
    case ScalarType::int64: return "int64";
    case ScalarType::float32: return "float32";
    case ScalarType::float64: return "float64";
    case ScalarType::bint8: return "bint8";
  }
  return "?";
}

/// Type of a logical array element: a scalar plus the `iso` (one stored value
/// shared by every entry) and `complex` (interleaved re/im pairs) modifiers.
struct DataType {
  ScalarType base = ScalarType::float64;
  bool iso = false;
  bool complex = false;

  friend bool operator==(const DataType&, const DataType&) = default;

  /// Bytes occupied by one logical (non-iso) element.
  constexpr std::size_t element_bytes() const noexcept {
    return byte_width(base) * (complex ? 2 : 1);
  }
  constexpr DataType without_iso() const noexcept { return {base, false, complex}; }
};

constexpr DataType dtype(ScalarType base) noexcept { return {base, false, false}; }

inline std::string format_dtype(const DataType& dt) {
  std::string s(to_string(dt.base));
  if (dt.complex) s = "complex[" + s + "]";
  if (dt.iso) s = "iso[" + s + "]";
  return s;
}

inline DataType parse_dtype(std::string_view s) {
  const std::string original(s);
  DataType dt;
  bool seen_iso = false;
  bool seen_complex = false;
  for (;;) {
    std::string_view prefix;
    if (s.starts_with("iso[")) {
      if (seen_iso) throw Error(Error::Kind::dtype, "duplicate iso modifier in '" + original + "'");
      seen_iso = true;
      prefix = "iso[";
    } else if (s.starts_with("complex[")) {
      if (seen_complex)
        throw Error(Error::Kind::dtype, "duplicate complex modifier in '" + original + "'");
      seen_complex = true;
      prefix = "complex[";
    } else {
      break;
    }
    if (!s.ends_with(']'))
      throw Error(Error::Kind::dtype, "unbalanced brackets in '" + original + "'");
    s = s.substr(prefix.size(), s.size() - prefix.size() - 1);
  }
  bool found = false;
  for (ScalarType t : all_scalar_types) {
    if (to_string(t) == s) {
      dt.base = t;
      found = true;
      break;
    }
  }
  if (!found) throw Error(Error::Kind::dtype, "unknown data type '" + original + "'");
  if (seen_complex && !is_float(dt.base))
    throw Error(Error::Kind::dtype, "complex requires a float base in '" + original + "'");
  dt.iso = seen_iso;
  dt.complex = seen_complex;
  return dt;
}

/// Number of base scalars physically stored for `logical_len` entries.
constexpr std::uint64_t storage_element_count(const DataType& dt,
                                              std::uint64_t logical_len) noexcept {
  std::uint64_t n = dt.iso ? 1 : logical_len;
  return dt.complex ? 2 * n : n;
}

namespace detail {

// First unsigned width w with value < 2^w ("below", strictly).
constexpr ScalarType smallest_unsigned_below(std::uint64_t value) noexcept {
  if (value < (std::uint64_t{1} << 8)) return ScalarType::uint8;
  if (value < (std::uint64_t{1} << 16)) return ScalarType::uint16;
  if (value < (std::uint64_t{1} << 32)) return ScalarType::uint32;
  return ScalarType::uint64;
}

}  // namespace detail

/// Index width picked from the tensor extents: all extents must be below 2^w.
inline DataType min_index_dtype(std::span<const std::uint64_t> dims) {
  std::uint64_t largest = 0;
  for (auto d : dims) largest = d > largest ? d : largest;
  return dtype(detail::smallest_unsigned_below(largest));
}

/// Pointer width picked from the number of stored values.
constexpr DataType min_pointer_dtype(std::uint64_t nnz) noexcept {
  return dtype(detail::smallest_unsigned_below(nnz));
}

}  // namespace binsparse
