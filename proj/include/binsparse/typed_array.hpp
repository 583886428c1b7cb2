#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>
#include <vector>

#include "binsparse/dtypes.hpp"

namespace binsparse {

static_assert(std::endian::native == std::endian::little,
              "binsparse stores arrays in host order and requires a little-endian host");

/// A contiguous array of one scalar type, held as raw little-endian bytes.
/// Element access goes through memcpy so no alignment is assumed.
class TypedArray {
 public:
  TypedArray() = default;
  TypedArray(ScalarType type, std::size_t length)
      : type_(type), bytes_(length * byte_width(type)) {}
  TypedArray(ScalarType type, std::vector<std::byte> bytes) : type_(type), bytes_(std::move(bytes)) {
    if (bytes_.size() % byte_width(type_) != 0)
      throw Error(Error::Kind::tensor, "byte count is not a multiple of the element width");
  }

  template <class T>
  static TypedArray from(ScalarType type, std::span<const T> values) {
    TypedArray a(type, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if constexpr (std::is_floating_point_v<T>)
        a.set_float(i, static_cast<double>(values[i]));
      else if constexpr (std::is_signed_v<T>)
        a.set_int(i, static_cast<std::int64_t>(values[i]));
      else
        a.set_uint(i, static_cast<std::uint64_t>(values[i]));
    }
    return a;
  }
  template <class T>
  static TypedArray from(ScalarType type, std::initializer_list<T> values) {
    return from(type, std::span<const T>(values.begin(), values.size()));
  }

  ScalarType type() const noexcept { return type_; }
  std::size_t size() const noexcept { return bytes_.size() / byte_width(type_); }
  bool empty() const noexcept { return bytes_.empty(); }

  std::span<const std::byte> bytes() const noexcept { return bytes_; }
  std::span<std::byte> bytes() noexcept { return bytes_; }
  std::vector<std::byte> release() && { return std::move(bytes_); }

  /// Relabels the array (e.g. uint8 on disk read back as bint8). Widths must match.
  void retag(ScalarType type) {
    if (byte_width(type) != byte_width(type_))
      throw Error(Error::Kind::tensor, "cannot retag array to a type of different width");
    type_ = type;
  }

  const std::byte* element_ptr(std::size_t i) const noexcept { return bytes_.data() + i * byte_width(type_); }
  std::byte* element_ptr(std::size_t i) noexcept { return bytes_.data() + i * byte_width(type_); }

  std::uint64_t get_uint(std::size_t i) const noexcept {
    switch (type_) {
      case ScalarType::uint8:
      case ScalarType::bint8: return load<std::uint8_t>(i);
      case ScalarType::uint16: return load<std::uint16_t>(i);
      case ScalarType::uint32: return load<std::uint32_t>(i);
      case ScalarType::uint64: return load<std::uint64_t>(i);
      case ScalarType::int8: return static_cast<std::uint64_t>(load<std::int8_t>(i));
      case ScalarType::int16: return static_cast<std::uint64_t>(load<std::int16_t>(i));
      case ScalarType::int32: return static_cast<std::uint64_t>(load<std::int32_t>(i));
      case ScalarType::int64: return static_cast<std::uint64_t>(load<std::int64_t>(i));
      case ScalarType::float32: return static_cast<std::uint64_t>(load<float>(i));
      case ScalarType::float64: return static_cast<std::uint64_t>(load<double>(i));
    }
    return 0;
  }

  std::int64_t get_int(std::size_t i) const noexcept {
    switch (type_) {
      case ScalarType::int8: return load<std::int8_t>(i);
      case ScalarType::int16: return load<std::int16_t>(i);
      case ScalarType::int32: return load<std::int32_t>(i);
      case ScalarType::int64: return load<std::int64_t>(i);
      case ScalarType::float32: return static_cast<std::int64_t>(load<float>(i));
      case ScalarType::float64: return static_cast<std::int64_t>(load<double>(i));
      default: return static_cast<std::int64_t>(get_uint(i));
    }
  }

  double get_float(std::size_t i) const noexcept {
    switch (type_) {
      case ScalarType::float32: return load<float>(i);
      case ScalarType::float64: return load<double>(i);
      default:
        return is_signed_int(type_) ? static_cast<double>(get_int(i))
                                    : static_cast<double>(get_uint(i));
    }
  }

  void set_uint(std::size_t i, std::uint64_t v) noexcept {
    switch (type_) {
      case ScalarType::uint8:
      case ScalarType::bint8:
      case ScalarType::int8: store(i, static_cast<std::uint8_t>(v)); break;
      case ScalarType::uint16:
      case ScalarType::int16: store(i, static_cast<std::uint16_t>(v)); break;
      case ScalarType::uint32:
      case ScalarType::int32: store(i, static_cast<std::uint32_t>(v)); break;
      case ScalarType::uint64:
      case ScalarType::int64: store(i, v); break;
      case ScalarType::float32: store(i, static_cast<float>(v)); break;
      case ScalarType::float64: store(i, static_cast<double>(v)); break;
    }
  }

  void set_int(std::size_t i, std::int64_t v) noexcept {
    if (is_float(type_))
      set_float(i, static_cast<double>(v));
    else
      set_uint(i, static_cast<std::uint64_t>(v));
  }

  void set_float(std::size_t i, double v) noexcept {
    switch (type_) {
      case ScalarType::float32: store(i, static_cast<float>(v)); break;
      case ScalarType::float64: store(i, v); break;
      default:
        if (is_signed_int(type_))
          set_uint(i, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
        else
          set_uint(i, static_cast<std::uint64_t>(v));
    }
  }

  friend bool operator==(const TypedArray& a, const TypedArray& b) {
    return a.type_ == b.type_ && a.bytes_ == b.bytes_;
  }

 private:
  template <class T>
  T load(std::size_t i) const noexcept {
    T v;
    std::memcpy(&v, element_ptr(i), sizeof(T));
    return v;
  }
  template <class T>
  void store(std::size_t i, T v) noexcept {
    std::memcpy(element_ptr(i), &v, sizeof(T));
  }

  ScalarType type_ = ScalarType::uint8;
  std::vector<std::byte> bytes_;
};

}  // namespace binsparse
