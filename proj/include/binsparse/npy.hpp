#pragma once

// NPY v1.0 encoding of rank-1 little-endian arrays. Decoding also accepts
// v2.0/v3.0 headers and the '|' byte-order mark numpy uses for 1-byte types.

#include <cstdint>
#include <cstring>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binsparse/dtypes.hpp"
#include "binsparse/error.hpp"
#include "binsparse/typed_array.hpp"

namespace binsparse {

inline constexpr std::string_view npy_magic = "\x93NUMPY";

constexpr std::string_view npy_type_code(ScalarType t) noexcept {
  switch (t) {
    case ScalarType::uint8:
    case ScalarType::bint8: return "<u1";
    case ScalarType::uint16: return "<u2";
    case ScalarType::uint32: return "<u4";
    case ScalarType::uint64: return "<u8";
    case ScalarType::int8: return "<i1";
    case ScalarType::int16: return "<i2";
    case ScalarType::int32: return "<i4";
    case ScalarType::int64: return "<i8";
    case ScalarType::float32: return "<f4";
    case ScalarType::float64: return "<f8";
  }
  return "";
}

struct NpyHeader {
  ScalarType type = ScalarType::uint8;
  bool fortran_order = false;
  std::uint64_t length = 0;
  std::size_t header_size = 0;  // bytes before the payload
};

/// Preamble (magic through padded header dict) for an array of `length` elements.
inline std::string npy_preamble(ScalarType type, std::uint64_t length) {
  std::string dict = "{'descr': '" + std::string(npy_type_code(type)) +
                     "', 'fortran_order': False, 'shape': (" + std::to_string(length) + ",), }";
  std::size_t unpadded = npy_magic.size() + 2 + 2 + dict.size() + 1;
  std::size_t padded = (unpadded + 63) / 64 * 64;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');
  std::string out(npy_magic);
  out.push_back('\x01');
  out.push_back('\x00');
  std::uint16_t hlen = static_cast<std::uint16_t>(dict.size());
  out.push_back(static_cast<char>(hlen & 0xff));
  out.push_back(static_cast<char>(hlen >> 8));
  return out + dict;
}

inline std::vector<std::byte> npy_encode(const TypedArray& a) {
  std::string pre = npy_preamble(a.type(), a.size());
  std::vector<std::byte> out(pre.size() + a.bytes().size());
  std::memcpy(out.data(), pre.data(), pre.size());
  if (!a.bytes().empty()) std::memcpy(out.data() + pre.size(), a.bytes().data(), a.bytes().size());
  return out;
}

namespace detail {

inline std::optional<ScalarType> scalar_from_npy_code(std::string_view code) {
  if (code.size() < 2) return std::nullopt;
  char order = code[0];
  std::string_view kind = code.substr(1);
  if (order == '>') throw Error(Error::Kind::format, "big-endian NPY arrays are not supported ('" + std::string(code) + "')");
  if (order != '<' && order != '|' && order != '=') return std::nullopt;
  if (order == '|' && kind != "u1" && kind != "i1" && kind != "b1") return std::nullopt;
  if (kind == "u1") return ScalarType::uint8;
  if (kind == "u2") return ScalarType::uint16;
  if (kind == "u4") return ScalarType::uint32;
  if (kind == "u8") return ScalarType::uint64;
  if (kind == "i1") return ScalarType::int8;
  if (kind == "i2") return ScalarType::int16;
  if (kind == "i4") return ScalarType::int32;
  if (kind == "i8") return ScalarType::int64;
  if (kind == "f4") return ScalarType::float32;
  if (kind == "f8") return ScalarType::float64;
  if (kind == "b1") return ScalarType::bint8;
  return std::nullopt;
}

}  // namespace detail

/// Parses the preamble; `bytes` must hold at least the full header.
inline NpyHeader npy_parse_header(std::span<const std::byte> bytes) {
  auto fail = [](const std::string& m) -> void { throw Error(Error::Kind::format, "NPY: " + m); };
  if (bytes.size() < 10 || std::memcmp(bytes.data(), npy_magic.data(), npy_magic.size()) != 0) fail("bad magic");
  auto u8 = [&](std::size_t i) { return static_cast<std::uint32_t>(bytes[i]); };
  std::uint32_t major = u8(6);
  std::size_t len_bytes = 0;
  if (major == 1)
    len_bytes = 2;
  else if (major == 2 || major == 3)
    len_bytes = 4;
  else
    fail("unsupported version " + std::to_string(major) + "." + std::to_string(u8(7)));
  if (bytes.size() < 8 + len_bytes) fail("truncated header");
  std::size_t hlen = 0;
  for (std::size_t i = 0; i < len_bytes; ++i) hlen |= static_cast<std::size_t>(u8(8 + i)) << (8 * i);
  std::size_t start = 8 + len_bytes;
  if (bytes.size() < start + hlen) fail("truncated header");
  std::string dict(reinterpret_cast<const char*>(bytes.data() + start), hlen);

  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  NpyHeader h;
  if (!std::regex_search(dict, m, descr_re)) fail("header has no descr");
  auto type = detail::scalar_from_npy_code(m[1].str());
  if (!type) fail("unsupported dtype '" + m[1].str() + "'");
  h.type = *type;
  if (!std::regex_search(dict, m, order_re)) fail("header has no fortran_order");
  h.fortran_order = m[1].str() == "True";
  if (h.fortran_order) fail("fortran_order arrays are not supported");
  if (!std::regex_search(dict, m, shape_re)) fail("header has no shape");
  std::vector<std::uint64_t> dims;
  std::string s = m[1].str();
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \tL") + 1);
    if (!tok.empty()) {
      if (tok.find_first_not_of("0123456789") != std::string::npos) fail("bad shape entry '" + tok + "'");
      dims.push_back(std::stoull(tok));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (dims.size() != 1) fail("only rank-1 arrays are supported (shape has " + std::to_string(dims.size()) + " dims)");
  h.length = dims[0];
  h.header_size = start + hlen;
  return h;
}

inline TypedArray npy_decode(std::span<const std::byte> bytes) {
  NpyHeader h = npy_parse_header(bytes);
  std::uint64_t payload = h.length * byte_width(h.type);
  if (bytes.size() - h.header_size < payload)
    throw Error(Error::Kind::format, "NPY: payload truncated (" + std::to_string(bytes.size() - h.header_size) +
                                         " of " + std::to_string(payload) + " bytes)");
  std::vector<std::byte> data(bytes.begin() + h.header_size, bytes.begin() + h.header_size + payload);
  return TypedArray(h.type, std::move(data));
}

}  // namespace binsparse
