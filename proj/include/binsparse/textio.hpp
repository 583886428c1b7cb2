#pragma once

// Matrix Market (coordinate layout) and FROSTT .tns text formats.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binsparse/descriptor.hpp"
#include "binsparse/dtypes.hpp"
#include "binsparse/error.hpp"
#include "binsparse/tensor.hpp"

namespace binsparse {

/// Undoes the archival clamping of infinities to +-1e308.
constexpr double declamp(double v) noexcept {
  if (v >= 1e308) return std::numeric_limits<double>::infinity();
  if (v <= -1e308) return -std::numeric_limits<double>::infinity();
  return v;
}

namespace detail {

/// Line/token cursor over an in-memory text buffer.
class TextCursor {
 public:
  explicit TextCursor(std::string_view text) : text_(text) {}

  bool at_end() const noexcept { return pos_ >= text_.size(); }
  std::size_t line() const noexcept { return line_; }

  /// Next line without its terminator ("\r\n" tolerated).
  std::string_view next_line() {
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    std::string_view l = text_.substr(pos_, end - pos_);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    pos_ = end + 1;
    ++line_;
    return l;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

inline bool is_blank(char c) noexcept { return c == ' ' || c == '\t'; }

inline std::string_view next_token(std::string_view& line) {
  std::size_t b = 0;
  while (b < line.size() && is_blank(line[b])) ++b;
  std::size_t e = b;
  while (e < line.size() && !is_blank(line[e])) ++e;
  std::string_view tok = line.substr(b, e - b);
  line.remove_prefix(e);
  return tok;
}

inline bool blank_line(std::string_view l) {
  return std::all_of(l.begin(), l.end(), [](char c) { return is_blank(c); });
}

inline std::optional<std::uint64_t> parse_u64(std::string_view tok) {
  std::uint64_t v = 0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || tok.empty()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_i64(std::string_view tok) {
  std::int64_t v = 0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || tok.empty()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_f64(std::string_view tok) {
  double v = 0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (p != tok.data() + tok.size()) return std::nullopt;
  if (ec == std::errc::result_out_of_range) {
    // Overflow saturates to infinity, underflow to signed zero.
    bool neg = tok.front() == '-';
    std::size_t e = tok.find_first_of("eE");
    bool big = e != std::string_view::npos && tok.substr(e + 1).find('-') == std::string_view::npos;
    if (big) return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return neg ? -0.0 : 0.0;
  }
  if (ec != std::errc()) return std::nullopt;
  return v;
}

/// "(re,im)", "re+imi" / "re-imj", or a plain real number.
inline std::optional<std::pair<double, double>> parse_complex(std::string_view tok) {
  if (auto r = parse_f64(tok)) return std::pair{*r, 0.0};
  if (tok.size() >= 5 && tok.front() == '(' && tok.back() == ')') {
    auto inner = tok.substr(1, tok.size() - 2);
    std::size_t comma = inner.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    auto re = parse_f64(inner.substr(0, comma));
    auto im = parse_f64(inner.substr(comma + 1));
    if (re && im) return std::pair{*re, *im};
    return std::nullopt;
  }
  if (tok.size() >= 2 && (tok.back() == 'i' || tok.back() == 'j')) {
    auto body = tok.substr(0, tok.size() - 1);
    for (std::size_t k = body.size(); k-- > 1;) {
      if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
        auto re = parse_f64(body.substr(0, k));
        auto im_str = body.substr(k);
        std::optional<double> im;
        if (im_str == "+" || im_str == "-")
          im = im_str == "+" ? 1.0 : -1.0;
        else
          im = parse_f64(im_str);
        if (re && im) return std::pair{*re, *im};
        return std::nullopt;
      }
    }
    if (auto im = parse_f64(body)) return std::pair{0.0, *im};
  }
  return std::nullopt;
}

inline void append_double(std::string& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string_view tok(buf, p);
  out.append(tok);
  // Keep the token a float so type inference on re-read agrees.
  if (std::isfinite(v) && tok.find_first_of(".e") == std::string_view::npos) out.append(".0");
}

template <class Int>
inline void append_int(std::string& out, Int v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

inline std::string slurp(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Appends one value of `vt` (no iso) from raw element bytes.
inline void append_value(std::string& out, const DataType& vt, std::span<const std::byte> bytes, bool tns_complex) {
  TypedArray a(vt.base, std::vector<std::byte>(bytes.begin(), bytes.end()));
  auto one = [&](std::size_t i) {
    if (is_float(vt.base))
      append_double(out, a.get_float(i));
    else if (is_signed_int(vt.base))
      append_int(out, a.get_int(i));
    else
      append_int(out, a.get_uint(i));
  };
  if (!vt.complex) {
    one(0);
  } else if (tns_complex) {
    out.push_back('(');
    one(0);
    out.push_back(',');
    one(1);
    out.push_back(')');
  } else {
    one(0);
    out.push_back(' ');
    one(1);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix Market

struct MmHeader {
  enum class Layout { coordinate, array };
  enum class Field { real, complex, integer, pattern };
  Layout layout = Layout::coordinate;
  Field field = Field::real;
  Structure symmetry = Structure::general;
};

inline MmHeader parse_mm_banner(std::string_view line) {
  auto fail = [&](const std::string& m) -> void { throw Error(Error::Kind::text, "Matrix Market banner: " + m); };
  std::string lower(line);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::string_view rest = lower;
  if (detail::next_token(rest) != "%%matrixmarket") fail("missing %%MatrixMarket");
  if (detail::next_token(rest) != "matrix") fail("only 'matrix' objects are supported");
  MmHeader h;
  auto layout = detail::next_token(rest);
  if (layout == "coordinate")
    h.layout = MmHeader::Layout::coordinate;
  else if (layout == "array")
    h.layout = MmHeader::Layout::array;
  else
    fail("unknown layout '" + std::string(layout) + "'");
  auto field = detail::next_token(rest);
  if (field == "real" || field == "double")
    h.field = MmHeader::Field::real;
  else if (field == "complex")
    h.field = MmHeader::Field::complex;
  else if (field == "integer")
    h.field = MmHeader::Field::integer;
  else if (field == "pattern")
    h.field = MmHeader::Field::pattern;
  else
    fail("unknown field '" + std::string(field) + "'");
  auto sym = detail::next_token(rest);
  if (sym == "general")
    h.symmetry = Structure::general;
  else if (sym == "symmetric")
    h.symmetry = Structure::symmetric;
  else if (sym == "skew-symmetric")
    h.symmetry = Structure::skew_symmetric;
  else if (sym == "hermitian")
    h.symmetry = Structure::hermitian;
  else
    fail("unknown symmetry '" + std::string(sym) + "'");
  if (!detail::next_token(rest).empty()) fail("trailing tokens");
  if (h.field == MmHeader::Field::pattern && h.symmetry == Structure::skew_symmetric)
    fail("pattern skew-symmetric matrices are not supported");
  if (h.symmetry == Structure::hermitian && h.field != MmHeader::Field::complex)
    fail("hermitian matrices must have a complex field");
  return h;
}

inline SparseTensor read_matrix_market_text(std::string_view text) {
  detail::TextCursor cur(text);
  auto fail = [&](const std::string& m) -> void {
    throw Error(Error::Kind::text, "Matrix Market line " + std::to_string(cur.line()) + ": " + m);
  };
  if (cur.at_end()) fail("empty input");
  MmHeader h = parse_mm_banner(cur.next_line());
  if (h.layout == MmHeader::Layout::array) fail("dense 'array' layout is not supported");

  std::string_view size_line;
  for (;;) {
    if (cur.at_end()) fail("missing size line");
    size_line = cur.next_line();
    if (!size_line.empty() && size_line.front() == '%') continue;
    if (detail::blank_line(size_line)) continue;
    break;
  }
  std::uint64_t dims[3];
  for (auto& d : dims) {
    auto v = detail::parse_u64(detail::next_token(size_line));
    if (!v) fail("size line must hold rows, columns and entry count");
    d = *v;
  }
  if (!detail::next_token(size_line).empty()) fail("trailing tokens on size line");
  const std::uint64_t rows = dims[0], cols = dims[1], nnz = dims[2];

  DataType vt;
  switch (h.field) {
    case MmHeader::Field::real: vt = dtype(ScalarType::float64); break;
    case MmHeader::Field::complex: vt = {ScalarType::float64, false, true}; break;
    case MmHeader::Field::integer: vt = dtype(ScalarType::int64); break;
    case MmHeader::Field::pattern: vt = {ScalarType::bint8, true, false}; break;
  }
  EntryList entries(2, vt);
  entries.reserve(nnz);
  const std::size_t vbytes = vt.element_bytes();
  std::vector<std::byte> val(vbytes);
  std::uint64_t seen = 0;
  while (!cur.at_end()) {
    std::string_view line = cur.next_line();
    if (detail::blank_line(line) || line.front() == '%') continue;
    if (seen == nnz) fail("more entries than the size line declares");
    std::uint64_t c[2];
    for (int k = 0; k < 2; ++k) {
      auto tok = detail::next_token(line);
      auto v = detail::parse_u64(tok);
      if (!v) fail("bad coordinate '" + std::string(tok) + "'");
      if (*v == 0 || *v > (k == 0 ? rows : cols)) fail("coordinate " + std::to_string(*v) + " out of range");
      c[k] = *v - 1;
    }
    auto number = [&]() {
      auto tok = detail::next_token(line);
      auto v = detail::parse_f64(tok);
      if (!v) fail("bad value '" + std::string(tok) + "'");
      return declamp(*v);
    };
    switch (h.field) {
      case MmHeader::Field::real: {
        double v = number();
        std::memcpy(val.data(), &v, 8);
        break;
      }
      case MmHeader::Field::complex: {
        double re = number();
        double im = number();
        std::memcpy(val.data(), &re, 8);
        std::memcpy(val.data() + 8, &im, 8);
        break;
      }
      case MmHeader::Field::integer: {
        auto tok = detail::next_token(line);
        auto v = detail::parse_i64(tok);
        if (!v) fail("bad integer value '" + std::string(tok) + "'");
        std::memcpy(val.data(), &*v, 8);
        break;
      }
      case MmHeader::Field::pattern: val[0] = std::byte{1}; break;
    }
    if (!detail::next_token(line).empty()) fail("trailing tokens on entry line");
    entries.push_back(c, val);
    ++seen;
  }
  if (seen != nnz) fail("expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen));

  SparseTensor t = build_coo(entries, {rows, cols}, h.symmetry, vt);
  auto report = validate_tensor(t);
  if (!report.empty()) throw Error(Error::Kind::text, "Matrix Market data is inconsistent: " + report.front());
  return t;
}

inline SparseTensor read_matrix_market(std::istream& in) { return read_matrix_market_text(detail::slurp(in)); }

inline std::string write_matrix_market_text(const SparseTensor& t) {
  if (t.rank() != 2) throw Error(Error::Kind::text, "Matrix Market holds rank-2 tensors only");
  const DataType& vt = t.value_dtype;
  EntryList e = to_entry_list(t);
  std::string field;
  bool pattern = false;
  if (vt.complex) {
    field = "complex";
  } else if (vt.base == ScalarType::bint8 && vt.iso &&
             (e.size() == 0 || e.value(0)[0] == std::byte{1})) {
    field = "pattern";
    pattern = true;
  } else if (is_float(vt.base)) {
    field = "real";
  } else {
    field = "integer";
  }
  std::string symmetry;
  switch (t.structure) {
    case Structure::general: symmetry = "general"; break;
    case Structure::symmetric: symmetry = "symmetric"; break;
    case Structure::skew_symmetric: symmetry = "skew-symmetric"; break;
    case Structure::hermitian: symmetry = "hermitian"; break;
  }
  std::string out = "%%MatrixMarket matrix coordinate " + field + " " + symmetry + "\n";
  detail::append_int(out, t.shape[0]);
  out.push_back(' ');
  detail::append_int(out, t.shape[1]);
  out.push_back(' ');
  detail::append_int(out, static_cast<std::uint64_t>(e.size()));
  out.push_back('\n');
  // Values print through double so widened float32 values re-read exactly.
  const DataType print_type = is_float(vt.base) ? DataType{vt.base, false, vt.complex} : vt.without_iso();
  for (std::size_t i = 0; i < e.size(); ++i) {
    auto c = e.coord(i);
    detail::append_int(out, c[0] + 1);
    out.push_back(' ');
    detail::append_int(out, c[1] + 1);
    if (!pattern) {
      out.push_back(' ');
      detail::append_value(out, print_type, e.value(i), false);
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_matrix_market(const SparseTensor& t, std::ostream& out) {
  std::string s = write_matrix_market_text(t);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// ---------------------------------------------------------------------------
// FROSTT .tns

struct TnsOptions {
  bool zero_based = false;
};

/// First of boolean, integer, float, complex under which every token parses.
inline DataType infer_tns_value_type(std::span<const std::string_view> tokens) {
  if (tokens.empty()) throw Error(Error::Kind::text, "cannot infer a value type from no values");
  auto all = [&](auto pred) { return std::all_of(tokens.begin(), tokens.end(), pred); };
  if (all([](std::string_view s) { return s == "0" || s == "1"; })) {
    bool same = all([&](std::string_view s) { return s == tokens.front(); });
    return {ScalarType::bint8, same, false};
  }
  if (all([](std::string_view s) { return detail::parse_i64(s).has_value(); })) return dtype(ScalarType::int64);
  if (all([](std::string_view s) { return detail::parse_f64(s).has_value(); })) return dtype(ScalarType::float64);
  if (all([](std::string_view s) { return detail::parse_complex(s).has_value(); }))
    return {ScalarType::float64, false, true};
  throw Error(Error::Kind::text, "values are neither boolean, integer, float nor complex");
}

inline SparseTensor read_tns_text(std::string_view text, TnsOptions opt = {}) {
  detail::TextCursor cur(text);
  auto fail = [&](const std::string& m) -> void {
    throw Error(Error::Kind::text, "tns line " + std::to_string(cur.line()) + ": " + m);
  };
  std::size_t rank = 0;
  std::vector<std::uint64_t> coords;
  std::vector<std::string_view> values;
  std::vector<std::string_view> toks;
  while (!cur.at_end()) {
    std::string_view line = cur.next_line();
    if (detail::blank_line(line) || line.front() == '#') continue;
    toks.clear();
    for (auto tok = detail::next_token(line); !tok.empty(); tok = detail::next_token(line)) toks.push_back(tok);
    if (rank == 0) {
      if (toks.size() < 2) fail("a line needs at least one coordinate and a value");
      rank = toks.size() - 1;
    } else if (toks.size() != rank + 1) {
      fail("ragged line: expected " + std::to_string(rank + 1) + " tokens, found " + std::to_string(toks.size()));
    }
    for (std::size_t d = 0; d < rank; ++d) {
      auto v = detail::parse_u64(toks[d]);
      if (!v) fail("bad coordinate '" + std::string(toks[d]) + "'");
      if (!opt.zero_based && *v == 0) fail("coordinates are 1-based; found 0");
      coords.push_back(opt.zero_based ? *v : *v - 1);
    }
    values.push_back(toks[rank]);
  }
  if (rank == 0) throw Error(Error::Kind::text, "tns input holds no entries, rank cannot be determined");

  const std::size_t n = values.size();
  std::vector<std::uint64_t> shape(rank, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < rank; ++d) shape[d] = std::max(shape[d], coords[i * rank + d] + 1);

  DataType vt = infer_tns_value_type(values);
  EntryList entries(rank, vt);
  entries.coords = std::move(coords);
  entries.values.resize(n * vt.element_bytes());
  TypedArray vals(vt.base, n * (vt.complex ? 2 : 1));
  for (std::size_t i = 0; i < n; ++i) {
    if (vt.complex) {
      auto c = *detail::parse_complex(values[i]);
      vals.set_float(2 * i, c.first);
      vals.set_float(2 * i + 1, c.second);
    } else if (vt.base == ScalarType::bint8) {
      vals.set_uint(i, values[i] == "1" ? 1 : 0);
    } else if (vt.base == ScalarType::int64) {
      vals.set_int(i, *detail::parse_i64(values[i]));
    } else {
      vals.set_float(i, *detail::parse_f64(values[i]));
    }
  }
  entries.values = std::move(vals).release();
  return build_coo(entries, std::move(shape), Structure::general, vt);
}

inline SparseTensor read_tns(std::istream& in, TnsOptions opt = {}) { return read_tns_text(detail::slurp(in), opt); }

inline std::string write_tns_text(const SparseTensor& t, TnsOptions opt = {}) {
  EntryList e = to_entry_list(t);
  if (e.size() == 0) throw Error(Error::Kind::text, "an empty tensor cannot be written as tns");
  const DataType& vt = t.value_dtype;
  const DataType print_type = is_float(vt.base) ? DataType{vt.base, false, vt.complex} : vt.without_iso();
  std::string out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (auto c : e.coord(i)) {
      detail::append_int(out, opt.zero_based ? c : c + 1);
      out.push_back(' ');
    }
    detail::append_value(out, print_type, e.value(i), true);
    out.push_back('\n');
  }
  return out;
}

inline void write_tns(const SparseTensor& t, std::ostream& out, TnsOptions opt = {}) {
  std::string s = write_tns_text(t, opt);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace binsparse
