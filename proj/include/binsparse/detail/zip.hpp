#pragma once

// Minimal zip archive reader/writer: stored and deflate entries, CRC32, and
// zip64 extensions. Timestamps are fixed so output is byte-reproducible.

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binsparse/detail/file.hpp"
#include "binsparse/error.hpp"

namespace binsparse::detail {

inline constexpr std::uint32_t zip_local_sig = 0x04034b50;
inline constexpr std::uint32_t zip_central_sig = 0x02014b50;
inline constexpr std::uint32_t zip_eocd_sig = 0x06054b50;
inline constexpr std::uint32_t zip64_eocd_sig = 0x06064b50;
inline constexpr std::uint32_t zip64_locator_sig = 0x07064b50;
inline constexpr std::uint16_t zip_stored = 0;
inline constexpr std::uint16_t zip_deflate = 8;
inline constexpr std::uint32_t zip32_max = 0xFFFFFFFFu;
inline constexpr std::uint16_t zip_dos_date = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

struct ZipEntry {
  std::string name;
  std::uint16_t method = zip_stored;
  std::uint32_t crc = 0;
  std::uint64_t compressed_size = 0;
  std::uint64_t uncompressed_size = 0;
  std::uint64_t local_header_offset = 0;
  std::uint64_t data_offset = 0;  // start of the (possibly compressed) data
};

inline std::uint32_t crc32_of(std::span<const std::byte> data, std::uint32_t crc = 0) {
  uLong c = crc;
  const auto* p = reinterpret_cast<const Bytef*>(data.data());
  std::size_t left = data.size();
  while (left > 0) {
    uInt n = static_cast<uInt>(std::min<std::size_t>(left, std::numeric_limits<uInt>::max()));
    c = ::crc32(c, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(c);
}

inline std::uint32_t crc32_combine_of(std::uint32_t a, std::uint32_t b, std::uint64_t len_b) {
  return static_cast<std::uint32_t>(::crc32_combine64(a, b, static_cast<z_off64_t>(len_b)));
}

inline std::vector<std::byte> deflate_raw(std::span<const std::byte> in, int level) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(Error::Kind::format, "deflateInit failed");
  std::vector<std::byte> out(deflateBound(&zs, static_cast<uLong>(std::min<std::size_t>(in.size(), 1u << 30))) + 64);
  std::size_t in_pos = 0;
  std::size_t out_pos = 0;
  int rc = Z_OK;
  do {
    if (out.size() - out_pos < 65536) out.resize(out.size() * 2 + 65536);
    std::size_t in_chunk = std::min<std::size_t>(in.size() - in_pos, 1u << 30);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data() + in_pos));
    zs.avail_in = static_cast<uInt>(in_chunk);
    zs.next_out = reinterpret_cast<Bytef*>(out.data() + out_pos);
    zs.avail_out = static_cast<uInt>(std::min<std::size_t>(out.size() - out_pos, 1u << 30));
    bool last = in_pos + in_chunk == in.size();
    std::size_t before_out = zs.avail_out;
    rc = ::deflate(&zs, last ? Z_FINISH : Z_NO_FLUSH);
    in_pos += in_chunk - zs.avail_in;
    out_pos += before_out - zs.avail_out;
    if (rc == Z_STREAM_ERROR) {
      deflateEnd(&zs);
      throw Error(Error::Kind::format, "deflate failed");
    }
  } while (rc != Z_STREAM_END);
  deflateEnd(&zs);
  out.resize(out_pos);
  return out;
}

inline std::vector<std::byte> inflate_raw(std::span<const std::byte> in, std::uint64_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error(Error::Kind::format, "inflateInit failed");
  std::vector<std::byte> out(expected);
  std::size_t in_pos = 0;
  std::size_t out_pos = 0;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    std::size_t in_chunk = std::min<std::size_t>(in.size() - in_pos, 1u << 30);
    std::size_t out_chunk = std::min<std::size_t>(out.size() - out_pos, 1u << 30);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data() + in_pos));
    zs.avail_in = static_cast<uInt>(in_chunk);
    zs.next_out = reinterpret_cast<Bytef*>(out.data() + out_pos);
    zs.avail_out = static_cast<uInt>(out_chunk);
    rc = ::inflate(&zs, Z_NO_FLUSH);
    std::size_t consumed = in_chunk - zs.avail_in;
    std::size_t produced = out_chunk - zs.avail_out;
    in_pos += consumed;
    out_pos += produced;
    if (rc == Z_STREAM_END) break;
    if (rc != Z_OK || (consumed == 0 && produced == 0)) {
      inflateEnd(&zs);
      throw Error(Error::Kind::format, "corrupt or truncated deflate stream");
    }
  }
  inflateEnd(&zs);
  if (out_pos != expected) throw Error(Error::Kind::format, "deflate stream size does not match the zip entry");
  return out;
}

// ---------------------------------------------------------------------------
// Little-endian field helpers

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void str(std::string_view s) {
    for (char c : s) buf_.push_back(static_cast<std::byte>(c));
  }
  void bytes(std::span<const std::byte> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  std::vector<std::byte>& buffer() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  }
  std::vector<std::byte> buf_;
};

inline std::uint64_t load_le(std::span<const std::byte> b, std::size_t off, int n) {
  if (off + static_cast<std::size_t>(n) > b.size()) throw Error(Error::Kind::format, "zip record truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[off + i]) << (8 * i);
  return v;
}

// ---------------------------------------------------------------------------

/// Reads the central directory of an archive and resolves each entry's data offset.
inline std::vector<ZipEntry> read_zip_directory(const File& f, std::uint64_t* cd_offset_out = nullptr) {
  auto fail = [&](const std::string& m) -> void {
    throw Error(Error::Kind::format, f.path().string() + " is not a readable zip archive: " + m);
  };
  const std::uint64_t size = f.size();
  if (size < 22) fail("too short");
  const std::uint64_t tail_len = std::min<std::uint64_t>(size, 22 + 65535 + 20);
  std::vector<std::byte> tail(tail_len);
  f.read_at(size - tail_len, tail);
  std::optional<std::size_t> eocd;
  for (std::size_t i = tail_len - 22 + 1; i-- > 0;)
    if (load_le(tail, i, 4) == zip_eocd_sig) {
      eocd = i;
      break;
    }
  if (!eocd) fail("end of central directory not found");
  std::uint64_t entries = load_le(tail, *eocd + 10, 2);
  std::uint64_t cd_size = load_le(tail, *eocd + 12, 4);
  std::uint64_t cd_offset = load_le(tail, *eocd + 16, 4);
  if (*eocd >= 20 && load_le(tail, *eocd - 20, 4) == zip64_locator_sig) {
    std::uint64_t z64_off = load_le(tail, *eocd - 20 + 8, 8);
    std::vector<std::byte> rec(56);
    f.read_at(z64_off, rec);
    if (load_le(rec, 0, 4) != zip64_eocd_sig) fail("bad zip64 end of central directory");
    entries = load_le(rec, 32, 8);
    cd_size = load_le(rec, 40, 8);
    cd_offset = load_le(rec, 48, 8);
  }
  if (cd_offset + cd_size > size) fail("central directory out of bounds");
  std::vector<std::byte> cd(cd_size);
  f.read_at(cd_offset, cd);

  std::vector<ZipEntry> out;
  std::size_t p = 0;
  for (std::uint64_t e = 0; e < entries; ++e) {
    if (load_le(cd, p, 4) != zip_central_sig) fail("bad central directory record");
    std::uint16_t flags = static_cast<std::uint16_t>(load_le(cd, p + 8, 2));
    ZipEntry z;
    z.method = static_cast<std::uint16_t>(load_le(cd, p + 10, 2));
    z.crc = static_cast<std::uint32_t>(load_le(cd, p + 16, 4));
    z.compressed_size = load_le(cd, p + 20, 4);
    z.uncompressed_size = load_le(cd, p + 24, 4);
    std::size_t name_len = load_le(cd, p + 28, 2);
    std::size_t extra_len = load_le(cd, p + 30, 2);
    std::size_t comment_len = load_le(cd, p + 32, 2);
    z.local_header_offset = load_le(cd, p + 42, 4);
    if (p + 46 + name_len + extra_len > cd.size()) fail("central directory record truncated");
    z.name.assign(reinterpret_cast<const char*>(cd.data() + p + 46), name_len);
    // zip64 extended information: only fields saturated in the fixed record are present.
    std::size_t x = p + 46 + name_len;
    std::size_t x_end = x + extra_len;
    while (x + 4 <= x_end) {
      std::uint16_t id = static_cast<std::uint16_t>(load_le(cd, x, 2));
      std::uint16_t len = static_cast<std::uint16_t>(load_le(cd, x + 2, 2));
      if (id == 0x0001) {
        std::size_t q = x + 4;
        if (z.uncompressed_size == zip32_max) { z.uncompressed_size = load_le(cd, q, 8); q += 8; }
        if (z.compressed_size == zip32_max) { z.compressed_size = load_le(cd, q, 8); q += 8; }
        if (z.local_header_offset == zip32_max) { z.local_header_offset = load_le(cd, q, 8); q += 8; }
      }
      x += 4 + len;
    }
    if (flags & 0x1) fail("encrypted entry " + z.name);
    std::vector<std::byte> local(30);
    f.read_at(z.local_header_offset, local);
    if (load_le(local, 0, 4) != zip_local_sig) fail("bad local header for " + z.name);
    z.data_offset = z.local_header_offset + 30 + load_le(local, 26, 2) + load_le(local, 28, 2);
    if (z.data_offset + z.compressed_size > size) fail("entry " + z.name + " out of bounds");
    out.push_back(std::move(z));
    p += 46 + name_len + extra_len + comment_len;
  }
  if (cd_offset_out) *cd_offset_out = cd_offset;
  return out;
}

/// Full, CRC-checked contents of one entry.
inline std::vector<std::byte> read_zip_entry(const File& f, const ZipEntry& z) {
  std::vector<std::byte> raw(z.compressed_size);
  f.read_at(z.data_offset, raw);
  std::vector<std::byte> data;
  if (z.method == zip_stored) {
    if (z.compressed_size != z.uncompressed_size)
      throw Error(Error::Kind::format, "stored zip entry " + z.name + " has inconsistent sizes");
    data = std::move(raw);
  } else if (z.method == zip_deflate) {
    data = inflate_raw(raw, z.uncompressed_size);
  } else {
    throw Error(Error::Kind::format, "zip entry " + z.name + " uses unsupported compression method " +
                                         std::to_string(z.method));
  }
  if (crc32_of(data) != z.crc) throw Error(Error::Kind::format, "CRC mismatch in zip entry " + z.name);
  return data;
}

/// Appends entries to a file starting at `offset` and writes the central
/// directory (covering `existing` entries too) on finish().
class ZipWriter {
 public:
  ZipWriter(File& f, std::uint64_t offset, std::vector<ZipEntry> existing = {}, bool force_zip64 = false)
      : file_(&f), offset_(offset), entries_(std::move(existing)), force_zip64_(force_zip64) {}

  const std::vector<ZipEntry>& entries() const noexcept { return entries_; }

  /// level empty = stored; otherwise deflate at that zlib level.
  const ZipEntry& add(const std::string& name, std::span<const std::byte> data, std::optional<int> level) {
    ZipEntry z;
    z.name = name;
    z.crc = crc32_of(data);
    z.uncompressed_size = data.size();
    std::vector<std::byte> packed;
    std::span<const std::byte> body = data;
    if (level) {
      packed = deflate_raw(data, *level);
      body = packed;
      z.method = zip_deflate;
    }
    z.compressed_size = body.size();
    z.local_header_offset = offset_;

    bool big = force_zip64_ || z.uncompressed_size >= zip32_max || z.compressed_size >= zip32_max;
    ByteWriter h;
    h.u32(zip_local_sig);
    h.u16(big ? 45 : 20);
    h.u16(0x0800);  // names are UTF-8
    h.u16(z.method);
    h.u16(0);
    h.u16(zip_dos_date);
    h.u32(z.crc);
    h.u32(big ? zip32_max : static_cast<std::uint32_t>(z.compressed_size));
    h.u32(big ? zip32_max : static_cast<std::uint32_t>(z.uncompressed_size));
    h.u16(static_cast<std::uint16_t>(name.size()));
    h.u16(big ? 20 : 0);
    h.str(name);
    if (big) {
      h.u16(0x0001);
      h.u16(16);
      h.u64(z.uncompressed_size);
      h.u64(z.compressed_size);
    }
    file_->write_at(offset_, h.buffer());
    z.data_offset = offset_ + h.buffer().size();
    file_->write_at(z.data_offset, body);
    offset_ = z.data_offset + body.size();
    entries_.push_back(std::move(z));
    return entries_.back();
  }

  /// Writes the central directory; returns the final archive size.
  std::uint64_t finish() {
    const std::uint64_t cd_offset = offset_;
    ByteWriter cd;
    for (const auto& z : entries_) {
      bool big_u = force_zip64_ || z.uncompressed_size >= zip32_max;
      bool big_c = force_zip64_ || z.compressed_size >= zip32_max;
      bool big_o = force_zip64_ || z.local_header_offset >= zip32_max;
      std::uint16_t extra = static_cast<std::uint16_t>((big_u + big_c + big_o) * 8);
      bool any = extra > 0;
      cd.u32(zip_central_sig);
      cd.u16((3 << 8) | 45);  // made by unix, spec 4.5
      cd.u16(any ? 45 : 20);
      cd.u16(0x0800);
      cd.u16(z.method);
      cd.u16(0);
      cd.u16(zip_dos_date);
      cd.u32(z.crc);
      cd.u32(big_c ? zip32_max : static_cast<std::uint32_t>(z.compressed_size));
      cd.u32(big_u ? zip32_max : static_cast<std::uint32_t>(z.uncompressed_size));
      cd.u16(static_cast<std::uint16_t>(z.name.size()));
      cd.u16(any ? extra + 4 : 0);
      cd.u16(0);
      cd.u16(0);
      cd.u16(0);
      cd.u32(0100644u << 16);
      cd.u32(big_o ? zip32_max : static_cast<std::uint32_t>(z.local_header_offset));
      cd.str(z.name);
      if (any) {
        cd.u16(0x0001);
        cd.u16(extra);
        if (big_u) cd.u64(z.uncompressed_size);
        if (big_c) cd.u64(z.compressed_size);
        if (big_o) cd.u64(z.local_header_offset);
      }
    }
    const std::uint64_t cd_size = cd.buffer().size();
    const std::uint64_t n = entries_.size();
    bool z64 = force_zip64_ || n >= 0xFFFF || cd_offset >= zip32_max || cd_size >= zip32_max;
    if (z64) {
      std::uint64_t rec_offset = cd_offset + cd_size;
      cd.u32(zip64_eocd_sig);
      cd.u64(44);
      cd.u16((3 << 8) | 45);
      cd.u16(45);
      cd.u32(0);
      cd.u32(0);
      cd.u64(n);
      cd.u64(n);
      cd.u64(cd_size);
      cd.u64(cd_offset);
      cd.u32(zip64_locator_sig);
      cd.u32(0);
      cd.u64(rec_offset);
      cd.u32(1);
    }
    cd.u32(zip_eocd_sig);
    cd.u16(0);
    cd.u16(0);
    cd.u16(z64 ? 0xFFFF : static_cast<std::uint16_t>(n));
    cd.u16(z64 ? 0xFFFF : static_cast<std::uint16_t>(n));
    cd.u32(z64 ? zip32_max : static_cast<std::uint32_t>(cd_size));
    cd.u32(z64 ? zip32_max : static_cast<std::uint32_t>(cd_offset));
    cd.u16(0);
    file_->write_at(cd_offset, cd.buffer());
    std::uint64_t end = cd_offset + cd.buffer().size();
    file_->truncate(end);
    return end;
  }

 private:
  File* file_;
  std::uint64_t offset_;
  std::vector<ZipEntry> entries_;
  bool force_zip64_;
};

}  // namespace binsparse::detail
