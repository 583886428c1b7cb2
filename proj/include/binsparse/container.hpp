#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "binsparse/descriptor.hpp"
#include "binsparse/detail/file.hpp"
#include "binsparse/detail/zip.hpp"
#include "binsparse/error.hpp"
#include "binsparse/npy.hpp"
#include "binsparse/tensor.hpp"
#include "binsparse/typed_array.hpp"

namespace binsparse {

inline constexpr std::string_view descriptor_entry_name = "binsparse.json";

/// Slash-separated group name inside a container; empty is the root group.
class GroupPath {
 public:
  GroupPath() = default;
  GroupPath(const char* s) : GroupPath(std::string_view(s)) {}
  GroupPath(const std::string& s) : GroupPath(std::string_view(s)) {}
  GroupPath(std::string_view s) {
    if (s.empty()) return;
    std::size_t pos = 0;
    for (;;) {
      std::size_t slash = s.find('/', pos);
      std::string seg(s.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos));
      if (seg.empty() || seg == "." || seg == "..")
        throw Error(Error::Kind::usage, "invalid group path '" + std::string(s) + "'");
      for (char c : seg)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
          throw Error(Error::Kind::usage, "invalid character in group path '" + std::string(s) + "'");
      segments_.push_back(std::move(seg));
      if (slash == std::string_view::npos) break;
      pos = slash + 1;
    }
  }

  bool is_root() const noexcept { return segments_.empty(); }
  const std::vector<std::string>& segments() const noexcept { return segments_; }

  std::string str() const {
    std::string out;
    for (const auto& s : segments_) out += (out.empty() ? "" : "/") + s;
    return out;
  }
  /// Prefix for entry names: "" for root, "a/b/" otherwise.
  std::string prefix() const { return is_root() ? std::string() : str() + "/"; }

  friend bool operator==(const GroupPath&, const GroupPath&) = default;
  friend auto operator<=>(const GroupPath& a, const GroupPath& b) { return a.str() <=> b.str(); }

 private:
  std::vector<std::string> segments_;
};

/// Deflate level, or none.
struct Compression {
  std::optional<int> level;

  static Compression none() { return {}; }
  static Compression deflate(int level = 1) { return {level}; }
  bool enabled() const noexcept { return level.has_value(); }
};

/// Byte-addressable, uncompressed payload of one stored array.
struct ArraySource {
  ScalarType type = ScalarType::uint8;
  std::uint64_t length = 0;
  /// Reads payload bytes [offset, offset + dst.size()). Safe to call concurrently.
  std::function<void(std::uint64_t offset, std::span<std::byte> dst)> read;
  /// Given the CRC32 of the whole payload, confirms the entry is intact.
  std::function<bool(std::uint32_t payload_crc)> check_crc;
};

struct Capabilities {
  bool compression = false;
  bool parallel_byte_ranges = false;
};

/// A keyed store of binary arrays and descriptor text, organised in groups.
class Container {
 public:
  virtual ~Container() = default;

  virtual std::string_view backend() const noexcept = 0;
  virtual Capabilities capabilities() const noexcept = 0;

  virtual std::vector<GroupPath> descriptor_groups() const = 0;
  virtual bool has_descriptor(const GroupPath& g) const = 0;
  virtual std::string read_descriptor(const GroupPath& g) const = 0;
  virtual void write_descriptor(const GroupPath& g, std::string_view json) = 0;

  /// Arrays directly inside `g` (not in subgroups).
  virtual std::vector<std::string> array_names(const GroupPath& g) const = 0;
  virtual TypedArray read_array(const GroupPath& g, const std::string& name) const = 0;
  virtual void write_array(const GroupPath& g, const std::string& name, const TypedArray& a, Compression c) = 0;
  virtual bool is_compressed(const GroupPath&, const std::string&) const { return false; }
  virtual std::optional<ArraySource> array_source(const GroupPath&, const std::string&) const { return std::nullopt; }

  /// Flushes pending metadata (e.g. the zip central directory).
  virtual void close() {}

  bool group_populated(const GroupPath& g) const { return has_descriptor(g) || !array_names(g).empty(); }
};

enum class OpenMode { read, create, append };

// ---------------------------------------------------------------------------
// NPZ backend

namespace detail {

inline std::pair<GroupPath, std::string> split_entry(const std::string& entry) {
  std::size_t slash = entry.rfind('/');
  if (slash == std::string::npos) return {GroupPath(), entry};
  return {GroupPath(std::string_view(entry).substr(0, slash)), entry.substr(slash + 1)};
}

inline std::string npy_name(const GroupPath& g, const std::string& name) { return g.prefix() + name + ".npy"; }
inline std::string json_name(const GroupPath& g) { return g.prefix() + std::string(descriptor_entry_name); }

}  // namespace detail

/// Zip archive of `<group>/binsparse.json` and `<group>/<array>.npy` entries.
class NpzContainer final : public Container {
 public:
  NpzContainer(const std::filesystem::path& path, OpenMode mode, bool force_zip64 = false) : mode_(mode) {
    using detail::File;
    switch (mode) {
      case OpenMode::read:
        file_ = File(path, File::Mode::read);
        entries_ = detail::read_zip_directory(file_);
        break;
      case OpenMode::create:
        file_ = File(path, File::Mode::create);
        writer_.emplace(file_, 0, std::vector<detail::ZipEntry>{}, force_zip64);
        break;
      case OpenMode::append: {
        file_ = File(path, File::Mode::update);
        std::uint64_t cd_offset = 0;
        entries_ = detail::read_zip_directory(file_, &cd_offset);
        writer_.emplace(file_, cd_offset, entries_, force_zip64);
        break;
      }
    }
  }
  ~NpzContainer() override {
    try {
      close();
    } catch (...) {
    }
  }

  std::string_view backend() const noexcept override { return "npz"; }
  Capabilities capabilities() const noexcept override { return {true, true}; }

  const std::vector<detail::ZipEntry>& entries() const noexcept { return entries_; }

  std::vector<GroupPath> descriptor_groups() const override {
    std::vector<GroupPath> out;
    for (const auto& e : entries_) {
      auto [g, base] = split_entry_safe(e.name);
      if (g && base == descriptor_entry_name) out.push_back(*g);
    }
    return out;
  }
  bool has_descriptor(const GroupPath& g) const override { return find(detail::json_name(g)) != nullptr; }
  std::string read_descriptor(const GroupPath& g) const override {
    const auto* z = find(detail::json_name(g));
    if (!z) throw Error(Error::Kind::format, "no descriptor in group '" + g.str() + "'");
    auto bytes = detail::read_zip_entry(file_, *z);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  void write_descriptor(const GroupPath& g, std::string_view json) override {
    add(detail::json_name(g), std::as_bytes(std::span(json.data(), json.size())), Compression::none());
  }

  std::vector<std::string> array_names(const GroupPath& g) const override {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
      auto [eg, base] = split_entry_safe(e.name);
      if (eg && *eg == g && base.ends_with(".npy")) out.push_back(base.substr(0, base.size() - 4));
    }
    return out;
  }
  TypedArray read_array(const GroupPath& g, const std::string& name) const override {
    const auto* z = find(detail::npy_name(g, name));
    if (!z) throw Error(Error::Kind::format, "missing array " + name + " in group '" + g.str() + "'");
    return npy_decode(detail::read_zip_entry(file_, *z));
  }
  void write_array(const GroupPath& g, const std::string& name, const TypedArray& a, Compression c) override {
    add(detail::npy_name(g, name), npy_encode(a), c);
  }
  bool is_compressed(const GroupPath& g, const std::string& name) const override {
    const auto* z = find(detail::npy_name(g, name));
    return z && z->method != detail::zip_stored;
  }

  std::optional<ArraySource> array_source(const GroupPath& g, const std::string& name) const override {
    const auto* z = find(detail::npy_name(g, name));
    if (!z || z->method != detail::zip_stored) return std::nullopt;
    std::vector<std::byte> head(std::min<std::uint64_t>(z->uncompressed_size, 4096));
    file_.read_at(z->data_offset, head);
    NpyHeader h = npy_parse_header(head);
    if (h.header_size + h.length * byte_width(h.type) > z->uncompressed_size)
      throw Error(Error::Kind::format, "NPY: payload truncated in " + z->name);
    std::span<const std::byte> header_bytes(head.data(), h.header_size);
    std::uint32_t header_crc = detail::crc32_of(header_bytes);
    std::uint64_t payload_len = z->uncompressed_size - h.header_size;
    std::uint64_t data = z->data_offset + h.header_size;
    std::uint32_t expected = z->crc;
    const detail::File* f = &file_;
    ArraySource src;
    src.type = h.type;
    src.length = h.length;
    src.read = [f, data](std::uint64_t off, std::span<std::byte> dst) { f->read_at(data + off, dst); };
    // Trailing bytes after the payload (if any) are not covered; treat as payload.
    src.check_crc = [header_crc, payload_len, expected, h](std::uint32_t payload_crc) {
      return payload_len == h.length * byte_width(h.type) &&
             detail::crc32_combine_of(header_crc, payload_crc, payload_len) == expected;
    };
    return src;
  }

  void close() override {
    if (writer_) {
      writer_->finish();
      writer_.reset();
      file_.close();
    }
  }

 private:
  static std::pair<std::optional<GroupPath>, std::string> split_entry_safe(const std::string& entry) {
    try {
      auto [g, base] = detail::split_entry(entry);
      return {g, base};
    } catch (const Error&) {
      return {std::nullopt, entry};
    }
  }

  const detail::ZipEntry* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  void add(const std::string& name, std::span<const std::byte> data, Compression c) {
    if (!writer_) throw Error(Error::Kind::usage, "container was opened read-only");
    if (find(name)) throw Error(Error::Kind::usage, "entry " + name + " already exists");
    entries_.push_back(writer_->add(name, data, c.level));
  }

  OpenMode mode_;
  detail::File file_;
  std::vector<detail::ZipEntry> entries_;
  std::optional<detail::ZipWriter> writer_;
};

// ---------------------------------------------------------------------------
// Directory backend

/// The same entries as loose files below a root directory.
class DirectoryContainer final : public Container {
 public:
  DirectoryContainer(std::filesystem::path root, OpenMode mode) : root_(std::move(root)), mode_(mode) {
    if (mode == OpenMode::create) std::filesystem::create_directories(root_);
    if (!std::filesystem::is_directory(root_))
      throw Error(Error::Kind::io, root_.string() + " is not a directory");
  }

  std::string_view backend() const noexcept override { return "directory"; }
  Capabilities capabilities() const noexcept override { return {false, true}; }

  std::vector<GroupPath> descriptor_groups() const override {
    std::vector<GroupPath> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root_)) {
      if (!e.is_regular_file() || e.path().filename() != descriptor_entry_name) continue;
      auto rel = std::filesystem::relative(e.path().parent_path(), root_).generic_string();
      try {
        out.emplace_back(rel == "." ? std::string_view() : std::string_view(rel));
      } catch (const Error&) {
      }
    }
    return out;
  }
  bool has_descriptor(const GroupPath& g) const override {
    return std::filesystem::is_regular_file(dir(g) / descriptor_entry_name);
  }
  std::string read_descriptor(const GroupPath& g) const override {
    if (!has_descriptor(g)) throw Error(Error::Kind::format, "no descriptor in group '" + g.str() + "'");
    auto bytes = detail::read_file(dir(g) / descriptor_entry_name);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  void write_descriptor(const GroupPath& g, std::string_view json) override {
    writable();
    std::filesystem::create_directories(dir(g));
    detail::write_file(dir(g) / descriptor_entry_name, std::as_bytes(std::span(json.data(), json.size())));
  }

  std::vector<std::string> array_names(const GroupPath& g) const override {
    std::vector<std::string> out;
    if (!std::filesystem::is_directory(dir(g))) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir(g)))
      if (e.is_regular_file() && e.path().extension() == ".npy") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
  }
  TypedArray read_array(const GroupPath& g, const std::string& name) const override {
    auto p = dir(g) / (name + ".npy");
    if (!std::filesystem::is_regular_file(p))
      throw Error(Error::Kind::format, "missing array " + name + " in group '" + g.str() + "'");
    return npy_decode(detail::read_file(p));
  }
  void write_array(const GroupPath& g, const std::string& name, const TypedArray& a, Compression c) override {
    writable();
    if (c.enabled()) throw Error(Error::Kind::usage, "the directory backend does not support compression");
    std::filesystem::create_directories(dir(g));
    detail::write_file(dir(g) / (name + ".npy"), npy_encode(a));
  }
  std::optional<ArraySource> array_source(const GroupPath& g, const std::string& name) const override {
    auto p = dir(g) / (name + ".npy");
    if (!std::filesystem::is_regular_file(p)) return std::nullopt;
    auto f = std::make_shared<detail::File>(p, detail::File::Mode::read);
    std::vector<std::byte> head(std::min<std::uint64_t>(f->size(), 4096));
    f->read_at(0, head);
    NpyHeader h = npy_parse_header(head);
    if (h.header_size + h.length * byte_width(h.type) > f->size())
      throw Error(Error::Kind::format, "NPY: payload truncated in " + p.string());
    ArraySource src;
    src.type = h.type;
    src.length = h.length;
    std::uint64_t data = h.header_size;
    src.read = [f, data](std::uint64_t off, std::span<std::byte> dst) { f->read_at(data + off, dst); };
    return src;
  }

 private:
  std::filesystem::path dir(const GroupPath& g) const {
    auto p = root_;
    for (const auto& s : g.segments()) p /= s;
    return p;
  }
  void writable() const {
    if (mode_ == OpenMode::read) throw Error(Error::Kind::usage, "container was opened read-only");
  }

  std::filesystem::path root_;
  OpenMode mode_;
};

// ---------------------------------------------------------------------------
// In-memory backend

/// Descriptors and arrays held directly in memory; arrays can be shared out
/// as read-only views without copying.
class MemoryContainer final : public Container {
 public:
  std::string_view backend() const noexcept override { return "memory"; }
  Capabilities capabilities() const noexcept override { return {false, false}; }

  std::vector<GroupPath> descriptor_groups() const override {
    std::vector<GroupPath> out;
    for (const auto& [key, _] : descriptors_) out.emplace_back(std::string_view(key));
    return out;
  }
  bool has_descriptor(const GroupPath& g) const override { return descriptors_.contains(g.str()); }
  std::string read_descriptor(const GroupPath& g) const override {
    return descriptor_object(g).dump(2);
  }
  void write_descriptor(const GroupPath& g, std::string_view json) override {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(json);
    descriptors_[g.str()] = std::move(j);
  }
  /// The parsed header object stored under the group's "binsparse" key.
  const nlohmann::ordered_json& descriptor_object(const GroupPath& g) const {
    auto it = descriptors_.find(g.str());
    if (it == descriptors_.end()) throw Error(Error::Kind::format, "no descriptor in group '" + g.str() + "'");
    return it->second;
  }

  std::vector<std::string> array_names(const GroupPath& g) const override {
    std::vector<std::string> out;
    auto it = arrays_.find(g.str());
    if (it != arrays_.end())
      for (const auto& [name, _] : it->second) out.push_back(name);
    return out;
  }
  TypedArray read_array(const GroupPath& g, const std::string& name) const override { return *view(g, name); }
  void write_array(const GroupPath& g, const std::string& name, const TypedArray& a, Compression c) override {
    if (c.enabled()) throw Error(Error::Kind::usage, "the in-memory backend does not support compression");
    arrays_[g.str()][name] = std::make_shared<const TypedArray>(a);
  }
  std::shared_ptr<const TypedArray> view(const GroupPath& g, const std::string& name) const {
    auto it = arrays_.find(g.str());
    if (it == arrays_.end() || !it->second.contains(name))
      throw Error(Error::Kind::format, "missing array " + name + " in group '" + g.str() + "'");
    return it->second.at(name);
  }

 private:
  std::map<std::string, nlohmann::ordered_json> descriptors_;
  std::map<std::string, std::map<std::string, std::shared_ptr<const TypedArray>>> arrays_;
};

/// Directory paths open the directory backend; anything else is an NPZ file.
inline std::unique_ptr<Container> open_container(const std::filesystem::path& path, OpenMode mode) {
  if (std::filesystem::is_directory(path)) return std::make_unique<DirectoryContainer>(path, mode);
  if (mode == OpenMode::append && !std::filesystem::exists(path)) mode = OpenMode::create;
  return std::make_unique<NpzContainer>(path, mode);
}

// ---------------------------------------------------------------------------
// Tensor IO

inline void write_tensor(Container& c, const GroupPath& g, const SparseTensor& t,
                         Compression compression = Compression::none()) {
  auto report = validate_tensor(t);
  if (!report.empty()) throw Error(Error::Kind::tensor, "refusing to write invalid tensor: " + report.front());
  if (compression.enabled() && !c.capabilities().compression)
    throw Error(Error::Kind::usage, std::string(c.backend()) + " backend does not support compression");
  if (c.group_populated(g)) throw Error(Error::Kind::usage, "group '" + g.str() + "' is already populated");

  Descriptor d = describe(t);
  c.write_descriptor(g, emit_descriptor(d));
  for (const auto& e : array_plan(t).entries) {
    if (e.name == "fill_value")
      c.write_array(g, e.name, TypedArray(t.value_dtype.base, *t.fill_value), compression);
    else
      c.write_array(g, e.name, t.array(e.name), compression);
  }
}

inline SparseTensor read_tensor(const Container& c, const GroupPath& g = {}) {
  if (!c.has_descriptor(g)) throw Error(Error::Kind::format, "group '" + g.str() + "' holds no Binsparse descriptor");
  Descriptor d = parse_descriptor(c.read_descriptor(g));
  std::map<std::string, TypedArray> arrays;
  for (const auto& name : c.array_names(g)) arrays.emplace(name, c.read_array(g, name));
  return assemble_tensor(d, std::move(arrays));
}

inline std::vector<GroupPath> list_groups(const Container& c) {
  auto groups = c.descriptor_groups();
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  return groups;
}

// ---------------------------------------------------------------------------
// Parallel reads

/// One unit of scheduled read work, reported to an optional observer.
struct ReadEvent {
  enum class Kind { block, whole_entry };
  std::string array;
  Kind kind = Kind::whole_entry;
  std::size_t block = 0;  // block number for Kind::block
  std::uint64_t first_element = 0;
  std::uint64_t element_count = 0;
  std::thread::id thread;
};

using ReadObserver = std::function<void(const ReadEvent&)>;

namespace detail {

struct ReadTask {
  std::string array;
  bool whole = false;
  std::size_t block = 0;
  std::uint64_t first = 0;
  std::uint64_t count = 0;
};

/// Work list and output buffers for reading `names` from group `g` with p workers.
class ParallelRead {
 public:
  ParallelRead(const Container& c, const GroupPath& g, const std::vector<std::string>& names, std::size_t workers)
      : c_(c), g_(g) {
    if (workers == 0) throw Error(Error::Kind::usage, "worker count must be at least 1");
    workers_ = workers;
    for (const auto& name : names) {
      Slot& s = slots_[name];
      s.source = c.array_source(g, name);
      if (!s.source) {
        tasks_.push_back({name, true, 0, 0, 0});
        continue;
      }
      const std::uint64_t n = s.source->length;
      s.out = TypedArray(s.source->type, n);
      const std::uint64_t block = (n + workers - 1) / workers;
      std::size_t nblocks = 0;
      for (std::uint64_t first = 0; first < n; first += block) {
        tasks_.push_back({name, false, nblocks, first, std::min(block, n - first)});
        ++nblocks;
      }
      s.block_crc.assign(nblocks, 0);
      s.block_len.assign(nblocks, 0);
    }
  }

  std::map<std::string, TypedArray> run(const ReadObserver& observer) {
    remaining_.store(tasks_.size());
    auto worker = [&] {
      for (;;) {
        std::size_t i = next_.fetch_add(1);
        if (i >= tasks_.size()) return;
        if (!failed_.load()) {
          try {
            execute(tasks_[i], observer);
          } catch (...) {
            std::lock_guard lock(error_mutex_);
            if (!error_) error_ = std::current_exception();
            failed_.store(true);
          }
        }
        if (remaining_.fetch_sub(1) == 1) remaining_.notify_all();
      }
    };
    {
      // The calling thread is one of the p workers.
      std::vector<std::jthread> helpers;
      std::size_t extra = std::min(workers_, std::max<std::size_t>(tasks_.size(), 1)) - 1;
      for (std::size_t k = 0; k < extra; ++k) helpers.emplace_back(worker);
      worker();
      for (std::size_t left = remaining_.load(); left != 0; left = remaining_.load()) remaining_.wait(left);
    }
    if (error_) std::rethrow_exception(error_);

    std::map<std::string, TypedArray> out;
    for (auto& [name, s] : slots_) {
      if (s.source && s.source->check_crc) {
        std::uint32_t crc = 0;
        for (std::size_t b = 0; b < s.block_crc.size(); ++b)
          crc = b == 0 ? s.block_crc[0] : crc32_combine_of(crc, s.block_crc[b], s.block_len[b]);
        if (!s.source->check_crc(crc)) throw Error(Error::Kind::format, "CRC mismatch in array " + name);
      }
      out.emplace(name, std::move(s.out));
    }
    return out;
  }

 private:
  struct Slot {
    std::optional<ArraySource> source;
    TypedArray out;
    std::vector<std::uint32_t> block_crc;
    std::vector<std::uint64_t> block_len;
  };

  void execute(const ReadTask& t, const ReadObserver& observer) {
    Slot& s = slots_.at(t.array);
    if (observer) {
      ReadEvent ev{t.array, t.whole ? ReadEvent::Kind::whole_entry : ReadEvent::Kind::block, t.block,
                   t.first, t.count, std::this_thread::get_id()};
      observer(ev);
    }
    if (t.whole) {
      s.out = c_.read_array(g_, t.array);
      return;
    }
    const std::size_t w = byte_width(s.source->type);
    std::span<std::byte> dst(s.out.bytes().data() + t.first * w, t.count * w);
    s.source->read(t.first * w, dst);
    s.block_crc[t.block] = crc32_of(dst);
    s.block_len[t.block] = dst.size();
  }

  const Container& c_;
  GroupPath g_;
  std::size_t workers_ = 1;
  std::map<std::string, Slot> slots_;
  std::vector<ReadTask> tasks_;
  std::atomic<std::size_t> next_{0};
  std::atomic<std::size_t> remaining_{0};
  std::atomic<bool> failed_{false};
  std::mutex error_mutex_;
  std::exception_ptr error_;
};

}  // namespace detail

/// Reads one array with `workers` threads. Uncompressed payloads are split
/// into contiguous blocks of ceil(n/workers) elements; compressed entries are
/// decoded whole on a single worker.
inline TypedArray parallel_read_array(const Container& c, const GroupPath& g, const std::string& name,
                                      std::size_t workers, const ReadObserver& observer = {}) {
  detail::ParallelRead job(c, g, {name}, workers);
  auto out = job.run(observer);
  return std::move(out.at(name));
}

/// Reads a whole tensor with `workers` threads, spreading work across arrays
/// and across blocks of each uncompressed array.
inline SparseTensor parallel_read_tensor(const Container& c, const GroupPath& g, std::size_t workers,
                                         const ReadObserver& observer = {}) {
  if (workers == 0) throw Error(Error::Kind::usage, "worker count must be at least 1");
  if (!c.has_descriptor(g)) throw Error(Error::Kind::format, "group '" + g.str() + "' holds no Binsparse descriptor");
  Descriptor d = parse_descriptor(c.read_descriptor(g));
  detail::ParallelRead job(c, g, c.array_names(g), workers);
  return assemble_tensor(d, job.run(observer));
}

}  // namespace binsparse
