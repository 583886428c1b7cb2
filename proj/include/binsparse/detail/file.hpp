#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "binsparse/error.hpp"

namespace binsparse::detail {

/// Owning POSIX file descriptor with positional IO. pread/pwrite do not move
/// a shared offset, so one File can serve many reader threads.
class File {
 public:
  enum class Mode { read, create, update };

  File() = default;
  File(const std::filesystem::path& path, Mode mode) : path_(path) {
    int flags = O_CLOEXEC;
    switch (mode) {
      case Mode::read: flags |= O_RDONLY; break;
      case Mode::create: flags |= O_RDWR | O_CREAT | O_TRUNC; break;
      case Mode::update: flags |= O_RDWR; break;
    }
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0) fail("cannot open");
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
  File(File&& o) noexcept : fd_(std::exchange(o.fd_, -1)), path_(std::move(o.path_)) {}
  File& operator=(File&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
      path_ = std::move(o.path_);
    }
    return *this;
  }
  ~File() { reset(); }

  bool is_open() const noexcept { return fd_ >= 0; }
  const std::filesystem::path& path() const noexcept { return path_; }

  std::uint64_t size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) fail("cannot stat");
    return static_cast<std::uint64_t>(st.st_size);
  }

  void read_at(std::uint64_t offset, std::span<std::byte> dst) const {
    std::size_t done = 0;
    while (done < dst.size()) {
      ssize_t n = ::pread(fd_, dst.data() + done, dst.size() - done, static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("read failed on");
      }
      if (n == 0) throw Error(Error::Kind::format, "unexpected end of file in " + path_.string());
      done += static_cast<std::size_t>(n);
    }
  }

  void write_at(std::uint64_t offset, std::span<const std::byte> src) {
    std::size_t done = 0;
    while (done < src.size()) {
      ssize_t n = ::pwrite(fd_, src.data() + done, src.size() - done, static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("write failed on");
      }
      done += static_cast<std::size_t>(n);
    }
  }

  void truncate(std::uint64_t size) {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) fail("cannot truncate");
  }

  void sync() {
    if (::fsync(fd_) != 0) fail("cannot sync");
  }

  void close() {
    if (fd_ >= 0 && ::close(std::exchange(fd_, -1)) != 0) fail("cannot close");
  }

 private:
  [[noreturn]] void fail(const char* what) const {
    throw Error(Error::Kind::io, std::string(what) + " " + path_.string() + ": " + std::strerror(errno));
  }
  void reset() noexcept {
    if (fd_ >= 0) ::close(std::exchange(fd_, -1));
  }

  int fd_ = -1;
  std::filesystem::path path_;
};

inline std::vector<std::byte> read_file(const std::filesystem::path& p) {
  File f(p, File::Mode::read);
  std::vector<std::byte> buf(f.size());
  f.read_at(0, buf);
  return buf;
}

inline void write_file(const std::filesystem::path& p, std::span<const std::byte> bytes) {
  File f(p, File::Mode::create);
  f.write_at(0, bytes);
  f.close();
}

}  // namespace binsparse::detail
