#pragma once

// The `binsparse` command line: convert, ls, validate, bench.
// Exit codes: 0 success, 1 data/validation error, 2 usage error.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "binsparse/binsparse.hpp"

namespace bsp_cli {

using namespace binsparse;
namespace fs = std::filesystem;

enum class FileKind { mtx, tns, npz, dir };

inline constexpr const char* bench_csv_header =
    "file,operation,format,compressed,workers,cache,trials,mean_seconds,min_seconds,max_seconds,bytes";

inline FileKind parse_kind(const std::string& s) {
  if (s == "mtx") return FileKind::mtx;
  if (s == "tns") return FileKind::tns;
  if (s == "npz") return FileKind::npz;
  if (s == "dir") return FileKind::dir;
  throw Error(Error::Kind::usage, "unknown file kind '" + s + "' (expected mtx, tns, npz or dir)");
}

/// Text formats by extension, existing directories as directory containers,
/// anything else as an NPZ container.
inline FileKind detect_kind(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".mtx") return FileKind::mtx;
  if (ext == ".tns") return FileKind::tns;
  if (fs::is_directory(p)) return FileKind::dir;
  return FileKind::npz;
}

inline bool is_container(FileKind k) { return k == FileKind::npz || k == FileKind::dir; }

inline std::unique_ptr<Container> open_kind(const fs::path& p, FileKind k, OpenMode mode) {
  if (k == FileKind::dir) {
    if (mode == OpenMode::create) {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
    return std::make_unique<DirectoryContainer>(p, mode == OpenMode::append && !fs::exists(p) ? OpenMode::create : mode);
  }
  if (mode == OpenMode::append && !fs::exists(p)) mode = OpenMode::create;
  return std::make_unique<NpzContainer>(p, mode);
}

inline SparseTensor load_tensor(const fs::path& p, FileKind k, const GroupPath& g, bool tns_zero_based,
                                std::size_t workers = 1) {
  if (k == FileKind::mtx || k == FileKind::tns) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Error::Kind::io, "cannot open " + p.string());
    return k == FileKind::mtx ? read_matrix_market(in) : read_tns(in, {.zero_based = tns_zero_based});
  }
  auto c = open_kind(p, k, OpenMode::read);
  return workers > 1 ? parallel_read_tensor(*c, g, workers) : read_tensor(*c, g);
}

/// Target level tree for a --format spelling and a tensor rank.
inline LevelTree target_tree(const std::string& spec, std::size_t rank) {
  if (spec.starts_with("custom:")) {
    fs::path file = spec.substr(7);
    std::ifstream in(file);
    if (!in) throw Error(Error::Kind::usage, "cannot open custom format file " + file.string());
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Error::Kind::usage, "custom format file is not valid JSON: " + std::string(e.what()));
    }
    if (j.is_object() && j.contains("custom")) j = j.at("custom");
    LevelTree t = level_tree_from_json(j);
    if (t.rank() != rank)
      throw Error(Error::Kind::usage, "custom format has rank " + std::to_string(t.rank()) + ", tensor has rank " +
                                          std::to_string(rank));
    return t;
  }
  std::string up = spec;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "CSF") return csf_levels(rank);
  if (up == "COO") {
    LevelTree t;
    t.levels = {sparse(rank), {LevelKind::element, 0}};
    t.transpose.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) t.transpose[i] = i;
    return t;
  }
  auto f = parse_format(up);
  if (!f) throw Error(Error::Kind::usage, "unknown format '" + spec + "'");
  LevelTree t = levels_of_predefined(*f);
  if (t.rank() != rank)
    throw Error(Error::Kind::usage, std::string(to_string(*f)) + " needs a rank-" + std::to_string(t.rank()) +
                                        " tensor, got rank " + std::to_string(rank));
  return t;
}

inline std::optional<int> compress_level(const CLI::Option* opt) {
  if (opt->count() == 0) return std::nullopt;
  auto res = opt->results();
  if (res.empty() || res.front().empty()) return 1;
  int level = 0;
  const std::string& s = res.front();
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), level);
  if (ec != std::errc() || p != s.data() + s.size() || level < 0 || level > 9)
    throw Error(Error::Kind::usage, "--compress level must be 0-9, got '" + s + "'");
  return level;
}

inline std::string fmt_seconds(double s) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, s, std::chars_format::scientific, 9);
  return std::string(buf, p);
}

inline std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s;
  for (auto d : shape) s += (s.empty() ? "" : "x") + std::to_string(d);
  return s;
}

inline std::string describe_format(const SparseTensor& t) {
  if (auto f = t.format()) return std::string(to_string(*f));
  if (t.levels == csf_levels(t.rank())) return "CSF";
  return "custom";
}

inline void write_output(const SparseTensor& t, const fs::path& out, FileKind k, const GroupPath& g,
                         std::optional<int> level, bool append, bool tns_zero_based) {
  if (k == FileKind::mtx || k == FileKind::tns) {
    if (level) throw Error(Error::Kind::usage, "--compress applies to container outputs only");
    std::string text = k == FileKind::mtx ? write_matrix_market_text(t) : write_tns_text(t, {.zero_based = tns_zero_based});
    std::ofstream os(out, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Error::Kind::io, "cannot create " + out.string());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw Error(Error::Kind::io, "write failed on " + out.string());
    return;
  }
  auto c = open_kind(out, k, append ? OpenMode::append : OpenMode::create);
  write_tensor(*c, g, t, level ? Compression::deflate(*level) : Compression::none());
  c->close();
}

struct BenchStats {
  double mean = 0, min = 0, max = 0;
};

inline BenchStats summarize(const std::vector<double>& xs) {
  BenchStats s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = std::clamp(sum / static_cast<double>(xs.size()), s.min, s.max);
  return s;
}

inline void run_flush(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  if (rc != 0) throw Error(Error::Kind::io, "flush command failed: " + cmd);
}

inline std::uint64_t path_bytes(const fs::path& p) {
  if (fs::is_directory(p)) {
    std::uint64_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) n += e.file_size();
    return n;
  }
  return fs::file_size(p);
}

inline bool any_compressed(const fs::path& p, FileKind k, const GroupPath& g) {
  if (!is_container(k)) return false;
  auto c = open_kind(p, k, OpenMode::read);
  for (const auto& n : c->array_names(g))
    if (c->is_compressed(g, n)) return true;
  return false;
}

inline std::size_t default_workers() {
  if (const char* v = std::getenv("BSP_WORKERS")) {
    std::size_t n = 0;
    std::string_view s(v);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && p == s.data() + s.size() && n > 0) return n;
    throw Error(Error::Kind::usage, "BSP_WORKERS must be a positive integer");
  }
  return 1;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binsparse sparse tensor files", "binsparse"};
  app.require_subcommand(1);

  // convert
  auto* conv = app.add_subcommand("convert", "convert between Matrix Market, FROSTT and Binsparse");
  std::string in_path, out_path, from, to, format = "coo", group, in_group;
  bool no_downcast = false, tns_zero = false, append = false;
  conv->add_option("input", in_path, "source file")->required();
  conv->add_option("output", out_path, "destination file")->required();
  conv->add_option("--from", from, "input kind: mtx, tns, npz, dir");
  conv->add_option("--to", to, "output kind: mtx, tns, npz, dir");
  conv->add_option("--format", format, "coo|csr|csc|dcsr|dcsc|csf|dvec|dmat|cvec|custom:<file.json>");
  auto* conv_compress = conv->add_option("--compress", "deflate level (bare flag: 1)")->expected(0, 1);
  conv->add_option("--group", group, "group to write (or to read, for text outputs)");
  conv->add_option("--in-group", in_group, "group to read from a container input");
  conv->add_flag("--no-downcast", no_downcast, "keep the value type as read");
  conv->add_flag("--tns-zero-based", tns_zero, ".tns coordinates are 0-based");
  conv->add_flag("--append", append, "add a group to an existing container");

  // ls
  auto* ls = app.add_subcommand("ls", "list the Binsparse groups in a container");
  std::string ls_path;
  ls->add_option("file", ls_path)->required();

  // validate
  auto* val = app.add_subcommand("validate", "check a Binsparse group for conformance");
  std::string val_path, val_group, against;
  val->add_option("file", val_path)->required();
  val->add_option("--group", val_group);
  val->add_option("--against", against, "reference file that must hold the same tensor");
  val->add_flag("--tns-zero-based", tns_zero);

  // bench
  auto* bench = app.add_subcommand("bench", "time reads or writes, one CSV row per configuration");
  std::string mode, bench_path, flush_cmd, cache = "warm", sync = "unflushed", bench_out, bench_group, bench_format = "coo";
  std::size_t trials = 10, workers = 0;
  bool header = false;
  bench->add_option("mode", mode, "read or write")->required()->check(CLI::IsMember({"read", "write"}));
  bench->add_option("file", bench_path)->required();
  bench->add_option("--trials", trials)->check(CLI::PositiveNumber);
  bench->add_option("--parallel", workers, "reader threads (default $BSP_WORKERS or 1)")->check(CLI::PositiveNumber);
  bench->add_option("--flush-cmd", flush_cmd, "shell command that drops caches or syncs");
  bench->add_option("--cache", cache)->check(CLI::IsMember({"warm", "cold"}));
  bench->add_option("--sync", sync)->check(CLI::IsMember({"flushed", "unflushed"}));
  bench->add_option("--out", bench_out, "write target (default: a temporary .bsp)");
  bench->add_option("--format", bench_format, "write format");
  bench->add_option("--group", bench_group);
  auto* bench_compress = bench->add_option("--compress", "deflate level (bare flag: 1)")->expected(0, 1);
  bench->add_flag("--header", header, "print the CSV header first");
  bench->add_flag("--tns-zero-based", tns_zero);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "binsparse: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*conv) {
      FileKind ik = from.empty() ? detect_kind(in_path) : parse_kind(from);
      FileKind ok = to.empty() ? detect_kind(out_path) : parse_kind(to);
      auto level = compress_level(conv_compress);
      GroupPath read_group = !in_group.empty() ? GroupPath(in_group) : is_container(ok) ? GroupPath() : GroupPath(group);
      SparseTensor t = load_tensor(in_path, ik, read_group, tns_zero);
      if (is_container(ok)) {
        t = convert(t, target_tree(format, t.rank()));
        if (!no_downcast) t = downcast_values(t);
        write_output(t, out_path, ok, GroupPath(group), level, append, tns_zero);
      } else {
        write_output(t, out_path, ok, {}, level, append, tns_zero);
      }
      return 0;
    }

    if (*ls) {
      FileKind k = detect_kind(ls_path);
      if (!is_container(k)) throw Error(Error::Kind::usage, ls_path + " is not a Binsparse container");
      if (!fs::exists(ls_path)) throw Error(Error::Kind::io, "cannot open " + ls_path);
      auto c = open_kind(ls_path, k, OpenMode::read);
      for (const auto& g : list_groups(*c)) {
        Descriptor d = parse_descriptor(c->read_descriptor(g));
        std::string fmt = format_name(d);
        if (fmt == "custom" && d.tree() == csf_levels(d.shape.size())) fmt = "CSF";
        out << "/" << g.str() << "\t" << fmt << "\t" << shape_string(d.shape) << "\t" << d.number_of_stored_values
            << "\t" << format_dtype(*find_dtype(d.data_types, "values")) << "\n";
      }
      return 0;
    }

    if (*val) {
      FileKind k = detect_kind(val_path);
      if (!is_container(k)) throw Error(Error::Kind::usage, val_path + " is not a Binsparse container");
      auto c = open_kind(val_path, k, OpenMode::read);
      GroupPath g(val_group);
      Descriptor d = parse_descriptor(c->read_descriptor(g));
      std::vector<std::string> report = validate_descriptor(d);
      std::optional<SparseTensor> t;
      if (report.empty()) {
        std::map<std::string, TypedArray> arrays;
        for (const auto& name : c->array_names(g)) arrays.emplace(name, c->read_array(g, name));
        try {
          t = assemble_tensor_unchecked(d, std::move(arrays));
          auto more = validate_tensor(*t);
          report.insert(report.end(), more.begin(), more.end());
        } catch (const Error& e) {
          report.push_back(e.what());
        }
      }
      if (report.empty() && !against.empty()) {
        FileKind rk = detect_kind(against);
        SparseTensor ref = load_tensor(against, rk, {}, tns_zero);
        if (!canonical_equal(*t, ref) && !canonical_equal(*t, downcast_values(ref)) &&
            !canonical_equal(*t, downcast_values(convert(ref, t->levels))))
          report.push_back("tensor differs from " + against);
      }
      for (const auto& r : report) err << val_path << ": " << r << "\n";
      if (report.empty()) out << val_path << ": ok\n";
      return report.empty() ? 0 : 1;
    }

    if (*bench) {
      if (workers == 0) workers = default_workers();
      auto level = compress_level(bench_compress);
      FileKind k = detect_kind(bench_path);
      GroupPath g(bench_group);
      using clock = std::chrono::steady_clock;
      std::vector<double> times;
      std::string fmt, cache_col;
      bool compressed = false;
      std::uint64_t bytes = 0;

      if (mode == "read") {
        if (cache == "cold" && flush_cmd.empty())
          throw Error(Error::Kind::usage, "--cache cold needs --flush-cmd to drop the file cache");
        SparseTensor probe = load_tensor(bench_path, k, g, tns_zero, workers);  // also the warm-cache priming read
        fmt = k == FileKind::mtx ? "MatrixMarket" : k == FileKind::tns ? "FROSTT" : describe_format(probe);
        compressed = any_compressed(bench_path, k, g);
        bytes = path_bytes(bench_path);
        cache_col = cache;
        for (std::size_t i = 0; i < trials; ++i) {
          if (cache == "cold") run_flush(flush_cmd);
          auto t0 = clock::now();
          SparseTensor t = load_tensor(bench_path, k, g, tns_zero, workers);
          times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
      } else {
        if (sync == "flushed" && flush_cmd.empty())
          throw Error(Error::Kind::usage, "--sync flushed needs --flush-cmd to flush written data");
        SparseTensor src = load_tensor(bench_path, k, g, tns_zero, workers);
        fs::path target = bench_out.empty()
                              ? fs::temp_directory_path() / ("binsparse-bench-" + std::to_string(::getpid()) + ".bsp")
                              : fs::path(bench_out);
        FileKind tk = detect_kind(target);
        if (tk == FileKind::dir) tk = FileKind::npz;
        SparseTensor t = is_container(tk) ? convert(src, target_tree(bench_format, src.rank())) : src;
        fmt = tk == FileKind::mtx ? "MatrixMarket" : tk == FileKind::tns ? "FROSTT" : describe_format(t);
        compressed = level.has_value();
        cache_col = sync;
        for (std::size_t i = 0; i < trials; ++i) {
          auto t0 = clock::now();
          write_output(t, target, tk, {}, level, false, tns_zero);
          if (sync == "flushed") run_flush(flush_cmd);
          times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
        bytes = path_bytes(target);
        if (bench_out.empty()) fs::remove(target);
      }
      BenchStats s = summarize(times);
      if (header) out << bench_csv_header << "\n";
      out << bench_path << "," << mode << "," << fmt << "," << (compressed ? "true" : "false") << "," << workers << ","
          << cache_col << "," << trials << "," << fmt_seconds(s.mean) << "," << fmt_seconds(s.min) << ","
          << fmt_seconds(s.max) << "," << bytes << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "binsparse: " << e.what() << "\n";
    return e.kind() == Error::Kind::usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "binsparse: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace bsp_cli
