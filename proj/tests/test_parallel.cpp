#include <gtest/gtest.h>

#include <mutex>
#include <set>

#include "test_util.hpp"

using namespace bsp_test;

namespace {

struct Recorder {
  std::mutex m;
  std::vector<ReadEvent> events;
  ReadObserver observer() {
    return [this](const ReadEvent& e) {
      std::lock_guard lock(m);
      events.push_back(e);
    };
  }
};

}  // namespace

TEST(Parallel, OneWorkerMatchesSequentialBytes) {
  TempDir dir;
  std::mt19937_64 rng(5);
  SparseTensor t = random_tensor(rng, levels_of_predefined(Format::CSR), {50, 60}, dtype(ScalarType::float32),
                                 Structure::general, 300);
  {
    NpzContainer c(dir / "m.bsp", OpenMode::create);
    write_tensor(c, {}, t);
  }
  NpzContainer c(dir / "m.bsp", OpenMode::read);
  for (const auto& name : c.array_names({})) EXPECT_EQ(parallel_read_array(c, {}, name, 1), c.read_array({}, name));
}

TEST(Parallel, SixWorkersBlockRule) {
  TempDir dir;
  const std::uint64_t n = 3782463;
  TypedArray a(ScalarType::uint32, n);
  for (std::uint64_t i = 0; i < n; ++i) a.set_uint(i, (i * 2654435761u) & 0xffffffffu);
  {
    NpzContainer c(dir / "a.npz", OpenMode::create);
    c.write_array({}, "indices_0", a, {});
  }
  NpzContainer c(dir / "a.npz", OpenMode::read);
  Recorder rec;
  TypedArray got = parallel_read_array(c, {}, "indices_0", 6, rec.observer());
  EXPECT_EQ(got, c.read_array({}, "indices_0"));
  EXPECT_EQ(got, a);
  const std::uint64_t block = (n + 5) / 6;
  ASSERT_EQ(rec.events.size(), 6u);
  std::set<std::uint64_t> firsts;
  for (const auto& e : rec.events) {
    EXPECT_EQ(e.kind, ReadEvent::Kind::block);
    EXPECT_EQ(e.first_element, e.block * block);
    EXPECT_EQ(e.element_count, std::min(block, n - e.first_element));
    firsts.insert(e.first_element);
  }
  EXPECT_EQ(firsts.size(), 6u);
}

TEST(Parallel, CompressedEntryDecodedWhole) {
  TempDir dir;
  TypedArray a(ScalarType::int64, 10000);
  for (std::size_t i = 0; i < a.size(); ++i) a.set_int(i, static_cast<std::int64_t>(i) * -3);
  {
    NpzContainer c(dir / "a.npz", OpenMode::create);
    c.write_array({}, "values", a, Compression::deflate(1));
  }
  NpzContainer c(dir / "a.npz", OpenMode::read);
  Recorder rec;
  EXPECT_EQ(parallel_read_array(c, {}, "values", 4, rec.observer()), a);
  ASSERT_EQ(rec.events.size(), 1u);
  EXPECT_EQ(rec.events[0].kind, ReadEvent::Kind::whole_entry);
}

TEST(Parallel, CompressedCsrSchedulesThreeEntryDecodes) {
  TempDir dir;
  std::mt19937_64 rng(9);
  SparseTensor t = random_tensor(rng, levels_of_predefined(Format::CSR), {40, 40}, dtype(ScalarType::float64),
                                 Structure::general, 200);
  {
    NpzContainer c(dir / "m.bsp", OpenMode::create);
    write_tensor(c, {}, t, Compression::deflate(1));
  }
  NpzContainer c(dir / "m.bsp", OpenMode::read);
  Recorder rec;
  SparseTensor back = parallel_read_tensor(c, {}, 3, rec.observer());
  EXPECT_TRUE(canonical_equal(back, t));
  std::set<std::string> arrays;
  for (const auto& e : rec.events) {
    EXPECT_EQ(e.kind, ReadEvent::Kind::whole_entry);
    arrays.insert(e.array);
  }
  EXPECT_EQ(rec.events.size(), 3u);
  EXPECT_EQ(arrays, (std::set<std::string>{"pointers_to_1", "indices_1", "values"}));
}

TEST(Parallel, ZeroWorkersIsError) {
  MemoryContainer m;
  write_tensor(m, {}, small_csr());
  EXPECT_THROW(parallel_read_tensor(m, {}, 0), Error);
  EXPECT_THROW(parallel_read_array(m, {}, "values", 0), Error);
}

TEST(Parallel, WorkerCountsAgreeWithSequential) {
  TempDir dir;
  std::mt19937_64 rng(21);
  std::vector<SparseTensor> ts;
  for (Format f : all_formats) {
    std::vector<std::uint64_t> shape = levels_of_predefined(f).rank() == 1 ? std::vector<std::uint64_t>{300}
                                                                           : std::vector<std::uint64_t>{30, 25};
    ts.push_back(random_tensor(rng, levels_of_predefined(f), shape, dtype(ScalarType::uint16), Structure::general, 200));
  }
  {
    NpzContainer c(dir / "all.bsp", OpenMode::create);
    for (std::size_t i = 0; i < ts.size(); ++i)
      write_tensor(c, "g" + std::to_string(i), ts[i], i % 2 ? Compression::deflate(1) : Compression::none());
  }
  NpzContainer c(dir / "all.bsp", OpenMode::read);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    GroupPath g("g" + std::to_string(i));
    SparseTensor seq = read_tensor(c, g);
    for (std::size_t p : {1, 2, 4, 6, 8}) EXPECT_TRUE(canonical_equal(parallel_read_tensor(c, g, p), seq));
  }
  DirectoryContainer d(dir / "dir", OpenMode::create);
  write_tensor(d, {}, ts[4]);
  for (std::size_t p : {1, 2, 4, 6, 8}) EXPECT_TRUE(canonical_equal(parallel_read_tensor(d, {}, p), ts[4]));
}
