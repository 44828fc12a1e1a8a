#include <atomic>
#include <cstdlib>

#include "csv.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "hash.hpp"
#include "log.hpp"
#include "parallel.hpp"
#include "tensorio.hpp"
#include "test_util.hpp"

using namespace braintools;
using bt_test::TempDir;
namespace fs = std::filesystem;

TEST_CASE("sha256 known vectors") {
  CHECK(hash::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hash::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir tmp("hash");
  io::write_text(tmp / "a.txt", "abc");
  CHECK(hash::sha256_file(tmp / "a.txt") == hash::sha256_hex("abc"));
}

TEST_CASE("tree digests") {
  TempDir tmp("hash");
  fs::create_directories(tmp / "sub");
  io::write_text(tmp / "a.txt", "1");
  io::write_text(tmp / "sub/b.txt", "2");
  io::write_text(tmp / "timings.json", "{}");
  const auto all = hash::hash_tree(tmp.path);
  CHECK(all.size() == 3);
  const auto kept = hash::hash_tree(tmp.path, {"timings.json"});
  CHECK(kept.size() == 2);
  CHECK(kept.count("sub/b.txt") == 1);
  const std::string d = hash::tree_digest(kept);
  io::write_text(tmp / "timings.json", "{\"x\": 1}");
  CHECK(hash::tree_digest(hash::hash_tree(tmp.path, {"timings.json"})) == d);
  io::write_text(tmp / "sub/b.txt", "3");
  CHECK(hash::tree_digest(hash::hash_tree(tmp.path, {"timings.json"})) != d);
}

TEST_CASE("csv round trip with quoting") {
  TempDir tmp("csv");
  csv::Table t;
  t.header = {"roi", "note", "B"};
  t.rows = {{"late_language", "plain", csv::format(0.1)}, {"x,y", "say \"hi\"\nthere", csv::format(std::nullopt)}};
  csv::write(tmp / "t.csv", t);
  const csv::Table back = csv::read(tmp / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.require("B") == 2);
  CHECK_FALSE(back.find("missing").has_value());
  CHECK_THROWS_AS(back.require("missing"), FormatError);
  CHECK(csv::serialize(t) == io::read_text(tmp / "t.csv"));
}

TEST_CASE("csv number formatting round-trips") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const double x = n01(gen) * std::pow(10.0, static_cast<int>(gen() % 20) - 10);
    CHECK(csv::parse_double(csv::format(x), "x") == x);
  }
  CHECK(csv::format(0.1) == "0.1");
  CHECK(csv::format(30.0) == "30");
  CHECK(csv::format(std::optional<double>{}) == "");
  CHECK_THROWS_AS(csv::parse_double("abc", "x"), FormatError);
  CHECK_THROWS_AS(csv::parse_double("1.5x", "x"), FormatError);
}

TEST_CASE("log sink") {
  std::vector<std::string> seen;
  log::set_sink([&](std::string_view level, std::string_view msg) { seen.push_back(std::string(level) + ":" + std::string(msg)); });
  log::warn("careful");
  log::info("note");
  log::set_sink({});
  CHECK(seen == std::vector<std::string>{"warning:careful", "info:note"});
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  setenv("BRAINTOOLS_THREADS", "4", 1);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 8);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                    if (i == 57) throw InputError("boom");
                  }, 4),
                  InputError);
  unsetenv("BRAINTOOLS_THREADS");
}
