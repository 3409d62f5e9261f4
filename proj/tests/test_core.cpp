#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ghnforge/core/hash.hpp"
#include "ghnforge/core/parallel.hpp"
#include "ghnforge/core/rng.hpp"
#include "ghnforge/core/toml.hpp"

using namespace ghnforge;

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(43);
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs = differs || (c.next_u64() != d.next_u64());
  CHECK(differs);
}

TEST_CASE("rng: state round-trip resumes the stream") {
  Rng a(7);
  for (int i = 0; i < 5; ++i) a.next_u64();
  std::string s = a.state();
  Rng b(0);
  b.set_state(s);
  for (int i = 0; i < 20; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: normal moments are sane") {
  Rng r(3);
  double mean = 0, m2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    mean += v;
    m2 += v * v;
  }
  mean /= n;
  m2 /= n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(m2 - 1.0) < 0.02);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  CHECK(derive_seed(5, {7, 9}) == derive_seed(5, {7, 9}));
}

TEST_CASE("fnv1a64 known vectors") {
  // reference values for the standard 64-bit FNV-1a parameters
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("parallel_for covers the range once, any worker count") {
  for (int workers : {1, 2, 3}) {
    set_worker_count(workers);
    std::vector<int> hits(1000, 0);
    parallel_for(1000, [&](int64_t b, int64_t e) {
      for (int64_t i = b; i < e; ++i) hits[static_cast<size_t>(i)]++;
    });
    for (int h : hits) CHECK(h == 1);
  }
  set_worker_count(0);
}

TEST_CASE("toml: tables, scalars, arrays, comments") {
  std::string text = R"(# experiment
[train]
lr = 4e-4
epochs = 30
note = "hello \"world\""
flags = [1, 2, 3]
lrs = [0.1, 0.04]
deep = true

[train.inner]
x = -5
)";
  TomlValue root = toml_parse(text);
  const TomlValue& t = root.require("train", "cfg");
  CHECK(t.get_float("lr", 0) == doctest::Approx(4e-4));
  CHECK(t.get_int("epochs", 0) == 30);
  CHECK(t.get_str("note", "") == "hello \"world\"");
  CHECK(t.require("flags", "t").as_int_array("flags") == std::vector<int64_t>{1, 2, 3});
  CHECK(t.require("lrs", "t").as_float_array("lrs")[1] == doctest::Approx(0.04));
  CHECK(t.get_bool("deep", false));
  CHECK(t.require("inner", "t").get_int("x", 0) == -5);
}

TEST_CASE("toml: errors carry line numbers and reject duplicates") {
  CHECK_THROWS_AS(toml_parse("a = \n"), ConfigError);
  CHECK_THROWS_AS(toml_parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(toml_parse("[a\n"), ConfigError);
  CHECK_THROWS_AS(toml_parse("x = [1,\n2]\n"), ConfigError);
  try {
    toml_parse("ok = 1\nbad =\n");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("toml: unknown keys rejected with path") {
  TomlValue root = toml_parse("[train]\nlr = 0.1\ntypo = 2\n");
  CHECK_THROWS_AS(toml_reject_unknown(root, {"train.lr"}), ConfigError);
  CHECK_NOTHROW(toml_reject_unknown(root, {"train.lr", "train.typo"}));
  try {
    toml_reject_unknown(root, {"train.lr"});
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.typo") != std::string::npos);
  }
}
