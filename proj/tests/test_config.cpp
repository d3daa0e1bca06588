#include "aan/config.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <limits>

using namespace aan;

TEST_CASE("key-value parsing with sections and comments") {
  const auto kv = KeyValueFile::parse(
      "# trial settings\n"
      "top = 1\n"
      "[mpc]\n"
      "w_theta = 1000   # tracking\n"
      "  w_tau=0.01\n"
      "\n"
      "[trial]\n"
      "emg_mode = raw\n");
  CHECK(kv.get_int("top", 0) == 1);
  CHECK(kv.get_double("mpc.w_theta", 0.0) == 1000.0);
  CHECK(kv.get_double("mpc.w_tau", 0.0) == 0.01);
  CHECK(kv.get_string("trial.emg_mode", "") == "raw");
  CHECK(kv.get_double("missing", 2.5) == 2.5);
  CHECK_FALSE(kv.has("missing"));
}

TEST_CASE("malformed input is reported") {
  CHECK_THROWS_AS(KeyValueFile::parse("no equals sign\n"), std::invalid_argument);
  CHECK_THROWS_AS(KeyValueFile::parse("[open\n"), std::invalid_argument);
  const auto kv = KeyValueFile::parse("a = abc\nb = maybe\n");
  CHECK_THROWS(kv.get_double("a", 0.0));
  CHECK_THROWS(kv.get_bool("b", false));
  CHECK_THROWS(KeyValueFile::load("/nonexistent/dir/file.cfg"));
}

TEST_CASE("dump is canonical and survives a save/load cycle") {
  KeyValueFile a, b;
  a.set("z.k", 1.5);
  a.set("a.k", std::string("x"));
  b.set("a.k", std::string("x"));
  b.set("z.k", 1.5);
  CHECK(a.dump() == b.dump());

  const auto path = std::filesystem::temp_directory_path() / "aan_config_roundtrip.cfg";
  a.save(path);
  CHECK(KeyValueFile::load(path).dump() == a.dump());
  std::filesystem::remove(path);
}

TEST_CASE("doubles round-trip through text exactly") {
  for (double v : {0.1, 1.0 / 3.0, -21.98, 1e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min()}) {
    CHECK(parse_double(format_double(v), "test") == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
