// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/rng.hpp"

using namespace covpool;

TEST_CASE("format_double is shortest round-trip") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double v = std::ldexp(rng.normal(), static_cast<int>(rng.uniform_index(40)) - 20);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(100.0) == "100");
  CHECK(format_double(0.0) == "0");
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("KvConfig parses comments, blanks and order") {
  const KvConfig kv = KvConfig::parse("a = 1\n# note\n\n b=2 # trailing\nc = hello world\n");
  CHECK(kv.get("a", "") == "1");
  CHECK(kv.get("b", "") == "2");
  CHECK(kv.get("c", "") == "hello world");
  CHECK(kv.get("missing", "dflt") == "dflt");
  CHECK(kv.serialize() == "a = 1\nb = 2\nc = hello world\n");
}

TEST_CASE("KvConfig rejects malformed lines with a location") {
  CHECK_THROWS_AS(KvConfig::parse("valid = 1\nnot-a-pair\n"), ParseError);
  CHECK_THROWS_AS(KvConfig::parse("= empty key\n"), ParseError);
  try {
    KvConfig::parse("ok = 1\nbroken line\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("little-endian store/load round trip and truncation errors") {
  std::string buf;
  store_u32_le(buf, 0xdeadbeefu);
  store_u64_le(buf, 0x0123456789abcdefULL);
  store_f64_le(buf, -0.125);
  std::size_t off = 0;
  CHECK(load_u32_le(buf, off) == 0xdeadbeefu);
  CHECK(load_u64_le(buf, off) == 0x0123456789abcdefULL);
  CHECK(load_f64_le(buf, off) == -0.125);
  CHECK(off == buf.size());

  // explicit byte layout: least significant byte first
  CHECK(static_cast<unsigned char>(buf[0]) == 0xef);
  CHECK(static_cast<unsigned char>(buf[3]) == 0xde);

  std::size_t bad = buf.size() - 2;
  CHECK_THROWS_AS(load_f64_le(buf, bad), ParseError);
}

TEST_CASE("svg renderer is a pure function with one polyline per series") {
  SvgSeries s1{"a", "#111111", {0, 1, 2}, {0.5, 0.2, 0.9}};
  SvgSeries s2{"b", "#222222", {0, 1, 2}, {1.5, 1.2, 1.9}};
  const std::string one = render_svg_plot("t", "x", "y", {s1});
  const std::string two = render_svg_plot("t", "x", "y", {s1, s2});
  auto count = [](const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
  };
  CHECK(count(one, "<polyline") == 1);
  CHECK(count(two, "<polyline") == 2);
  CHECK(render_svg_plot("t", "x", "y", {s1, s2}) == two);  // pure
  // a band adds exactly one polygon
  SvgBand band{"band", "#333333", {0, 1, 2}, {0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}};
  CHECK(count(render_svg_plot("t", "x", "y", {s1}, {band}), "<polygon") == 1);
}

TEST_CASE("manifest lists one hash line per output") {
  const std::string dir = "/tmp/covpool_manifest_test";
  ensure_dir(dir);
  write_file(dir + "/a.txt", "alpha");
  write_file(dir + "/b.txt", "beta");
  write_manifest(dir, {"a.txt", "b.txt"});
  const std::string m = read_file(dir + "/manifest.txt");
  CHECK(m.find("a.txt") != std::string::npos);
  CHECK(m.find("b.txt") != std::string::npos);
  char expect[32];
  std::snprintf(expect, sizeof(expect), "%016llx",
                static_cast<unsigned long long>(fnv1a64("alpha")));
  CHECK(m.find(expect) != std::string::npos);
  std::remove((dir + "/a.txt").c_str());
  std::remove((dir + "/b.txt").c_str());
  std::remove((dir + "/manifest.txt").c_str());
}
