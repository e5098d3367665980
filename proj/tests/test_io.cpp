#include <bit>
#include <cmath>
#include <doctest.h>
#include <filesystem>
#include <json.hpp>

#include "qpat/error.hpp"
#include "qpat/experiment.hpp"
#include "qpat/io.hpp"

using namespace qpat;
using namespace qpat::io;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = QPAT_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qpat_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed = {}, int threads = 1) {
  RunOptions o;
  o.config_path = config.string();
  o.out_dir = out.string();
  o.seed = seed;
  o.threads = threads;
  o.quiet = true;
  return run_experiment(o);
}

GridData sample_grid() { return {2, {2, 2}, {-1.0, 1.0, -1.0, 1.0}, {0.25, -0.0, 1e-300, 3.0 / 7.0}}; }

}  // namespace

TEST_CASE("pgrid round trip is bitwise") {
  const auto g = sample_grid();
  const auto bytes = encode_pgrid(g);
  CHECK(bytes.rfind("PGRID v1 n=2 dims=2,2 extent=", 0) == 0);
  const auto back = decode_pgrid(bytes);
  CHECK(back.dims == g.dims);
  CHECK(back.extent == g.extent);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    CHECK(std::bit_cast<std::uint64_t>(back.values[i]) == std::bit_cast<std::uint64_t>(g.values[i]));
  // payload is little-endian float64 after the header line
  const auto nl = bytes.find('\n');
  REQUIRE(nl != std::string::npos);
  CHECK(bytes.size() - nl - 1 == 4 * sizeof(double));
  std::uint64_t first = 0;
  for (int b = 7; b >= 0; --b) first = (first << 8) | static_cast<unsigned char>(bytes[nl + 1 + b]);
  CHECK(std::bit_cast<double>(first) == 0.25);
}

TEST_CASE("pgrid rejects bad input") {
  const auto bytes = encode_pgrid(sample_grid());
  SUBCASE("extent mismatch") {
    CHECK_THROWS_AS(decode_pgrid(bytes, std::vector<double>{-2.0, 2.0, -2.0, 2.0}), FormatError);
    CHECK_NOTHROW(decode_pgrid(bytes, std::vector<double>{-1.0, 1.0, -1.0, 1.0}));
  }
  SUBCASE("truncated payload") { CHECK_THROWS_AS(decode_pgrid(bytes.substr(0, bytes.size() - 3)), FormatError); }
  SUBCASE("bad header") {
    auto b = bytes;
    b[6] = 'x';
    CHECK_THROWS_AS(decode_pgrid(b), FormatError);
  }
  SUBCASE("NaN reports its byte offset") {
    auto b = bytes;
    const auto nl = b.find('\n');
    const std::size_t offset = nl + 1 + 2 * sizeof(double);
    const auto nan = std::bit_cast<std::uint64_t>(std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < 8; ++k) b[offset + k] = static_cast<char>((nan >> (8 * k)) & 0xff);
    try {
      decode_pgrid(b);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(std::to_string(offset)) != std::string::npos);
    }
  }
}

TEST_CASE("csv round trip") {
  CsvTable t{{"a", "b"}, {{1.0, 0.1}, {-1e-300, 1.0 / 3.0}, {12345678.9, -0.0}}};
  const auto back = decode_csv(encode_csv(t));
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(back.rows[i][j] == t.rows[i][j]);
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("c"), ArgumentError);
  CHECK_THROWS_AS(decode_csv("a,b\n1,2\n3\n"), FormatError);
  CHECK_THROWS_AS(decode_csv("a\nxyz\n"), FormatError);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
}

TEST_CASE("config diagnostics carry line numbers") {
  const std::string text = "{\n  \"task\": \"forward\",\n  \"geometry\": {\"dimension\": 2},\n  \"medium\": {\"sigma_a\": 0.5,\n    \"sigma0\": -1, \"bound\": 5}\n}\n";
  try {
    parse_config(text, ".");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(!e.diagnostics().empty());
    CHECK(e.diagnostics()[0].rfind("line 5:", 0) == 0);
  }
  try {
    parse_config("{\n  \"task\": \"nope\",\n  \"colour\": 1\n}", ".");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.diagnostics().size() == 2);
  }
  CHECK_THROWS_AS(parse_config("{\n\"task\": \n", "."), ConfigError);
}

TEST_CASE("field specs") {
  const auto dir = scratch("fields");
  write_pgrid((dir / "s.pgrid").string(), sample_grid());
  const auto f = parse_field(nlohmann::json{{"type", "pgrid"}, {"path", "s.pgrid"}}, dir.string());
  CHECK(f(Vec3{-1.0, -1.0}) == doctest::Approx(0.25));  // samples sit on grid nodes
  CHECK(parse_field(nlohmann::json(2.0), ".")(Vec3{}) == 2.0);
  CHECK(parse_field(nlohmann::json{{"type", "radial"}, {"coeffs", {1.0, 0.0, 2.0}}}, ".")(Vec3{0.5, 0.0}) ==
        doctest::Approx(1.5));
  CHECK_THROWS_AS(parse_field(nlohmann::json{{"type", "pgrid"}, {"path", "missing.pgrid"}}, dir.string()), ConfigError);
  CHECK_THROWS_AS(parse_field(nlohmann::json{{"type", "spiral"}}, "."), ConfigError);
}

TEST_CASE("missing medium file exits with 2") {
  const auto out = scratch("missing");
  CHECK(run(kSource / "configs" / "bad_missing_medium_file.json", out) == 2);
  CHECK(run(kSource / "configs" / "no_such_config.json", out) == 2);
}

TEST_CASE("selftest exits with 0") {
  const auto out = scratch("selftest");
  CHECK(run(kSource / "configs" / "selftest.json", out) == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "result.json"));
}

TEST_CASE("forward smoke matches the golden integral") {
  const auto out = scratch("forward");
  REQUIRE(run(kSource / "configs" / "forward_smoke.json", out) == 0);
  const auto result = nlohmann::json::parse(read_file((out / "result.json").string()));
  const auto golden = nlohmann::json::parse(read_file((kSource / "tests" / "golden" / "forward_smoke.json").string()));
  const double got = result.at("integral_H").get<double>(), want = golden.at("integral_H").get<double>();
  CHECK(std::abs(got - want) <= 1e-10 * std::abs(want));
  const auto h = read_pgrid((out / "H.pgrid").string());
  CHECK(h.dims == std::vector<std::size_t>{16, 16});
}

TEST_CASE("runs are byte-identical across repeats and thread counts") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  REQUIRE(run(kSource / "configs" / "forward_smoke.json", a, 11, 1) == 0);
  REQUIRE(run(kSource / "configs" / "forward_smoke.json", b, 11, 3) == 0);
  for (const char* f : {"H.pgrid", "orders.csv", "result.json"})
    CHECK(read_file((a / f).string()) == read_file((b / f).string()));
  const auto ma = nlohmann::json::parse(read_file((a / "manifest.json").string()));
  const auto mb = nlohmann::json::parse(read_file((b / "manifest.json").string()));
  CHECK(ma.at("outputs") == mb.at("outputs"));
  CHECK(ma.at("config_fnv1a") == mb.at("config_fnv1a"));
  CHECK(ma.at("seed") == 11);
  CHECK(ma.at("threads") == 1);
  CHECK(mb.at("threads") == 3);
}
