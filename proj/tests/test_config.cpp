#include <doctest.h>

#include "semdec/config.hpp"
#include "semdec/errors.hpp"

using namespace semdec;

TEST_CASE("key=value parsing with comments and whitespace") {
    const auto cfg = KeyValueConfig::from_string(
        "# header comment\n"
        "count = 10\n"
        "  size=32   # trailing comment\n"
        "palette = red, green ,blue\n"
        "\n"
        "ratio = 0.25\n"
        "flag = true\n");
    CHECK(cfg.get_int("count", 0) == 10);
    CHECK(cfg.get_int("size", 0) == 32);
    CHECK(cfg.get_double("ratio", 0) == doctest::Approx(0.25));
    CHECK(cfg.get_bool("flag", false));
    const auto palette = cfg.get_string_list("palette", {});
    REQUIRE(palette.size() == 3);
    CHECK(palette[0] == "red");
    CHECK(palette[1] == "green");
    CHECK(palette[2] == "blue");
}

TEST_CASE("missing keys fall back to defaults") {
    const auto cfg = KeyValueConfig::from_string("a = 1\n");
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK(cfg.get_string("missing", "x") == "x");
    CHECK(cfg.get_double_list("missing", {1.5}).size() == 1);
    CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("later assignments and merges override") {
    auto cfg = KeyValueConfig::from_string("a = 1\na = 2\n");
    CHECK(cfg.get_int("a", 0) == 2);
    cfg.merge(KeyValueConfig::from_string("a = 3\nb = 4\n"));
    CHECK(cfg.get_int("a", 0) == 3);
    CHECK(cfg.get_int("b", 0) == 4);
}

TEST_CASE("malformed input raises ConfigError") {
    CHECK_THROWS_AS(KeyValueConfig::from_string("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::from_string("= value\n"), ConfigError);
    const auto cfg = KeyValueConfig::from_string("n = abc\nb = maybe\n");
    CHECK_THROWS_AS(cfg.get_int("n", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::from_file("/nonexistent/path.conf"), ConfigError);
}

TEST_CASE("numeric lists") {
    const auto cfg = KeyValueConfig::from_string("xs = 0.6, 0.75, 0.9\nns = 2,4,8\n");
    const auto xs = cfg.get_double_list("xs", {});
    REQUIRE(xs.size() == 3);
    CHECK(xs[1] == doctest::Approx(0.75));
    const auto ns = cfg.get_int_list("ns", {});
    REQUIRE(ns.size() == 3);
    CHECK(ns[2] == 8);
}
