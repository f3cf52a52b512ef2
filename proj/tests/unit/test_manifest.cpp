#include "cream/manifest.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace cream;
namespace fs = std::filesystem;

TEST_CASE("manifest fields and relative paths")
{
    const auto m = parse_manifest(R"({
        "dump": "eval.crmf", "head": "/abs/head.crmh",
        "config": {"sigma": 4.5, "iters": 3, "lambda": 0.9, "tau_grid": "0:1:0.1",
                   "box_mode": "union", "seed": 18446744073709551615, "jobs": 2}
    })", "/data/run");
    CHECK(m.dump == fs::path("/data/run/eval.crmf"));
    CHECK(m.head == fs::path("/abs/head.crmh"));
    CHECK_FALSE(m.store.has_value());
    CHECK(m.config.sigma == 4.5);
    CHECK(m.config.iters == 3);
    CHECK(m.config.lambda == 0.9);
    CHECK(m.config.tau_grid == "0:1:0.1");
    CHECK(m.config.box_mode == "union");
    CHECK(m.config.seed == 18446744073709551615ull);
    CHECK(m.config.jobs == 2);
    CHECK_FALSE(m.config.tau.has_value());

    const auto again = parse_manifest(manifest_json(m));
    CHECK(again.dump == m.dump);
    CHECK(again.config.seed == m.config.seed);
    CHECK(again.config.sigma == m.config.sigma);
    CHECK(parse_manifest("{}").config.iters == std::nullopt);
}

TEST_CASE("manifest rejects unknown keys and wrong types")
{
    CHECK_THROWS_AS(parse_manifest(R"({"dumps": "x"})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest(R"({"config": {"simga": 1}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest(R"({"config": {"sigma": "8"}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest(R"({"config": {"iters": 2.5}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest(R"({"config": {"seed": -1}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest(R"({"config": []})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest(R"({"head": 3})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest("[1, 2]"), std::invalid_argument);
    CHECK_THROWS_AS(parse_manifest("{not json"), std::invalid_argument);
}

TEST_CASE("referenced files must exist")
{
    const auto dir = fs::temp_directory_path() / "cream_manifest";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "m.json") << R"({"dump": "eval.crmf"})";
    CHECK_THROWS_AS(read_manifest(dir / "m.json"), std::invalid_argument);
    std::ofstream(dir / "eval.crmf") << "x";
    CHECK(read_manifest(dir / "m.json").dump == dir / "eval.crmf");
    CHECK_THROWS(read_manifest(dir / "absent.json"));
}
