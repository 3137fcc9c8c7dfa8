#include "support.hpp"

#include <hodl/hash.hpp>
#include <hodl/pipeline.hpp>
#include <hodl/synth.hpp>

#include <doctest.h>

#include <cstdlib>
#include <map>

using namespace hodl;
using namespace hodl::pipeline;
using hodl::testing::TempDir;
using hodl::testing::write_text;
using json = nlohmann::json;

namespace {

json small_run()
{
    return json{
        {"data_dir", "."},
        {"baskets", {{"ALL", json::array()}, {"BTC", {"BTC"}}}},
        {"model_baskets", {"ALL"}},
        {"intervals", {"1-30", "31-90", "91-180"}},
        {"horizons", {30, 90, 180}},
        {"n", 3000},
        {"selection", {{"bootstrap", 50}}},
        {"irf", {{"bootstrap", 200}}},
        {"workers", 2},
    };
}

std::map<std::string, std::string> tree_hashes(const std::filesystem::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = sha256_file(e.path());
    }
    return out;
}

int run_cli(const std::string& args)
{
    const int status = std::system((std::string(HODL_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("configuration errors")
{
    TempDir dir("config");
    synth::DemoOptions demo;
    demo.days = 400;
    synth::write_demo_dataset(dir.path(), demo);

    auto j = small_run();
    CHECK_NOTHROW(parse_config(j, dir.path()).validate());

    j["colour"] = "red";
    CHECK_THROWS_AS(parse_config(j, dir.path()), ConfigError);

    j = small_run();
    j["irf"]["bootstrap"] = 199;
    CHECK_THROWS_AS(parse_config(j, dir.path()).validate(), ConfigError);

    j = small_run();
    j["irf"]["alpha"] = 0.1;
    CHECK_THROWS_AS(parse_config(j, dir.path()), ConfigError);

    j = small_run();
    j["horizons"] = {30, 365};
    CHECK_THROWS_AS(parse_config(j, dir.path()).validate(), ConfigError);

    j = small_run();
    j["intervals"] = {"90-31"};
    CHECK_THROWS_AS(parse_config(j, dir.path()), ConfigError);

    j = small_run();
    j["model_baskets"] = {"SOL"};
    CHECK_THROWS_AS(parse_config(j, dir.path()).validate(), ConfigError);

    j = small_run();
    j["n"] = "many";
    CHECK_THROWS_AS(parse_config(j, dir.path()), ConfigError);

    CHECK_THROWS_AS(run_stages(parse_config(small_run(), dir.path()), {"plot"}), ConfigError);
}

TEST_CASE("config hash ignores paths and workers")
{
    auto a = parse_config(small_run(), "/tmp/a");
    auto b = parse_config(small_run(), "/tmp/b");
    b.workers = 7;
    CHECK(config_hash(a) == config_hash(b));
    b.seeds.irf = 10;
    CHECK(config_hash(a) != config_hash(b));
    const auto back = parse_config(config_to_json(a));
    CHECK(config_hash(back) == config_hash(a));
}

TEST_CASE("CLI exit codes")
{
    TempDir dir("cli");
    CHECK(run_cli("synth " + (dir / "data").string() + " --days 400 --n 100") == 0);
    CHECK(std::filesystem::is_regular_file(dir / "data" / "run.json"));
    CHECK(run_cli("all --config " + (dir / "missing.json").string()) == 1);
    write_text(dir / "bad.json", R"({"n": 10, "bogus": true})");
    CHECK(run_cli("all --config " + (dir / "bad.json").string()) == 1);
    // metrics before simulate has nothing to read
    CHECK(run_cli("metrics --config " + (dir / "data" / "run.json").string()) == 2);
    CHECK(run_cli("--definitely-not-an-option") == 1);
}

TEST_CASE("small end-to-end run is deterministic and resumable")
{
    TempDir dir("e2e");
    synth::DemoOptions demo;
    demo.days = 1500;
    synth::write_demo_dataset(dir / "data", demo);

    auto j = small_run();
    j["output_dir"] = "out1";
    const auto c1 = parse_config(j, dir / "data");
    std::vector<std::string> log;
    const auto first = run_pipeline(c1, [&](const std::string& m) { log.push_back(m); });
    REQUIRE(first.size() == stage_names.size());
    for (const auto& s : first) CHECK_FALSE(s.skipped);

    const auto out = c1.output_dir;
    for (const char* f : {"metrics/overall.csv", "metrics/key_statistics.csv", "select/ALL/selected_features.json",
                          "irf/irf_surface.csv", "irf/rankings.json", "manifest.json"}) {
        CHECK_MESSAGE(std::filesystem::is_regular_file(out / f), f);
    }
    CHECK(std::filesystem::is_regular_file(out / "episodes" / "ALL_1-30.bin"));
    CHECK(std::filesystem::is_regular_file(out / "episodes" / "BTC_91-180.bin"));
    CHECK_FALSE(std::filesystem::exists(out / "features" / "BTC"));

    SUBCASE("rerun with workers changed is byte-identical")
    {
        j["output_dir"] = "out2";
        j["workers"] = 1;
        const auto c2 = parse_config(j, dir / "data");
        run_pipeline(c2);
        CHECK(tree_hashes(c1.output_dir) == tree_hashes(c2.output_dir));
    }
    SUBCASE("resume skips finished stages")
    {
        const auto before = tree_hashes(out);
        const auto again = run_pipeline(c1);
        for (const auto& s : again) CHECK(s.skipped);

        std::filesystem::remove(out / "irf" / "irf_surface.csv");
        const auto third = run_pipeline(c1);
        for (const auto& s : third) CHECK_MESSAGE(s.skipped == (s.stage != "irf"), s.stage);
        CHECK(tree_hashes(out) == before);
    }
    SUBCASE("changing the IRF seed reruns IRF and report only")
    {
        auto c3 = c1;
        c3.seeds.irf = 10;
        const auto outcomes = run_pipeline(c3);
        for (const auto& s : outcomes) {
            CHECK_MESSAGE(s.skipped == (s.stage != "irf" && s.stage != "report"), s.stage);
        }
    }
}
