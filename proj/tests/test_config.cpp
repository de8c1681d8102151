#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mvsde/config.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/experiment.hpp"

using namespace mvsde;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path write_temp(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& text) {
    std::filesystem::create_directories(dir);
    const auto p = dir / name;
    std::ofstream out(p);
    out << text;
    return p;
}

}  // namespace

TEST_CASE("config parser reads every scalar type") {
    const ParamTable t = parse_config_text(
        "count = 12\n"
        "rate = 2.5\n"
        "tiny = 1e-3\n"
        "on = true\n"
        "off = false\n"
        "name = \"hello world\"\n");
    REQUIRE(t.require_int("count") == 12);
    REQUIRE(t.require_real("rate") == 2.5);
    REQUIRE(t.require_real("tiny") == 1e-3);
    REQUIRE(t.get_bool("on", false));
    REQUIRE_FALSE(t.get_bool("off", true));
    REQUIRE(t.require_string("name") == "hello world");
    // Integers promote to reals on demand; the reverse direction is an error.
    REQUIRE(t.require_real("count") == 12.0);
    REQUIRE_THROWS_AS(t.require_int("rate"), ConfigError);
}

TEST_CASE("config parser reads arrays of each element type") {
    const ParamTable t = parse_config_text(
        "ints = [1, 2, 3]\n"
        "reals = [0.5, 1.5]\n"
        "mixed = [1, 2.5]\n"
        "names = [\"a\", \"b, with comma\"]\n"
        "empty = []\n");
    REQUIRE(t.get_int_array("ints") == std::vector<std::int64_t>{1, 2, 3});
    REQUIRE(t.get_real_array("reals") == std::vector<double>{0.5, 1.5});
    REQUIRE(t.get_real_array("mixed") == std::vector<double>{1.0, 2.5});
    const auto names = t.get_string_array("names");
    REQUIRE(names.size() == 2);
    REQUIRE(names[1] == "b, with comma");
    REQUIRE(t.get_real_array("empty").empty());
    // Int arrays promote to real arrays; the reverse narrows and is an error,
    // as is asking for an array where a scalar sits.
    REQUIRE(t.get_real_array("ints") == std::vector<double>{1.0, 2.0, 3.0});
    REQUIRE_THROWS_AS(t.get_int_array("reals"), ConfigError);
    const ParamTable scalar = parse_config_text("x = 1\n");
    REQUIRE_THROWS_AS(scalar.get_real_array("x"), ConfigError);
}

TEST_CASE("section headers prefix keys and comments are stripped") {
    const ParamTable t = parse_config_text(
        "# a full-line comment\n"
        "top = 1\n"
        "[run]\n"
        "workers = 4  # trailing comment\n"
        "label = \"keep # inside\"\n"
        "\n"
        "[model.inner]\n"
        "x = 2.0\n");
    REQUIRE(t.require_int("top") == 1);
    REQUIRE(t.require_int("run.workers") == 4);
    REQUIRE(t.require_string("run.label") == "keep # inside");
    REQUIRE(t.require_real("model.inner.x") == 2.0);

    const ParamTable run = t.section("run");
    REQUIRE(run.has("workers"));
    REQUIRE(run.has("label"));
    REQUIRE_FALSE(run.has("top"));
}

TEST_CASE("config parser rejects malformed lines with the line number") {
    REQUIRE_THROWS_MATCHES(parse_config_text("a = 1\n[broken\n"), ConfigError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("line 2")));
    REQUIRE_THROWS_AS(parse_config_text("just some words\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("= 3\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("a = [1, 2\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("a = \"open\n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("a = \n"), ConfigError);
    REQUIRE_THROWS_AS(parse_config_text("a = not_a_literal\n"), ConfigError);
}

TEST_CASE("missing keys report their name; fallbacks fill in") {
    const ParamTable t = parse_config_text("a = 1\n");
    REQUIRE(t.get_int("missing", 7) == 7);
    REQUIRE(t.get_real("missing", 0.25) == 0.25);
    REQUIRE(t.get_string("missing", "dflt") == "dflt");
    REQUIRE_THROWS_MATCHES(t.require_int("missing"), ConfigError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("missing")));
}

TEST_CASE("overrides parse like config values and replace entries") {
    ParamTable t = parse_config_text("run.workers = 1\n");
    apply_override(t, "run.workers=8");
    REQUIRE(t.require_int("run.workers") == 8);
    apply_override(t, "fresh.key=2.5");
    REQUIRE(t.require_real("fresh.key") == 2.5);
    apply_override(t, "arr=[1,2]");
    REQUIRE(t.get_int_array("arr") == std::vector<std::int64_t>{1, 2});
    apply_override(t, "s=\"text\"");
    REQUIRE(t.require_string("s") == "text");
    REQUIRE_THROWS_AS(apply_override(t, "no_equals"), ConfigError);
    REQUIRE_THROWS_AS(apply_override(t, "=3"), ConfigError);
}

TEST_CASE("merge prefers the other table; erase removes keys") {
    ParamTable base = parse_config_text("a = 1\nb = 2\n");
    const ParamTable top = parse_config_text("b = 20\nc = 30\n");
    base.merge(top);
    REQUIRE(base.require_int("a") == 1);
    REQUIRE(base.require_int("b") == 20);
    REQUIRE(base.require_int("c") == 30);
    base.erase("a");
    REQUIRE_FALSE(base.has("a"));
    REQUIRE(base.keys() == std::vector<std::string>{"b", "c"});
}

TEST_CASE("config files load from disk and missing paths raise an I/O error") {
    const auto dir = std::filesystem::temp_directory_path() / "mvsde_cfg_load";
    const auto p = write_temp(dir, "one.toml", "x = 5\n");
    REQUIRE(load_config_file(p.string()).require_int("x") == 5);
    REQUIRE_THROWS_AS(load_config_file((dir / "absent.toml").string()), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("include chains resolve relative to the including file") {
    const auto dir = std::filesystem::temp_directory_path() / "mvsde_cfg_inc";
    const auto sub = dir / "sub";
    write_temp(dir, "base.toml", "a = 1\nb = 2\n");
    write_temp(sub, "deep.toml", "c = 3\n");
    // Relative include paths resolve against mid.toml's own directory.
    write_temp(sub, "mid.toml", "include = \"deep.toml\"\nb = 20\n");
    const auto top =
        write_temp(dir, "top.toml", "include = [\"base.toml\", \"sub/mid.toml\"]\nd = 4\n");

    const ParamTable t = load_experiment_config(top);
    REQUIRE(t.require_int("a") == 1);
    REQUIRE(t.require_int("b") == 20);  // mid.toml overrides base.toml
    REQUIRE(t.require_int("c") == 3);
    REQUIRE(t.require_int("d") == 4);
    REQUIRE_FALSE(t.has("include"));  // resolved, not forwarded
    std::filesystem::remove_all(dir);
}

TEST_CASE("the including file wins over every included value") {
    const auto dir = std::filesystem::temp_directory_path() / "mvsde_cfg_win";
    write_temp(dir, "defaults.toml", "x = 1\ny = 2\n");
    const auto top = write_temp(dir, "top.toml", "include = \"defaults.toml\"\nx = 10\n");
    const ParamTable t = load_experiment_config(top);
    REQUIRE(t.require_int("x") == 10);
    REQUIRE(t.require_int("y") == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("include cycles stop with a config error instead of looping") {
    const auto dir = std::filesystem::temp_directory_path() / "mvsde_cfg_cycle";
    write_temp(dir, "a.toml", "include = \"b.toml\"\n");
    const auto b = write_temp(dir, "b.toml", "include = \"a.toml\"\n");
    REQUIRE_THROWS_MATCHES(load_experiment_config(b), ConfigError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("too deep")));
    std::filesystem::remove_all(dir);
}

TEST_CASE("include must be a path or list of paths") {
    const auto dir = std::filesystem::temp_directory_path() / "mvsde_cfg_badinc";
    const auto p = write_temp(dir, "bad.toml", "include = 3\n");
    REQUIRE_THROWS_AS(load_experiment_config(p), ConfigError);
    std::filesystem::remove_all(dir);
}
