#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "seqnas/cli.hpp"
#include "seqnas/errors.hpp"

using namespace seqnas;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string trim(std::string s)
{
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r'))
        s.pop_back();
    return s;
}

std::size_t count_lines(const std::string& s)
{
    std::size_t n = 0;
    for (char c : s)
        n += c == '\n';
    return n;
}

void write_small_config(const std::filesystem::path& p)
{
    std::ofstream(p) << R"({"search": {"n_init": 10, "n_iter": 12, "m_iterations": 2, "l_candidates": 5,
                                       "kd_start_after": 8},
                           "predictor": {"bag_count": 2, "gbdt": {"trees": 20}},
                           "evaluator": {"kind": "synthetic", "bench_seed": 3}})";
}

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("cardinality")
    {
        auto r = run({"cardinality", "--preset", "paper"});
        CHECK(r.code == 0);
        CHECK(trim(r.out) == "4705272");
        CHECK(trim(run({"cardinality"}).out) == "42347448");
        CHECK(trim(run({"cardinality", "--encoder-only"}).out) == "130701");
    }

    TEST_CASE("usage errors exit with 2")
    {
        CHECK(run({"frobnicate"}).code == 2);
        CHECK(run({}).code == 2);
        CHECK(run({"sample", "-n", "0"}).code == 2);
        CHECK(run({"cardinality", "--preset", "nope"}).code == 2);
        CHECK(run({"random-search"}).code == 2);
    }

    TEST_CASE("help exits with 0")
    {
        const auto r = run({"--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("search") != std::string::npos);
    }

    TEST_CASE("sample, encode and decode agree")
    {
        const auto s = run({"--seed", "4", "sample", "-n", "5"});
        REQUIRE(s.code == 0);
        CHECK(count_lines(s.out) == 5);
        CHECK(run({"--seed", "4", "sample", "-n", "5"}).out == s.out);

        std::istringstream lines(s.out);
        for (std::string spec; std::getline(lines, spec);) {
            const auto e = run({"encode", spec});
            REQUIRE(e.code == 0);
            const std::string bits = trim(e.out);
            CHECK(bits.size() == 43);
            const auto d = run({"decode", bits});
            REQUIRE(d.code == 0);
            CHECK(json::parse(d.out) == json::parse(spec)["spec"]);
            CHECK(trim(run({"encode", json::parse(spec)["spec"].dump()}).out) == bits);
        }
    }

    TEST_CASE("runtime errors are one line")
    {
        const auto r = run({"decode", "0101"});
        CHECK(r.code == 1);
        CHECK(r.err.rfind("error: decode: ", 0) == 0);
        CHECK(count_lines(r.err) == 1);

        const auto v = run({"validate", R"({"stem": {"kernel": 4}})"});
        CHECK(v.code == 1);
        CHECK(v.err.rfind("error: ", 0) == 0);
    }

    TEST_CASE("dry run writes nothing")
    {
        testing::TempDir dir("cli");
        write_small_config(dir / "cfg.json");
        const auto state = dir / "state";
        const auto r = run({"--config", (dir / "cfg.json").string(), "--state-dir", state.string(), "--dry-run",
                            "search"});
        CHECK(r.code == 0);
        CHECK_FALSE(std::filesystem::exists(state));
        CHECK(r.out.find("\"n_init\"") != std::string::npos);
    }

    TEST_CASE("search, report and resume")
    {
        testing::TempDir dir("cli");
        write_small_config(dir / "cfg.json");
        const auto state = (dir / "state").string();
        const auto r = run({"--config", (dir / "cfg.json").string(), "--state-dir", state, "--seed", "9", "search"});
        REQUIRE(r.code == 0);

        const auto rep = run({"--state-dir", state, "report", "--curve", "top3"});
        REQUIRE(rep.code == 0);
        CHECK(rep.out.rfind("t,value\n", 0) == 0);
        CHECK(count_lines(rep.out) == 21);

        CHECK(run({"--state-dir", state, "resume"}).code == 0);
        // The directory already holds a run.
        const auto again = run({"--config", (dir / "cfg.json").string(), "--state-dir", state, "search"});
        CHECK(again.code == 1);
        CHECK(again.err.rfind("error: config: ", 0) == 0);

        const auto bench = (dir / "b.jsonl").string();
        CHECK(run({"--state-dir", state, "--out", bench, "bench", "export", "--dataset", "AGE"}).code == 0);
        const auto h = run({"bench", "histogram", bench, "--bins", "4"});
        CHECK(h.code == 0);
        CHECK(count_lines(h.out) >= 2);
        const auto sur = run({"bench", "to-surrogate", bench});
        CHECK(sur.code == 0);
        CHECK(count_lines(sur.out) == 21);
    }

    TEST_CASE("run config parsing")
    {
        const auto cfg = parse_run_config(json{{"preset", "paper"}, {"search", {{"seed", 5}}}});
        CHECK(cfg.space == paper_space());
        CHECK(cfg.search.seed == 5);
        CHECK_THROWS_AS(parse_run_config(json{{"surch", json::object()}}), ConfigError);
        CHECK_THROWS_AS(make_evaluator(json{{"kind", "magic"}}, default_space()), ConfigError);
    }
}
