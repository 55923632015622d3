#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "seqnas/benchdata.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/json_io.hpp"

using namespace seqnas;

namespace {

BenchRecord make_record(const ArchitectureSpec& spec, const SearchSpaceConfig& space, const std::string& dataset,
                        BenchMethod method, double score)
{
    BenchRecord r;
    r.dataset = dataset;
    r.method = method;
    r.spec = spec;
    for (auto b : encode(spec, space).bits)
        r.avec.push_back(b);
    r.best_score = score;
    r.metric_name = "gini";
    return r;
}

std::vector<BenchRecord> sample_records(std::size_t n, const SearchSpaceConfig& space, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<BenchRecord> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(make_record(sample_architecture(space, rng), space, i % 2 ? "ABank" : "RBchurn",
                                  i % 3 ? BenchMethod::ours : BenchMethod::random, rng.uniform() / 3.0));
    return out;
}

std::vector<std::string> lines_of(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

}  // namespace

TEST_SUITE("benchdata")
{
    TEST_CASE("write and read round trip bit-exactly")
    {
        testing::TempDir dir("bench");
        const auto space = default_space();
        const auto records = sample_records(40, space, 8);
        write_bench(dir / "b.jsonl", records, space);

        BenchHeader header;
        auto back = read_bench(dir / "b.jsonl", &header);
        CHECK(header.layout_fp == feature_layout(space).fingerprint);
        CHECK(header.layout_len == 43);
        CHECK(header.fields ==
              std::vector<std::string>{"dataset", "method", "spec", "avec", "best_score", "metric_name"});
        CHECK(back == records);

        const auto lines = lines_of(dir / "b.jsonl");
        REQUIRE(lines.size() == 41);
        const auto head = json::parse(lines[0]);
        CHECK(head["format"] == "seqnas-bench");
        CHECK(head["version"] == 1);
    }

    TEST_CASE("records without specs are resolved from their vectors")
    {
        testing::TempDir dir("bench");
        const auto space = default_space();
        auto records = sample_records(5, space, 3);
        const auto with_specs = records;
        for (auto& r : records)
            r.spec.reset();
        write_bench(dir / "b.jsonl", records, space);
        auto back = read_bench(dir / "b.jsonl");
        CHECK_FALSE(back[0].spec);
        resolve_specs(back, space);
        CHECK(back == with_specs);

        auto wrong = with_specs;
        wrong[1].avec[0] ^= 1;
        wrong[1].avec[1] ^= 1;
        CHECK_THROWS_AS(resolve_specs(wrong, space), FormatError);
    }

    TEST_CASE("malformed files name the offending line")
    {
        testing::TempDir dir("bench");
        const auto space = default_space();
        auto records = sample_records(3, space, 5);
        write_bench(dir / "b.jsonl", records, space);
        auto lines = lines_of(dir / "b.jsonl");
        auto third = json::parse(lines[2]);
        third["avec"].erase(third["avec"].size() - 1);
        lines[2] = third.dump();
        {
            std::ofstream out(dir / "bad.jsonl");
            for (const auto& l : lines)
                out << l << "\n";
        }
        try {
            read_bench(dir / "bad.jsonl");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("bad.jsonl:3") != std::string::npos);
        }

        std::ofstream(dir / "noheader.jsonl") << lines[1] << "\n";
        CHECK_THROWS_AS(read_bench(dir / "noheader.jsonl"), FormatError);

        auto bad = records;
        bad[0].avec.pop_back();
        CHECK_THROWS_AS(write_bench(dir / "x.jsonl", bad, space), FormatError);
        bad = records;
        bad[0].avec[0] ^= 1;
        CHECK_THROWS_AS(write_bench(dir / "x.jsonl", bad, space), FormatError);
    }

    TEST_CASE("a header-only file holds no records")
    {
        testing::TempDir dir("bench");
        const auto space = default_space();
        write_bench(dir / "empty.jsonl", std::vector<BenchRecord>{}, space);
        CHECK(lines_of(dir / "empty.jsonl").size() == 1);
        CHECK(read_bench(dir / "empty.jsonl").empty());
    }

    TEST_CASE("histogram")
    {
        const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
        const auto h = histogram(s, 2);
        REQUIRE(h.size() == 2);
        CHECK(h[0].lower == doctest::Approx(0.1));
        CHECK(h[0].count == 2);
        CHECK(h[1].lower == doctest::Approx(0.5));
        CHECK(h[1].count == 2);

        const std::vector<double> same{0.4, 0.4, 0.4};
        const auto one = histogram(same, 5);
        REQUIRE(one.size() == 1);
        CHECK(one[0].count == 3);
        CHECK_THROWS_AS(histogram(std::vector<double>{}, 3), DataError);

        const std::vector<double> edges{0.0, 1.0, 0.5};
        const auto e = histogram(edges, 4);
        CHECK(e.back().count == 1);
        std::size_t total = 0;
        for (const auto& b : e)
            total += b.count;
        CHECK(total == 3);
    }

    TEST_CASE("surrogate dataset and partitions")
    {
        const auto space = default_space();
        const auto records = sample_records(5, space, 9);
        const auto fp = feature_layout(space).fingerprint;
        const auto ds = to_surrogate_dataset(records, fp);
        REQUIRE(ds.features.size() == 5);
        REQUIRE(ds.scores.size() == 5);
        CHECK(ds.features[0].size() == 43);
        CHECK(ds.scores[2] == records[2].best_score);
        CHECK(ds.features[3] == encode(*records[3].spec, space));

        // Datasets alternate RBchurn/ABank; every third record is random.
        const auto counts = partition_counts(records);
        CHECK(counts.size() == 4);
        CHECK(counts.at({"RBchurn", BenchMethod::random}) == 1);
        CHECK(counts.at({"ABank", BenchMethod::ours}) == 1);
        CHECK(counts.at({"RBchurn", BenchMethod::ours}) == 2);
        CHECK(counts.at({"ABank", BenchMethod::random}) == 1);
    }

    TEST_CASE("CSV import")
    {
        testing::TempDir dir("bench");
        const auto space = paper_space();
        const auto records = sample_records(3, space, 12);
        {
            std::ofstream out(dir / "t.csv");
            out << "dataset,method,best_score,avec,metric_name\n";
            for (const auto& r : records) {
                std::string bits;
                for (int b : r.avec)
                    bits += static_cast<char>('0' + b);
                out << r.dataset << "," << to_string(r.method) << "," << json(r.best_score).dump() << "," << bits
                    << ",gini\n";
            }
        }
        const auto imported = import_bench(dir / "t.csv", ImportFormat::csv, space);
        CHECK(imported == records);

        std::ofstream(dir / "short.csv") << "dataset,method,best_score,avec\nABank,ours,0.5,0101\n";
        CHECK_THROWS_AS(import_bench(dir / "short.csv", ImportFormat::csv, space), FormatError);
    }

    TEST_CASE("export from trained records")
    {
        const auto space = default_space();
        Rng rng(1);
        TrainedRecord t;
        t.spec = sample_architecture(space, rng);
        t.arch_id = canonical_id(t.spec);
        t.avec = encode(t.spec, space);
        t.score = 0.25;
        t.metric_name = "gini";
        const auto out = export_records(std::vector<TrainedRecord>{t}, "AGE", BenchMethod::ours);
        REQUIRE(out.size() == 1);
        CHECK(out[0] == make_record(t.spec, space, "AGE", BenchMethod::ours, 0.25));
    }
}
