#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "seqnas/distill.hpp"
#include "seqnas/hashing.hpp"
#include "seqnas/json_io.hpp"

using namespace seqnas;

namespace {

ArchId id_of(char c)
{
    return ArchId(std::string(64, c));
}

LogitMatrix filled(std::size_t rows, std::size_t cols, float start)
{
    LogitMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values[i] = start + static_cast<float>(i);
    return m;
}

TrainedRecord record(char c, double score)
{
    TrainedRecord r;
    r.arch_id = id_of(c);
    r.score = score;
    r.preds_ref = r.arch_id;
    return r;
}

}  // namespace

TEST_SUITE("distill")
{
    TEST_CASE("cache file format")
    {
        testing::TempDir dir("cache");
        PredictionCache cache(dir.path());
        LogitMatrix m(1, 2);
        m.values = {1.0f, -2.0f};
        cache.write(id_of('a'), m, "fp");

        std::ifstream in(dir / PredictionCache::data_file_name(id_of('a')), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        const std::string expected{'\x00', '\x00', '\x80', '\x3f', '\x00', '\x00', '\x00', '\xc0'};
        CHECK(bytes == expected);

        const auto desc = read_json_file((dir / PredictionCache::descriptor_file_name(id_of('a'))).string());
        CHECK(desc == json{{"rows", 1}, {"cols", 2}, {"fingerprint", "fp"}});
        CHECK(cache.read(id_of('a')) == m);
        CHECK(PredictionCache::data_file_name(id_of('a')) == "preds_" + std::string(64, 'a') + ".f32");

        std::size_t files = 0;
        for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path()))
            ++files;
        CHECK(files == 2);
    }

    TEST_CASE("entries are write-once")
    {
        testing::TempDir dir("cache");
        PredictionCache cache(dir.path());
        const auto m = filled(3, 2, 0.5f);
        cache.write(id_of('b'), m, "fp");
        CHECK_NOTHROW(cache.write(id_of('b'), m, "fp"));
        CHECK_THROWS_AS(cache.write(id_of('b'), filled(3, 2, 1.5f), "fp"), CacheError);
        CHECK_THROWS_AS(cache.write(id_of('b'), m, "other"), CacheError);
        CHECK_FALSE(cache.contains(id_of('c')));
        CHECK_THROWS_AS(cache.read(id_of('c')), CacheError);

        // A data file without its descriptor is not an entry.
        std::ofstream(dir / PredictionCache::data_file_name(id_of('d'))) << "xxxx";
        CHECK_FALSE(cache.contains(id_of('d')));
    }

    TEST_CASE("example order fingerprint")
    {
        const std::vector<std::string> ids{"r0", "r1"};
        CHECK(example_order_fingerprint(ids) == sha256_hex("r0\nr1\n"));
        const std::vector<std::string> swapped{"r1", "r0"};
        CHECK(example_order_fingerprint(ids) != example_order_fingerprint(swapped));
    }

    TEST_CASE("teacher selection")
    {
        testing::TempDir dir("cache");
        PredictionCache cache(dir.path());
        std::vector<TrainedRecord> records{record('1', 0.5), record('4', 0.9), record('3', 0.7),
                                           record('2', 0.9), record('5', 0.1)};
        for (const auto& r : records)
            cache.write(r.arch_id, filled(2, 2, 0.0f), "fp");

        const auto ens = select_teachers(records, 3, cache);
        CHECK(ens.teacher_ids == std::vector<ArchId>{id_of('2'), id_of('4'), id_of('3')});
        CHECK(select_teachers(records, 10, cache).teacher_ids.size() == 5);

        records.push_back(record('6', 0.3));
        CHECK_THROWS_AS(select_teachers(records, 3, cache), CacheError);
        CHECK_THROWS_AS(select_teachers(std::vector<TrainedRecord>{}, 3, cache), DataError);
    }

    TEST_CASE("ensemble targets average raw logits")
    {
        testing::TempDir dir("cache");
        PredictionCache cache(dir.path());
        LogitMatrix a(2, 2), b(2, 2), c(2, 2);
        a.values = {1, 2, 3, 4};
        b.values = {3, 2, 1, 0};
        c.values = {2, 5, 2, 5};
        cache.write(id_of('a'), a, "fp");
        cache.write(id_of('b'), b, "fp");
        cache.write(id_of('c'), c, "fp");

        const auto all = ensemble_targets(cache, TeacherEnsemble{{id_of('a'), id_of('b'), id_of('c')}});
        CHECK(all.rows == 2);
        CHECK(all(0, 0) == doctest::Approx(2.0));
        CHECK(all(0, 1) == doctest::Approx(3.0));
        CHECK(all(1, 0) == doctest::Approx(2.0));
        CHECK(all(1, 1) == doctest::Approx(3.0));

        const auto sub = ensemble_targets(cache, TeacherEnsemble{{id_of('a'), id_of('b')}}, std::vector<std::size_t>{1});
        CHECK(sub.rows == 1);
        CHECK(sub(0, 0) == doctest::Approx(2.0));
        CHECK(sub(0, 1) == doctest::Approx(2.0));
        CHECK_THROWS_AS(ensemble_targets(cache, TeacherEnsemble{{id_of('a')}}, std::vector<std::size_t>{2}),
                        ShapeError);

        cache.write(id_of('e'), filled(2, 2, 0.0f), "different order");
        CHECK_THROWS_AS(ensemble_targets(cache, TeacherEnsemble{{id_of('a'), id_of('e')}}), CacheError);
        CHECK_THROWS_AS(ensemble_targets(cache, TeacherEnsemble{}), DataError);
    }

    TEST_CASE("distillation loss")
    {
        Matrix<float> s(1, 3);
        s.values = {1.0f, 2.0f, 3.0f};
        Matrix<double> t(1, 3);
        t.values = {1.0, 0.0, 6.0};
        CHECK(kd_loss(s, t) == doctest::Approx((0.0 + 4.0 + 9.0) / 3.0));
        CHECK(kd_loss(s, s) == 0.0);
        CHECK_THROWS_AS(kd_loss(s, Matrix<double>(3, 1)), ShapeError);
    }
}
