#include <doctest.h>

#include <atomic>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "seqnas/engine.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/state_store.hpp"

using namespace seqnas;

namespace {

// Forwards to a synthetic backend and counts calls.
class CountingEvaluator final : public Evaluator {
public:
    explicit CountingEvaluator(const SearchSpaceConfig& space, double noise = 0.0)
        : inner_(SyntheticBenchConfig{.bench_seed = 5, .noise_std = noise}, space)
    {
    }
    void bind(const EvalContext& ctx) override { inner_.bind(ctx); }
    EvalResult evaluate(const EvalRequest& req) override
    {
        ++calls;
        return inner_.evaluate(req);
    }
    bool supports_kd() const override { return inner_.supports_kd(); }
    bool deterministic() const override { return true; }

    std::atomic<int> calls{0};

private:
    SyntheticEvaluator inner_;
};

// Fails the first `failures` calls with the given error.
template <class E>
class FlakyEvaluator final : public Evaluator {
public:
    FlakyEvaluator(const SearchSpaceConfig& space, int failures) : inner_(SyntheticBenchConfig{}, space), left_(failures)
    {
    }
    void bind(const EvalContext& ctx) override { inner_.bind(ctx); }
    EvalResult evaluate(const EvalRequest& req) override
    {
        ++calls;
        if (left_ > 0) {
            --left_;
            if constexpr (std::is_same_v<E, MissError>)
                throw MissError(req.arch_id.str());
            else
                throw TransportError("flaky");
        }
        return inner_.evaluate(req);
    }
    bool supports_kd() const override { return false; }
    bool deterministic() const override { return true; }

    int calls = 0;

private:
    SyntheticEvaluator inner_;
    int left_;
};

SearchConfig small_search()
{
    SearchConfig c;
    c.n_init = 20;
    c.n_iter = 30;
    c.m_iterations = 4;
    c.l_candidates = 10;
    c.kd_start_after = 30;
    c.seed = 42;
    return c;
}

PredictorConfig light_predictor()
{
    PredictorConfig p;
    p.bag_count = 3;
    p.gbdt.trees = 30;
    return p;
}

std::vector<ArchId> ids(const SearchState& s)
{
    std::vector<ArchId> out;
    for (const auto& r : s.records)
        out.push_back(r.arch_id);
    return out;
}

}  // namespace

TEST_SUITE("engine")
{
    TEST_CASE("config validation and JSON round trip")
    {
        auto c = small_search();
        CHECK_NOTHROW(validate_search_config(c));
        json j = c;
        CHECK(j.get<SearchConfig>() == c);

        auto bad = c;
        bad.l_candidates = 31;
        CHECK_THROWS_AS(validate_search_config(bad), ConfigError);
        bad = c;
        bad.parallelism = 0;
        CHECK_THROWS_AS(validate_search_config(bad), ConfigError);
        bad = c;
        bad.n_init = 4;
        CHECK_THROWS_AS(validate_search_config(bad), ConfigError);
        j["bogus"] = 1;
        CHECK_THROWS_AS(j.get<SearchConfig>(), ConfigError);
    }

    TEST_CASE("random search yields distinct architectures")
    {
        const auto space = default_space();
        CountingEvaluator e(space);
        auto c = small_search();
        c.kd_enabled = false;
        const auto st = run_random_search(50, false, c, space, e);
        CHECK(st.records.size() == 50);
        CHECK(st.complete);
        const auto list = ids(st);
        CHECK(std::set<ArchId>(list.begin(), list.end()).size() == 50);
        CHECK(e.calls == 50);
        for (const auto& r : st.records) {
            CHECK(r.arch_id == canonical_id(r.spec));
            CHECK(r.avec == encode(r.spec, space));
            CHECK(r.teacher_ids.empty());
        }
    }

    TEST_CASE("distillation starts after the threshold")
    {
        testing::TempDir dir("kd");
        const auto space = default_space();
        CountingEvaluator e(space);
        RunOptions opts;
        opts.cache_dir = dir.path();
        const auto st = run_random_search(50, true, small_search(), space, e, opts);
        REQUIRE(st.records.size() == 50);
        for (std::size_t i = 0; i < 50; ++i) {
            INFO("record " << i + 1);
            CHECK(st.records[i].teacher_ids.size() == (i < 30 ? 0u : 3u));
            CHECK(st.records[i].preds_ref);
        }
        // Teachers for the first distilled record are the top three before it.
        std::vector<TrainedRecord> before(st.records.begin(), st.records.begin() + 30);
        std::sort(before.begin(), before.end(), [](const auto& a, const auto& b) {
            return a.score != b.score ? a.score > b.score : a.arch_id < b.arch_id;
        });
        CHECK(st.records[30].teacher_ids ==
              std::vector<ArchId>{before[0].arch_id, before[1].arch_id, before[2].arch_id});
    }

    TEST_CASE("search produces the planned number of distinct records")
    {
        testing::TempDir dir("search");
        const auto space = default_space();
        CountingEvaluator e(space);
        std::vector<IterationTrace> traces;
        RunOptions opts;
        opts.cache_dir = dir.path();
        opts.on_iteration = [&](const IterationTrace& t) { traces.push_back(t); };
        const auto st = run_search(small_search(), space, light_predictor(), e, opts);
        CHECK(st.records.size() == 60);
        CHECK(st.planned_records() == 60);
        CHECK(st.iteration == 4);
        const auto list = ids(st);
        CHECK(std::set<ArchId>(list.begin(), list.end()).size() == 60);

        REQUIRE(traces.size() == 4);
        std::set<ArchId> seen(list.begin(), list.begin() + 20);
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const auto& t = traces[i];
            CHECK(t.iteration == static_cast<int>(i) + 1);
            CHECK(t.fit_rows == 20 + 10 * i);
            CHECK(t.candidates.size() == 30);
            CHECK(t.selected.size() == 10);
            for (const auto& id : t.candidates)
                CHECK(seen.count(id) == 0);
            for (std::size_t k = 0; k < 10; ++k)
                CHECK(t.selected[k] == list[20 + 10 * i + k]);
            seen.insert(t.selected.begin(), t.selected.end());
        }
        CHECK(st.records[19].teacher_ids.empty());
        CHECK(st.records[35].teacher_ids.size() == 3);
    }

    TEST_CASE("same seed, same run; different seed, different run")
    {
        const auto space = default_space();
        CountingEvaluator a(space), b(space), c(space);
        auto cfg = small_search();
        cfg.kd_enabled = false;
        const auto s1 = run_search(cfg, space, light_predictor(), a);
        const auto s2 = run_search(cfg, space, light_predictor(), b);
        CHECK(ids(s1) == ids(s2));
        cfg.seed = 43;
        CHECK(ids(run_search(cfg, space, light_predictor(), c)) != ids(s1));
    }

    TEST_CASE("parallel evaluation commits the same records")
    {
        const auto space = default_space();
        CountingEvaluator a(space), b(space);
        auto cfg = small_search();
        cfg.kd_enabled = false;
        const auto serial = run_search(cfg, space, light_predictor(), a);
        cfg.parallelism = 4;
        const auto parallel = run_search(cfg, space, light_predictor(), b);
        CHECK(ids(serial) == ids(parallel));
    }

    TEST_CASE("interrupted runs resume to the same result")
    {
        const auto space = default_space();
        CountingEvaluator full_eval(space);
        testing::TempDir full_dir("full");
        RunOptions full_opts;
        full_opts.state_dir = full_dir / "run";
        const auto full = run_search(small_search(), space, light_predictor(), full_eval, full_opts);

        for (int stop : {1, 20, 25, 41}) {
            INFO("stop after " << stop);
            testing::TempDir dir2("resume");
            RunOptions opts;
            opts.stop_after_batches = stop;
            opts.state_dir = dir2 / "run";
            CountingEvaluator e2(space);
            const auto cut = run_search(small_search(), space, light_predictor(), e2, opts);
            CHECK_FALSE(cut.complete);
            CHECK(cut.records.size() == static_cast<std::size_t>(stop));
            CHECK(load_state(dir2 / "run").records.size() == static_cast<std::size_t>(stop));

            CountingEvaluator e3(space);
            const auto resumed = resume(dir2 / "run", e3);
            CHECK(resumed.complete);
            CHECK(e3.calls == 60 - stop);
            CHECK(ids(resumed) == ids(full));
            for (std::size_t i = 0; i < resumed.records.size(); ++i)
                CHECK(resumed.records[i].teacher_ids == full.records[i].teacher_ids);
        }
    }

    TEST_CASE("resuming a finished run evaluates nothing")
    {
        testing::TempDir dir("done");
        const auto space = default_space();
        CountingEvaluator e(space);
        RunOptions opts;
        opts.state_dir = dir / "run";
        const auto st = run_random_search(12, false, small_search(), space, e, opts);
        CountingEvaluator again(space);
        const auto r = resume(dir / "run", again);
        CHECK(again.calls == 0);
        CHECK(ids(r) == ids(st));
        CHECK_THROWS_AS(run_random_search(12, false, small_search(), space, again, opts), ConfigError);
    }

    TEST_CASE("uncommitted trailing records are dropped on resume")
    {
        testing::TempDir dir("trail");
        const auto space = default_space();
        CountingEvaluator e(space);
        RunOptions opts;
        opts.state_dir = dir / "run";
        opts.stop_after_batches = 5;
        run_random_search(10, false, small_search(), space, e, opts);
        const auto records = dir / "run" / state::kRecordsFile;
        std::string lines;
        {
            std::ifstream in(records);
            std::string first;
            std::getline(in, first);
            lines = first;
        }
        // A crash between appending and moving the commit point leaves an extra line.
        std::ofstream(records, std::ios::app) << lines << "\n";
        CHECK(load_state(dir / "run").records.size() == 5);
        CountingEvaluator again(space);
        const auto r = resume(dir / "run", again);
        CHECK(r.records.size() == 10);
        CHECK(again.calls == 5);
        const auto list = ids(r);
        CHECK(std::set<ArchId>(list.begin(), list.end()).size() == 10);
    }

    TEST_CASE("damaged state is reported")
    {
        testing::TempDir dir("damaged");
        const auto space = default_space();
        CountingEvaluator e(space);
        RunOptions opts;
        opts.state_dir = dir / "run";
        run_random_search(6, false, small_search(), space, e, opts);
        const auto records = dir / "run" / state::kRecordsFile;
        std::filesystem::resize_file(records, std::filesystem::file_size(records) / 2);
        try {
            load_state(dir / "run");
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& err) {
            CHECK(std::string(err.what()).find(state::kRecordsFile) != std::string::npos);
        }
        CHECK_THROWS_AS(resume(dir / "run", e), IntegrityError);

        testing::TempDir dir2("damaged2");
        opts.state_dir = dir2 / "run";
        run_random_search(6, false, small_search(), space, e, opts);
        std::ofstream(dir2 / "run" / state::kProgressFile) << "{not json";
        CHECK_THROWS_AS(load_state(dir2 / "run"), IntegrityError);
    }

    TEST_CASE("a live lock blocks a second owner")
    {
        testing::TempDir dir("lock");
        const auto space = default_space();
        CountingEvaluator e(space);
        RunOptions opts;
        opts.state_dir = dir / "run";
        opts.stop_after_batches = 2;
        run_random_search(6, false, small_search(), space, e, opts);
        {
            state::DirectoryLock held(dir / "run");
            CHECK_THROWS_AS(resume(dir / "run", e), LockError);
            CHECK_THROWS_AS(state::DirectoryLock(dir / "run"), LockError);
        }
        // A lock naming a process that no longer exists is taken over.
        std::ofstream(dir / "run" / state::kLockFile) << "999999999";
        CHECK(resume(dir / "run", e).complete);
        CHECK_FALSE(std::filesystem::exists(dir / "run" / state::kLockFile));
    }

    TEST_CASE("transient failures are retried, misses are not")
    {
        const auto space = default_space();
        auto cfg = small_search();
        cfg.eval_retries = 2;
        FlakyEvaluator<TransportError> flaky(space, 2);
        CHECK(run_random_search(5, false, cfg, space, flaky).records.size() == 5);
        CHECK(flaky.calls == 7);

        FlakyEvaluator<TransportError> broken(space, 100);
        CHECK_THROWS_AS(run_random_search(5, false, cfg, space, broken), TransportError);
        CHECK(broken.calls == 3);

        FlakyEvaluator<MissError> miss(space, 1);
        CHECK_THROWS_AS(run_random_search(5, false, cfg, space, miss), MissError);
        CHECK(miss.calls == 1);
    }

    TEST_CASE("a space smaller than the budget is exhausted")
    {
        SearchSpaceConfig tiny;
        tiny.stem_kernel_options = {3};
        tiny.encoder_enabled = false;
        tiny.decoder_enabled = false;
        tiny.head_pooling_options = {Pooling::max};
        tiny.head_spatial_dropout_options = {false};
        REQUIRE(cardinality(tiny) == 2);
        CountingEvaluator e(tiny);
        auto cfg = small_search();
        cfg.kd_enabled = false;
        CHECK_THROWS_AS(run_random_search(3, false, cfg, tiny, e), ExhaustionError);
        CHECK(run_random_search(2, false, cfg, tiny, e).records.size() == 2);
    }

    TEST_CASE("top-k curve")
    {
        SearchState st;
        for (double s : {0.5, 0.7, 0.6, 0.9}) {
            TrainedRecord r;
            r.score = s;
            st.records.push_back(r);
        }
        const auto curve = report_top3_curve(st);
        REQUIRE(curve.size() == 4);
        const std::vector<double> expected{0.5, 0.6, 0.6, (0.7 + 0.6 + 0.9) / 3};
        for (std::size_t t = 0; t < 4; ++t) {
            CHECK(curve[t].first == t + 1);
            CHECK(curve[t].second == doctest::Approx(expected[t]));
        }
        CHECK_THROWS_AS(report_top3_curve(SearchState{}), DataError);
    }

    TEST_CASE("best record breaks ties by id")
    {
        SearchState st;
        TrainedRecord a, b;
        a.arch_id = ArchId(std::string(64, 'b'));
        b.arch_id = ArchId(std::string(64, 'a'));
        a.score = b.score = 0.8;
        st.records = {a, b};
        CHECK(st.best().arch_id == b.arch_id);
        CHECK_THROWS_AS(SearchState{}.best(), DataError);
    }
}
