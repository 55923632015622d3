#include "seqnas/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <set>
#include <thread>

#include "seqnas/distill.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/selector.hpp"
#include "seqnas/state_store.hpp"

namespace seqnas {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// configuration documents

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what)
{
    if (!j.is_object())
        throw ConfigError(std::string(what) + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
}

template <typename T>
void read_field(const json& j, const char* key, T& out)
{
    if (auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config key '") + key + "' has the wrong type");
        }
    }
}

}  // namespace

void validate_search_config(const SearchConfig& c)
{
    if (c.n_init <= 0 || c.n_iter <= 0 || c.m_iterations < 0 || c.l_candidates <= 0)
        throw ConfigError("n_init, n_iter and l_candidates must be positive and m_iterations non-negative");
    if (c.l_candidates > c.n_iter)
        throw ConfigError("l_candidates must not exceed n_iter");
    if (c.m_iterations > 0 && c.n_init < 5)
        throw ConfigError("n_init must be at least 5 to fit the predictor");
    if (c.kd_start_after < 0 || c.kd_top_k < 1)
        throw ConfigError("kd_start_after must be non-negative and kd_top_k at least 1");
    if (!(c.kd_weight >= 0.0) || !std::isfinite(c.kd_weight))
        throw ConfigError("kd_weight must be a non-negative number");
    if (c.parallelism < 1)
        throw ConfigError("parallelism must be positive");
    if (c.epochs < 1)
        throw ConfigError("epochs must be positive");
    if (c.eval_retries < 0)
        throw ConfigError("eval_retries must be non-negative");
}

void to_json(json& j, const SearchConfig& c)
{
    j = json{{"n_init", c.n_init},
             {"n_iter", c.n_iter},
             {"m_iterations", c.m_iterations},
             {"l_candidates", c.l_candidates},
             {"kd_enabled", c.kd_enabled},
             {"kd_start_after", c.kd_start_after},
             {"kd_top_k", c.kd_top_k},
             {"kd_weight", c.kd_weight},
             {"seed", c.seed},
             {"parallelism", c.parallelism},
             {"sampling", to_string(c.sampling)},
             {"epochs", c.epochs},
             {"eval_retries", c.eval_retries}};
}

void from_json(const json& j, SearchConfig& c)
{
    check_keys(j,
               {"n_init", "n_iter", "m_iterations", "l_candidates", "kd_enabled", "kd_start_after", "kd_top_k",
                "kd_weight", "seed", "parallelism", "sampling", "epochs", "eval_retries"},
               "search config");
    read_field(j, "n_init", c.n_init);
    read_field(j, "n_iter", c.n_iter);
    read_field(j, "m_iterations", c.m_iterations);
    read_field(j, "l_candidates", c.l_candidates);
    read_field(j, "kd_enabled", c.kd_enabled);
    read_field(j, "kd_start_after", c.kd_start_after);
    read_field(j, "kd_top_k", c.kd_top_k);
    read_field(j, "kd_weight", c.kd_weight);
    read_field(j, "seed", c.seed);
    read_field(j, "parallelism", c.parallelism);
    read_field(j, "epochs", c.epochs);
    read_field(j, "eval_retries", c.eval_retries);
    std::string sampling(to_string(c.sampling));
    read_field(j, "sampling", sampling);
    c.sampling = parse_sampling_mode(sampling);
}

void to_json(json& j, const PredictorConfig& c)
{
    j = json{{"kind", to_string(c.kind)},
             {"bag_count", c.bag_count},
             {"gbdt",
              {{"trees", c.gbdt.trees},
               {"max_depth", c.gbdt.max_depth},
               {"learning_rate", c.gbdt.learning_rate},
               {"min_samples_leaf", c.gbdt.min_samples_leaf}}},
             {"mlp",
              {{"hidden", c.mlp.hidden},
               {"epochs", c.mlp.epochs},
               {"learning_rate", c.mlp.learning_rate},
               {"members", c.mlp.members},
               {"batch_size", c.mlp.batch_size}}}};
}

void from_json(const json& j, PredictorConfig& c)
{
    check_keys(j, {"kind", "bag_count", "gbdt", "mlp"}, "predictor config");
    std::string kind(to_string(c.kind));
    read_field(j, "kind", kind);
    c.kind = parse_predictor_kind(kind);
    read_field(j, "bag_count", c.bag_count);
    if (auto it = j.find("gbdt"); it != j.end()) {
        check_keys(*it, {"trees", "max_depth", "learning_rate", "min_samples_leaf"}, "gbdt config");
        read_field(*it, "trees", c.gbdt.trees);
        read_field(*it, "max_depth", c.gbdt.max_depth);
        read_field(*it, "learning_rate", c.gbdt.learning_rate);
        read_field(*it, "min_samples_leaf", c.gbdt.min_samples_leaf);
    }
    if (auto it = j.find("mlp"); it != j.end()) {
        check_keys(*it, {"hidden", "epochs", "learning_rate", "members", "batch_size"}, "mlp config");
        read_field(*it, "hidden", c.mlp.hidden);
        read_field(*it, "epochs", c.mlp.epochs);
        read_field(*it, "learning_rate", c.mlp.learning_rate);
        read_field(*it, "members", c.mlp.members);
        read_field(*it, "batch_size", c.mlp.batch_size);
    }
}

void to_json(json& j, const TrainedRecord& r)
{
    json teachers = json::array();
    for (const auto& t : r.teacher_ids)
        teachers.push_back(t.str());
    j = json{{"arch_id", r.arch_id.str()},
             {"spec", r.spec},
             {"avec", r.avec.to_bit_string()},
             {"score", r.score},
             {"metric_name", r.metric_name},
             {"preds_ref", r.preds_ref ? json(r.preds_ref->str()) : json(nullptr)},
             {"epoch_count", r.epoch_count},
             {"wall_seconds", r.wall_seconds},
             {"teacher_ids", teachers}};
}

void from_json(const json& j, TrainedRecord& r)
{
    r.arch_id = ArchId(j.at("arch_id").get<std::string>());
    r.spec = j.at("spec").get<ArchitectureSpec>();
    if (canonical_id(r.spec) != r.arch_id)
        throw FormatError("arch_id does not match spec");
    r.avec = FeatureVector::from_bit_string(j.at("avec").get<std::string>());
    r.score = j.at("score").get<double>();
    if (!std::isfinite(r.score))
        throw FormatError("score is not finite");
    r.metric_name = j.value("metric_name", std::string{});
    r.preds_ref.reset();
    if (const auto& p = j.at("preds_ref"); !p.is_null())
        r.preds_ref = ArchId(p.get<std::string>());
    r.epoch_count = j.value("epoch_count", 0);
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.teacher_ids.clear();
    for (const auto& t : j.value("teacher_ids", json::array()))
        r.teacher_ids.emplace_back(t.get<std::string>());
}

// ---------------------------------------------------------------------------
// state

std::size_t SearchState::planned_records() const
{
    if (kind == RunKind::random_search)
        return static_cast<std::size_t>(random_budget);
    return static_cast<std::size_t>(search.n_init) +
           static_cast<std::size_t>(search.m_iterations) * static_cast<std::size_t>(search.l_candidates);
}

const TrainedRecord& SearchState::best() const
{
    if (records.empty())
        throw DataError("no trained records");
    const TrainedRecord* best = &records.front();
    for (const auto& r : records)
        if (r.score > best->score || (r.score == best->score && r.arch_id < best->arch_id))
            best = &r;
    return *best;
}

std::vector<std::pair<std::size_t, double>> report_top3_curve(const SearchState& state, std::size_t k)
{
    if (state.records.empty())
        throw DataError("cannot report on an empty state");
    if (k == 0)
        throw ConfigError("k must be positive");
    std::vector<std::pair<std::size_t, double>> curve;
    std::vector<double> top;  // descending, at most k
    for (std::size_t t = 0; t < state.records.size(); ++t) {
        const double s = state.records[t].score;
        top.insert(std::upper_bound(top.begin(), top.end(), s, std::greater<>()), s);
        if (top.size() > k)
            top.pop_back();
        double sum = 0.0;
        for (double v : top)
            sum += v;
        curve.emplace_back(t + 1, sum / static_cast<double>(top.size()));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// the search loop

namespace {

struct Planned {
    ArchId id;
    ArchitectureSpec spec;
};

// `count` architectures whose ids are neither in `exclude` nor repeated.
std::vector<Planned> unique_sample(const SearchSpaceConfig& space, SamplingMode mode, Rng& rng, std::size_t count,
                                   const std::set<ArchId>& exclude, std::uint64_t max_attempts)
{
    std::vector<Planned> out;
    std::set<ArchId> seen;
    std::uint64_t attempts = 0;
    while (out.size() < count) {
        if (attempts++ >= max_attempts)
            throw ExhaustionError("could not sample " + std::to_string(count) + " fresh architectures within " +
                                  std::to_string(max_attempts) + " attempts (found " + std::to_string(out.size()) +
                                  ")");
        ArchitectureSpec spec = sample_architecture(space, rng, mode);
        ArchId id = canonical_id(spec);
        if (exclude.count(id) || !seen.insert(id).second)
            continue;
        out.push_back(Planned{std::move(id), std::move(spec)});
    }
    return out;
}

bool retryable(const std::exception_ptr& e)
{
    try {
        std::rethrow_exception(e);
    } catch (const MissError&) {
        return false;
    } catch (const HandshakeError&) {
        return false;
    } catch (const EvalError&) {
        return true;
    } catch (...) {
        return false;
    }
}

class Runner {
public:
    Runner(SearchState& state, Evaluator& evaluator, const RunOptions& opts, std::optional<fs::path> dir)
        : st_(state), evaluator_(evaluator), opts_(opts), dir_(std::move(dir))
    {
        std::optional<fs::path> cache_dir;
        if (dir_)
            cache_dir = *dir_ / state::kPredictionsDir;
        else if (opts_.cache_dir)
            cache_dir = opts_.cache_dir;
        if (cache_dir) {
            fs::create_directories(*cache_dir);
            cache_ = std::make_unique<PredictionCache>(*cache_dir);
        }
        layout_fp_ = feature_layout(st_.space).fingerprint;
        for (const auto& r : st_.records)
            trained_.insert(r.arch_id);
        committed_ = st_.records.size();
        evaluator_.bind(EvalContext{st_.space, cache_.get(), st_.search.parallelism});
    }

    void run()
    {
        if (st_.complete)
            return;
        if (st_.kind == RunKind::random_search) {
            Rng rng = Rng::derive(st_.search.seed, "random");
            const auto plan = unique_sample(st_.space, st_.search.sampling, rng,
                                            static_cast<std::size_t>(st_.random_budget), {},
                                            10000ull * static_cast<std::uint64_t>(st_.random_budget));
            run_plain_phase(plan, st_.random_kd);
            return;
        }

        const auto& c = st_.search;
        Rng init_rng = Rng::derive(c.seed, "init");
        const auto plan = unique_sample(st_.space, c.sampling, init_rng, static_cast<std::size_t>(c.n_init), {},
                                        10000ull * static_cast<std::uint64_t>(c.n_init));
        if (!run_plain_phase(plan, c.kd_enabled))
            return;

        for (int i = std::max(1, st_.iteration + 1); i <= c.m_iterations; ++i)
            if (!run_iteration(i))
                return;
    }

private:
    // Initial sample or random search: the plan is evaluated in order, in
    // chunks that never straddle the distillation threshold. Returns false
    // when the run was told to stop.
    bool run_plain_phase(const std::vector<Planned>& plan, bool kd)
    {
        const std::size_t limit = std::min(plan.size(), st_.records.size());
        for (std::size_t k = 0; k < limit; ++k)
            if (st_.records[k].arch_id != plan[k].id)
                throw IntegrityError("records.jsonl record " + std::to_string(k + 1) +
                                     " does not match the run's sampling plan");

        const auto par = static_cast<std::size_t>(st_.search.parallelism);
        const auto threshold = static_cast<std::size_t>(st_.search.kd_start_after);
        while (st_.records.size() < plan.size()) {
            const std::size_t start = st_.records.size();
            std::size_t end = std::min(plan.size(), start + par);
            if (kd && start < threshold)
                end = std::min(end, threshold);
            const auto teachers = kd ? teachers_from(start) : std::vector<ArchId>{};
            std::vector<Planned> chunk(plan.begin() + static_cast<std::ptrdiff_t>(start),
                                       plan.begin() + static_cast<std::ptrdiff_t>(end));
            if (!commit(evaluate_chunk(chunk, teachers)))
                return false;
        }
        return true;
    }

    bool run_iteration(int i)
    {
        const auto& c = st_.search;
        const std::size_t prefix = static_cast<std::size_t>(c.n_init) +
                                   static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(c.l_candidates);
        if (st_.records.size() < prefix)
            throw IntegrityError("records.jsonl holds fewer records than iteration " + std::to_string(i) + " needs");

        // Everything below is a function of the first `prefix` records and
        // the seed, so an interrupted iteration is recomputed identically.
        std::vector<FeatureVector> x;
        std::vector<double> y;
        std::set<ArchId> known;
        for (std::size_t k = 0; k < prefix; ++k) {
            x.push_back(st_.records[k].avec);
            x.back().layout_fp = layout_fp_;
            y.push_back(st_.records[k].score);
            known.insert(st_.records[k].arch_id);
        }
        Rng fit_rng = Rng::derive(c.seed, "fit", static_cast<std::uint64_t>(i));
        const PredictorModel model = fit(x, y, st_.predictor, fit_rng);

        Rng rng = Rng::derive(c.seed, "iter", static_cast<std::uint64_t>(i));
        const auto candidates = unique_sample(st_.space, c.sampling, rng, static_cast<std::size_t>(c.n_iter), known,
                                              10000ull * static_cast<std::uint64_t>(c.n_iter));
        std::vector<FeatureVector> features;
        for (const auto& cand : candidates)
            features.push_back(encode(cand.spec, st_.space));
        const auto picks =
            thompson_select(SelectionRequest{predict(model, features), static_cast<std::size_t>(c.l_candidates)}, rng);
        std::vector<Planned> selected;
        for (auto p : picks)
            selected.push_back(candidates[p]);
        const auto teachers = c.kd_enabled ? teachers_from(prefix) : std::vector<ArchId>{};

        if (opts_.on_iteration) {
            IterationTrace trace{i, prefix, {}, {}, teachers};
            for (const auto& cand : candidates)
                trace.candidates.push_back(cand.id);
            for (const auto& s : selected)
                trace.selected.push_back(s.id);
            opts_.on_iteration(trace);
        }

        const std::size_t done = st_.records.size() - prefix;
        for (std::size_t k = 0; k < done; ++k)
            if (st_.records[prefix + k].arch_id != selected[k].id)
                throw IntegrityError("records.jsonl record " + std::to_string(prefix + k + 1) +
                                     " does not match iteration " + std::to_string(i) + "'s selection");

        const auto par = static_cast<std::size_t>(c.parallelism);
        for (std::size_t start = done; start < selected.size(); start += par) {
            const std::size_t end = std::min(selected.size(), start + par);
            std::vector<Planned> chunk(selected.begin() + static_cast<std::ptrdiff_t>(start),
                                       selected.begin() + static_cast<std::ptrdiff_t>(end));
            if (!commit(evaluate_chunk(chunk, teachers)))
                return false;
        }
        log("iteration " + std::to_string(i) + "/" + std::to_string(c.m_iterations) + ": best " +
            std::to_string(st_.best().score));
        return true;
    }

    std::vector<ArchId> teachers_from(std::size_t count) const
    {
        if (!cache_ || !evaluator_.supports_kd() || count < static_cast<std::size_t>(st_.search.kd_start_after))
            return {};
        std::vector<TrainedRecord> eligible;
        for (std::size_t k = 0; k < count; ++k)
            if (st_.records[k].preds_ref && cache_->contains(st_.records[k].arch_id))
                eligible.push_back(st_.records[k]);
        if (eligible.empty())
            return {};
        return select_teachers(eligible, static_cast<std::size_t>(st_.search.kd_top_k), *cache_).teacher_ids;
    }

    TrainedRecord evaluate_one(const Planned& item, const std::vector<ArchId>& teachers)
    {
        EvalRequest req;
        req.arch_id = item.id;
        req.spec = item.spec;
        req.seed = Rng::derive(st_.search.seed, "train:" + item.id.str()).next();
        req.teacher_ids = teachers;
        req.kd_weight = teachers.empty() ? 0.0 : st_.search.kd_weight;
        req.budget.epochs = st_.search.epochs;

        for (int attempt = 0;; ++attempt) {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                EvalResult res = evaluator_.evaluate(req);
                if (res.arch_id != req.arch_id)
                    throw CorrelationError("evaluator answered for " + res.arch_id.str() + " instead of " +
                                           req.arch_id.str());
                if (!std::isfinite(res.score))
                    throw EvalError("evaluator returned a non-finite score for " + req.arch_id.str());
                TrainedRecord r;
                r.arch_id = item.id;
                r.spec = item.spec;
                r.avec = encode(item.spec, st_.space);
                r.score = res.score;
                r.metric_name = res.metric_name;
                r.preds_ref = res.preds_ref;
                r.epoch_count = res.per_epoch.empty() ? req.budget.epochs : static_cast<int>(res.per_epoch.size());
                r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                r.teacher_ids = teachers;
                return r;
            } catch (...) {
                auto e = std::current_exception();
                if (!retryable(e) || attempt >= st_.search.eval_retries)
                    throw;
                log("evaluation of " + req.arch_id.str() + " failed, retrying");
            }
        }
    }

    std::vector<TrainedRecord> evaluate_chunk(const std::vector<Planned>& chunk, const std::vector<ArchId>& teachers)
    {
        for (const auto& item : chunk)
            if (trained_.count(item.id))
                throw IntegrityError("architecture " + item.id.str() + " would be trained twice");

        std::vector<std::optional<TrainedRecord>> results(chunk.size());
        std::vector<std::exception_ptr> errors(chunk.size());
        if (chunk.size() == 1) {
            results[0] = evaluate_one(chunk[0], teachers);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> workers;
            for (std::size_t w = 0; w < chunk.size(); ++w)
                workers.emplace_back([&] {
                    for (std::size_t k; (k = next++) < chunk.size();) {
                        try {
                            results[k] = evaluate_one(chunk[k], teachers);
                        } catch (...) {
                            errors[k] = std::current_exception();
                        }
                    }
                });
            for (auto& w : workers)
                w.join();
            for (const auto& e : errors)
                if (e)
                    std::rethrow_exception(e);
        }
        std::vector<TrainedRecord> out;
        for (auto& r : results)
            out.push_back(std::move(*r));
        return out;
    }

    // Returns false once the configured number of batches has been committed.
    bool commit(std::vector<TrainedRecord> batch)
    {
        for (auto& r : batch) {
            trained_.insert(r.arch_id);
            st_.records.push_back(std::move(r));
        }
        const std::size_t n = st_.records.size();
        const auto n_init = static_cast<std::size_t>(st_.search.n_init);
        if (st_.kind == RunKind::search && n > n_init)
            st_.iteration = static_cast<int>((n - n_init) / static_cast<std::size_t>(st_.search.l_candidates));
        st_.complete = n == st_.planned_records();
        if (dir_)
            state::commit(*dir_, std::span(st_.records).last(n - committed_), st_);
        committed_ = n;
        ++batches_;
        return st_.complete || !opts_.stop_after_batches || batches_ < *opts_.stop_after_batches;
    }

    void log(const std::string& msg) const
    {
        if (opts_.log)
            opts_.log(msg);
    }

    SearchState& st_;
    Evaluator& evaluator_;
    const RunOptions& opts_;
    std::optional<fs::path> dir_;
    std::unique_ptr<PredictionCache> cache_;
    std::string layout_fp_;
    std::set<ArchId> trained_;
    std::size_t committed_ = 0;
    int batches_ = 0;
};

SearchState start(SearchState st, Evaluator& evaluator, const RunOptions& opts)
{
    validate_search_config(st.search);
    validate_predictor_config(st.predictor);
    st.space = validate_config(st.space);
    st.evaluator = opts.evaluator_description;

    if (!opts.state_dir) {
        Runner runner(st, evaluator, opts, std::nullopt);
        runner.run();
        return st;
    }
    const fs::path dir = *opts.state_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create state directory " + dir.string() + ": " + ec.message());
    state::DirectoryLock lock(dir);
    state::initialize(dir, st);
    Runner runner(st, evaluator, opts, dir);
    runner.run();
    return st;
}

}  // namespace

SearchState run_search(const SearchConfig& cfg, const SearchSpaceConfig& space, const PredictorConfig& pred_cfg,
                       Evaluator& evaluator, const RunOptions& opts)
{
    SearchState st;
    st.kind = RunKind::search;
    st.search = cfg;
    st.space = space;
    st.predictor = pred_cfg;
    return start(std::move(st), evaluator, opts);
}

SearchState run_random_search(int budget, bool kd_enabled, const SearchConfig& cfg, const SearchSpaceConfig& space,
                              Evaluator& evaluator, const RunOptions& opts)
{
    if (budget <= 0)
        throw ConfigError("random-search budget must be positive");
    SearchState st;
    st.kind = RunKind::random_search;
    st.search = cfg;
    st.space = space;
    st.random_budget = budget;
    st.random_kd = kd_enabled;
    return start(std::move(st), evaluator, opts);
}

SearchState resume(const fs::path& state_dir, Evaluator& evaluator, const RunOptions& opts)
{
    if (!fs::is_directory(state_dir))
        throw IntegrityError("no state directory at " + state_dir.string());
    state::DirectoryLock lock(state_dir);
    SearchState st = state::read(state_dir);
    if (st.complete)
        return st;
    state::discard_uncommitted(state_dir, st.records.size());
    Runner runner(st, evaluator, opts, state_dir);
    runner.run();
    return st;
}

SearchState load_state(const fs::path& state_dir)
{
    return state::read(state_dir);
}

}  // namespace seqnas
