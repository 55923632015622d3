#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqnas/evaluators.hpp"
#include "seqnas/json_io.hpp"
#include "seqnas/records.hpp"
#include "seqnas/search_space.hpp"
#include "seqnas/surrogate.hpp"

namespace seqnas {

struct SearchConfig {
    int n_init = 100;
    int n_iter = 100;
    int m_iterations = 40;
    int l_candidates = 15;
    bool kd_enabled = true;
    int kd_start_after = 30;
    int kd_top_k = 3;
    double kd_weight = 1.0;
    std::uint64_t seed = 0;
    int parallelism = 1;
    SamplingMode sampling = SamplingMode::per_factor;
    int epochs = 10;
    // Extra attempts per evaluation before the run aborts.
    int eval_retries = 2;

    bool operator==(const SearchConfig&) const = default;
};

// Throws ConfigError.
void validate_search_config(const SearchConfig& cfg);

void to_json(json& j, const SearchConfig& cfg);
void from_json(const json& j, SearchConfig& cfg);
void to_json(json& j, const PredictorConfig& cfg);
void from_json(const json& j, PredictorConfig& cfg);
void to_json(json& j, const TrainedRecord& r);
// Also checks arch_id == canonical_id(spec); avec is checked by the loader
// that knows the space.
void from_json(const json& j, TrainedRecord& r);

enum class RunKind { search, random_search };

struct SearchState {
    RunKind kind = RunKind::search;
    SearchConfig search;
    SearchSpaceConfig space;
    PredictorConfig predictor;
    // Random search only.
    int random_budget = 0;
    bool random_kd = false;
    // Opaque description of the backend, kept so a run can be resumed from
    // its directory alone.
    json evaluator = json::object();

    // Completed surrogate iterations (0 while the initial sample is running).
    int iteration = 0;
    std::vector<TrainedRecord> records;
    bool complete = false;

    std::size_t planned_records() const;
    // Highest score, ties by ascending arch id. Throws DataError when empty.
    const TrainedRecord& best() const;
};

// What one surrogate iteration looked at; handed to RunOptions::on_iteration.
struct IterationTrace {
    int iteration = 0;
    std::size_t fit_rows = 0;
    std::vector<ArchId> candidates;
    std::vector<ArchId> selected;
    std::vector<ArchId> teachers;
};

struct RunOptions {
    // Persist here after every committed batch; a fresh run requires the
    // directory to be absent or empty.
    std::optional<std::filesystem::path> state_dir;
    // Teacher cache when no state directory is used.
    std::optional<std::filesystem::path> cache_dir;
    // Stop (leaving the state resumable) after this many committed batches.
    std::optional<int> stop_after_batches;
    std::function<void(const IterationTrace&)> on_iteration;
    std::function<void(const std::string&)> log;
    json evaluator_description = json::object();
};

SearchState run_search(const SearchConfig& cfg, const SearchSpaceConfig& space, const PredictorConfig& pred_cfg,
                       Evaluator& evaluator, const RunOptions& opts = {});

SearchState run_random_search(int budget, bool kd_enabled, const SearchConfig& cfg, const SearchSpaceConfig& space,
                              Evaluator& evaluator, const RunOptions& opts = {});

// Continues the run persisted in state_dir. opts.state_dir is ignored.
SearchState resume(const std::filesystem::path& state_dir, Evaluator& evaluator, const RunOptions& opts = {});

// Read-only view of a persisted run (no lock taken); only committed batches
// are visible.
SearchState load_state(const std::filesystem::path& state_dir);

// value(t) = mean of the min(k, t) largest scores among records 1..t.
std::vector<std::pair<std::size_t, double>> report_top3_curve(const SearchState& state, std::size_t k = 3);

}  // namespace seqnas
