#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "seqnas/avec.hpp"
#include "seqnas/distill.hpp"
#include "seqnas/search_space.hpp"

namespace seqnas {

struct EvalBudget {
    int epochs = 10;
};

struct EvalRequest {
    ArchId arch_id;
    ArchitectureSpec spec;
    std::uint64_t seed = 0;
    std::vector<ArchId> teacher_ids;
    double kd_weight = 0.0;
    EvalBudget budget;
};

// score == max(per_epoch) whenever per_epoch is non-empty.
struct EvalResult {
    ArchId arch_id;
    double score = 0.0;
    std::string metric_name;
    std::vector<double> per_epoch;
    std::optional<ArchId> preds_ref;
};

// What a run shares with its backend before the first request.
struct EvalContext {
    SearchSpaceConfig space;
    const PredictionCache* cache = nullptr;
    int parallelism = 1;
};

// evaluate() may be called concurrently from up to `parallelism` threads.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    virtual void bind(const EvalContext& ctx) = 0;
    virtual EvalResult evaluate(const EvalRequest& req) = 0;

    // True when results carry cached predictions usable as teachers.
    virtual bool supports_kd() const = 0;
    // Same request always gives the same result.
    virtual bool deterministic() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic benchmark: score = sigmoid(w.phi + sum_{i<j} Q_ij phi_i phi_j) + noise,
// phi = encode(spec). w and the sparse symmetric Q come from bench_seed; the
// noise draw is keyed by (bench_seed, arch_id).

struct SyntheticBenchConfig {
    std::uint64_t bench_seed = 0;
    double noise_std = 0.0;
    double weight_std = 0.35;
    double interaction_density = 0.05;
    double interaction_std = 0.3;
    // Shape of the stand-in logit matrix written to the cache when one is bound.
    std::size_t prediction_rows = 16;
    std::size_t prediction_cols = 2;
};

class SyntheticEvaluator final : public Evaluator {
public:
    SyntheticEvaluator(const SyntheticBenchConfig& cfg, const SearchSpaceConfig& space);

    void bind(const EvalContext& ctx) override;
    EvalResult evaluate(const EvalRequest& req) override;
    bool supports_kd() const override { return cache_ != nullptr; }
    bool deterministic() const override { return true; }

    // Noise-free value of the hidden function.
    double clean_score(const FeatureVector& phi) const;
    static std::string metric_name() { return "synthetic"; }
    static std::vector<std::string> example_ids(std::size_t rows);

private:
    SyntheticBenchConfig cfg_;
    SearchSpaceConfig space_;
    std::vector<double> linear_;
    // (i, j, q) with i < j.
    struct Interaction {
        std::size_t i, j;
        double q;
    };
    std::vector<Interaction> interactions_;
    const PredictionCache* cache_ = nullptr;
};

// ---------------------------------------------------------------------------
// Table lookup over a loaded bench dataset. No training happens.

struct BenchEntry {
    double best_score = 0.0;
    std::string metric_name;
};

class BenchLookupEvaluator final : public Evaluator {
public:
    explicit BenchLookupEvaluator(std::map<ArchId, BenchEntry> table) : table_(std::move(table)) {}

    void bind(const EvalContext&) override {}
    // Throws MissError for architectures absent from the table.
    EvalResult evaluate(const EvalRequest& req) override;
    bool supports_kd() const override { return false; }
    bool deterministic() const override { return true; }

    std::size_t size() const { return table_.size(); }

private:
    std::map<ArchId, BenchEntry> table_;
};

// ---------------------------------------------------------------------------
// External trainer over line-delimited JSON (stdin/stdout of a child process,
// or a TCP connection with the same messages).

constexpr int kProtocolVersion = 1;

struct ExternalEndpoint {
    std::vector<std::string> command;  // child process argv, or
    std::string host;                  // TCP host and port when command is empty
    int port = 0;

    // "tcp://host:port" or a whitespace-separated command line.
    static ExternalEndpoint parse(const std::string& text);
};

struct ExternalConfig {
    ExternalEndpoint endpoint;
    double timeout_seconds = 3600.0;
    int transport_retries = 2;
};

class TrainerConnection;

class ExternalEvaluator final : public Evaluator {
public:
    explicit ExternalEvaluator(ExternalConfig cfg);
    ~ExternalEvaluator() override;

    // Child processes run inside the cache directory so teacher and result
    // file names on the wire are bare preds_<id>.f32 names.
    void bind(const EvalContext& ctx) override;
    EvalResult evaluate(const EvalRequest& req) override;
    bool supports_kd() const override { return true; }
    bool deterministic() const override { return false; }

private:
    struct Slot {
        std::unique_ptr<TrainerConnection> conn;
        bool busy = false;
    };

    std::unique_ptr<TrainerConnection> open_connection();
    EvalResult exchange(TrainerConnection& conn, const EvalRequest& req);

    ExternalConfig cfg_;
    std::string space_hash_;
    std::filesystem::path work_dir_;
    const PredictionCache* cache_ = nullptr;
    std::mutex mutex_;
    std::condition_variable available_;
    std::vector<Slot> slots_;
};

}  // namespace seqnas
