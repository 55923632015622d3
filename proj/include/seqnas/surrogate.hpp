#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seqnas/avec.hpp"
#include "seqnas/rng.hpp"

namespace seqnas {

enum class PredictorKind { gbdt_bag, mlp_ensemble };

std::string_view to_string(PredictorKind k);
PredictorKind parse_predictor_kind(std::string_view s);

struct GbdtParams {
    int trees = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_samples_leaf = 3;
};

struct MlpParams {
    std::vector<int> hidden{64, 64};
    int epochs = 200;
    double learning_rate = 0.01;
    int members = 8;
    int batch_size = 32;
};

struct PredictorConfig {
    PredictorKind kind = PredictorKind::gbdt_bag;
    int bag_count = 8;
    GbdtParams gbdt;
    MlpParams mlp;
};

// Throws ConfigError.
void validate_predictor_config(const PredictorConfig& cfg);

struct ScorePrediction {
    double mean = 0.0;
    double std = 0.0;
};

// Row-major 0/1 matrix.
struct BinaryMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> data;

    const std::uint8_t* row(std::size_t i) const { return data.data() + i * cols; }
};

namespace gbdt {

// Split nodes test one binary feature: 0 goes left, 1 goes right.
struct Node {
    std::int32_t feature = -1;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<Node> nodes;
    double predict(const std::uint8_t* row) const;
};

// Least-absolute-deviation gradient boosting: the ensemble starts at the
// target median, every tree is grown on the current residuals, and each
// leaf moves by learning_rate times the median residual it holds.
struct Booster {
    double base = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;

    double predict(const std::uint8_t* row) const;
};

// `train_mae`, when given, receives the training MAE before the first tree
// and after every boosting round.
Booster fit_lad(const BinaryMatrix& x, std::span<const double> y, const GbdtParams& params,
                std::vector<double>* train_mae = nullptr);

}  // namespace gbdt

// Fully connected regressor with ReLU hidden layers and a linear output.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> widths, std::vector<double> params);

    // He-uniform initialisation; widths = {inputs, hidden..., 1}.
    static Mlp initialize(int inputs, const std::vector<int>& hidden, Rng& rng);

    double predict(std::span<const double> x) const;

    // Mean absolute error over the rows of x (row-major, inputs() columns)
    // and its gradient with respect to params().
    double loss_and_gradient(std::span<const double> x, std::span<const double> y, std::vector<double>& grad) const;

    void train(std::span<const double> x, std::span<const double> y, const MlpParams& params, Rng& rng);

    int inputs() const { return widths_.empty() ? 0 : widths_.front(); }
    const std::vector<int>& widths() const { return widths_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& params() { return params_; }

private:
    std::vector<int> widths_;
    std::vector<double> params_;
};

struct PredictorModel {
    PredictorKind kind = PredictorKind::gbdt_bag;
    std::string layout_fp;
    std::size_t n_features = 0;
    std::vector<gbdt::Booster> boosters;
    std::vector<Mlp> networks;

    std::size_t member_count() const { return kind == PredictorKind::gbdt_bag ? boosters.size() : networks.size(); }
    std::vector<double> member_predictions(const std::uint8_t* row) const;
};

// Mean and sample standard deviation (divisor B-1) of member outputs.
ScorePrediction summarize_members(std::span<const double> members);

BinaryMatrix to_matrix(std::span<const FeatureVector> features);

PredictorModel fit(std::span<const FeatureVector> features, std::span<const double> scores,
                   const PredictorConfig& cfg, Rng& rng);

std::vector<ScorePrediction> predict(const PredictorModel& model, std::span<const FeatureVector> features);

double eval_mae(const PredictorModel& model, std::span<const FeatureVector> features, std::span<const double> scores);

// Versioned little-endian binary checkpoint; round trips bit-exactly.
void save_model(const PredictorModel& model, const std::filesystem::path& path);
PredictorModel load_model(const std::filesystem::path& path);

}  // namespace seqnas
