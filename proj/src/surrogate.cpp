#include "seqnas/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "seqnas/detail/little_endian.hpp"
#include "seqnas/errors.hpp"

namespace seqnas {

std::string_view to_string(PredictorKind k)
{
    return k == PredictorKind::gbdt_bag ? "gbdt-bag" : "mlp-ensemble";
}

PredictorKind parse_predictor_kind(std::string_view s)
{
    if (s == "gbdt-bag") return PredictorKind::gbdt_bag;
    if (s == "mlp-ensemble") return PredictorKind::mlp_ensemble;
    throw ConfigError("unknown predictor kind '" + std::string(s) + "'");
}

void validate_predictor_config(const PredictorConfig& cfg)
{
    if (cfg.bag_count < 2)
        throw ConfigError("bag_count must be at least 2");
    const auto& g = cfg.gbdt;
    if (g.trees <= 0 || g.max_depth <= 0 || !(g.learning_rate > 0) || g.min_samples_leaf <= 0)
        throw ConfigError("gbdt hyperparameters must be positive");
    if (g.learning_rate > 1.0)
        throw ConfigError("gbdt learning_rate must not exceed 1");
    const auto& m = cfg.mlp;
    if (m.members < 2)
        throw ConfigError("mlp members must be at least 2");
    if (m.epochs <= 0 || !(m.learning_rate > 0) || m.batch_size <= 0)
        throw ConfigError("mlp hyperparameters must be positive");
    for (int w : m.hidden)
        if (w <= 0)
            throw ConfigError("mlp hidden widths must be positive");
}

ScorePrediction summarize_members(std::span<const double> members)
{
    ScorePrediction p;
    if (members.empty())
        return p;
    double sum = 0.0;
    for (double v : members)
        sum += v;
    p.mean = sum / static_cast<double>(members.size());
    if (members.size() > 1) {
        double ss = 0.0;
        for (double v : members)
            ss += (v - p.mean) * (v - p.mean);
        p.std = std::sqrt(ss / static_cast<double>(members.size() - 1));
    }
    return p;
}

std::vector<double> PredictorModel::member_predictions(const std::uint8_t* row) const
{
    std::vector<double> out;
    if (kind == PredictorKind::gbdt_bag) {
        for (const auto& b : boosters)
            out.push_back(b.predict(row));
    } else {
        std::vector<double> x(row, row + n_features);
        for (const auto& net : networks)
            out.push_back(net.predict(x));
    }
    return out;
}

BinaryMatrix to_matrix(std::span<const FeatureVector> features)
{
    BinaryMatrix m;
    if (features.empty())
        return m;
    m.rows = features.size();
    m.cols = features.front().size();
    m.data.reserve(m.rows * m.cols);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        if (f.size() != m.cols || f.layout_fp != features.front().layout_fp)
            throw ShapeError("feature row " + std::to_string(i) + " has a different layout than row 0");
        m.data.insert(m.data.end(), f.bits.begin(), f.bits.end());
    }
    return m;
}

PredictorModel fit(std::span<const FeatureVector> features, std::span<const double> scores,
                   const PredictorConfig& cfg, Rng& rng)
{
    validate_predictor_config(cfg);
    if (features.size() != scores.size())
        throw ShapeError("feature and score counts differ");
    if (features.size() < 5)
        throw DataError("surrogate needs at least 5 rows, got " + std::to_string(features.size()));
    for (double s : scores)
        if (!std::isfinite(s))
            throw DataError("non-finite score in surrogate training data");

    const BinaryMatrix x = to_matrix(features);
    PredictorModel model;
    model.kind = cfg.kind;
    model.layout_fp = features.front().layout_fp;
    model.n_features = x.cols;

    // Members draw from their own derived streams so fitting order never
    // changes the result.
    const std::uint64_t base = rng.next();
    const std::size_t n = x.rows;

    if (cfg.kind == PredictorKind::gbdt_bag) {
        for (int b = 0; b < cfg.bag_count; ++b) {
            Rng member_rng(mix64(base + static_cast<std::uint64_t>(b)));
            BinaryMatrix boot;
            boot.rows = n;
            boot.cols = x.cols;
            boot.data.reserve(x.data.size());
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t pick = member_rng.below(n);
                boot.data.insert(boot.data.end(), x.row(pick), x.row(pick) + x.cols);
                y[i] = scores[pick];
            }
            model.boosters.push_back(gbdt::fit_lad(boot, y, cfg.gbdt));
        }
    } else {
        std::vector<double> dense(x.data.begin(), x.data.end());
        std::vector<double> sorted(scores.begin(), scores.end());
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted.size() % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        for (int b = 0; b < cfg.mlp.members; ++b) {
            Rng member_rng(mix64(base + static_cast<std::uint64_t>(b)));
            Mlp net = Mlp::initialize(static_cast<int>(x.cols), cfg.mlp.hidden, member_rng);
            net.params().back() = median;  // output bias
            net.train(dense, scores, cfg.mlp, member_rng);
            model.networks.push_back(std::move(net));
        }
    }
    return model;
}

std::vector<ScorePrediction> predict(const PredictorModel& model, std::span<const FeatureVector> features)
{
    std::vector<ScorePrediction> out;
    out.reserve(features.size());
    for (const auto& f : features) {
        if (f.layout_fp != model.layout_fp || f.size() != model.n_features)
            throw ShapeError("feature layout differs from the layout the predictor was trained on");
        const auto members = model.member_predictions(f.bits.data());
        out.push_back(summarize_members(members));
    }
    return out;
}

double eval_mae(const PredictorModel& model, std::span<const FeatureVector> features, std::span<const double> scores)
{
    if (features.size() != scores.size())
        throw ShapeError("feature and score counts differ");
    if (features.empty())
        return 0.0;
    const auto preds = predict(model, features);
    double s = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        s += std::abs(preds[i].mean - scores[i]);
    return s / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// checkpoint I/O

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'N', 'S', 'U', 'R', 'R', '\0'};
constexpr std::uint32_t kVersion = 1;

using detail::to_little;

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}

    template <typename T>
    void put(T v)
    {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }

    void put_string(const std::string& s)
    {
        put(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ofstream& out_;
};

class Reader {
public:
    explicit Reader(std::ifstream& in) : in_(in) {}

    template <typename T>
    T get()
    {
        T v;
        if (!in_.read(reinterpret_cast<char*>(&v), sizeof v))
            throw FormatError("predictor checkpoint is truncated");
        return to_little(v);
    }

    std::string get_string()
    {
        const auto n = get<std::uint32_t>();
        if (n > (1u << 20))
            throw FormatError("predictor checkpoint has an implausible string length");
        std::string s(n, '\0');
        if (!in_.read(s.data(), n))
            throw FormatError("predictor checkpoint is truncated");
        return s;
    }

    std::uint32_t get_count(std::uint32_t limit)
    {
        const auto n = get<std::uint32_t>();
        if (n > limit)
            throw FormatError("predictor checkpoint has an implausible element count");
        return n;
    }

private:
    std::ifstream& in_;
};

}  // namespace

void save_model(const PredictorModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("cannot write predictor checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    Writer w(out);
    w.put(kVersion);
    w.put(static_cast<std::uint32_t>(model.kind));
    w.put_string(model.layout_fp);
    w.put(static_cast<std::uint64_t>(model.n_features));
    w.put(static_cast<std::uint32_t>(model.member_count()));
    if (model.kind == PredictorKind::gbdt_bag) {
        for (const auto& b : model.boosters) {
            w.put(b.base);
            w.put(b.learning_rate);
            w.put(static_cast<std::uint32_t>(b.trees.size()));
            for (const auto& t : b.trees) {
                w.put(static_cast<std::uint32_t>(t.nodes.size()));
                for (const auto& node : t.nodes) {
                    w.put(node.feature);
                    w.put(node.left);
                    w.put(node.right);
                    w.put(node.value);
                }
            }
        }
    } else {
        for (const auto& net : model.networks) {
            w.put(static_cast<std::uint32_t>(net.widths().size()));
            for (int width : net.widths())
                w.put(static_cast<std::int32_t>(width));
            w.put(static_cast<std::uint32_t>(net.params().size()));
            for (double p : net.params())
                w.put(p);
        }
    }
    if (!out)
        throw FormatError("failed writing predictor checkpoint " + path.string());
}

PredictorModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open predictor checkpoint " + path.string());
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw FormatError("not a predictor checkpoint: " + path.string());
    Reader r(in);
    if (const auto version = r.get<std::uint32_t>(); version != kVersion)
        throw FormatError("unsupported predictor checkpoint version " + std::to_string(version));

    PredictorModel model;
    const auto kind = r.get<std::uint32_t>();
    if (kind > 1)
        throw FormatError("unknown predictor kind in checkpoint");
    model.kind = static_cast<PredictorKind>(kind);
    model.layout_fp = r.get_string();
    model.n_features = r.get<std::uint64_t>();
    const auto members = r.get_count(1u << 16);
    for (std::uint32_t m = 0; m < members; ++m) {
        if (model.kind == PredictorKind::gbdt_bag) {
            gbdt::Booster b;
            b.base = r.get<double>();
            b.learning_rate = r.get<double>();
            const auto trees = r.get_count(1u << 24);
            for (std::uint32_t t = 0; t < trees; ++t) {
                gbdt::Tree tree;
                const auto nodes = r.get_count(1u << 24);
                for (std::uint32_t k = 0; k < nodes; ++k) {
                    gbdt::Node node;
                    node.feature = r.get<std::int32_t>();
                    node.left = r.get<std::int32_t>();
                    node.right = r.get<std::int32_t>();
                    node.value = r.get<double>();
                    const auto limit = static_cast<std::int32_t>(nodes);
                    if (node.feature >= 0 && (node.left <= 0 || node.right <= 0 || node.left >= limit ||
                                              node.right >= limit ||
                                              static_cast<std::size_t>(node.feature) >= model.n_features))
                        throw FormatError("predictor checkpoint has a malformed tree node");
                    tree.nodes.push_back(node);
                }
                if (tree.nodes.empty())
                    throw FormatError("predictor checkpoint has an empty tree");
                b.trees.push_back(std::move(tree));
            }
            model.boosters.push_back(std::move(b));
        } else {
            std::vector<int> widths(r.get_count(64));
            for (auto& width : widths)
                width = r.get<std::int32_t>();
            std::vector<double> params(r.get_count(1u << 28));
            for (auto& p : params)
                p = r.get<double>();
            model.networks.emplace_back(std::move(widths), std::move(params));
        }
    }
    return model;
}

}  // namespace seqnas
