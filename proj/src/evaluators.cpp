#include "seqnas/evaluators.hpp"

#include <cmath>
#include <sstream>

#include "seqnas/errors.hpp"
#include "seqnas/hashing.hpp"

namespace seqnas {

SyntheticEvaluator::SyntheticEvaluator(const SyntheticBenchConfig& cfg, const SearchSpaceConfig& space)
    : cfg_(cfg), space_(validate_config(space))
{
    if (!(cfg.noise_std >= 0.0))
        throw ConfigError("noise_std must be non-negative");
    const std::size_t n = feature_layout(space_).size();
    Rng rng = Rng::derive(cfg.bench_seed, "synthetic-bench");
    linear_.resize(n);
    for (auto& w : linear_)
        w = cfg.weight_std * rng.normal();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < cfg.interaction_density)
                interactions_.push_back({i, j, cfg.interaction_std * rng.normal()});
}

void SyntheticEvaluator::bind(const EvalContext& ctx)
{
    if (validate_config(ctx.space) != space_)
        throw ConfigError("synthetic benchmark was built for a different search space");
    cache_ = ctx.cache;
}

double SyntheticEvaluator::clean_score(const FeatureVector& phi) const
{
    if (phi.size() != linear_.size())
        throw ShapeError("feature vector length does not match the synthetic benchmark layout");
    double z = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
        if (phi.bits[i])
            z += linear_[i];
    for (const auto& t : interactions_)
        if (phi.bits[t.i] && phi.bits[t.j])
            z += t.q;
    return 1.0 / (1.0 + std::exp(-z));
}

std::vector<std::string> SyntheticEvaluator::example_ids(std::size_t rows)
{
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < rows; ++r)
        ids.push_back("synthetic-" + std::to_string(r));
    return ids;
}

EvalResult SyntheticEvaluator::evaluate(const EvalRequest& req)
{
    const FeatureVector phi = encode(req.spec, space_);
    const ArchId id = canonical_id(req.spec);
    if (id != req.arch_id)
        throw EvalError("request arch_id does not match its spec");

    const std::uint64_t key = hex_prefix_u64(id.str());
    double score = clean_score(phi);
    if (cfg_.noise_std > 0.0) {
        Rng noise = Rng::derive(cfg_.bench_seed ^ key, "synthetic-noise");
        score += cfg_.noise_std * noise.normal();
    }

    EvalResult result;
    result.arch_id = id;
    result.score = score;
    result.metric_name = metric_name();
    const int epochs = std::max(1, req.budget.epochs);
    for (int e = 0; e < epochs; ++e) {
        // Rising curve whose last (and best) epoch is exactly the score.
        const double gap = 0.05 * static_cast<double>(epochs - 1 - e) / static_cast<double>(epochs);
        result.per_epoch.push_back(e + 1 == epochs ? score : score - gap);
    }

    if (cache_) {
        Rng logit_rng = Rng::derive(key, "synthetic-logits");
        LogitMatrix logits(cfg_.prediction_rows, cfg_.prediction_cols);
        for (std::size_t r = 0; r < logits.rows; ++r)
            for (std::size_t c = 0; c < logits.cols; ++c)
                logits(r, c) = static_cast<float>((c == 0 ? 0.0 : 4.0 * (score - 0.5)) + 0.1 * logit_rng.normal());
        const auto ids = example_ids(cfg_.prediction_rows);
        cache_->write(id, logits, example_order_fingerprint(ids));
        result.preds_ref = id;
    }
    return result;
}

EvalResult BenchLookupEvaluator::evaluate(const EvalRequest& req)
{
    auto it = table_.find(req.arch_id);
    if (it == table_.end())
        throw MissError(req.arch_id.str());
    EvalResult r;
    r.arch_id = req.arch_id;
    r.score = it->second.best_score;
    r.metric_name = it->second.metric_name;
    return r;
}

ExternalEndpoint ExternalEndpoint::parse(const std::string& text)
{
    ExternalEndpoint ep;
    const std::string prefix = "tcp://";
    if (text.rfind(prefix, 0) == 0) {
        const std::string rest = text.substr(prefix.size());
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos || colon == 0)
            throw ConfigError("TCP endpoint must look like tcp://host:port");
        ep.host = rest.substr(0, colon);
        try {
            ep.port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad port in endpoint '" + text + "'");
        }
        if (ep.port <= 0 || ep.port > 65535)
            throw ConfigError("bad port in endpoint '" + text + "'");
        return ep;
    }
    std::istringstream is(text);
    for (std::string word; is >> word;)
        ep.command.push_back(word);
    if (ep.command.empty())
        throw ConfigError("empty trainer endpoint");
    return ep;
}

}  // namespace seqnas
