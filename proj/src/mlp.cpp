#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqnas/errors.hpp"
#include "seqnas/surrogate.hpp"

namespace seqnas {

namespace {

std::size_t param_count(const std::vector<int>& widths)
{
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<std::size_t>(widths[l + 1]) * (widths[l] + 1);
    return n;
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, std::vector<double> params) : widths_(std::move(widths)), params_(std::move(params))
{
    if (widths_.size() < 2 || widths_.back() != 1 || params_.size() != param_count(widths_))
        throw ShapeError("MLP widths and parameter count disagree");
}

Mlp Mlp::initialize(int inputs, const std::vector<int>& hidden, Rng& rng)
{
    std::vector<int> widths{inputs};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    std::vector<double> params;
    params.reserve(param_count(widths));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double bound = std::sqrt(6.0 / widths[l]);
        for (int o = 0; o < widths[l + 1]; ++o)
            for (int i = 0; i < widths[l]; ++i)
                params.push_back((2.0 * rng.uniform() - 1.0) * bound);
        params.insert(params.end(), widths[l + 1], 0.0);
    }
    return Mlp(std::move(widths), std::move(params));
}

double Mlp::predict(std::span<const double> x) const
{
    std::vector<double> act(x.begin(), x.end()), next;
    const double* p = params_.data();
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int in = widths_[l], out = widths_[l + 1];
        const double* bias = p + static_cast<std::size_t>(out) * in;
        next.assign(out, 0.0);
        for (int o = 0; o < out; ++o) {
            double z = bias[o];
            const double* w = p + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i)
                z += w[i] * act[i];
            next[o] = (l + 2 < widths_.size()) ? std::max(0.0, z) : z;
        }
        p = bias + out;
        act.swap(next);
    }
    return act[0];
}

double Mlp::loss_and_gradient(std::span<const double> x, std::span<const double> y, std::vector<double>& grad) const
{
    const std::size_t layers = widths_.size() - 1;
    const std::size_t n = y.size();
    if (x.size() != n * static_cast<std::size_t>(inputs()))
        throw ShapeError("MLP input matrix has the wrong shape");
    grad.assign(params_.size(), 0.0);

    std::vector<std::size_t> offset(layers);
    for (std::size_t l = 0, o = 0; l < layers; ++l) {
        offset[l] = o;
        o += static_cast<std::size_t>(widths_[l + 1]) * (widths_[l] + 1);
    }

    std::vector<std::vector<double>> acts(layers + 1);
    std::vector<double> delta, prev_delta;
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        acts[0].assign(x.begin() + r * inputs(), x.begin() + (r + 1) * inputs());
        for (std::size_t l = 0; l < layers; ++l) {
            const int in = widths_[l], out = widths_[l + 1];
            const double* w = params_.data() + offset[l];
            const double* b = w + static_cast<std::size_t>(out) * in;
            acts[l + 1].assign(out, 0.0);
            for (int o = 0; o < out; ++o) {
                double z = b[o];
                for (int i = 0; i < in; ++i)
                    z += w[static_cast<std::size_t>(o) * in + i] * acts[l][i];
                acts[l + 1][o] = (l + 1 < layers) ? std::max(0.0, z) : z;
            }
        }
        const double err = acts[layers][0] - y[r];
        loss += std::abs(err);

        delta.assign(1, (err > 0) - (err < 0));
        for (std::size_t l = layers; l-- > 0;) {
            const int in = widths_[l], out = widths_[l + 1];
            const double* w = params_.data() + offset[l];
            double* gw = grad.data() + offset[l];
            double* gb = gw + static_cast<std::size_t>(out) * in;
            prev_delta.assign(in, 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[o];
                if (d == 0.0)
                    continue;
                gb[o] += d;
                for (int i = 0; i < in; ++i) {
                    gw[static_cast<std::size_t>(o) * in + i] += d * acts[l][i];
                    prev_delta[i] += d * w[static_cast<std::size_t>(o) * in + i];
                }
            }
            if (l > 0)
                for (int i = 0; i < in; ++i)
                    if (acts[l][i] <= 0.0)
                        prev_delta[i] = 0.0;
            delta.swap(prev_delta);
        }
    }
    const double scale = n ? 1.0 / static_cast<double>(n) : 0.0;
    for (auto& g : grad)
        g *= scale;
    return loss * scale;
}

void Mlp::train(std::span<const double> x, std::span<const double> y, const MlpParams& params, Rng& rng)
{
    const std::size_t n = y.size();
    const auto d = static_cast<std::size_t>(inputs());
    if (n == 0)
        return;

    // Adam moments.
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m(params_.size(), 0.0), v(params_.size(), 0.0), grad;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> bx, by;
    long step = 0;
    const auto batch = static_cast<std::size_t>(std::max(1, params.batch_size));

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            bx.clear();
            by.clear();
            for (std::size_t k = start; k < end; ++k) {
                bx.insert(bx.end(), x.begin() + order[k] * d, x.begin() + (order[k] + 1) * d);
                by.push_back(y[order[k]]);
            }
            loss_and_gradient(bx, by, grad);
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t p = 0; p < params_.size(); ++p) {
                m[p] = beta1 * m[p] + (1 - beta1) * grad[p];
                v[p] = beta2 * v[p] + (1 - beta2) * grad[p] * grad[p];
                params_[p] -= params.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + eps);
            }
        }
    }
}

}  // namespace seqnas
