#include "seqnas/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqnas/errors.hpp"

namespace seqnas {

std::vector<std::size_t> thompson_select(const SelectionRequest& req, Rng& rng)
{
    if (req.predictions.empty())
        throw DataError("thompson_select: empty candidate list");
    if (req.count < 1)
        throw DataError("thompson_select: selection count must be at least 1");
    for (const auto& p : req.predictions) {
        if (!(p.std >= 0.0) || !std::isfinite(p.std))
            throw DataError("thompson_select: negative or non-finite std");
        if (!std::isfinite(p.mean))
            throw DataError("thompson_select: non-finite mean");
    }

    std::vector<double> draws;
    draws.reserve(req.predictions.size());
    for (const auto& p : req.predictions)
        draws.push_back(p.std == 0.0 ? p.mean : rng.normal(p.mean, p.std));

    std::vector<std::size_t> order(draws.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(req.count, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return draws[a] > draws[b] || (draws[a] == draws[b] && a < b); });
    order.resize(take);
    return order;
}

}  // namespace seqnas
