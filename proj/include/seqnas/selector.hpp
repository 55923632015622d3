#pragma once

#include <cstddef>
#include <vector>

#include "seqnas/rng.hpp"
#include "seqnas/surrogate.hpp"

namespace seqnas {

struct SelectionRequest {
    std::vector<ScorePrediction> predictions;
    std::size_t count = 1;  // L
};

// Batch Thompson sampling: one draw from Normal(mean, std) per candidate,
// then the indices of the `count` largest draws, largest first. A zero std
// draws the mean exactly. Equal draws keep the lower index first.
std::vector<std::size_t> thompson_select(const SelectionRequest& req, Rng& rng);

}  // namespace seqnas
