#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqnas/benchdata.hpp"
#include "seqnas/engine.hpp"

namespace seqnas {

// One cell of the released benchmark's dataset/method grid.
struct BenchCell {
    std::string dataset;
    BenchMethod method = BenchMethod::ours;
    std::size_t count = 400;
};

// The six datasets with 400 searched architectures each, plus 400 randomly
// queried ones on RBchurn and ABank: 3200 records.
std::vector<BenchCell> released_bench_layout();

struct SynthBenchConfig {
    std::uint64_t seed = 0;
    double noise_std = 0.01;
    std::vector<BenchCell> cells = released_bench_layout();
    // "ours" cells run the search with this initial sample and batch size;
    // the iteration count is derived from the cell size.
    int n_init = 100;
    int n_iter = 100;
    int l_candidates = 15;
    // Kept small so a full 3200-record synthesis takes seconds.
    PredictorConfig predictor = [] {
        PredictorConfig p;
        p.bag_count = 4;
        p.gbdt.trees = 40;
        return p;
    }();
};

// Each dataset gets its own hidden function (bench seed derived from the
// dataset name); records carry the synthetic metric name.
std::vector<BenchRecord> make_synthetic_bench(const SynthBenchConfig& cfg, const SearchSpaceConfig& space);

}  // namespace seqnas
