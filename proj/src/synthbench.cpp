#include "seqnas/synthbench.hpp"

#include "seqnas/errors.hpp"

namespace seqnas {

std::vector<BenchCell> released_bench_layout()
{
    std::vector<BenchCell> cells;
    for (const char* name : {"RBchurn", "ABank", "AmEx", "AGE", "VBank", "TaoBao"})
        cells.push_back({name, BenchMethod::ours, 400});
    for (const char* name : {"RBchurn", "ABank"})
        cells.push_back({name, BenchMethod::random, 400});
    return cells;
}

std::vector<BenchRecord> make_synthetic_bench(const SynthBenchConfig& cfg, const SearchSpaceConfig& space)
{
    std::vector<BenchRecord> out;
    for (const auto& cell : cfg.cells) {
        SyntheticBenchConfig bench;
        bench.bench_seed = Rng::derive(cfg.seed, "bench:" + cell.dataset).next();
        bench.noise_std = cfg.noise_std;
        SyntheticEvaluator evaluator(bench, space);

        SearchConfig search;
        search.seed = Rng::derive(cfg.seed, "run:" + cell.dataset + ":" + std::string(to_string(cell.method))).next();
        search.kd_enabled = false;
        SearchState st;
        if (cell.method == BenchMethod::random) {
            st = run_random_search(static_cast<int>(cell.count), false, search, space, evaluator);
        } else {
            const auto n_init = static_cast<std::size_t>(cfg.n_init);
            const auto l = static_cast<std::size_t>(cfg.l_candidates);
            if (cell.count < n_init || (cell.count - n_init) % l != 0)
                throw ConfigError("cell " + cell.dataset + " size " + std::to_string(cell.count) +
                                  " is not n_init plus a multiple of l_candidates");
            search.n_init = cfg.n_init;
            search.n_iter = cfg.n_iter;
            search.l_candidates = cfg.l_candidates;
            search.m_iterations = static_cast<int>((cell.count - n_init) / l);
            st = run_search(search, space, cfg.predictor, evaluator);
        }
        auto records = export_records(st.records, cell.dataset, cell.method);
        out.insert(out.end(), records.begin(), records.end());
    }
    return out;
}

}  // namespace seqnas
