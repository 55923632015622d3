#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "seqnas/engine.hpp"
#include "seqnas/evaluators.hpp"

namespace seqnas {

// A run configuration document:
//   {"search": {...}, "space": {...} | "preset": "default"|"paper",
//    "predictor": {...}, "evaluator": {"kind": "synthetic"|"bench"|"external", ...}}
// Every section is optional; unknown keys raise ConfigError.
struct RunConfig {
    SearchConfig search;
    SearchSpaceConfig space;
    PredictorConfig predictor;
    json evaluator = json{{"kind", "synthetic"}};
};

RunConfig parse_run_config(const json& doc);

// Builds the backend described by an "evaluator" section:
//   synthetic: bench_seed, noise_std, prediction_rows, prediction_cols
//   bench:     path, dataset (optional filter)
//   external:  endpoint ("tcp://host:port" or a command line), timeout, transport_retries
std::unique_ptr<Evaluator> make_evaluator(const json& description, const SearchSpaceConfig& space);

// Exit codes: 0 success, 1 runtime failure (one "error: <kind>: <message>"
// line on err), 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqnas
