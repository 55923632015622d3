#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seqnas/avec.hpp"
#include "seqnas/search_space.hpp"

namespace seqnas {

// One evaluated architecture. arch_id == canonical_id(spec) and
// avec == encode(spec); score is finite and higher is better.
struct TrainedRecord {
    ArchId arch_id;
    ArchitectureSpec spec;
    FeatureVector avec;
    double score = 0.0;
    std::string metric_name;
    std::optional<ArchId> preds_ref;
    int epoch_count = 0;
    double wall_seconds = 0.0;
    // Teachers whose averaged logits were distillation targets; empty without KD.
    std::vector<ArchId> teacher_ids;
};

}  // namespace seqnas
