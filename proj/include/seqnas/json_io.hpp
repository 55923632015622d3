#pragma once

#include <json.hpp>

#include "seqnas/search_space.hpp"

namespace seqnas {

using json = nlohmann::json;

void to_json(json& j, const SearchSpaceConfig& cfg);
// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(const json& j, SearchSpaceConfig& cfg);

void to_json(json& j, const ArchitectureSpec& spec);
// Throws FormatError on structural problems (unknown op tag, duplicate op, wrong types).
void from_json(const json& j, ArchitectureSpec& spec);

EncoderLayerSpec parse_layer_ops(const json& ops);

// SHA-256 of the canonical config document; identifies a space on the wire.
std::string space_hash(const SearchSpaceConfig& cfg);

json read_json_file(const std::string& path);

}  // namespace seqnas
