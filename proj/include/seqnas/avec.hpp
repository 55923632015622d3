#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "seqnas/search_space.hpp"

namespace seqnas {

// Binary path-style architecture features: one bit per block presence flag,
// per option of every choice, and per operation variant of every encoder
// layer position. Bits of blocks or layers not in the architecture are zero.

struct FeatureSlot {
    std::string name;
    std::string description;
};

struct FeatureLayout {
    std::vector<FeatureSlot> slots;
    // SHA-256 over the newline-joined slot names.
    std::string fingerprint;

    std::size_t size() const { return slots.size(); }
};

struct FeatureVector {
    std::vector<std::uint8_t> bits;
    std::string layout_fp;

    std::size_t size() const { return bits.size(); }
    bool operator==(const FeatureVector&) const = default;

    // Compact '0'/'1' form.
    std::string to_bit_string() const;
    static FeatureVector from_bit_string(std::string_view s, std::string layout_fp = {});
};

FeatureLayout feature_layout(const SearchSpaceConfig& cfg);

// Throws ValidationError if the spec is not valid for cfg.
FeatureVector encode(const ArchitectureSpec& spec, const SearchSpaceConfig& cfg);

// Throws DecodeError naming the offending slot or group for any vector that
// breaks a one-hot group or the absence-zeroing rule.
ArchitectureSpec decode(const FeatureVector& vec, const SearchSpaceConfig& cfg);

}  // namespace seqnas
