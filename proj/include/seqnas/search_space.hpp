#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqnas/rng.hpp"

namespace seqnas {

enum class Pooling { max, avg, both };
enum class EncoderOp { mha, gru, conv };

std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view s);
std::string_view to_string(EncoderOp op);
EncoderOp parse_encoder_op(std::string_view s);

// Option sets are "ordered sets": canonical order is ascending, false < true,
// max < avg < both, MHA < GRU < CONV. Use canonicalized() before relying on order.
struct SearchSpaceConfig {
    std::vector<int> stem_kernel_options{3, 5, 7};
    std::vector<bool> stem_dropout_options{false, true};
    int d_model = 192;
    bool encoder_enabled = true;
    std::vector<int> encoder_layer_count_options{1, 2, 4};
    std::vector<EncoderOp> encoder_operation_options{EncoderOp::mha, EncoderOp::gru, EncoderOp::conv};
    std::vector<int> mha_head_options{1, 2, 4, 8};
    bool decoder_enabled = true;
    std::vector<int> decoder_layer_count_options{1, 2};
    std::vector<int> decoder_head_options{1, 2, 4, 8};
    std::vector<Pooling> head_pooling_options{Pooling::max, Pooling::avg, Pooling::both};
    std::vector<bool> head_spatial_dropout_options{false, true};

    bool operator==(const SearchSpaceConfig&) const = default;

    SearchSpaceConfig canonicalized() const;
    bool has_op(EncoderOp op) const;
    int max_encoder_layers() const;
};

// Throws ConfigError; returns the canonicalized config on success.
SearchSpaceConfig validate_config(const SearchSpaceConfig& cfg);

SearchSpaceConfig default_space();
// Defaults with the decoder disabled; total size 4,705,272.
SearchSpaceConfig paper_space();
SearchSpaceConfig preset_space(std::string_view name);

struct EncoderLayerSpec {
    std::optional<int> mha_heads;
    bool gru = false;
    bool conv = false;

    int op_count() const { return (mha_heads ? 1 : 0) + (gru ? 1 : 0) + (conv ? 1 : 0); }
    auto operator<=>(const EncoderLayerSpec&) const = default;
};

// Op tags in canonical slice order, e.g. {"MHA(4)", "CONV"}.
std::vector<std::string> op_tags(const EncoderLayerSpec& layer);

struct StemSpec {
    int kernel = 3;
    bool dropout = false;
    auto operator<=>(const StemSpec&) const = default;
};

struct DecoderSpec {
    int layers = 1;
    int heads = 1;
    auto operator<=>(const DecoderSpec&) const = default;
};

struct HeadSpec {
    Pooling pooling = Pooling::max;
    bool spatial_dropout = false;
    auto operator<=>(const HeadSpec&) const = default;
};

struct ArchitectureSpec {
    StemSpec stem;
    std::optional<std::vector<EncoderLayerSpec>> encoder;
    std::optional<DecoderSpec> decoder;
    HeadSpec head;

    auto operator<=>(const ArchitectureSpec&) const = default;
};

class ArchId {
public:
    ArchId() = default;
    // Throws ValidationError unless hex is 64 lowercase hex characters.
    explicit ArchId(std::string hex);

    const std::string& str() const { return hex_; }
    bool empty() const { return hex_.empty(); }
    auto operator<=>(const ArchId&) const = default;

private:
    std::string hex_;
};

enum class SamplingMode { per_factor, exact_uniform };

std::string_view to_string(SamplingMode m);
SamplingMode parse_sampling_mode(std::string_view s);

// Widths of the contiguous feature slices an encoder layer with `parts`
// operations splits d_model into; earlier slices absorb the remainder.
std::vector<int> slice_widths(int d_model, int parts);

std::vector<EncoderLayerSpec> enumerate_layer_variants(const SearchSpaceConfig& cfg);

// Exact sizes; throw ConfigError on an invalid config or 64-bit overflow.
// encoder_cardinality counts present encoders only; cardinality adds the
// absent-encoder option.
std::uint64_t encoder_cardinality(const SearchSpaceConfig& cfg);
std::uint64_t cardinality(const SearchSpaceConfig& cfg);

ArchitectureSpec sample_architecture(const SearchSpaceConfig& cfg, Rng& rng,
                                     SamplingMode mode = SamplingMode::per_factor);

// Empty result means the spec is valid for cfg.
std::vector<std::string> validate_spec(const ArchitectureSpec& spec, const SearchSpaceConfig& cfg);

// Sorted-key JSON with no insignificant whitespace; the digest input for ArchId.
std::string canonical_json(const ArchitectureSpec& spec);
ArchId canonical_id(const ArchitectureSpec& spec);

}  // namespace seqnas
