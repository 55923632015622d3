#include "seqnas/avec.hpp"

#include <algorithm>

#include "seqnas/errors.hpp"
#include "seqnas/hashing.hpp"

namespace seqnas {

namespace {

// Slot offsets of every group for one canonical config.
struct Plan {
    SearchSpaceConfig cfg;
    FeatureLayout layout;

    std::size_t stem_kernel = 0, stem_dropout = 0;
    std::size_t enc_present = 0, enc_layers = 0, enc_layer0 = 0, per_layer = 0, enc_end = 0;
    std::size_t dec_present = 0, dec_layers = 0, dec_heads = 0, dec_end = 0;
    std::size_t pooling = 0, spatial_dropout = 0;

    void add(std::string name, std::string description)
    {
        layout.slots.push_back({std::move(name), std::move(description)});
    }
};

Plan make_plan(const SearchSpaceConfig& raw)
{
    Plan p;
    p.cfg = validate_config(raw);
    const auto& cfg = p.cfg;

    p.stem_kernel = p.layout.size();
    for (int k : cfg.stem_kernel_options)
        p.add("stem.kernel=" + std::to_string(k), "stem convolution kernel is " + std::to_string(k));
    p.stem_dropout = p.layout.size();
    p.add("stem.dropout", "stem applies dropout after convolution");

    if (cfg.encoder_enabled) {
        p.enc_present = p.layout.size();
        p.add("encoder.present", "encoder block is present");
        p.enc_layers = p.layout.size();
        for (int l : cfg.encoder_layer_count_options)
            p.add("encoder.layers=" + std::to_string(l), "encoder has " + std::to_string(l) + " layers");
        p.enc_layer0 = p.layout.size();
        for (int i = 0; i < cfg.max_encoder_layers(); ++i) {
            const std::string prefix = "encoder.layer" + std::to_string(i) + ".";
            if (cfg.has_op(EncoderOp::mha))
                for (int h : cfg.mha_head_options)
                    p.add(prefix + "MHA(" + std::to_string(h) + ")",
                          "layer " + std::to_string(i) + " uses attention with " + std::to_string(h) + " heads");
            if (cfg.has_op(EncoderOp::gru))
                p.add(prefix + "GRU", "layer " + std::to_string(i) + " uses a GRU slice");
            if (cfg.has_op(EncoderOp::conv))
                p.add(prefix + "CONV", "layer " + std::to_string(i) + " uses a convolution slice");
        }
        p.per_layer = cfg.max_encoder_layers() > 0 ? (p.layout.size() - p.enc_layer0) / cfg.max_encoder_layers() : 0;
        p.enc_end = p.layout.size();
    }

    if (cfg.decoder_enabled) {
        p.dec_present = p.layout.size();
        p.add("decoder.present", "decoder block is present");
        p.dec_layers = p.layout.size();
        for (int l : cfg.decoder_layer_count_options)
            p.add("decoder.layers=" + std::to_string(l), "decoder has " + std::to_string(l) + " layers");
        p.dec_heads = p.layout.size();
        for (int h : cfg.decoder_head_options)
            p.add("decoder.heads=" + std::to_string(h), "decoder attention has " + std::to_string(h) + " heads");
        p.dec_end = p.layout.size();
    }

    p.pooling = p.layout.size();
    for (auto pool : cfg.head_pooling_options)
        p.add("head.pooling=" + std::string(to_string(pool)), "head pools with " + std::string(to_string(pool)));
    p.spatial_dropout = p.layout.size();
    p.add("head.spatial_dropout", "head applies spatial dropout");

    std::string names;
    for (const auto& s : p.layout.slots) {
        names += s.name;
        names += '\n';
    }
    p.layout.fingerprint = sha256_hex(names);
    return p;
}

template <typename T>
std::size_t index_of(const std::vector<T>& v, const T& x)
{
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

// Exactly one set bit in [begin, begin + n); returns its offset in the group.
std::size_t one_hot(const FeatureVector& v, const FeatureLayout& layout, std::size_t begin, std::size_t n,
                    const std::string& group)
{
    std::size_t found = n, count = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (v.bits[begin + i]) {
            found = i;
            ++count;
        }
    if (count != 1)
        throw DecodeError(group + " group must have exactly one bit set, found " + std::to_string(count) +
                          (count ? " (first at slot " + layout.slots[begin + (found)].name + ")" : ""));
    return found;
}

void require_zero(const FeatureVector& v, const FeatureLayout& layout, std::size_t begin, std::size_t end,
                  const std::string& why)
{
    for (std::size_t i = begin; i < end; ++i)
        if (v.bits[i])
            throw DecodeError("slot " + layout.slots[i].name + " is set but " + why);
}

}  // namespace

std::string FeatureVector::to_bit_string() const
{
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i])
            s[i] = '1';
    return s;
}

FeatureVector FeatureVector::from_bit_string(std::string_view s, std::string layout_fp)
{
    FeatureVector v;
    v.layout_fp = std::move(layout_fp);
    v.bits.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1')
            throw DecodeError(std::string("feature string contains '") + c + "'");
        v.bits.push_back(c == '1' ? 1 : 0);
    }
    return v;
}

FeatureLayout feature_layout(const SearchSpaceConfig& cfg)
{
    return make_plan(cfg).layout;
}

FeatureVector encode(const ArchitectureSpec& spec, const SearchSpaceConfig& raw)
{
    const Plan p = make_plan(raw);
    const auto& cfg = p.cfg;
    if (auto problems = validate_spec(spec, cfg); !problems.empty())
        throw ValidationError("cannot encode invalid spec: " + problems.front());

    FeatureVector v;
    v.layout_fp = p.layout.fingerprint;
    v.bits.assign(p.layout.size(), 0);

    v.bits[p.stem_kernel + index_of(cfg.stem_kernel_options, spec.stem.kernel)] = 1;
    v.bits[p.stem_dropout] = spec.stem.dropout ? 1 : 0;

    if (spec.encoder) {
        const auto& layers = *spec.encoder;
        v.bits[p.enc_present] = 1;
        v.bits[p.enc_layers + index_of(cfg.encoder_layer_count_options, static_cast<int>(layers.size()))] = 1;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            std::size_t slot = p.enc_layer0 + i * p.per_layer;
            if (cfg.has_op(EncoderOp::mha)) {
                if (layers[i].mha_heads)
                    v.bits[slot + index_of(cfg.mha_head_options, *layers[i].mha_heads)] = 1;
                slot += cfg.mha_head_options.size();
            }
            if (cfg.has_op(EncoderOp::gru))
                v.bits[slot++] = layers[i].gru ? 1 : 0;
            if (cfg.has_op(EncoderOp::conv))
                v.bits[slot++] = layers[i].conv ? 1 : 0;
        }
    }

    if (spec.decoder) {
        v.bits[p.dec_present] = 1;
        v.bits[p.dec_layers + index_of(cfg.decoder_layer_count_options, spec.decoder->layers)] = 1;
        v.bits[p.dec_heads + index_of(cfg.decoder_head_options, spec.decoder->heads)] = 1;
    }

    v.bits[p.pooling + index_of(cfg.head_pooling_options, spec.head.pooling)] = 1;
    v.bits[p.spatial_dropout] = spec.head.spatial_dropout ? 1 : 0;
    return v;
}

ArchitectureSpec decode(const FeatureVector& vec, const SearchSpaceConfig& raw)
{
    const Plan p = make_plan(raw);
    const auto& cfg = p.cfg;
    const auto& layout = p.layout;
    if (vec.size() != layout.size())
        throw DecodeError("feature vector has " + std::to_string(vec.size()) + " bits, layout has " +
                          std::to_string(layout.size()));
    if (!vec.layout_fp.empty() && vec.layout_fp != layout.fingerprint)
        throw DecodeError("feature vector layout fingerprint does not match the search-space layout");
    for (std::size_t i = 0; i < vec.size(); ++i)
        if (vec.bits[i] > 1)
            throw DecodeError("slot " + layout.slots[i].name + " holds a non-binary value");

    ArchitectureSpec spec;
    spec.stem.kernel = cfg.stem_kernel_options[one_hot(vec, layout, p.stem_kernel, cfg.stem_kernel_options.size(),
                                                       "stem.kernel")];
    spec.stem.dropout = vec.bits[p.stem_dropout] != 0;

    if (cfg.encoder_enabled) {
        if (!vec.bits[p.enc_present]) {
            require_zero(vec, layout, p.enc_layers, p.enc_end, "encoder.present is 0");
        } else {
            const int n_layers = cfg.encoder_layer_count_options[one_hot(
                vec, layout, p.enc_layers, cfg.encoder_layer_count_options.size(), "encoder.layers")];
            std::vector<EncoderLayerSpec> layers;
            for (int i = 0; i < cfg.max_encoder_layers(); ++i) {
                const std::size_t begin = p.enc_layer0 + static_cast<std::size_t>(i) * p.per_layer;
                if (i >= n_layers) {
                    require_zero(vec, layout, begin, begin + p.per_layer,
                                 "the encoder has only " + std::to_string(n_layers) + " layers");
                    continue;
                }
                EncoderLayerSpec layer;
                std::size_t slot = begin;
                if (cfg.has_op(EncoderOp::mha)) {
                    std::size_t set = 0;
                    for (std::size_t h = 0; h < cfg.mha_head_options.size(); ++h)
                        if (vec.bits[slot + h]) {
                            if (set++)
                                throw DecodeError("encoder.layer" + std::to_string(i) +
                                                  " MHA group has more than one head bit set (slot " +
                                                  layout.slots[slot + h].name + ")");
                            layer.mha_heads = cfg.mha_head_options[h];
                        }
                    slot += cfg.mha_head_options.size();
                }
                if (cfg.has_op(EncoderOp::gru))
                    layer.gru = vec.bits[slot++] != 0;
                if (cfg.has_op(EncoderOp::conv))
                    layer.conv = vec.bits[slot++] != 0;
                if (layer.op_count() == 0)
                    throw DecodeError("encoder.layer" + std::to_string(i) + " is active but has no operation bits");
                layers.push_back(layer);
            }
            spec.encoder = std::move(layers);
        }
    }

    if (cfg.decoder_enabled) {
        if (!vec.bits[p.dec_present]) {
            require_zero(vec, layout, p.dec_layers, p.dec_end, "decoder.present is 0");
        } else {
            DecoderSpec d;
            d.layers = cfg.decoder_layer_count_options[one_hot(
                vec, layout, p.dec_layers, cfg.decoder_layer_count_options.size(), "decoder.layers")];
            d.heads = cfg.decoder_head_options[one_hot(vec, layout, p.dec_heads, cfg.decoder_head_options.size(),
                                                       "decoder.heads")];
            spec.decoder = d;
        }
    }

    spec.head.pooling = cfg.head_pooling_options[one_hot(vec, layout, p.pooling, cfg.head_pooling_options.size(),
                                                         "head.pooling")];
    spec.head.spatial_dropout = vec.bits[p.spatial_dropout] != 0;

    if (auto problems = validate_spec(spec, cfg); !problems.empty())
        throw DecodeError("decoded architecture is not valid: " + problems.front());
    return spec;
}

}  // namespace seqnas
