#include "seqnas/search_space.hpp"

#include <algorithm>
#include <sstream>

#include "seqnas/errors.hpp"
#include "seqnas/hashing.hpp"

namespace seqnas {

std::string_view to_string(Pooling p)
{
    switch (p) {
    case Pooling::max: return "max";
    case Pooling::avg: return "avg";
    case Pooling::both: return "both";
    }
    return "?";
}

Pooling parse_pooling(std::string_view s)
{
    if (s == "max") return Pooling::max;
    if (s == "avg") return Pooling::avg;
    if (s == "both") return Pooling::both;
    throw ConfigError("unknown pooling '" + std::string(s) + "'");
}

std::string_view to_string(EncoderOp op)
{
    switch (op) {
    case EncoderOp::mha: return "MHA";
    case EncoderOp::gru: return "GRU";
    case EncoderOp::conv: return "CONV";
    }
    return "?";
}

EncoderOp parse_encoder_op(std::string_view s)
{
    if (s == "MHA") return EncoderOp::mha;
    if (s == "GRU") return EncoderOp::gru;
    if (s == "CONV") return EncoderOp::conv;
    throw ConfigError("unknown encoder operation '" + std::string(s) + "'");
}

std::string_view to_string(SamplingMode m)
{
    return m == SamplingMode::per_factor ? "per-factor" : "exact-uniform";
}

SamplingMode parse_sampling_mode(std::string_view s)
{
    if (s == "per-factor") return SamplingMode::per_factor;
    if (s == "exact-uniform") return SamplingMode::exact_uniform;
    throw ConfigError("unknown sampling mode '" + std::string(s) + "'");
}

namespace {

template <typename T>
void sort_options(std::vector<T>& v)
{
    std::sort(v.begin(), v.end());
}

void sort_options(std::vector<bool>& v)
{
    const auto trues = std::count(v.begin(), v.end(), true);
    const auto falses = static_cast<std::ptrdiff_t>(v.size()) - trues;
    v.assign(static_cast<std::size_t>(falses), false);
    v.insert(v.end(), static_cast<std::size_t>(trues), true);
}

template <typename T>
void check_option_set(const std::vector<T>& v, const char* name, std::vector<std::string>& problems)
{
    if (v.empty()) {
        problems.push_back(std::string(name) + " is empty");
        return;
    }
    auto sorted = v;
    sort_options(sorted);
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        problems.push_back(std::string(name) + " contains duplicates");
}

void check_positive(const std::vector<int>& v, const char* name, std::vector<std::string>& problems)
{
    for (int x : v)
        if (x <= 0) {
            problems.push_back(std::string(name) + " must hold positive integers");
            return;
        }
}

template <typename T>
bool contains(const std::vector<T>& v, const T& x)
{
    return std::find(v.begin(), v.end(), x) != v.end();
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r))
        throw ConfigError("search-space size overflows 64 bits");
    return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r))
        throw ConfigError("search-space size overflows 64 bits");
    return r;
}

std::uint64_t checked_pow(std::uint64_t base, int exp)
{
    std::uint64_t r = 1;
    for (int i = 0; i < exp; ++i)
        r = checked_mul(r, base);
    return r;
}

template <typename T>
const T& pick(const std::vector<T>& options, Rng& rng)
{
    return options[rng.below(options.size())];
}

bool pick(const std::vector<bool>& options, Rng& rng)
{
    return options[rng.below(options.size())];
}

}  // namespace

SearchSpaceConfig SearchSpaceConfig::canonicalized() const
{
    SearchSpaceConfig c = *this;
    sort_options(c.stem_kernel_options);
    sort_options(c.stem_dropout_options);
    sort_options(c.encoder_layer_count_options);
    sort_options(c.encoder_operation_options);
    sort_options(c.mha_head_options);
    sort_options(c.decoder_layer_count_options);
    sort_options(c.decoder_head_options);
    sort_options(c.head_pooling_options);
    sort_options(c.head_spatial_dropout_options);
    return c;
}

bool SearchSpaceConfig::has_op(EncoderOp op) const
{
    return contains(encoder_operation_options, op);
}

int SearchSpaceConfig::max_encoder_layers() const
{
    return encoder_layer_count_options.empty()
               ? 0
               : *std::max_element(encoder_layer_count_options.begin(), encoder_layer_count_options.end());
}

SearchSpaceConfig validate_config(const SearchSpaceConfig& cfg)
{
    std::vector<std::string> problems;
    check_option_set(cfg.stem_kernel_options, "stem_kernel_options", problems);
    check_option_set(cfg.stem_dropout_options, "stem_dropout_options", problems);
    check_option_set(cfg.encoder_layer_count_options, "encoder_layer_count_options", problems);
    check_option_set(cfg.encoder_operation_options, "encoder_operation_options", problems);
    check_option_set(cfg.mha_head_options, "mha_head_options", problems);
    check_option_set(cfg.decoder_layer_count_options, "decoder_layer_count_options", problems);
    check_option_set(cfg.decoder_head_options, "decoder_head_options", problems);
    check_option_set(cfg.head_pooling_options, "head_pooling_options", problems);
    check_option_set(cfg.head_spatial_dropout_options, "head_spatial_dropout_options", problems);
    check_positive(cfg.encoder_layer_count_options, "encoder_layer_count_options", problems);
    check_positive(cfg.mha_head_options, "mha_head_options", problems);
    check_positive(cfg.decoder_layer_count_options, "decoder_layer_count_options", problems);
    check_positive(cfg.decoder_head_options, "decoder_head_options", problems);
    for (int k : cfg.stem_kernel_options)
        if (k <= 0 || k % 2 == 0) {
            problems.push_back("stem_kernel_options must hold odd positive integers");
            break;
        }
    if (cfg.d_model <= 0) {
        problems.push_back("d_model must be positive");
    } else if (!cfg.mha_head_options.empty()) {
        const int max_heads = *std::max_element(cfg.mha_head_options.begin(), cfg.mha_head_options.end());
        if (max_heads > 0 && cfg.d_model % (3 * max_heads) != 0)
            problems.push_back("d_model must be divisible by 3 * max(mha_head_options)");
    }
    if (cfg.d_model > 0)
        for (int h : cfg.decoder_head_options)
            if (h > 0 && cfg.d_model % h != 0) {
                problems.push_back("d_model must be divisible by every decoder head count");
                break;
            }

    if (!problems.empty()) {
        std::ostringstream os;
        os << "invalid search-space config: ";
        for (std::size_t i = 0; i < problems.size(); ++i)
            os << (i ? "; " : "") << problems[i];
        throw ConfigError(os.str());
    }
    return cfg.canonicalized();
}

SearchSpaceConfig default_space()
{
    return SearchSpaceConfig{};
}

SearchSpaceConfig paper_space()
{
    SearchSpaceConfig c;
    c.decoder_enabled = false;
    return c;
}

SearchSpaceConfig preset_space(std::string_view name)
{
    if (name == "default") return default_space();
    if (name == "paper") return paper_space();
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected default or paper)");
}

std::vector<std::string> op_tags(const EncoderLayerSpec& layer)
{
    std::vector<std::string> tags;
    if (layer.mha_heads)
        tags.push_back("MHA(" + std::to_string(*layer.mha_heads) + ")");
    if (layer.gru)
        tags.emplace_back("GRU");
    if (layer.conv)
        tags.emplace_back("CONV");
    return tags;
}

ArchId::ArchId(std::string hex) : hex_(std::move(hex))
{
    if (!is_sha256_hex(hex_))
        throw ValidationError("malformed arch id '" + hex_ + "'");
}

std::vector<int> slice_widths(int d_model, int parts)
{
    std::vector<int> widths;
    if (parts <= 0)
        return widths;
    for (int i = 0; i < parts; ++i)
        widths.push_back(d_model / parts + (i < d_model % parts ? 1 : 0));
    return widths;
}

std::vector<EncoderLayerSpec> enumerate_layer_variants(const SearchSpaceConfig& raw)
{
    const SearchSpaceConfig cfg = validate_config(raw);
    const bool gru = cfg.has_op(EncoderOp::gru);
    const bool conv = cfg.has_op(EncoderOp::conv);

    // Subsets of the non-attention ops in the order {}, {G}, {C}, {G,C}.
    std::vector<std::pair<bool, bool>> rest{{false, false}};
    if (gru) rest.push_back({true, false});
    if (conv) rest.push_back({false, true});
    if (gru && conv) rest.push_back({true, true});

    std::vector<EncoderLayerSpec> variants;
    if (cfg.has_op(EncoderOp::mha))
        for (int h : cfg.mha_head_options)
            for (auto [g, c] : rest)
                variants.push_back({h, g, c});
    for (auto [g, c] : rest)
        if (g || c)
            variants.push_back({std::nullopt, g, c});
    return variants;
}

std::uint64_t encoder_cardinality(const SearchSpaceConfig& raw)
{
    const SearchSpaceConfig cfg = validate_config(raw);
    if (!cfg.encoder_enabled)
        return 0;
    const std::uint64_t variants = enumerate_layer_variants(cfg).size();
    std::uint64_t total = 0;
    for (int layers : cfg.encoder_layer_count_options)
        total = checked_add(total, checked_pow(variants, layers));
    return total;
}

std::uint64_t cardinality(const SearchSpaceConfig& raw)
{
    const SearchSpaceConfig cfg = validate_config(raw);
    const std::uint64_t stem = cfg.stem_kernel_options.size() * cfg.stem_dropout_options.size();
    const std::uint64_t decoder =
        cfg.decoder_enabled ? 1 + cfg.decoder_layer_count_options.size() * cfg.decoder_head_options.size() : 1;
    const std::uint64_t head = cfg.head_pooling_options.size() * cfg.head_spatial_dropout_options.size();
    return checked_mul(checked_mul(checked_mul(stem, checked_add(1, encoder_cardinality(cfg))), decoder), head);
}

ArchitectureSpec sample_architecture(const SearchSpaceConfig& raw, Rng& rng, SamplingMode mode)
{
    const SearchSpaceConfig cfg = validate_config(raw);
    ArchitectureSpec spec;
    spec.stem.kernel = pick(cfg.stem_kernel_options, rng);
    spec.stem.dropout = pick(cfg.stem_dropout_options, rng);

    if (cfg.encoder_enabled) {
        const auto variants = enumerate_layer_variants(cfg);
        // Option 0 is "absent"; option i>0 is encoder_layer_count_options[i-1].
        std::size_t choice;
        if (mode == SamplingMode::per_factor) {
            choice = rng.below(cfg.encoder_layer_count_options.size() + 1);
        } else {
            std::vector<std::uint64_t> weights{1};
            for (int layers : cfg.encoder_layer_count_options)
                weights.push_back(checked_pow(variants.size(), layers));
            std::uint64_t total = 0;
            for (auto w : weights)
                total = checked_add(total, w);
            std::uint64_t r = rng.below(total);
            choice = 0;
            while (r >= weights[choice]) {
                r -= weights[choice];
                ++choice;
            }
        }
        if (choice > 0) {
            const int layers = cfg.encoder_layer_count_options[choice - 1];
            std::vector<EncoderLayerSpec> encoder;
            for (int i = 0; i < layers; ++i)
                encoder.push_back(pick(variants, rng));
            spec.encoder = std::move(encoder);
        }
    }

    if (cfg.decoder_enabled) {
        const auto& layer_opts = cfg.decoder_layer_count_options;
        if (mode == SamplingMode::per_factor) {
            // absent + one option per layer count; heads chosen independently
            const std::size_t choice = rng.below(layer_opts.size() + 1);
            if (choice > 0)
                spec.decoder = DecoderSpec{layer_opts[choice - 1], pick(cfg.decoder_head_options, rng)};
        } else {
            const std::uint64_t present = layer_opts.size() * cfg.decoder_head_options.size();
            const std::uint64_t choice = rng.below(present + 1);
            if (choice > 0) {
                const std::uint64_t k = choice - 1;
                spec.decoder = DecoderSpec{layer_opts[k / cfg.decoder_head_options.size()],
                                           cfg.decoder_head_options[k % cfg.decoder_head_options.size()]};
            }
        }
    }

    spec.head.pooling = pick(cfg.head_pooling_options, rng);
    spec.head.spatial_dropout = pick(cfg.head_spatial_dropout_options, rng);
    return spec;
}

std::vector<std::string> validate_spec(const ArchitectureSpec& spec, const SearchSpaceConfig& cfg)
{
    std::vector<std::string> v;
    if (!contains(cfg.stem_kernel_options, spec.stem.kernel))
        v.push_back("stem.kernel " + std::to_string(spec.stem.kernel) + " not in stem_kernel_options");
    if (!contains(cfg.stem_dropout_options, spec.stem.dropout))
        v.push_back("stem.dropout not in stem_dropout_options");

    if (spec.encoder) {
        const auto& layers = *spec.encoder;
        if (!cfg.encoder_enabled)
            v.push_back("encoder present but encoder_enabled is false");
        if (!contains(cfg.encoder_layer_count_options, static_cast<int>(layers.size())))
            v.push_back("encoder layer count " + std::to_string(layers.size()) +
                        " not in encoder_layer_count_options");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& layer = layers[i];
            const std::string where = "encoder.layer" + std::to_string(i);
            const int n = layer.op_count();
            if (n < 1 || n > 3) {
                v.push_back(where + " has " + std::to_string(n) + " operations (expected 1-3)");
                continue;
            }
            if (layer.gru && !cfg.has_op(EncoderOp::gru))
                v.push_back(where + " uses GRU which is not in encoder_operation_options");
            if (layer.conv && !cfg.has_op(EncoderOp::conv))
                v.push_back(where + " uses CONV which is not in encoder_operation_options");
            if (layer.mha_heads) {
                const int h = *layer.mha_heads;
                if (!cfg.has_op(EncoderOp::mha))
                    v.push_back(where + " uses MHA which is not in encoder_operation_options");
                if (!contains(cfg.mha_head_options, h))
                    v.push_back(where + " MHA head count " + std::to_string(h) + " not in mha_head_options");
                // MHA is first in slice order, so it gets the first (widest) slice.
                const int width = slice_widths(cfg.d_model, n).front();
                if (h <= 0 || width % h != 0)
                    v.push_back(where + " MHA slice width " + std::to_string(width) +
                                " not divisible by " + std::to_string(h) + " heads");
            }
        }
        if (layers.empty())
            v.push_back("encoder present with zero layers");
    }

    if (spec.decoder) {
        if (!cfg.decoder_enabled)
            v.push_back("decoder present but decoder_enabled is false");
        if (!contains(cfg.decoder_layer_count_options, spec.decoder->layers))
            v.push_back("decoder.layers " + std::to_string(spec.decoder->layers) +
                        " not in decoder_layer_count_options");
        if (!contains(cfg.decoder_head_options, spec.decoder->heads))
            v.push_back("decoder.heads " + std::to_string(spec.decoder->heads) + " not in decoder_head_options");
        else if (spec.decoder->heads <= 0 || cfg.d_model % spec.decoder->heads != 0)
            v.push_back("d_model not divisible by decoder.heads");
    }

    if (!contains(cfg.head_pooling_options, spec.head.pooling))
        v.push_back("head.pooling " + std::string(to_string(spec.head.pooling)) + " not in head_pooling_options");
    if (!contains(cfg.head_spatial_dropout_options, spec.head.spatial_dropout))
        v.push_back("head.spatial_dropout not in head_spatial_dropout_options");
    return v;
}

ArchId canonical_id(const ArchitectureSpec& spec)
{
    std::vector<std::string> problems;
    if (spec.stem.kernel <= 0)
        problems.push_back("stem.kernel must be positive");
    if (spec.encoder) {
        if (spec.encoder->empty())
            problems.push_back("encoder present with zero layers");
        for (const auto& layer : *spec.encoder)
            if (layer.op_count() == 0 || (layer.mha_heads && *layer.mha_heads <= 0)) {
                problems.push_back("encoder layer with empty op set or non-positive heads");
                break;
            }
    }
    if (spec.decoder && (spec.decoder->layers <= 0 || spec.decoder->heads <= 0))
        problems.push_back("decoder layers/heads must be positive");
    if (!problems.empty())
        throw ValidationError("cannot identify invalid spec: " + problems.front());
    return ArchId(sha256_hex(canonical_json(spec)));
}

}  // namespace seqnas
