#include "seqnas/json_io.hpp"

#include <fstream>
#include <set>

#include "seqnas/errors.hpp"
#include "seqnas/hashing.hpp"

namespace seqnas {

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out)
{
    if (auto it = j.find(key); it != j.end())
        out = it->get<T>();
}

const std::set<std::string>& space_keys()
{
    static const std::set<std::string> keys{
        "stem_kernel_options",     "stem_dropout_options",        "d_model",
        "encoder_enabled",         "encoder_layer_count_options", "encoder_operation_options",
        "mha_head_options",        "decoder_enabled",             "decoder_layer_count_options",
        "decoder_head_options",    "head_pooling_options",        "head_spatial_dropout_options"};
    return keys;
}

}  // namespace

void to_json(json& j, const SearchSpaceConfig& cfg)
{
    json pooling = json::array();
    for (auto p : cfg.head_pooling_options)
        pooling.push_back(to_string(p));
    json ops = json::array();
    for (auto op : cfg.encoder_operation_options)
        ops.push_back(to_string(op));
    j = json{
        {"stem_kernel_options", cfg.stem_kernel_options},
        {"stem_dropout_options", cfg.stem_dropout_options},
        {"d_model", cfg.d_model},
        {"encoder_enabled", cfg.encoder_enabled},
        {"encoder_layer_count_options", cfg.encoder_layer_count_options},
        {"encoder_operation_options", ops},
        {"mha_head_options", cfg.mha_head_options},
        {"decoder_enabled", cfg.decoder_enabled},
        {"decoder_layer_count_options", cfg.decoder_layer_count_options},
        {"decoder_head_options", cfg.decoder_head_options},
        {"head_pooling_options", pooling},
        {"head_spatial_dropout_options", cfg.head_spatial_dropout_options},
    };
}

void from_json(const json& j, SearchSpaceConfig& cfg)
{
    if (!j.is_object())
        throw ConfigError("search-space config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!space_keys().count(key))
            throw ConfigError("unknown search-space field '" + key + "'");
    try {
        read_field(j, "stem_kernel_options", cfg.stem_kernel_options);
        read_field(j, "stem_dropout_options", cfg.stem_dropout_options);
        read_field(j, "d_model", cfg.d_model);
        read_field(j, "encoder_enabled", cfg.encoder_enabled);
        read_field(j, "encoder_layer_count_options", cfg.encoder_layer_count_options);
        read_field(j, "mha_head_options", cfg.mha_head_options);
        read_field(j, "decoder_enabled", cfg.decoder_enabled);
        read_field(j, "decoder_layer_count_options", cfg.decoder_layer_count_options);
        read_field(j, "decoder_head_options", cfg.decoder_head_options);
        read_field(j, "head_spatial_dropout_options", cfg.head_spatial_dropout_options);
        if (auto it = j.find("head_pooling_options"); it != j.end()) {
            cfg.head_pooling_options.clear();
            for (const auto& p : *it)
                cfg.head_pooling_options.push_back(parse_pooling(p.get<std::string>()));
        }
        if (auto it = j.find("encoder_operation_options"); it != j.end()) {
            cfg.encoder_operation_options.clear();
            for (const auto& op : *it)
                cfg.encoder_operation_options.push_back(parse_encoder_op(op.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed search-space config: ") + e.what());
    }
}

void to_json(json& j, const ArchitectureSpec& spec)
{
    j = json::object();
    j["stem"] = {{"kernel", spec.stem.kernel}, {"dropout", spec.stem.dropout}};
    if (spec.encoder) {
        json layers = json::array();
        for (const auto& layer : *spec.encoder)
            layers.push_back(op_tags(layer));
        j["encoder"] = std::move(layers);
    } else {
        j["encoder"] = nullptr;
    }
    if (spec.decoder)
        j["decoder"] = {{"layers", spec.decoder->layers}, {"heads", spec.decoder->heads}};
    else
        j["decoder"] = nullptr;
    j["head"] = {{"pooling", to_string(spec.head.pooling)}, {"spatial_dropout", spec.head.spatial_dropout}};
}

EncoderLayerSpec parse_layer_ops(const json& ops)
{
    if (!ops.is_array())
        throw FormatError("encoder layer must be an array of op tags");
    EncoderLayerSpec layer;
    for (const auto& tag_json : ops) {
        if (!tag_json.is_string())
            throw FormatError("op tag must be a string");
        const auto tag = tag_json.get<std::string>();
        if (tag == "GRU") {
            if (layer.gru) throw FormatError("duplicate GRU in encoder layer");
            layer.gru = true;
        } else if (tag == "CONV") {
            if (layer.conv) throw FormatError("duplicate CONV in encoder layer");
            layer.conv = true;
        } else if (tag.size() > 5 && tag.rfind("MHA(", 0) == 0 && tag.back() == ')') {
            if (layer.mha_heads) throw FormatError("duplicate MHA in encoder layer");
            const std::string digits = tag.substr(4, tag.size() - 5);
            if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 6)
                throw FormatError("malformed op tag '" + tag + "'");
            layer.mha_heads = std::stoi(digits);
        } else {
            throw FormatError("unknown op tag '" + tag + "'");
        }
    }
    return layer;
}

void from_json(const json& j, ArchitectureSpec& spec)
{
    try {
        if (!j.is_object())
            throw FormatError("architecture spec must be a JSON object");
        const auto& stem = j.at("stem");
        spec.stem.kernel = stem.at("kernel").get<int>();
        spec.stem.dropout = stem.at("dropout").get<bool>();

        spec.encoder.reset();
        if (auto it = j.find("encoder"); it != j.end() && !it->is_null()) {
            std::vector<EncoderLayerSpec> layers;
            for (const auto& ops : *it)
                layers.push_back(parse_layer_ops(ops));
            spec.encoder = std::move(layers);
        }

        spec.decoder.reset();
        if (auto it = j.find("decoder"); it != j.end() && !it->is_null())
            spec.decoder = DecoderSpec{it->at("layers").get<int>(), it->at("heads").get<int>()};

        const auto& head = j.at("head");
        spec.head.pooling = parse_pooling(head.at("pooling").get<std::string>());
        spec.head.spatial_dropout = head.at("spatial_dropout").get<bool>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed architecture spec: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("malformed architecture spec: ") + e.what());
    }
}

std::string canonical_json(const ArchitectureSpec& spec)
{
    // nlohmann objects are key-sorted; dump() without indent emits no whitespace.
    return json(spec).dump();
}

std::string space_hash(const SearchSpaceConfig& cfg)
{
    return sha256_hex(json(cfg.canonicalized()).dump());
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("'" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace seqnas
