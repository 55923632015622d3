#include <doctest.h>

#include <map>
#include <set>

#include "seqnas/avec.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/hashing.hpp"

using namespace seqnas;

namespace {

// Expected bits computed from slot names alone.
std::vector<std::uint8_t> by_name(const ArchitectureSpec& s, const FeatureLayout& layout)
{
    std::set<std::string> on;
    on.insert("stem.kernel=" + std::to_string(s.stem.kernel));
    if (s.stem.dropout)
        on.insert("stem.dropout");
    if (s.encoder) {
        on.insert("encoder.present");
        on.insert("encoder.layers=" + std::to_string(s.encoder->size()));
        for (std::size_t i = 0; i < s.encoder->size(); ++i)
            for (const auto& tag : op_tags((*s.encoder)[i]))
                on.insert("encoder.layer" + std::to_string(i) + "." + tag);
    }
    if (s.decoder) {
        on.insert("decoder.present");
        on.insert("decoder.layers=" + std::to_string(s.decoder->layers));
        on.insert("decoder.heads=" + std::to_string(s.decoder->heads));
    }
    on.insert("head.pooling=" + std::string(to_string(s.head.pooling)));
    if (s.head.spatial_dropout)
        on.insert("head.spatial_dropout");

    std::vector<std::uint8_t> bits;
    std::size_t matched = 0;
    for (const auto& slot : layout.slots) {
        bits.push_back(on.count(slot.name) ? 1 : 0);
        matched += bits.back();
    }
    REQUIRE(matched == on.size());
    return bits;
}

std::size_t slot_index(const FeatureLayout& layout, const std::string& name)
{
    for (std::size_t i = 0; i < layout.size(); ++i)
        if (layout.slots[i].name == name)
            return i;
    FAIL("no slot " << name);
    return 0;
}

}  // namespace

TEST_SUITE("avec")
{
    TEST_CASE("layout sizes and fingerprint")
    {
        const auto def = feature_layout(default_space());
        CHECK(def.size() == 43);
        CHECK(feature_layout(paper_space()).size() == 36);
        auto no_enc = paper_space();
        no_enc.encoder_enabled = false;
        CHECK(feature_layout(no_enc).size() == 8);
        auto def_no_enc = default_space();
        def_no_enc.encoder_enabled = false;
        CHECK(feature_layout(def_no_enc).size() == 15);

        std::string joined;
        for (const auto& slot : def.slots)
            joined += slot.name + "\n";
        CHECK(def.fingerprint == sha256_hex(joined));
        CHECK(def.fingerprint != feature_layout(paper_space()).fingerprint);

        CHECK(def.slots[0].name == "stem.kernel=3");
        CHECK(def.slots[4].name == "encoder.present");
        CHECK(def.slots[8].name == "encoder.layer0.MHA(1)");
        CHECK(def.slots.back().name == "head.spatial_dropout");
        std::set<std::string> names;
        for (const auto& s : def.slots) {
            CHECK_FALSE(s.description.empty());
            names.insert(s.name);
        }
        CHECK(names.size() == def.size());
    }

    TEST_CASE("encode matches the name-based oracle and decodes back")
    {
        for (const auto& cfg : {default_space(), paper_space()}) {
            const auto layout = feature_layout(cfg);
            Rng rng(17);
            for (int i = 0; i < 2000; ++i) {
                const auto spec = sample_architecture(cfg, rng);
                const auto v = encode(spec, cfg);
                CHECK(v.layout_fp == layout.fingerprint);
                CHECK(v.bits == by_name(spec, layout));
                CHECK(decode(v, cfg) == spec);
                CHECK(FeatureVector::from_bit_string(v.to_bit_string(), v.layout_fp) == v);
            }
        }
    }

    TEST_CASE("encode rejects specs outside the space")
    {
        ArchitectureSpec s;
        s.decoder = DecoderSpec{1, 1};
        CHECK_THROWS_AS(encode(s, paper_space()), ValidationError);
    }

    TEST_CASE("decode rejects broken vectors")
    {
        const auto cfg = default_space();
        const auto layout = feature_layout(cfg);
        ArchitectureSpec s;
        s.encoder = std::vector<EncoderLayerSpec>{{2, false, true}};
        const auto good = encode(s, cfg);
        REQUIRE(decode(good, cfg) == s);

        auto flip = [&](const std::string& name) {
            auto v = good;
            v.bits[slot_index(layout, name)] ^= 1;
            return v;
        };
        // Two kernels.
        CHECK_THROWS_AS(decode(flip("stem.kernel=5"), cfg), DecodeError);
        // No kernel.
        CHECK_THROWS_AS(decode(flip("stem.kernel=3"), cfg), DecodeError);
        // A bit for a layer beyond the layer count.
        CHECK_THROWS_AS(decode(flip("encoder.layer1.GRU"), cfg), DecodeError);
        // Two MHA head options in one layer.
        CHECK_THROWS_AS(decode(flip("encoder.layer0.MHA(4)"), cfg), DecodeError);
        // Decoder detail bit without the decoder.
        CHECK_THROWS_AS(decode(flip("decoder.heads=2"), cfg), DecodeError);
        // Active layer with no operation.
        {
            auto v = flip("encoder.layer0.MHA(2)");
            v.bits[slot_index(layout, "encoder.layer0.CONV")] = 0;
            CHECK_THROWS_AS(decode(v, cfg), DecodeError);
        }
        // Wrong length and foreign layout.
        auto shorter = good;
        shorter.bits.pop_back();
        CHECK_THROWS_AS(decode(shorter, cfg), DecodeError);
        auto foreign = good;
        foreign.layout_fp = feature_layout(paper_space()).fingerprint;
        CHECK_THROWS_AS(decode(foreign, cfg), DecodeError);
        CHECK_THROWS_AS(FeatureVector::from_bit_string("01x"), DecodeError);

        // The error names the group or slot involved.
        try {
            decode(flip("stem.kernel=5"), cfg);
        } catch (const DecodeError& e) {
            CHECK(std::string(e.what()).find("stem.kernel") != std::string::npos);
        }
    }

    TEST_CASE("absent blocks are all zero")
    {
        const auto cfg = default_space();
        const auto layout = feature_layout(cfg);
        Rng rng(23);
        for (int i = 0; i < 2000; ++i) {
            const auto spec = sample_architecture(cfg, rng);
            const auto v = encode(spec, cfg);
            const std::size_t layers = spec.encoder ? spec.encoder->size() : 0;
            for (std::size_t k = 0; k < layout.size(); ++k) {
                const auto& name = layout.slots[k].name;
                if (name.rfind("encoder.", 0) == 0 && !spec.encoder)
                    CHECK(v.bits[k] == 0);
                if (name.rfind("decoder.", 0) == 0 && !spec.decoder)
                    CHECK(v.bits[k] == 0);
                if (name.rfind("encoder.layer", 0) == 0 && name.rfind("encoder.layers", 0) != 0) {
                    const std::size_t idx = std::stoul(name.substr(13));
                    if (idx >= layers)
                        CHECK(v.bits[k] == 0);
                }
            }
        }
    }
}
