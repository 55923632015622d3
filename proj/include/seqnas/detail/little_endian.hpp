#pragma once

#include <algorithm>
#include <array>
#include <bit>

namespace seqnas::detail {

// Identity on little-endian hosts, byte swap otherwise.
template <typename T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

}  // namespace seqnas::detail
