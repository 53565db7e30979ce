#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wafp {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent stream seed for (master seed, subsystem tag, index). Adding a
/// new tag never shifts the streams of existing tags.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ fnv1a(tag));
    h = splitmix64(h ^ index);
    return h;
}

inline Engine make_engine(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return Engine(derive_seed(master, tag, index));
}

}  // namespace wafp
