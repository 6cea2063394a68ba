#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace dqrc {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives a child seed from (parent, role label, index path). Every random
/// stream in the library is addressed this way so that results never depend
/// on thread placement or evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::initializer_list<std::uint64_t> path = {}) {
    std::uint64_t h = mix64(parent ^ mix64(fnv1a(label)));
    for (std::uint64_t p : path) {
        h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return h;
}

}  // namespace dqrc
