#include "missmarple/rng.hpp"

#include "missmarple/error.hpp"

namespace mm {

uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t seed, uint64_t v) {
    return mix64(seed ^ (mix64(v) + 0x9e3779b97f4a7c15ULL));
}

uint64_t hash_str(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng::Rng(uint64_t seed, uint64_t stream) {
    state_ = mix64(seed);
    inc_ = (mix64(stream + 0x5851f42d4c957f2dULL) << 1u) | 1u;
    next_u32();
    next_u32();
}

uint32_t Rng::next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

uint64_t Rng::next_u64() {
    return (static_cast<uint64_t>(next_u32()) << 32) | next_u32();
}

float Rng::uniform() {
    return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f;
}

double Rng::uniform_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int bound) {
    if (bound <= 0) throw validation_error("uniform_int bound must be positive");
    // rejection sampling to avoid modulo bias
    uint32_t b = static_cast<uint32_t>(bound);
    uint32_t threshold = (0u - b) % b;
    for (;;) {
        uint32_t r = next_u32();
        if (r >= threshold) return static_cast<int>(r % b);
    }
}

float Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform_double();
    } while (u1 <= 1e-300);
    u2 = uniform_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = static_cast<float>(r * std::sin(theta));
    has_spare_ = true;
    return static_cast<float>(r * std::cos(theta));
}

} // namespace mm
