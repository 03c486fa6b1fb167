#ifndef MISSMARPLE_RNG_HPP
#define MISSMARPLE_RNG_HPP

#include <cstdint>
#include <cmath>
#include <string>
#include <vector>

namespace mm {

uint64_t mix64(uint64_t x);
uint64_t hash_combine(uint64_t seed, uint64_t v);
uint64_t hash_str(const std::string& s);

// PCG32. Self-contained so that seeded runs are reproducible independent of
// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0);

    uint32_t next_u32();
    uint64_t next_u64();

    // Uniform in [0,1).
    float uniform();
    double uniform_double();
    // Uniform integer in [0, bound). bound must be > 0.
    int uniform_int(int bound);
    // Standard normal via Box-Muller.
    float normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    uint64_t inc_;
    bool has_spare_ = false;
    float spare_ = 0.0f;
};

} // namespace mm

#endif
