#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace utad::core {

/// Seeded random stream with portable draws and a serializable state.
///
/// Distribution helpers are implemented here instead of through <random>'s
/// distributions so that sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

    /// Independent stream derived from (seed, stream), for per-worker and
    /// per-subject streams.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) { return Rng(mix(seed) ^ mix(stream + 0x9e3779b97f4a7c15ULL)); }

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    double normal();

    std::string state() const;
    void set_state(const std::string& s);

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_ && a.spare_ == b.spare_ && a.has_spare_ == b.has_spare_; }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace utad::core
