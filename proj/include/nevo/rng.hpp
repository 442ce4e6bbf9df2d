#ifndef NEVO_RNG_HPP
#define NEVO_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace nevo {

// mt19937_64 with hand-rolled distributions. The standard distributions are
// implementation defined, so replays would not survive a stdlib change; the
// raw engine output is fully specified and these mappings are fixed here.
class Rng {
public:
    Rng() : engine_(5489u) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // [0, n), n > 0. Lemire reduction.
    int uniform_int(int n) {
        auto wide = static_cast<unsigned __int128>(next_u64());
        return static_cast<int>((wide * static_cast<std::uint64_t>(n)) >> 64);
    }

    bool coin(double p = 0.5) { return uniform() < p; }

    // Box-Muller, one value per call.
    double gaussian(double mean, double stddev) {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::string save_state() const {
        std::ostringstream out;
        out << engine_;
        return out.str();
    }

    void restore_state(const std::string& state) {
        std::istringstream in(state);
        in >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64; used to derive independent per-genome training seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + stream * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace nevo

#endif
