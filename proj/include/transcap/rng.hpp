#pragma once

#include "transcap/spectral.hpp"

#include <cstdint>
#include <random>

namespace transcap::rng {

/// Independent streams drawn from the same key.
enum class Stream : std::uint64_t {
    noise = 1,
    initial = 2,
    rotation = 3,
    probe = 4,
    trial = 5,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based key for (master_seed, realization, step, stream). Distinct
/// tuples map to independent generator states; no generator is ever shared.
std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t realization,
                         std::uint64_t step, Stream stream) noexcept;

/// Short-lived generator owned by one (realization, step) cell.
class CounterRng {
public:
    CounterRng(std::uint64_t master_seed, std::uint64_t realization, std::uint64_t step,
               Stream stream);
    explicit CounterRng(std::uint64_t key);

    double normal();
    double uniform();
    Vector normal_vector(Eigen::Index n);
    std::uint64_t next_u64() { return engine_(); }
    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Haar-random orthogonal d x d matrix from a seed.
Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed);

} // namespace transcap::rng
