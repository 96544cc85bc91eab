#pragma once

#include <cstdint>
#include <random>

#include "dcdm/tensor.hpp"

namespace dcdm {

/// Deterministic random source. All distribution transforms are implemented
/// here (not via std::*_distribution, whose algorithms vary across standard
/// libraries) so that identical seeds give identical streams on any build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    real uniform();

    /// Uniform in [lo, hi).
    real uniform(real lo, real hi);

    /// Unbiased integer in [0, n), rejection sampled. n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Marsaglia's polar method.
    real normal();

    Tensor normal_tensor(std::vector<int> shape);

    void fill_normal(Tensor& t);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    real spare_ = 0;
};

/// splitmix64 mix step; used to derive per-sample seeds from (run seed, id).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Stable 64-bit content hash (FNV-1a) over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::uint64_t hash_string(const std::string& s);

}  // namespace dcdm
