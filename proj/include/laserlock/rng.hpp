#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace laserlock {

/// Name recorded in run manifests so outputs can be regenerated later.
inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64 seeded via splitmix64(seed, stream); Box-Muller normals";

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for an independent stream derived from a user seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

/// Standard normal deviates. Box-Muller is implemented here rather than via
/// std::normal_distribution, whose output differs between standard libraries.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed, std::uint64_t stream = 0);

    double operator()();

private:
    double uniform_open();

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace laserlock
