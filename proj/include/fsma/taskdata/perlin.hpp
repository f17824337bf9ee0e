#pragma once

#include <array>
#include <cstdint>

namespace fsma::taskdata {

/// Improved gradient noise (Perlin 2002) over a seeded permutation table.
class PerlinNoise {
public:
    explicit PerlinNoise(std::uint64_t seed);

    /// Noise in roughly [-1, 1]; zero at integer lattice points.
    double noise(double x, double y) const;

    /// Fractal sum of `octaves` noise layers, each doubling the frequency and
    /// scaling the amplitude by `persistence`; normalised by the amplitude sum.
    double fbm(double x, double y, int octaves, double persistence) const;

private:
    std::array<std::uint8_t, 512> perm_{};
};

} // namespace fsma::taskdata
