#include "fsma/taskdata/perlin.hpp"

#include "fsma/common/rng.hpp"

#include <cmath>
#include <numeric>

namespace fsma::taskdata {

namespace {

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double lerp(double a, double b, double t) { return a + t * (b - a); }

double grad(std::uint8_t hash, double x, double y) {
    switch (hash & 7) {
    case 0: return x + y;
    case 1: return -x + y;
    case 2: return x - y;
    case 3: return -x - y;
    case 4: return x;
    case 5: return -x;
    case 6: return y;
    default: return -y;
    }
}

} // namespace

PerlinNoise::PerlinNoise(std::uint64_t seed) {
    std::array<std::uint8_t, 256> p{};
    std::iota(p.begin(), p.end(), std::uint8_t{0});
    Rng rng(seed);
    for (std::size_t i = p.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.index(i + 1));
        std::swap(p[i], p[j]);
    }
    for (std::size_t i = 0; i < 512; ++i) perm_[i] = p[i & 255];
}

double PerlinNoise::noise(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int xi = static_cast<int>(static_cast<long long>(fx) & 255);
    const int yi = static_cast<int>(static_cast<long long>(fy) & 255);
    x -= fx;
    y -= fy;
    const double u = fade(x);
    const double v = fade(y);
    const int a = perm_[xi] + yi;
    const int b = perm_[xi + 1] + yi;
    return lerp(lerp(grad(perm_[a], x, y), grad(perm_[b], x - 1.0, y), u),
                lerp(grad(perm_[a + 1], x, y - 1.0), grad(perm_[b + 1], x - 1.0, y - 1.0), u), v);
}

double PerlinNoise::fbm(double x, double y, int octaves, double persistence) const {
    double sum = 0.0;
    double amplitude = 1.0;
    double norm = 0.0;
    double frequency = 1.0;
    for (int o = 0; o < octaves; ++o) {
        sum += amplitude * noise(x * frequency, y * frequency);
        norm += amplitude;
        amplitude *= persistence;
        frequency *= 2.0;
    }
    return norm > 0.0 ? sum / norm : 0.0;
}

} // namespace fsma::taskdata
