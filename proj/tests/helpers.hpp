// Shared test utilities: a test-side RNG (independent of the library's
// counter RNG) and brute-force reference implementations used as oracles.
#pragma once

#include "regmod/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace regtest {

using regmod::DisplacementField;
using regmod::GridInfo;
using regmod::ScalarVolume;

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline ScalarVolume random_volume(const GridInfo& g, std::mt19937_64& rng, double lo = 0.0,
                                  double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    ScalarVolume v(g);
    for (double& x : v.data) x = d(rng);
    return v;
}

inline DisplacementField random_field(const GridInfo& g, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> d(-amp, amp);
    DisplacementField u(g);
    for (double& x : u.data) x = d(rng);
    return u;
}

// Independent d-linear interpolation with clamp-to-edge: explicit corner
// enumeration written from scratch (not shared with the library).
inline double oracle_sample(const ScalarVolume& vol, double x, double y, double z) {
    const GridInfo& g = vol.grid;
    double p[3] = {x, y, z};
    int lo[3] = {0, 0, 0};
    double f[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < g.ndim; ++a) {
        double c = std::min(std::max(p[a], 0.0), double(g.dims[a] - 1));
        lo[a] = std::min(int(std::floor(c)), g.dims[a] - 2 < 0 ? 0 : g.dims[a] - 2);
        if (lo[a] < 0) lo[a] = 0;
        f[a] = c - lo[a];
    }
    double acc = 0.0;
    int nb = g.ndim == 3 ? 8 : 4;
    for (int b = 0; b < nb; ++b) {
        int idx[3] = {lo[0], lo[1], lo[2]};
        double w = 1.0;
        for (int a = 0; a < g.ndim; ++a) {
            if ((b >> a) & 1) {
                idx[a] = std::min(lo[a] + 1, g.dims[a] - 1);
                w *= f[a];
            } else {
                w *= 1.0 - f[a];
            }
        }
        acc += w * vol(idx[0], idx[1], idx[2]);
    }
    return acc;
}

inline double oracle_sample_component(const DisplacementField& u, int c, double x, double y,
                                      double z) {
    ScalarVolume tmp(u.grid);
    std::copy(u.component(c), u.component(c) + u.grid.voxel_count(), tmp.data.begin());
    return oracle_sample(tmp, x, y, z);
}

}  // namespace regtest
