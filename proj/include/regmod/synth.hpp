// Synthetic phantom and ground-truth deformation generation: the source of
// verifiable registration problems. Deterministic given a seed on every
// platform (counter-based RNG, see CounterRng).
#pragma once

#include "regmod/volume.hpp"

#include <cstdint>

namespace regmod {

// Counter-based generator: draw i is the splitmix64 finalizer applied to
// seed + (i+1) * 0x9E3779B97F4A7C15. Stateless apart from the counter, so
// identical seeds give identical streams on every platform.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);        // inclusive

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

enum class PhantomKind { Blobs, Grid, TwoTissue };
enum class FieldKind { Affine, GaussianBumps };

struct Phantom {
    ScalarVolume image;
    LabelVolume labels;
    LandmarkSet landmarks;
    std::uint64_t seed = 0;
};

struct GeneratorField {
    DisplacementField u_true;
    FieldKind kind = FieldKind::GaussianBumps;
    double max_disp = 0.0;  // achieved max-norm, voxels
};

struct GroundTruthPair {
    ScalarVolume fixed;        // the phantom image
    ScalarVolume moving;       // phantom warped through u_true
    LabelVolume fixed_labels;
    LabelVolume moving_labels;  // nearest-neighbor warped
    LandmarkSet fixed_lms;      // phantom landmarks p
    LandmarkSet moving_lms;     // p + u_true(p)
};

Phantom make_phantom(PhantomKind kind, const std::array<int, 3>& dims, int ndim,
                     std::uint64_t seed, int blob_count = 5);

// Intensity-inverted sibling (1 - image) sharing labels and landmarks.
ScalarVolume invert_intensity(const ScalarVolume& vol);

// Diffeomorphic by construction: jacobian_det > 0 everywhere is asserted at
// generation; gaussian-bumps regenerate with damped amplitude on failure
// (at most 8 retries).
GeneratorField make_field(FieldKind kind, const GridInfo& grid, double max_disp,
                          std::uint64_t seed);

GroundTruthPair apply_ground_truth(const Phantom& phantom, const GeneratorField& field);

// Numeric inverse via fixed-point iteration u_inv <- -u(x + u_inv(x)).
DisplacementField invert_field(const DisplacementField& u, int iterations = 20);

}  // namespace regmod
