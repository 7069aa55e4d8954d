// Similarity losses with gradients, and the correlation-volume block for
// explicit voxel-wise correspondence.
#pragma once

#include "regmod/features.hpp"
#include "regmod/volume.hpp"

namespace regmod {

// Loss with an image-shaped gradient w.r.t. the second argument.
struct ImageLoss {
    double value = 0.0;
    ScalarVolume grad;
};

// Loss with a displacement-shaped gradient: the directional derivative of
// the loss under local translations of the second image along each axis.
struct FieldLoss {
    double value = 0.0;
    DisplacementField grad;
};

// value = mean((a-b)^2); grad w.r.t. b = 2(b-a)/N.
ImageLoss mse(const ScalarVolume& a, const ScalarVolume& b);

// Negative mean squared local NCC over a box window (odd, >= 3), local
// statistics via clamped box filtering, denominator floored at eps. The
// analytic gradient w.r.t. b is the exact derivative of the returned value.
ImageLoss lncc(const ScalarVolume& a, const ScalarVolume& b, int window, double eps = 1e-5);

// Mean squared MIND-SSC descriptor difference over all 12 channels, 3D only.
// Gradient is numerical: finite differences of the descriptor of b along the
// d axes (the descriptor is treated as moving with the image).
FieldLoss mind_loss(const ScalarVolume& a, const ScalarVolume& b, int radius, int dilation);

// (2r+1)^d-channel volume of local feature inner products, channels indexed
// by offset y-x in lexicographic order.
struct CorrelationVolume {
    GridInfo grid;
    int radius = 1;
    int channels = 0;
    std::vector<double> data;  // channel-planar

    double at(int ch, std::size_t vox) const { return data[std::size_t(ch) * grid.voxel_count() + vox]; }
    double* channel(int c) { return data.data() + std::size_t(c) * grid.voxel_count(); }
};

// C(x, y) = <f_t(x), f_s(y)> / C_l for all y in the (2r+1)^d window around x;
// offsets outside the grid use clamp-to-edge source features.
CorrelationVolume correlation_volume(const FeatureVolume& f_t, const FeatureVolume& f_s, int r);

// Offsets in channel (lexicographic) order.
std::vector<std::array<int, 3>> correlation_offsets(int ndim, int r);

// Integer displacement per voxel = offset maximizing correlation; ties broken
// toward the smallest offset norm, then lexicographically. Raw (unsmoothed).
DisplacementField corr_argmax_proposal(const CorrelationVolume& corr);

}  // namespace regmod
