// Dual-stream hand-crafted feature extraction: each image is encoded
// independently into a multi-scale, multi-channel pyramid (smoothed
// intensity, spatial gradients, optional MIND-SSC descriptors).
#pragma once

#include "regmod/volume.hpp"

namespace regmod {

// C-channel feature grid, channel-planar like DisplacementField.
struct FeatureVolume {
    GridInfo grid;
    int channels = 0;
    std::vector<double> data;

    FeatureVolume() = default;
    FeatureVolume(const GridInfo& g, int c)
        : grid(g), channels(c), data(std::size_t(c) * g.voxel_count(), 0.0) {}

    double* channel(int c) { return data.data() + std::size_t(c) * grid.voxel_count(); }
    const double* channel(int c) const { return data.data() + std::size_t(c) * grid.voxel_count(); }
    double at(int c, std::size_t vox) const { return data[std::size_t(c) * grid.voxel_count() + vox]; }
};

struct FeatureSpec {
    double sigma = 0.5;     // pre-gradient smoothing, voxels
    bool gradients = true;  // d gradient channels
    bool mind = false;      // 12 MIND-SSC channels (3D only)
    int mind_radius = 2;
    int mind_dilation = 2;

    int channel_count(int ndim) const {
        return 1 + (gradients ? ndim : 0) + (mind ? 12 : 0);
    }
};

// Level 0 is the raw image; levels 1..L carry ceil-halved images and their
// feature volumes. images has L+1 entries, features has L entries (level 1..L).
struct FeaturePyramid {
    std::vector<ScalarVolume> images;
    std::vector<FeatureVolume> features;

    int levels() const { return int(features.size()); }
    const FeatureVolume& level(int l) const { return features[std::size_t(l) - 1]; }
    const ScalarVolume& image(int l) const { return images[std::size_t(l)]; }
};

// Separable Gaussian, kernel radius ceil(3*sigma), renormalized to sum 1
// after truncation; sigma = 0 is the identity. Throws on negative sigma.
ScalarVolume gaussian_smooth(const ScalarVolume& vol, double sigma);

// Componentwise Gaussian smoothing of a vector field.
DisplacementField smooth_field(const DisplacementField& u, double sigma);

// Central differences interior, one-sided at borders, voxel units;
// d channels. Every axis must have extent >= 2.
FeatureVolume spatial_gradients(const ScalarVolume& vol);

// 12-channel self-similarity-context descriptor (3D only): box-patch SSD
// between the 12 dilated six-neighborhood edge pairs, variance-normalized
// per voxel, mapped through exp(-D/V). Channels lie in (0, 1].
FeatureVolume mind_ssc(const ScalarVolume& vol, int radius, int dilation);

// Level l image = downsample_avg applied l times; identical procedure for
// both images of a pair (no cross-image terms). Requires dims >= 2^L.
FeaturePyramid build_pyramid(const ScalarVolume& vol, int levels, const FeatureSpec& spec);

// Features of a single image at its own resolution, per spec.
FeatureVolume extract_features(const ScalarVolume& vol, const FeatureSpec& spec);

// Componentwise warp of a feature volume (linear, clamp-to-edge).
FeatureVolume warp_features(const FeatureVolume& f, const DisplacementField& u);

// Separable sliding-window sum over the (2*radius+1)^d box, windows clamped
// (shrinking) at the borders. Shared by LNCC and MIND.
void box_sum(const double* in, double* out, const GridInfo& g, int radius);

}  // namespace regmod
