// Volumetric grid types and the geometric operations built on them:
// d-linear sampling, backward warping, displacement composition and
// resolution changes. Displacements are stored in voxel units of their
// own grid; the zero field is the identity deformation.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace regmod {

// Grid geometry shared by every volumetric type. Axes beyond ndim are
// canonicalized to extent 1 / spacing 1 so that 2D and 3D share the same
// flat row-major layout (last real axis fastest).
struct GridInfo {
    int ndim = 3;
    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};

    GridInfo() = default;
    GridInfo(int nd, std::array<int, 3> d, std::array<double, 3> sp = {1.0, 1.0, 1.0});

    std::size_t voxel_count() const {
        return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
    }
    bool same_extent(const GridInfo& o) const {
        return ndim == o.ndim && dims == o.dims;
    }
    std::size_t index(int i, int j, int k = 0) const {
        return (std::size_t(i) * dims[1] + j) * dims[2] + k;
    }
    void validate() const;  // throws std::invalid_argument
};

struct ScalarVolume {
    GridInfo grid;
    std::vector<double> data;

    ScalarVolume() = default;
    explicit ScalarVolume(const GridInfo& g, double fill = 0.0)
        : grid(g), data(g.voxel_count(), fill) {}

    double& operator()(int i, int j, int k = 0) { return data[grid.index(i, j, k)]; }
    double operator()(int i, int j, int k = 0) const { return data[grid.index(i, j, k)]; }

    void check_finite(const char* what = "ScalarVolume") const;
};

// Per-voxel d-vector field, channel-planar storage (component c occupies
// data[c*N .. (c+1)*N)). Vectors are in voxel units of this grid.
struct DisplacementField {
    GridInfo grid;
    std::vector<double> data;

    DisplacementField() = default;
    explicit DisplacementField(const GridInfo& g, double fill = 0.0)
        : grid(g), data(std::size_t(g.ndim) * g.voxel_count(), fill) {}

    int components() const { return grid.ndim; }
    double& at(int comp, std::size_t vox) { return data[std::size_t(comp) * grid.voxel_count() + vox]; }
    double at(int comp, std::size_t vox) const { return data[std::size_t(comp) * grid.voxel_count() + vox]; }
    double* component(int c) { return data.data() + std::size_t(c) * grid.voxel_count(); }
    const double* component(int c) const { return data.data() + std::size_t(c) * grid.voxel_count(); }

    void check_finite(const char* what = "DisplacementField") const;
};

struct LabelVolume {
    GridInfo grid;
    std::vector<std::int32_t> data;

    LabelVolume() = default;
    explicit LabelVolume(const GridInfo& g, std::int32_t fill = 0)
        : grid(g), data(g.voxel_count(), fill) {}

    std::int32_t& operator()(int i, int j, int k = 0) { return data[grid.index(i, j, k)]; }
    std::int32_t operator()(int i, int j, int k = 0) const { return data[grid.index(i, j, k)]; }

    std::vector<std::int32_t> present_labels() const;  // sorted, excludes background 0
};

struct LandmarkSet {
    std::vector<std::array<double, 3>> points;  // voxel coordinates, trailing axes 0
    std::vector<std::string> names;             // optional, empty or one per point

    std::size_t size() const { return points.size(); }
};

// --- sampling / warping -------------------------------------------------

// d-linear interpolation with clamp-to-edge borders. `point` has grid.ndim
// meaningful entries (trailing entries ignored). Throws on non-finite input.
double sample_linear(const ScalarVolume& vol, const std::array<double, 3>& point);

// Componentwise linear interpolation of a vector field, clamp-to-edge.
std::array<double, 3> sample_linear_vector(const DisplacementField& u,
                                           const std::array<double, 3>& point);

// output(x) = vol(x + u(x)); same grid as the input volume.
ScalarVolume warp(const ScalarVolume& vol, const DisplacementField& u);

// Nearest-neighbor variant for categorical data.
LabelVolume warp_labels(const LabelVolume& labels, const DisplacementField& u);

// result(x) = u1(x) + u2(x + u1(x)); the field of applying phi1 then phi2.
DisplacementField compose(const DisplacementField& u1, const DisplacementField& u2);

// Dims doubled per axis (capped at target_dims when given), vectors linearly
// interpolated then multiplied by 2. Fine voxel i samples coarse coordinate i/2.
DisplacementField upsample_flow(const DisplacementField& u,
                                const std::array<int, 3>* target_dims = nullptr);

// Non-overlapping 2^d average pooling; trailing odd slices pooled over the
// truncated window; spacing doubled; output extent is ceil(n/2) per axis.
ScalarVolume downsample_avg(const ScalarVolume& vol);

// Extent after one pooling step.
std::array<int, 3> half_dims(const GridInfo& g);

}  // namespace regmod
