// Deformation regularization energy (diffusion) with gradient, and
// Jacobian-based regularity diagnostics (SD log J, NDV).
#pragma once

#include "regmod/similarity.hpp"
#include "regmod/volume.hpp"

#include <optional>

namespace regmod {

// Per-voxel determinant of d(phi)/dx; equals 1 everywhere for the zero field.
struct JacobianField {
    GridInfo grid;
    std::vector<double> data;
};

// value = mean over voxels, components and axes of squared forward
// differences of u (voxel units); gradient is the exact derivative.
FieldLoss diffusion(const DisplacementField& u);

// det(I + grad u) per voxel, central differences interior, one-sided at
// the borders, derivatives in voxel units.
JacobianField jacobian_det(const DisplacementField& u);

// Population standard deviation of log(max(det, 1e-9)) over masked voxels
// (mask: voxels with label != 0), or all voxels when no mask is given.
double sd_log_j(const JacobianField& j, const LabelVolume* mask = nullptr);

// Fraction of masked voxels with det <= 0.
double ndv(const JacobianField& j, const LabelVolume* mask = nullptr);

}  // namespace regmod
