// Accuracy metrics on label maps (Dice, HD95, ASSD, NSD) and landmark TRE
// under a displacement field. Surface distances are exact brute force.
#pragma once

#include "regmod/volume.hpp"

#include <map>
#include <optional>

namespace regmod {

// 200*|A&B| / (|A|+|B|) per label, in percent. Labels absent in both maps
// are reported as nullopt and excluded from means.
std::map<std::int32_t, std::optional<double>> dice(const LabelVolume& a, const LabelVolume& b,
                                                   const std::vector<std::int32_t>& labels);

struct SurfaceDistances {
    double hd95 = 0.0;  // mm, pooled bidirectional, interpolated percentile
    double assd = 0.0;  // mm, mean of pooled distances
    double hd100 = 0.0;
};

// Surface voxels = mask voxels with at least one six-neighborhood background
// neighbor (out-of-grid counts as background). Spacing-aware, exact.
// Returns nullopt when either mask is empty for the label.
std::optional<SurfaceDistances> surface_distances(const LabelVolume& a, const LabelVolume& b,
                                                  std::int32_t label);

// Fraction of each surface's points within tau (mm) of the other surface,
// averaged over both surfaces, in percent.
std::optional<double> nsd(const LabelVolume& a, const LabelVolume& b, std::int32_t label,
                          double tau_mm);

struct TreStats {
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;
    double p75 = 0.0;
    std::vector<double> per_landmark;  // mm
};

// error_i = ||(p_i + u(p_i)) - q_i|| in mm; u interpolated at p_i and the
// difference converted through spacing componentwise.
TreStats tre(const DisplacementField& u, const LandmarkSet& fixed_lms,
             const LandmarkSet& moving_lms, const std::array<double, 3>& spacing);

// Linear-interpolated percentile of an unsorted sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace regmod
