// Per-pair variational registration composed from the modular blocks:
// dual-stream features, motion pyramid + warping, correlation proposals,
// and iterative refinement rounds.
#pragma once

#include "regmod/features.hpp"
#include "regmod/similarity.hpp"
#include "regmod/volume.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace regmod {

// Loss became non-finite during optimization; carries the trace so far.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SimilarityKind { Mse, Lncc, Mind };

struct RegConfig {
    int levels = 4;                // pyramid depth; 1 when the pyramid block is off
    std::vector<int> iters;        // gradient steps per level, entry 0 = level 1
    double step = 0.5;             // voxel step at the coarsest level, halved per finer level
    double sigma_fluid = 1.0;      // gradient smoothing, voxels
    double sigma_prop = 1.0;       // correlation-proposal smoothing, voxels
    SimilarityKind similarity = SimilarityKind::Lncc;
    int lncc_window = 9;
    int mind_radius = 2;
    int mind_dilation = 2;
    double lambda = 0.5;
    bool dual = true;              // dual-stream feature pyramids vs raw intensity
    bool pyramid = true;
    bool correlation = true;
    int corr_radius = 1;
    std::vector<int> refine;       // refinement rounds per level, entry 0 = level 1
    bool bidirectional = false;
    FeatureSpec features;
    std::uint64_t seed = 2023;     // echoed into diagnostics; the solver is deterministic

    int iters_at(int level) const { return iters[std::size_t(level) - 1]; }
    int refine_at(int level) const { return refine[std::size_t(level) - 1]; }
    void validate() const;  // throws std::invalid_argument
};

// Named block ladders: BASE, D, DWP, DWCP, DWCPI.
RegConfig preset_config(const std::string& name);

struct EvalInputs {
    const LabelVolume* fixed_labels = nullptr;
    const LabelVolume* moving_labels = nullptr;
    const LandmarkSet* fixed_lms = nullptr;
    const LandmarkSet* moving_lms = nullptr;
};

struct Snapshot {
    int level = 0;
    int iteration = 0;            // refinement round, 1-based
    double sim_full = 0.0;        // configured similarity at full resolution
    double mean_disp_full = 0.0;  // mean displacement magnitude, full-res voxels
    std::optional<double> tre_mean_mm;
    std::optional<double> dice_mean;
    std::optional<double> sd_log_j;
};

struct LevelTrace {
    int level = 0;
    int round = 0;                // 1-based
    bool proposal_applied = false;
    std::vector<double> losses;   // sim + lambda*reg per gradient step
};

struct DirectionResult {
    DisplacementField half;  // level-1 (half-resolution) field
    DisplacementField full;  // upsample_flow(half) onto the image grid
    std::vector<LevelTrace> traces;
    std::vector<Snapshot> snapshots;
    std::vector<double> level_final_losses;  // entry 0 = level 1
    double pyramid_loss = 0.0;
    double initial_loss_full = 0.0;
    double final_loss_full = 0.0;
};

struct RegResult {
    DirectionResult forward;                 // moving -> fixed
    std::optional<DirectionResult> backward; // fixed -> moving, bidirectional mode
};

// Weighted sum of per-level losses. With no explicit weights the default
// w_l = 2^-l is used (level = index + 1); an explicit weight vector must
// match the loss vector in length.
double pyramid_loss(const std::vector<double>& level_losses,
                    const std::vector<double>& weights = {});

RegResult register_pair(const ScalarVolume& fixed, const ScalarVolume& moving,
                        const RegConfig& cfg, const EvalInputs* eval = nullptr);

}  // namespace regmod
