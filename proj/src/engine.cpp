#include "regmod/engine.hpp"

#include "regmod/metrics.hpp"
#include "regmod/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regmod {

void RegConfig::validate() const {
    if (levels < 1)
        throw std::invalid_argument("RegConfig: levels must be >= 1");
    if (!(step > 0.0))
        throw std::invalid_argument("RegConfig: step must be > 0");
    if (lambda < 0.0)
        throw std::invalid_argument("RegConfig: lambda must be >= 0");
    if (sigma_fluid < 0.0 || sigma_prop < 0.0)
        throw std::invalid_argument("RegConfig: smoothing sigmas must be >= 0");
    if (iters.size() != std::size_t(levels))
        throw std::invalid_argument("RegConfig: iters must have one entry per level");
    if (refine.size() != std::size_t(levels))
        throw std::invalid_argument("RegConfig: refine must have one entry per level");
    for (int n : iters)
        if (n < 0)
            throw std::invalid_argument("RegConfig: negative iteration count");
    for (int n : refine)
        if (n < 1)
            throw std::invalid_argument("RegConfig: refine counts must be >= 1");
    if (correlation && corr_radius < 1)
        throw std::invalid_argument("RegConfig: correlation radius must be >= 1");
    if (similarity == SimilarityKind::Lncc && (lncc_window < 3 || lncc_window % 2 == 0))
        throw std::invalid_argument("RegConfig: lncc window must be odd and >= 3");
    if (!pyramid && levels != 1)
        throw std::invalid_argument("RegConfig: pyramid off requires a single level");
}

RegConfig preset_config(const std::string& name) {
    RegConfig cfg;
    cfg.features = FeatureSpec{};
    if (name == "BASE" || name == "D") {
        cfg.levels = 1;
        cfg.pyramid = false;
        cfg.correlation = false;
        cfg.dual = (name == "D");
        cfg.iters = {220};
        cfg.refine = {1};
        return cfg;
    }
    cfg.levels = 4;
    cfg.pyramid = true;
    cfg.dual = true;
    cfg.iters = {40, 40, 60, 80};
    cfg.refine = {1, 1, 1, 1};
    if (name == "DWP") {
        cfg.correlation = false;
        return cfg;
    }
    if (name == "DWCP") {
        cfg.correlation = true;
        cfg.corr_radius = 1;
        return cfg;
    }
    if (name == "DWCPI") {
        cfg.correlation = true;
        cfg.corr_radius = 1;
        cfg.refine = {2, 2, 1, 1};  // n=2 rounds at half and quarter resolution
        return cfg;
    }
    throw std::invalid_argument("preset_config: unknown preset '" + name + "'");
}

double pyramid_loss(const std::vector<double>& level_losses, const std::vector<double>& weights) {
    if (!weights.empty() && weights.size() != level_losses.size())
        throw std::invalid_argument("pyramid_loss: weights and losses differ in length");
    double acc = 0.0;
    for (std::size_t i = 0; i < level_losses.size(); ++i)
        acc += weights.empty() ? std::ldexp(level_losses[i], -int(i + 1))  // 2^-(level)
                               : weights[i] * level_losses[i];
    return acc;
}

namespace {

struct SimEval {
    double value = 0.0;
    DisplacementField force;  // d-channel gradient w.r.t. the displacement
};

SimEval eval_similarity(const RegConfig& cfg, const ScalarVolume& fixed,
                        const ScalarVolume& moving, const DisplacementField& u) {
    ScalarVolume warped = warp(moving, u);
    SimEval out;
    if (cfg.similarity == SimilarityKind::Mind) {
        FieldLoss fl = mind_loss(fixed, warped, cfg.mind_radius, cfg.mind_dilation);
        out.value = fl.value;
        out.force = std::move(fl.grad);
        return out;
    }
    ImageLoss il = cfg.similarity == SimilarityKind::Mse
                       ? mse(fixed, warped)
                       : lncc(fixed, warped, cfg.lncc_window);
    FeatureVolume gr = spatial_gradients(warped);
    out.value = il.value;
    out.force = DisplacementField(u.grid);
    std::size_t N = u.grid.voxel_count();
    for (int c = 0; c < u.grid.ndim; ++c) {
        const double* gc = gr.channel(c);
        double* fc = out.force.component(c);
        for (std::size_t v = 0; v < N; ++v)
            fc[v] = il.grad.data[v] * gc[v];
    }
    return out;
}

double similarity_value(const RegConfig& cfg, const ScalarVolume& fixed,
                        const ScalarVolume& warped) {
    switch (cfg.similarity) {
        case SimilarityKind::Mse:
            return mse(fixed, warped).value;
        case SimilarityKind::Lncc:
            return lncc(fixed, warped, cfg.lncc_window).value;
        case SimilarityKind::Mind:
            return mind_loss(fixed, warped, cfg.mind_radius, cfg.mind_dilation).value;
    }
    return 0.0;
}

double level_loss(const RegConfig& cfg, const ScalarVolume& fixed, const ScalarVolume& moving,
                  const DisplacementField& u) {
    return similarity_value(cfg, fixed, warp(moving, u)) + cfg.lambda * diffusion(u).value;
}

double max_vector_norm(const DisplacementField& f) {
    std::size_t N = f.grid.voxel_count();
    double best = 0.0;
    for (std::size_t v = 0; v < N; ++v) {
        double acc = 0.0;
        for (int c = 0; c < f.components(); ++c)
            acc += f.at(c, v) * f.at(c, v);
        best = std::max(best, acc);
    }
    return std::sqrt(best);
}

double mean_vector_norm(const DisplacementField& f) {
    std::size_t N = f.grid.voxel_count();
    double acc = 0.0;
    for (std::size_t v = 0; v < N; ++v) {
        double n2 = 0.0;
        for (int c = 0; c < f.components(); ++c)
            n2 += f.at(c, v) * f.at(c, v);
        acc += std::sqrt(n2);
    }
    return acc / double(N);
}

// Per-voxel L2 normalization of feature vectors; zero vectors stay zero.
FeatureVolume normalize_features(const FeatureVolume& f) {
    FeatureVolume out = f;
    std::size_t N = f.grid.voxel_count();
    for (std::size_t v = 0; v < N; ++v) {
        double n2 = 0.0;
        for (int c = 0; c < f.channels; ++c) n2 += f.at(c, v) * f.at(c, v);
        if (n2 > 1e-24) {
            double inv = 1.0 / std::sqrt(n2);
            for (int c = 0; c < f.channels; ++c) out.channel(c)[v] *= inv;
        }
    }
    return out;
}

// Upsample a level-l field step by step onto the full-resolution grid.
DisplacementField to_full_resolution(const DisplacementField& u, int level,
                                     const std::vector<ScalarVolume>& images) {
    DisplacementField out = u;
    for (int l = level; l >= 1; --l) {
        const auto& target = images[std::size_t(l) - 1].grid.dims;
        out = upsample_flow(out, &target);
    }
    return out;
}

struct DirectionContext {
    const RegConfig& cfg;
    const ScalarVolume& fixed;
    const ScalarVolume& moving;
    const EvalInputs* eval;
};

void take_snapshot(DirectionContext& ctx, const DisplacementField& u, int level, int round,
                   const std::vector<ScalarVolume>& fixed_images, DirectionResult& res) {
    DisplacementField full = to_full_resolution(u, level, fixed_images);
    Snapshot s;
    s.level = level;
    s.iteration = round;
    s.sim_full = similarity_value(ctx.cfg, ctx.fixed, warp(ctx.moving, full));
    s.mean_disp_full = mean_vector_norm(full);
    if (ctx.eval) {
        if (ctx.eval->fixed_lms && ctx.eval->moving_lms) {
            TreStats t = tre(full, *ctx.eval->fixed_lms, *ctx.eval->moving_lms,
                             ctx.fixed.grid.spacing);
            s.tre_mean_mm = t.mean;
        }
        if (ctx.eval->fixed_labels && ctx.eval->moving_labels) {
            LabelVolume warped = warp_labels(*ctx.eval->moving_labels, full);
            auto per = dice(*ctx.eval->fixed_labels, warped,
                            ctx.eval->fixed_labels->present_labels());
            double sum = 0.0;
            int n = 0;
            for (const auto& [label, v] : per)
                if (v) {
                    sum += *v;
                    ++n;
                }
            if (n > 0)
                s.dice_mean = sum / n;
        }
        s.sd_log_j = sd_log_j(jacobian_det(full));
    }
    res.snapshots.push_back(std::move(s));
}

DirectionResult run_direction(const ScalarVolume& fixed, const ScalarVolume& moving,
                              const RegConfig& cfg, const EvalInputs* eval) {
    const int L = cfg.levels;
    FeatureSpec spec = cfg.dual ? cfg.features : FeatureSpec{0.0, false, false};
    FeaturePyramid pyr_f = build_pyramid(fixed, L, spec);
    FeaturePyramid pyr_m = build_pyramid(moving, L, spec);

    DirectionContext ctx{cfg, fixed, moving, eval};
    DirectionResult res;
    res.level_final_losses.assign(std::size_t(L), 0.0);
    res.initial_loss_full = similarity_value(cfg, fixed, moving);
    double best_sim_full = res.initial_loss_full;

    DisplacementField u(pyr_f.image(L).grid);
    for (int level = L; level >= 1; --level) {
        if (level < L) {
            const auto& target = pyr_f.image(level).grid.dims;
            u = upsample_flow(u, &target);
        }
        const ScalarVolume& fixed_l = pyr_f.image(level);
        const ScalarVolume& moving_l = pyr_m.image(level);
        // Halve the step per coarser level: since a level-l voxel spans 2^l
        // full-resolution voxels, this keeps the physical step size constant
        // across the pyramid.
        double eta = cfg.step * std::ldexp(1.0, 1 - level);

        for (int round = 1; round <= cfg.refine_at(level); ++round) {
            LevelTrace trace;
            trace.level = level;
            trace.round = round;
            // Round-level guard: a degenerate coarse level (window larger
            // than the grid) can lower its own objective while wrecking the
            // actual alignment, so a round that worsens the full-resolution
            // similarity is reverted wholesale.
            DisplacementField u_round_start = u;

            if (cfg.correlation) {
                FeatureVolume f_s_warped = warp_features(pyr_m.level(level), u);
                // Normalize feature vectors per voxel so the argmax matches
                // on direction (cosine similarity) rather than being biased
                // toward high-energy neighborhoods by the raw inner product.
                FeatureVolume f_t_n = normalize_features(pyr_f.level(level));
                FeatureVolume f_s_n = normalize_features(f_s_warped);
                CorrelationVolume corr = correlation_volume(f_t_n, f_s_n, cfg.corr_radius);
                DisplacementField proposal =
                    smooth_field(corr_argmax_proposal(corr), cfg.sigma_prop);
                // The proposal lives in the fixed frame against the already
                // warped moving features, so it composes ahead of u:
                // u'(x) = p(x) + u(x + p(x)).
                DisplacementField candidate = compose(proposal, u);
                // Keep the proposal only when it reduces the level objective.
                double before = level_loss(cfg, fixed_l, moving_l, u);
                double after = level_loss(cfg, fixed_l, moving_l, candidate);
                if (after < before) {
                    u = std::move(candidate);
                    trace.proposal_applied = true;
                }
            }

            // Normalized monotone descent: every step moves at most eta_cur
            // voxels; a step that fails to lower the level objective is
            // rejected and the trust step halves. This guards degenerate
            // coarse levels (window larger than the image) against drifting.
            double eta_cur = eta;
            bool frozen = false;
            for (int it = 0; it < cfg.iters_at(level); ++it) {
                double total;
                if (frozen) {
                    // Converged early; pad the trace so its length stays
                    // equal to the configured iteration count.
                    total = trace.losses.empty() ? 0.0 : trace.losses.back();
                    trace.losses.push_back(total);
                    continue;
                }
                SimEval se = eval_similarity(cfg, fixed_l, moving_l, u);
                FieldLoss reg = diffusion(u);
                total = se.value + cfg.lambda * reg.value;
                if (!std::isfinite(total))
                    throw NumericalError("register: non-finite loss at level " +
                                         std::to_string(level));
                trace.losses.push_back(total);

                DisplacementField g(u.grid);
                std::size_t N = u.grid.voxel_count();
                for (int c = 0; c < u.grid.ndim; ++c) {
                    const double* fs = se.force.component(c);
                    const double* fr = reg.grad.component(c);
                    double* gc = g.component(c);
                    for (std::size_t v = 0; v < N; ++v)
                        gc[v] = fs[v] + cfg.lambda * fr[v];
                }
                DisplacementField s = smooth_field(g, cfg.sigma_fluid);
                double gmax = max_vector_norm(s);
                if (gmax < 1e-14) {
                    frozen = true;  // stationary point (e.g. identical images)
                    continue;
                }
                double scale = eta_cur / gmax;
                DisplacementField candidate = u;
                for (int c = 0; c < u.grid.ndim; ++c) {
                    const double* sc = s.component(c);
                    double* uc = candidate.component(c);
                    for (std::size_t v = 0; v < N; ++v)
                        uc[v] -= scale * sc[v];
                }
                double cand = level_loss(cfg, fixed_l, moving_l, candidate);
                if (std::isfinite(cand) && cand < total) {
                    u = std::move(candidate);
                    eta_cur = std::min(1.5 * eta_cur, 4.0 * eta);
                } else {
                    eta_cur *= 0.5;
                    if (eta_cur < 1e-3 * eta)
                        frozen = true;
                }
            }
            if (!trace.losses.empty())
                res.level_final_losses[std::size_t(level) - 1] = trace.losses.back();
            else
                res.level_final_losses[std::size_t(level) - 1] =
                    level_loss(cfg, fixed_l, moving_l, u);
            DisplacementField full_now = to_full_resolution(u, level, pyr_f.images);
            double sim_now = similarity_value(cfg, fixed, warp(moving, full_now));
            if (sim_now > best_sim_full)
                u = std::move(u_round_start);
            else
                best_sim_full = sim_now;
            res.traces.push_back(std::move(trace));
            take_snapshot(ctx, u, level, round, pyr_f.images, res);
        }
    }

    res.half = std::move(u);
    const auto& full_dims = fixed.grid.dims;
    res.full = upsample_flow(res.half, &full_dims);
    res.pyramid_loss = pyramid_loss(res.level_final_losses);
    res.final_loss_full = similarity_value(cfg, fixed, warp(moving, res.full));
    return res;
}

}  // namespace

RegResult register_pair(const ScalarVolume& fixed, const ScalarVolume& moving,
                        const RegConfig& cfg, const EvalInputs* eval) {
    cfg.validate();
    if (!fixed.grid.same_extent(moving.grid))
        throw std::invalid_argument("register: image dims differ");
    for (int a = 0; a < fixed.grid.ndim; ++a)
        if (fixed.grid.dims[a] < (1 << cfg.levels))
            throw std::invalid_argument("register: dims must be >= 2^levels");
    fixed.check_finite("fixed");
    moving.check_finite("moving");

    RegResult out;
    out.forward = run_direction(fixed, moving, cfg, eval);
    if (cfg.bidirectional) {
        // Swapped direction: landmark roles swap with the images.
        EvalInputs swapped;
        const EvalInputs* ev = nullptr;
        if (eval) {
            swapped.fixed_labels = eval->moving_labels;
            swapped.moving_labels = eval->fixed_labels;
            swapped.fixed_lms = eval->moving_lms;
            swapped.moving_lms = eval->fixed_lms;
            ev = &swapped;
        }
        out.backward = run_direction(moving, fixed, cfg, ev);
    }
    return out;
}

}  // namespace regmod
