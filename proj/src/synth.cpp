#include "regmod/synth.hpp"

#include "regmod/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace regmod {

std::uint64_t CounterRng::next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double CounterRng::uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int CounterRng::uniform_int(int lo, int hi) {
    return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
}

namespace {

GridInfo make_grid(const std::array<int, 3>& dims, int ndim) {
    std::array<int, 3> d = dims;
    for (int a = ndim; a < 3; ++a)
        d[a] = 1;
    return GridInfo(ndim, d);
}

void check_dims(const GridInfo& g) {
    for (int a = 0; a < g.ndim; ++a)
        if (g.dims[a] < 16)
            throw std::invalid_argument("make_phantom: dims must be >= 16 per axis");
}

Phantom make_blobs(const GridInfo& g, std::uint64_t seed, int blob_count) {
    CounterRng rng(seed);
    Phantom ph;
    ph.seed = seed;
    ph.image = ScalarVolume(g);
    ph.labels = LabelVolume(g);

    struct Blob {
        double c[3];
        double sigma;
        double amp;
    };
    std::vector<Blob> blobs;
    double min_sep = double(*std::min_element(g.dims.begin(), g.dims.begin() + g.ndim)) / 4.0;
    int attempts = 0;
    while (int(blobs.size()) < blob_count && attempts < 1000) {
        ++attempts;
        Blob b{};
        for (int a = 0; a < g.ndim; ++a)
            b.c[a] = rng.uniform(0.22 * g.dims[a], 0.78 * g.dims[a]);
        b.sigma = rng.uniform(0.05, 0.09) *
                  double(*std::min_element(g.dims.begin(), g.dims.begin() + g.ndim));
        b.amp = rng.uniform(0.6, 1.0);
        bool ok = true;
        for (const auto& o : blobs) {
            double d2 = 0.0;
            for (int a = 0; a < g.ndim; ++a)
                d2 += (b.c[a] - o.c[a]) * (b.c[a] - o.c[a]);
            if (std::sqrt(d2) < min_sep) {
                ok = false;
                break;
            }
        }
        if (ok)
            blobs.push_back(b);
    }
    if (int(blobs.size()) < blob_count)
        throw std::runtime_error("make_phantom: could not place blobs");

    // Smooth multi-band background texture so local similarity windows are
    // informative away from the blobs; coarse bands survive downsampling.
    struct Wave {
        double dir[3];
        double freq;
        double phase;
        double amp;
    };
    std::vector<Wave> waves;
    const double two_pi = 2.0 * std::numbers::pi;
    const double bands[3][2] = {{14.0, 18.0}, {9.0, 12.0}, {6.0, 8.0}};
    for (int m = 0; m < 3; ++m) {
        Wave w{};
        double norm = 0.0;
        for (int a = 0; a < g.ndim; ++a) {
            w.dir[a] = rng.uniform(-1.0, 1.0);
            norm += w.dir[a] * w.dir[a];
        }
        norm = std::sqrt(std::max(norm, 1e-9));
        for (int a = 0; a < g.ndim; ++a) w.dir[a] /= norm;
        w.freq = two_pi / rng.uniform(bands[m][0], bands[m][1]);
        w.phase = rng.uniform(0.0, two_pi);
        w.amp = rng.uniform(0.05, 0.08);
        waves.push_back(w);
    }

    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                double x[3] = {double(i), double(j), double(k)};
                double best = 0.0;
                int best_label = 0;
                double total = 0.0;
                for (int b = 0; b < blob_count; ++b) {
                    double r2 = 0.0;
                    for (int a = 0; a < g.ndim; ++a)
                        r2 += (x[a] - blobs[std::size_t(b)].c[a]) * (x[a] - blobs[std::size_t(b)].c[a]);
                    double v = blobs[std::size_t(b)].amp *
                               std::exp(-0.5 * r2 / (blobs[std::size_t(b)].sigma * blobs[std::size_t(b)].sigma));
                    total += v;
                    if (v > best) {
                        best = v;
                        best_label = b + 1;
                    }
                }
                double texture = 0.0;
                for (const auto& w : waves) {
                    double arg = w.phase;
                    for (int a = 0; a < g.ndim; ++a) arg += w.freq * w.dir[a] * x[a];
                    texture += w.amp * std::sin(arg);
                }
                ph.image.data[vox] = 0.75 * std::min(total, 1.0) + texture;
                if (best > 0.3 * blobs[std::size_t(best_label - 1)].amp)
                    ph.labels.data[vox] = best_label;
            }
    for (const auto& b : blobs)
        ph.landmarks.points.push_back({b.c[0], b.c[1], g.ndim == 3 ? b.c[2] : 0.0});
    return ph;
}

Phantom make_grid_phantom(const GridInfo& g, std::uint64_t seed) {
    CounterRng rng(seed);
    Phantom ph;
    ph.seed = seed;
    ph.image = ScalarVolume(g);
    ph.labels = LabelVolume(g);
    double period = rng.uniform(7.0, 9.0);
    std::size_t vox = 0;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                double x[3] = {double(i), double(j), double(k)};
                double v = 1.0;
                for (int a = 0; a < g.ndim; ++a)
                    v *= 0.5 * (1.0 + std::sin(two_pi * x[a] / period));
                ph.image.data[vox] = v;
                if (v > 0.5)
                    ph.labels.data[vox] = 1;
            }
    // Landmarks on a sparse interior lattice.
    for (int a = 1; a <= 3; ++a)
        ph.landmarks.points.push_back({0.25 * a * g.dims[0], 0.25 * a * g.dims[1],
                                       g.ndim == 3 ? 0.25 * a * g.dims[2] : 0.0});
    return ph;
}

Phantom make_two_tissue(const GridInfo& g, std::uint64_t seed) {
    CounterRng rng(seed);
    Phantom ph;
    ph.seed = seed;
    ph.image = ScalarVolume(g);
    ph.labels = LabelVolume(g);

    // Smooth random field thresholded at its median -> two compartments.
    ScalarVolume noise(g);
    for (double& v : noise.data)
        v = rng.uniform();
    // Separable smoothing via repeated box-free Gaussian is in features;
    // avoid the dependency here with a simple multi-pass mean filter.
    ScalarVolume s = noise;
    for (int pass = 0; pass < 4; ++pass) {
        ScalarVolume t(g);
        std::size_t vox = 0;
        for (int i = 0; i < g.dims[0]; ++i)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                    double acc = 0.0;
                    int n = 0;
                    for (int a = 0; a < g.ndim; ++a)
                        for (int d : {-2, -1, 0, 1, 2}) {
                            int nb[3] = {i, j, k};
                            nb[a] = std::clamp(nb[a] + d, 0, g.dims[a] - 1);
                            acc += s.data[g.index(nb[0], nb[1], nb[2])];
                            ++n;
                        }
                    t.data[vox] = acc / n;
                }
        s = t;
    }
    std::vector<double> sorted = s.data;
    std::nth_element(sorted.begin(), sorted.begin() + long(sorted.size() / 2), sorted.end());
    double median = sorted[sorted.size() / 2];
    std::size_t N = g.voxel_count();
    for (std::size_t v = 0; v < N; ++v) {
        bool tissue_b = s.data[v] > median;
        // Texture from the smooth field keeps local windows non-constant.
        double texture = 0.3 * (s.data[v] - median);
        ph.image.data[v] = (tissue_b ? 0.75 : 0.25) + texture;
        ph.labels.data[v] = tissue_b ? 2 : 1;
    }
    // Interior lattice of landmarks (quarter fractions per axis).
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
            if (g.ndim == 2) {
                ph.landmarks.points.push_back(
                    {0.25 * a * g.dims[0], 0.25 * b * g.dims[1], 0.0});
                continue;
            }
            for (int c = 1; c <= 3; ++c)
                ph.landmarks.points.push_back(
                    {0.25 * a * g.dims[0], 0.25 * b * g.dims[1], 0.25 * c * g.dims[2]});
        }
    return ph;
}

}  // namespace

Phantom make_phantom(PhantomKind kind, const std::array<int, 3>& dims, int ndim,
                     std::uint64_t seed, int blob_count) {
    GridInfo g = make_grid(dims, ndim);
    check_dims(g);
    switch (kind) {
        case PhantomKind::Blobs:
            return make_blobs(g, seed, blob_count);
        case PhantomKind::Grid:
            return make_grid_phantom(g, seed);
        case PhantomKind::TwoTissue:
            return make_two_tissue(g, seed);
    }
    throw std::invalid_argument("make_phantom: unknown kind");
}

ScalarVolume invert_intensity(const ScalarVolume& vol) {
    ScalarVolume out = vol;
    for (double& v : out.data)
        v = 1.0 - v;
    return out;
}

namespace {

double max_norm(const DisplacementField& u) {
    std::size_t N = u.grid.voxel_count();
    double best = 0.0;
    for (std::size_t v = 0; v < N; ++v) {
        double acc = 0.0;
        for (int c = 0; c < u.components(); ++c)
            acc += u.at(c, v) * u.at(c, v);
        best = std::max(best, acc);
    }
    return std::sqrt(best);
}

void rescale(DisplacementField& u, double target_max) {
    double m = max_norm(u);
    if (m <= 0.0)
        return;
    double s = target_max / m;
    for (double& v : u.data)
        v *= s;
}

DisplacementField affine_field(const GridInfo& g, double max_disp, CounterRng& rng) {
    // Small rotation + scale + translation about the grid center.
    double angle = rng.uniform(-0.05, 0.05);
    double scale = 1.0 + rng.uniform(-0.03, 0.03);
    double t[3];
    for (int a = 0; a < 3; ++a)
        t[a] = rng.uniform(-1.0, 1.0);
    double c[3];
    for (int a = 0; a < 3; ++a)
        c[a] = 0.5 * (g.dims[a] - 1);

    double ca = std::cos(angle), sa = std::sin(angle);
    DisplacementField u(g);
    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                double x[3] = {i - c[0], j - c[1], k - c[2]};
                double y[3] = {x[0], x[1], x[2]};
                // Rotate in the (0,1) plane, isotropic scale.
                y[0] = scale * (ca * x[0] - sa * x[1]);
                y[1] = scale * (sa * x[0] + ca * x[1]);
                if (g.ndim == 3)
                    y[2] = scale * x[2];
                for (int a = 0; a < g.ndim; ++a)
                    u.at(a, vox) = y[a] - x[a] + t[a];
            }
    rescale(u, max_disp);
    return u;
}

DisplacementField bump_field(const GridInfo& g, double max_disp, CounterRng& rng, double damp) {
    int bumps = 6;
    DisplacementField u(g);
    for (int b = 0; b < bumps; ++b) {
        double c[3], amp[3];
        for (int a = 0; a < 3; ++a) {
            c[a] = rng.uniform(0.2 * g.dims[a], 0.8 * g.dims[a]);
            amp[a] = rng.uniform(-1.0, 1.0);
        }
        double sigma = rng.uniform(0.12, 0.2) *
                       double(*std::min_element(g.dims.begin(), g.dims.begin() + g.ndim));
        std::size_t vox = 0;
        for (int i = 0; i < g.dims[0]; ++i)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                    double x[3] = {double(i), double(j), double(k)};
                    double r2 = 0.0;
                    for (int a = 0; a < g.ndim; ++a)
                        r2 += (x[a] - c[a]) * (x[a] - c[a]);
                    double w = std::exp(-0.5 * r2 / (sigma * sigma));
                    for (int a = 0; a < g.ndim; ++a)
                        u.at(a, vox) += amp[a] * w;
                }
    }
    rescale(u, max_disp * damp);
    return u;
}

}  // namespace

GeneratorField make_field(FieldKind kind, const GridInfo& grid, double max_disp,
                          std::uint64_t seed) {
    int min_dim = *std::min_element(grid.dims.begin(), grid.dims.begin() + grid.ndim);
    if (!(max_disp < double(min_dim) / 4.0))
        throw std::invalid_argument("make_field: max_disp must be < dims/4");
    GeneratorField out;
    out.kind = kind;
    CounterRng rng(seed);
    if (max_disp == 0.0) {
        out.u_true = DisplacementField(grid);
        out.max_disp = 0.0;
        return out;
    }
    if (kind == FieldKind::Affine) {
        out.u_true = affine_field(grid, max_disp, rng);
        out.max_disp = max_norm(out.u_true);
        if (ndv(jacobian_det(out.u_true)) > 0.0)
            throw std::runtime_error("make_field: affine field folds");
        return out;
    }
    double damp = 1.0;
    for (int attempt = 0; attempt <= 8; ++attempt) {
        DisplacementField u = bump_field(grid, max_disp, rng, damp);
        if (ndv(jacobian_det(u)) == 0.0) {
            out.u_true = std::move(u);
            out.max_disp = max_norm(out.u_true);
            return out;
        }
        damp *= 0.7;
    }
    throw std::runtime_error("make_field: retries exhausted without a fold-free field");
}

GroundTruthPair apply_ground_truth(const Phantom& phantom, const GeneratorField& field) {
    if (!phantom.image.grid.same_extent(field.u_true.grid))
        throw std::invalid_argument("apply_ground_truth: dimension mismatch");
    GroundTruthPair out;
    out.fixed = phantom.image;
    out.moving = warp(phantom.image, field.u_true);
    out.fixed_labels = phantom.labels;
    out.moving_labels = warp_labels(phantom.labels, field.u_true);
    out.fixed_lms = phantom.landmarks;
    for (const auto& p : phantom.landmarks.points) {
        auto d = sample_linear_vector(field.u_true, p);
        out.moving_lms.points.push_back({p[0] + d[0], p[1] + d[1], p[2] + d[2]});
    }
    return out;
}

DisplacementField invert_field(const DisplacementField& u, int iterations) {
    DisplacementField inv(u.grid);
    const GridInfo& g = u.grid;
    for (int it = 0; it < iterations; ++it) {
        DisplacementField next(g);
        std::size_t vox = 0;
        for (int i = 0; i < g.dims[0]; ++i)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                    std::array<double, 3> p{double(i), double(j), double(k)};
                    for (int c = 0; c < g.ndim; ++c)
                        p[c] += inv.at(c, vox);
                    auto d = sample_linear_vector(u, p);
                    for (int c = 0; c < g.ndim; ++c)
                        next.at(c, vox) = -d[c];
                }
        inv = std::move(next);
    }
    return inv;
}

}  // namespace regmod
