#include "regmod/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regmod {

namespace {

// Convolve one channel-planar buffer along `axis` with a symmetric kernel.
void convolve_axis(const double* in, double* out, const GridInfo& g, int axis,
                   const std::vector<double>& kernel) {
    int radius = int(kernel.size() / 2);
    int n = g.dims[axis];
    std::size_t stride = 1;
    for (int a = axis + 1; a < 3; ++a)
        stride *= std::size_t(g.dims[a]);
    std::size_t total = g.voxel_count();
    std::size_t line = std::size_t(n) * stride;
    for (std::size_t base = 0; base < total; base += line) {
        for (std::size_t off = 0; off < stride; ++off) {
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    int s = std::clamp(i + t, 0, n - 1);
                    acc += kernel[std::size_t(t + radius)] * in[base + std::size_t(s) * stride + off];
                }
                out[base + std::size_t(i) * stride + off] = acc;
            }
        }
    }
}

std::vector<double> gaussian_kernel(double sigma) {
    int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        double v = std::exp(-0.5 * double(t) * double(t) / (sigma * sigma));
        k[std::size_t(t + radius)] = v;
        sum += v;
    }
    for (double& v : k)
        v /= sum;
    return k;
}

void smooth_channel(const double* in, double* out, const GridInfo& g, double sigma) {
    std::vector<double> kernel = gaussian_kernel(sigma);
    std::vector<double> tmp1(g.voxel_count()), tmp2(g.voxel_count());
    double* bufs[2] = {tmp1.data(), tmp2.data()};
    const double* src = in;
    int w = 0;
    for (int a = 0; a < g.ndim; ++a) {
        double* dst = bufs[w];
        convolve_axis(src, dst, g, a, kernel);
        src = dst;
        w ^= 1;
    }
    std::copy(src, src + g.voxel_count(), out);
}

// Shifted copy with clamp-to-edge borders.
void shift_clamped(const ScalarVolume& vol, const int off[3], ScalarVolume& out) {
    const GridInfo& g = vol.grid;
    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                int ii = std::clamp(i + off[0], 0, g.dims[0] - 1);
                int jj = std::clamp(j + off[1], 0, g.dims[1] - 1);
                int kk = std::clamp(k + off[2], 0, g.dims[2] - 1);
                out.data[vox] = vol(ii, jj, kk);
            }
}

// Box-filter sum (not mean) with clamped, shrinking windows at the borders.
void box_sum_axis(const double* in, double* out, const GridInfo& g, int axis, int radius) {
    int n = g.dims[axis];
    std::size_t stride = 1;
    for (int a = axis + 1; a < 3; ++a)
        stride *= std::size_t(g.dims[a]);
    std::size_t total = g.voxel_count();
    std::size_t line = std::size_t(n) * stride;
    for (std::size_t base = 0; base < total; base += line) {
        for (std::size_t off = 0; off < stride; ++off) {
            double acc = 0.0;
            for (int t = 0; t <= std::min(radius, n - 1); ++t)
                acc += in[base + std::size_t(t) * stride + off];
            for (int i = 0; i < n; ++i) {
                out[base + std::size_t(i) * stride + off] = acc;
                int add = i + radius + 1;
                int del = i - radius;
                if (add < n) acc += in[base + std::size_t(add) * stride + off];
                if (del >= 0) acc -= in[base + std::size_t(del) * stride + off];
            }
        }
    }
}

}  // namespace

void box_sum(const double* in, double* out, const GridInfo& g, int radius) {
    std::vector<double> tmp1(g.voxel_count()), tmp2(g.voxel_count());
    double* bufs[2] = {tmp1.data(), tmp2.data()};
    const double* src = in;
    int w = 0;
    for (int a = 0; a < g.ndim; ++a) {
        double* dst = bufs[w];
        box_sum_axis(src, dst, g, a, radius);
        src = dst;
        w ^= 1;
    }
    std::copy(src, src + g.voxel_count(), out);
}

ScalarVolume gaussian_smooth(const ScalarVolume& vol, double sigma) {
    if (sigma < 0.0 || !std::isfinite(sigma))
        throw std::invalid_argument("gaussian_smooth: negative sigma");
    if (sigma == 0.0)
        return vol;
    ScalarVolume out(vol.grid);
    smooth_channel(vol.data.data(), out.data.data(), vol.grid, sigma);
    return out;
}

DisplacementField smooth_field(const DisplacementField& u, double sigma) {
    if (sigma < 0.0 || !std::isfinite(sigma))
        throw std::invalid_argument("smooth_field: negative sigma");
    if (sigma == 0.0)
        return u;
    DisplacementField out(u.grid);
    for (int c = 0; c < u.components(); ++c)
        smooth_channel(u.component(c), out.component(c), u.grid, sigma);
    return out;
}

FeatureVolume spatial_gradients(const ScalarVolume& vol) {
    const GridInfo& g = vol.grid;
    for (int a = 0; a < g.ndim; ++a)
        if (g.dims[a] < 2)
            throw std::invalid_argument("spatial_gradients: degenerate axis");
    FeatureVolume out(g, g.ndim);
    for (int c = 0; c < g.ndim; ++c) {
        double* dst = out.channel(c);
        std::size_t vox = 0;
        for (int i = 0; i < g.dims[0]; ++i)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                    int idx[3] = {i, j, k};
                    int n = g.dims[c];
                    int hi = std::min(idx[c] + 1, n - 1);
                    int lo = std::max(idx[c] - 1, 0);
                    int ip[3] = {idx[0], idx[1], idx[2]};
                    int im[3] = {idx[0], idx[1], idx[2]};
                    ip[c] = hi;
                    im[c] = lo;
                    dst[vox] = (vol(ip[0], ip[1], ip[2]) - vol(im[0], im[1], im[2])) / double(hi - lo);
                }
    }
    return out;
}

FeatureVolume mind_ssc(const ScalarVolume& vol, int radius, int dilation) {
    const GridInfo& g = vol.grid;
    if (g.ndim != 3)
        throw std::invalid_argument("mind_ssc: 3D input required");
    if (radius < 1 || dilation < 1)
        throw std::invalid_argument("mind_ssc: radius and dilation must be >= 1");

    // The 12 octahedron edges: pairs of six-neighborhood offsets on
    // orthogonal axes, all sign combinations.
    struct Edge { int a[3]; int b[3]; };
    std::vector<Edge> edges;
    for (int ax1 = 0; ax1 < 3; ++ax1)
        for (int ax2 = ax1 + 1; ax2 < 3; ++ax2)
            for (int s1 : {-1, 1})
                for (int s2 : {-1, 1}) {
                    Edge e{{0, 0, 0}, {0, 0, 0}};
                    e.a[ax1] = s1 * dilation;
                    e.b[ax2] = s2 * dilation;
                    edges.push_back(e);
                }

    std::size_t N = g.voxel_count();
    FeatureVolume out(g, 12);
    ScalarVolume sa(g), sb(g), diff2(g);
    for (int k = 0; k < 12; ++k) {
        shift_clamped(vol, edges[std::size_t(k)].a, sa);
        shift_clamped(vol, edges[std::size_t(k)].b, sb);
        for (std::size_t v = 0; v < N; ++v) {
            double d = sa.data[v] - sb.data[v];
            diff2.data[v] = d * d;
        }
        box_sum(diff2.data.data(), out.channel(k), g, radius);
    }

    // Per-voxel variance = mean over the 12 distances, floored by a fraction
    // of the global intensity variance to keep flat regions finite.
    double mean = 0.0;
    for (double v : vol.data) mean += v;
    mean /= double(N);
    double gvar = 0.0;
    for (double v : vol.data) gvar += (v - mean) * (v - mean);
    gvar /= double(N);
    double floor = std::max(1e-6 * gvar, 1e-12);

    for (std::size_t v = 0; v < N; ++v) {
        double V = 0.0;
        for (int k = 0; k < 12; ++k)
            V += out.at(k, v);
        V = std::max(V / 12.0, floor);
        for (int k = 0; k < 12; ++k) {
            double* ch = out.channel(k);
            ch[v] = std::exp(-ch[v] / V);
        }
    }
    return out;
}

FeatureVolume extract_features(const ScalarVolume& vol, const FeatureSpec& spec) {
    const GridInfo& g = vol.grid;
    FeatureVolume out(g, spec.channel_count(g.ndim));
    ScalarVolume smoothed = gaussian_smooth(vol, spec.sigma);
    std::copy(smoothed.data.begin(), smoothed.data.end(), out.channel(0));
    int c = 1;
    if (spec.gradients) {
        FeatureVolume gr = spatial_gradients(smoothed);
        for (int a = 0; a < g.ndim; ++a, ++c)
            std::copy(gr.channel(a), gr.channel(a) + g.voxel_count(), out.channel(c));
    }
    if (spec.mind) {
        FeatureVolume m = mind_ssc(vol, spec.mind_radius, spec.mind_dilation);
        for (int k = 0; k < 12; ++k, ++c)
            std::copy(m.channel(k), m.channel(k) + g.voxel_count(), out.channel(c));
    }
    return out;
}

FeaturePyramid build_pyramid(const ScalarVolume& vol, int levels, const FeatureSpec& spec) {
    const GridInfo& g = vol.grid;
    if (levels < 1)
        throw std::invalid_argument("build_pyramid: levels must be >= 1");
    for (int a = 0; a < g.ndim; ++a)
        if (g.dims[a] < (1 << levels))
            throw std::invalid_argument("build_pyramid: volume too small for level count");
    FeaturePyramid pyr;
    pyr.images.push_back(vol);
    for (int l = 1; l <= levels; ++l) {
        pyr.images.push_back(downsample_avg(pyr.images.back()));
        pyr.features.push_back(extract_features(pyr.images.back(), spec));
    }
    return pyr;
}

FeatureVolume warp_features(const FeatureVolume& f, const DisplacementField& u) {
    if (!f.grid.same_extent(u.grid))
        throw std::invalid_argument("warp_features: dims differ");
    FeatureVolume out(f.grid, f.channels);
    const GridInfo& g = f.grid;
    ScalarVolume tmp(g);
    for (int c = 0; c < f.channels; ++c) {
        std::copy(f.channel(c), f.channel(c) + g.voxel_count(), tmp.data.begin());
        ScalarVolume w = warp(tmp, u);
        std::copy(w.data.begin(), w.data.end(), out.channel(c));
    }
    return out;
}

}  // namespace regmod
