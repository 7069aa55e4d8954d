#include "regmod/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace regmod {

GridInfo::GridInfo(int nd, std::array<int, 3> d, std::array<double, 3> sp) : ndim(nd) {
    for (int a = 0; a < 3; ++a) {
        dims[a] = a < nd ? d[a] : 1;
        spacing[a] = a < nd ? sp[a] : 1.0;
    }
    validate();
}

void GridInfo::validate() const {
    if (ndim != 2 && ndim != 3)
        throw std::invalid_argument("GridInfo: ndim must be 2 or 3");
    for (int a = 0; a < ndim; ++a) {
        if (dims[a] < 1)
            throw std::invalid_argument("GridInfo: non-positive extent");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw std::invalid_argument("GridInfo: spacing must be strictly positive");
    }
    for (int a = ndim; a < 3; ++a)
        if (dims[a] != 1)
            throw std::invalid_argument("GridInfo: trailing axes must have extent 1");
}

void ScalarVolume::check_finite(const char* what) const {
    for (double v : data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": non-finite element");
}

void DisplacementField::check_finite(const char* what) const {
    for (double v : data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": non-finite element");
}

std::vector<std::int32_t> LabelVolume::present_labels() const {
    std::set<std::int32_t> s(data.begin(), data.end());
    s.erase(0);
    return {s.begin(), s.end()};
}

namespace {

inline double clampd(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// Per-axis interpolation support: clamped base index and fraction.
struct AxisInterp {
    int i0, i1;
    double frac;
};

inline AxisInterp axis_interp(double x, int n) {
    double xc = clampd(x, 0.0, double(n - 1));
    int i0 = int(std::floor(xc));
    if (i0 > n - 2) i0 = std::max(0, n - 2);
    int i1 = std::min(i0 + 1, n - 1);
    return {i0, i1, xc - i0};
}

inline void require_finite_point(const std::array<double, 3>& p, int nd) {
    for (int a = 0; a < nd; ++a)
        if (!std::isfinite(p[a]))
            throw std::invalid_argument("sample_linear: non-finite point");
}

// Generic d-linear sampling of one channel-planar component.
double sample_channel(const double* data, const GridInfo& g, const std::array<double, 3>& p) {
    AxisInterp ai[3];
    for (int a = 0; a < 3; ++a)
        ai[a] = a < g.ndim ? axis_interp(p[a], g.dims[a]) : AxisInterp{0, 0, 0.0};
    double acc = 0.0;
    int corners = 1 << g.ndim;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        int idx[3] = {0, 0, 0};
        for (int a = 0; a < g.ndim; ++a) {
            bool hi = (c >> a) & 1;
            idx[a] = hi ? ai[a].i1 : ai[a].i0;
            w *= hi ? ai[a].frac : 1.0 - ai[a].frac;
        }
        if (w != 0.0)
            acc += w * data[g.index(idx[0], idx[1], idx[2])];
    }
    return acc;
}

}  // namespace

double sample_linear(const ScalarVolume& vol, const std::array<double, 3>& point) {
    require_finite_point(point, vol.grid.ndim);
    return sample_channel(vol.data.data(), vol.grid, point);
}

std::array<double, 3> sample_linear_vector(const DisplacementField& u,
                                           const std::array<double, 3>& point) {
    require_finite_point(point, u.grid.ndim);
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (int c = 0; c < u.components(); ++c)
        out[c] = sample_channel(u.component(c), u.grid, point);
    return out;
}

ScalarVolume warp(const ScalarVolume& vol, const DisplacementField& u) {
    if (!vol.grid.same_extent(u.grid))
        throw std::invalid_argument("warp: volume and field dims differ");
    ScalarVolume out(vol.grid);
    const GridInfo& g = vol.grid;
    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                std::array<double, 3> p{double(i), double(j), double(k)};
                for (int c = 0; c < g.ndim; ++c)
                    p[c] += u.at(c, vox);
                out.data[vox] = sample_channel(vol.data.data(), g, p);
            }
    return out;
}

LabelVolume warp_labels(const LabelVolume& labels, const DisplacementField& u) {
    if (!labels.grid.same_extent(u.grid))
        throw std::invalid_argument("warp_labels: dims differ");
    LabelVolume out(labels.grid);
    const GridInfo& g = labels.grid;
    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                int idx[3] = {i, j, 0};
                idx[2] = k;
                for (int c = 0; c < g.ndim; ++c) {
                    double p = double(idx[c]) + u.at(c, vox);
                    int r = int(std::lround(clampd(p, 0.0, double(g.dims[c] - 1))));
                    idx[c] = r;
                }
                out.data[vox] = labels.data[g.index(idx[0], idx[1], idx[2])];
            }
    return out;
}

DisplacementField compose(const DisplacementField& u1, const DisplacementField& u2) {
    if (!u1.grid.same_extent(u2.grid))
        throw std::invalid_argument("compose: field dims differ");
    DisplacementField out(u1.grid);
    const GridInfo& g = u1.grid;
    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                std::array<double, 3> p{double(i), double(j), double(k)};
                for (int c = 0; c < g.ndim; ++c)
                    p[c] += u1.at(c, vox);
                for (int c = 0; c < g.ndim; ++c)
                    out.at(c, vox) = u1.at(c, vox) + sample_channel(u2.component(c), g, p);
            }
    return out;
}

DisplacementField upsample_flow(const DisplacementField& u, const std::array<int, 3>* target_dims) {
    const GridInfo& g = u.grid;
    GridInfo og = g;
    for (int a = 0; a < g.ndim; ++a) {
        og.dims[a] = 2 * g.dims[a];
        if (target_dims)
            og.dims[a] = std::min(og.dims[a], (*target_dims)[a]);
        og.spacing[a] = g.spacing[a] * double(g.dims[a]) / double(og.dims[a]);
    }
    DisplacementField out(og);
    std::size_t vox = 0;
    for (int i = 0; i < og.dims[0]; ++i)
        for (int j = 0; j < og.dims[1]; ++j)
            for (int k = 0; k < og.dims[2]; ++k, ++vox) {
                std::array<double, 3> p{0.5 * i, 0.5 * j, 0.5 * k};
                for (int c = 0; c < g.ndim; ++c)
                    out.at(c, vox) = 2.0 * sample_channel(u.component(c), g, p);
            }
    return out;
}

std::array<int, 3> half_dims(const GridInfo& g) {
    std::array<int, 3> d{1, 1, 1};
    for (int a = 0; a < g.ndim; ++a)
        d[a] = (g.dims[a] + 1) / 2;
    return d;
}

ScalarVolume downsample_avg(const ScalarVolume& vol) {
    const GridInfo& g = vol.grid;
    for (int a = 0; a < g.ndim; ++a)
        if (g.dims[a] < 2)
            throw std::invalid_argument("downsample_avg: axis shorter than 2");
    GridInfo og = g;
    og.dims = half_dims(g);
    for (int a = 0; a < g.ndim; ++a)
        og.spacing[a] = 2.0 * g.spacing[a];
    ScalarVolume out(og);
    std::size_t vox = 0;
    for (int i = 0; i < og.dims[0]; ++i)
        for (int j = 0; j < og.dims[1]; ++j)
            for (int k = 0; k < og.dims[2]; ++k, ++vox) {
                int lo[3] = {2 * i, 2 * j, 2 * k};
                int hi[3];
                for (int a = 0; a < 3; ++a)
                    hi[a] = a < g.ndim ? std::min(lo[a] + 1, g.dims[a] - 1) : lo[a];
                double sum = 0.0;
                int n = 0;
                for (int ii = lo[0]; ii <= hi[0]; ++ii)
                    for (int jj = lo[1]; jj <= hi[1]; ++jj)
                        for (int kk = lo[2]; kk <= hi[2]; ++kk) {
                            sum += vol(ii, jj, kk);
                            ++n;
                        }
                out.data[vox] = sum / n;
            }
    return out;
}

}  // namespace regmod
