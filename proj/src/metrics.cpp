#include "regmod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regmod {

std::map<std::int32_t, std::optional<double>> dice(const LabelVolume& a, const LabelVolume& b,
                                                   const std::vector<std::int32_t>& labels) {
    if (!a.grid.same_extent(b.grid))
        throw std::invalid_argument("dice: dimension mismatch");
    std::map<std::int32_t, std::optional<double>> out;
    std::size_t N = a.grid.voxel_count();
    for (std::int32_t label : labels) {
        std::size_t na = 0, nb = 0, inter = 0;
        for (std::size_t v = 0; v < N; ++v) {
            bool ia = a.data[v] == label;
            bool ib = b.data[v] == label;
            na += ia;
            nb += ib;
            inter += ia && ib;
        }
        if (na + nb == 0)
            out[label] = std::nullopt;
        else
            out[label] = 200.0 * double(inter) / double(na + nb);
    }
    return out;
}

namespace {

// Surface points in mm for one label.
std::vector<std::array<double, 3>> surface_points(const LabelVolume& m, std::int32_t label) {
    const GridInfo& g = m.grid;
    std::vector<std::array<double, 3>> pts;
    std::size_t vox = 0;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                if (m.data[vox] != label)
                    continue;
                bool surface = false;
                int idx[3] = {i, j, k};
                for (int a = 0; a < g.ndim && !surface; ++a)
                    for (int s : {-1, 1}) {
                        int nb[3] = {idx[0], idx[1], idx[2]};
                        nb[a] += s;
                        if (nb[a] < 0 || nb[a] >= g.dims[a] ||
                            m.data[g.index(nb[0], nb[1], nb[2])] != label) {
                            surface = true;
                            break;
                        }
                    }
                if (surface)
                    pts.push_back({i * g.spacing[0], j * g.spacing[1], k * g.spacing[2]});
            }
    return pts;
}

double nearest_dist(const std::array<double, 3>& p, const std::vector<std::array<double, 3>>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) {
        double d0 = p[0] - q[0], d1 = p[1] - q[1], d2 = p[2] - q[2];
        double d = d0 * d0 + d1 * d1 + d2 * d2;
        if (d < best)
            best = d;
    }
    return std::sqrt(best);
}

}  // namespace

double percentile(std::vector<double> values, double p) {
    if (values.empty())
        throw std::invalid_argument("percentile: empty sample");
    std::sort(values.begin(), values.end());
    double rank = p / 100.0 * double(values.size() - 1);
    std::size_t lo = std::size_t(std::floor(rank));
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = rank - double(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::optional<SurfaceDistances> surface_distances(const LabelVolume& a, const LabelVolume& b,
                                                  std::int32_t label) {
    if (!a.grid.same_extent(b.grid))
        throw std::invalid_argument("surface_distances: dimension mismatch");
    auto sa = surface_points(a, label);
    auto sb = surface_points(b, label);
    if (sa.empty() || sb.empty())
        return std::nullopt;
    std::vector<double> pooled;
    pooled.reserve(sa.size() + sb.size());
    for (const auto& p : sa)
        pooled.push_back(nearest_dist(p, sb));
    for (const auto& p : sb)
        pooled.push_back(nearest_dist(p, sa));
    SurfaceDistances out;
    out.hd95 = percentile(pooled, 95.0);
    out.hd100 = *std::max_element(pooled.begin(), pooled.end());
    double sum = 0.0;
    for (double d : pooled)
        sum += d;
    out.assd = sum / double(pooled.size());
    return out;
}

std::optional<double> nsd(const LabelVolume& a, const LabelVolume& b, std::int32_t label,
                          double tau_mm) {
    if (!a.grid.same_extent(b.grid))
        throw std::invalid_argument("nsd: dimension mismatch");
    auto sa = surface_points(a, label);
    auto sb = surface_points(b, label);
    if (sa.empty() || sb.empty())
        return std::nullopt;
    auto frac_within = [&](const std::vector<std::array<double, 3>>& from,
                           const std::vector<std::array<double, 3>>& to) {
        std::size_t within = 0;
        for (const auto& p : from)
            if (nearest_dist(p, to) <= tau_mm)
                ++within;
        return double(within) / double(from.size());
    };
    return 100.0 * 0.5 * (frac_within(sa, sb) + frac_within(sb, sa));
}

TreStats tre(const DisplacementField& u, const LandmarkSet& fixed_lms,
             const LandmarkSet& moving_lms, const std::array<double, 3>& spacing) {
    if (fixed_lms.size() != moving_lms.size())
        throw std::invalid_argument("tre: landmark count mismatch");
    TreStats out;
    int d = u.grid.ndim;
    for (std::size_t i = 0; i < fixed_lms.size(); ++i) {
        const auto& p = fixed_lms.points[i];
        const auto& q = moving_lms.points[i];
        auto disp = sample_linear_vector(u, p);
        double acc = 0.0;
        for (int c = 0; c < d; ++c) {
            double e = (p[c] + disp[c] - q[c]) * spacing[c];
            acc += e * e;
        }
        out.per_landmark.push_back(std::sqrt(acc));
    }
    if (out.per_landmark.empty())
        return out;
    double sum = 0.0, sum2 = 0.0;
    for (double e : out.per_landmark) {
        sum += e;
        sum2 += e * e;
    }
    double n = double(out.per_landmark.size());
    out.mean = sum / n;
    out.stddev = std::sqrt(std::max(sum2 / n - out.mean * out.mean, 0.0));
    out.median = percentile(out.per_landmark, 50.0);
    out.p75 = percentile(out.per_landmark, 75.0);
    return out;
}

}  // namespace regmod
