#include "regmod/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace regmod {

namespace {

void require_same(const GridInfo& a, const GridInfo& b, const char* op) {
    if (!a.same_extent(b))
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

}  // namespace

ImageLoss mse(const ScalarVolume& a, const ScalarVolume& b) {
    require_same(a.grid, b.grid, "mse");
    std::size_t N = a.grid.voxel_count();
    ImageLoss out;
    out.grad = ScalarVolume(a.grid);
    double acc = 0.0;
    for (std::size_t v = 0; v < N; ++v) {
        double d = a.data[v] - b.data[v];
        acc += d * d;
        out.grad.data[v] = 2.0 * (b.data[v] - a.data[v]) / double(N);
    }
    out.value = acc / double(N);
    return out;
}

ImageLoss lncc(const ScalarVolume& a, const ScalarVolume& b, int window, double eps) {
    require_same(a.grid, b.grid, "lncc");
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("lncc: window must be odd and >= 3");
    const GridInfo& g = a.grid;
    std::size_t N = g.voxel_count();
    int r = window / 2;

    std::vector<double> ones(N, 1.0), cnt(N), sA(N), sB(N), sAA(N), sBB(N), sAB(N), tmp(N);
    box_sum(ones.data(), cnt.data(), g, r);
    box_sum(a.data.data(), sA.data(), g, r);
    box_sum(b.data.data(), sB.data(), g, r);
    for (std::size_t v = 0; v < N; ++v) tmp[v] = a.data[v] * a.data[v];
    box_sum(tmp.data(), sAA.data(), g, r);
    for (std::size_t v = 0; v < N; ++v) tmp[v] = b.data[v] * b.data[v];
    box_sum(tmp.data(), sBB.data(), g, r);
    for (std::size_t v = 0; v < N; ++v) tmp[v] = a.data[v] * b.data[v];
    box_sum(tmp.data(), sAB.data(), g, r);

    // Per-window quantities and the four box-filtered gradient carriers.
    std::vector<double> F(N), G(N), Fma(N), Gmb(N);
    double acc = 0.0;
    for (std::size_t v = 0; v < N; ++v) {
        double n = cnt[v];
        double ma = sA[v] / n, mb = sB[v] / n;
        double cross = sAB[v] - n * ma * mb;
        double varA = std::max(sAA[v] - n * ma * ma, 0.0);
        double varB = std::max(sBB[v] - n * mb * mb, 0.0);
        double denom = varA * varB;
        double ncc2;
        if (denom >= eps) {
            ncc2 = cross * cross / denom;
            F[v] = 2.0 * cross / denom;
            G[v] = 2.0 * cross * cross * varA / (denom * denom);
        } else {
            ncc2 = cross * cross / eps;
            F[v] = 2.0 * cross / eps;
            G[v] = 0.0;
        }
        acc += ncc2;
        Fma[v] = F[v] * ma;
        Gmb[v] = G[v] * mb;
    }

    std::vector<double> bF(N), bG(N), bFma(N), bGmb(N);
    box_sum(F.data(), bF.data(), g, r);
    box_sum(G.data(), bG.data(), g, r);
    box_sum(Fma.data(), bFma.data(), g, r);
    box_sum(Gmb.data(), bGmb.data(), g, r);

    ImageLoss out;
    out.value = -acc / double(N);
    out.grad = ScalarVolume(g);
    for (std::size_t v = 0; v < N; ++v)
        out.grad.data[v] = -(a.data[v] * bF[v] - bFma[v] - b.data[v] * bG[v] + bGmb[v]) / double(N);
    return out;
}

FieldLoss mind_loss(const ScalarVolume& a, const ScalarVolume& b, int radius, int dilation) {
    require_same(a.grid, b.grid, "mind_loss");
    if (a.grid.ndim != 3)
        throw std::invalid_argument("mind_loss: 3D input required");
    const GridInfo& g = a.grid;
    std::size_t N = g.voxel_count();
    FeatureVolume ma = mind_ssc(a, radius, dilation);
    FeatureVolume mb = mind_ssc(b, radius, dilation);

    FieldLoss out;
    out.grad = DisplacementField(g);
    double acc = 0.0;
    // value = mean over voxels and the 12 channels of squared differences;
    // force = sum_k diff_k * central difference of b's descriptor channel.
    std::vector<double> diff(12 * N);
    for (int k = 0; k < 12; ++k) {
        const double* pa = ma.channel(k);
        const double* pb = mb.channel(k);
        double* pd = diff.data() + std::size_t(k) * N;
        for (std::size_t v = 0; v < N; ++v) {
            double d = pb[v] - pa[v];
            pd[v] = d;
            acc += d * d;
        }
    }
    out.value = acc / double(12 * N);

    ScalarVolume chan(g);
    for (int k = 0; k < 12; ++k) {
        std::copy(mb.channel(k), mb.channel(k) + N, chan.data.begin());
        FeatureVolume gr = spatial_gradients(chan);
        const double* pd = diff.data() + std::size_t(k) * N;
        for (int c = 0; c < 3; ++c) {
            const double* pg = gr.channel(c);
            double* po = out.grad.component(c);
            for (std::size_t v = 0; v < N; ++v)
                po[v] += 2.0 * pd[v] * pg[v] / double(12 * N);
        }
    }
    return out;
}

std::vector<std::array<int, 3>> correlation_offsets(int ndim, int r) {
    std::vector<std::array<int, 3>> offs;
    if (ndim == 3) {
        for (int i = -r; i <= r; ++i)
            for (int j = -r; j <= r; ++j)
                for (int k = -r; k <= r; ++k)
                    offs.push_back({i, j, k});
    } else {
        for (int i = -r; i <= r; ++i)
            for (int j = -r; j <= r; ++j)
                offs.push_back({i, j, 0});
    }
    return offs;
}

CorrelationVolume correlation_volume(const FeatureVolume& f_t, const FeatureVolume& f_s, int r) {
    if (!f_t.grid.same_extent(f_s.grid) || f_t.channels != f_s.channels)
        throw std::invalid_argument("correlation_volume: feature maps incompatible");
    if (r < 1)
        throw std::invalid_argument("correlation_volume: radius must be >= 1");
    const GridInfo& g = f_t.grid;
    std::size_t N = g.voxel_count();
    auto offs = correlation_offsets(g.ndim, r);

    CorrelationVolume out;
    out.grid = g;
    out.radius = r;
    out.channels = int(offs.size());
    out.data.assign(std::size_t(out.channels) * N, 0.0);

    double inv_c = 1.0 / double(f_t.channels);
    for (std::size_t o = 0; o < offs.size(); ++o) {
        double* dst = out.data.data() + o * N;
        std::size_t vox = 0;
        for (int i = 0; i < g.dims[0]; ++i) {
            int si = std::clamp(i + offs[o][0], 0, g.dims[0] - 1);
            for (int j = 0; j < g.dims[1]; ++j) {
                int sj = std::clamp(j + offs[o][1], 0, g.dims[1] - 1);
                for (int k = 0; k < g.dims[2]; ++k, ++vox) {
                    int sk = std::clamp(k + offs[o][2], 0, g.dims[2] - 1);
                    std::size_t svox = g.index(si, sj, sk);
                    double acc = 0.0;
                    for (int c = 0; c < f_t.channels; ++c)
                        acc += f_t.at(c, vox) * f_s.at(c, svox);
                    dst[vox] = acc * inv_c;
                }
            }
        }
    }
    return out;
}

DisplacementField corr_argmax_proposal(const CorrelationVolume& corr) {
    const GridInfo& g = corr.grid;
    std::size_t N = g.voxel_count();
    auto offs = correlation_offsets(g.ndim, corr.radius);

    // Visit offsets from smallest norm outward (lexicographic within a norm),
    // keeping strictly better scores only: zero offset wins exact ties.
    std::vector<std::size_t> order(offs.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        auto n2 = [&](std::size_t t) {
            const auto& o = offs[t];
            return o[0] * o[0] + o[1] * o[1] + o[2] * o[2];
        };
        return n2(x) < n2(y);
    });

    DisplacementField out(g);
    std::vector<double> best(N);
    std::vector<int> best_off(N);
    {
        std::size_t o0 = order[0];
        const double* src = corr.data.data() + o0 * N;
        for (std::size_t v = 0; v < N; ++v) {
            best[v] = src[v];
            best_off[v] = int(o0);
        }
    }
    for (std::size_t t = 1; t < order.size(); ++t) {
        std::size_t o = order[t];
        const double* src = corr.data.data() + o * N;
        for (std::size_t v = 0; v < N; ++v)
            if (src[v] > best[v]) {
                best[v] = src[v];
                best_off[v] = int(o);
            }
    }
    for (std::size_t v = 0; v < N; ++v) {
        const auto& o = offs[std::size_t(best_off[v])];
        for (int c = 0; c < g.ndim; ++c)
            out.at(c, v) = double(o[c]);
    }
    return out;
}

}  // namespace regmod
