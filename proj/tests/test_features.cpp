#include "regmod/features.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace regmod;
using namespace regtest;

namespace {

// Independent dense Gaussian oracle: tensor-product kernel applied with
// per-axis clamped indices.
ScalarVolume oracle_gaussian(const ScalarVolume& v, double sigma) {
    const GridInfo& g = v.grid;
    int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        k[std::size_t(t + radius)] = std::exp(-0.5 * t * t / (sigma * sigma));
        sum += k[std::size_t(t + radius)];
    }
    for (double& x : k) x /= sum;
    ScalarVolume out(g);
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int kk = 0; kk < g.dims[2]; ++kk) {
                double acc = 0.0;
                for (int t0 = -radius; t0 <= radius; ++t0)
                    for (int t1 = -radius; t1 <= radius; ++t1) {
                        double w01 = k[std::size_t(t0 + radius)] * k[std::size_t(t1 + radius)];
                        int ii = std::clamp(i + t0, 0, g.dims[0] - 1);
                        int jj = std::clamp(j + t1, 0, g.dims[1] - 1);
                        if (g.ndim == 2) {
                            acc += w01 * v(ii, jj, 0);
                            continue;
                        }
                        for (int t2 = -radius; t2 <= radius; ++t2) {
                            int kc = std::clamp(kk + t2, 0, g.dims[2] - 1);
                            acc += w01 * k[std::size_t(t2 + radius)] * v(ii, jj, kc);
                        }
                    }
                out(i, j, kk) = acc;
            }
    return out;
}

// Independent clamped box-sum oracle.
void oracle_box_sum(const ScalarVolume& v, int radius, ScalarVolume& out) {
    const GridInfo& g = v.grid;
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int k = 0; k < g.dims[2]; ++k) {
                double acc = 0.0;
                int lo0 = std::max(i - radius, 0), hi0 = std::min(i + radius, g.dims[0] - 1);
                int lo1 = std::max(j - radius, 0), hi1 = std::min(j + radius, g.dims[1] - 1);
                int lo2 = g.ndim == 3 ? std::max(k - radius, 0) : 0;
                int hi2 = g.ndim == 3 ? std::min(k + radius, g.dims[2] - 1) : 0;
                for (int a = lo0; a <= hi0; ++a)
                    for (int b = lo1; b <= hi1; ++b)
                        for (int c = lo2; c <= hi2; ++c) acc += v(a, b, c);
                out(i, j, k) = acc;
            }
}

}  // namespace

TEST_CASE("gaussian_smooth edge cases") {
    GridInfo g(3, {5, 5, 5});
    auto rng = make_rng(21);
    ScalarVolume v = random_volume(g, rng);
    ScalarVolume same = gaussian_smooth(v, 0.0);
    for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(same.data[i] == v.data[i]);
    CHECK_THROWS_AS(gaussian_smooth(v, -1.0), std::invalid_argument);
    ScalarVolume c(g, 0.4);
    ScalarVolume sc = gaussian_smooth(c, 1.3);
    for (double x : sc.data) CHECK(x == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("gaussian_smooth matches the dense tensor-product oracle") {
    auto rng = make_rng(23);
    for (int nd : {2, 3}) {
        GridInfo g(nd, {7, 6, nd == 3 ? 5 : 1});
        ScalarVolume v = random_volume(g, rng);
        for (double sigma : {0.5, 1.0}) {
            ScalarVolume s = gaussian_smooth(v, sigma);
            ScalarVolume o = oracle_gaussian(v, sigma);
            for (std::size_t i = 0; i < s.data.size(); ++i)
                CHECK(s.data[i] == doctest::Approx(o.data[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("smooth_field smooths each component like the scalar path") {
    auto rng = make_rng(25);
    GridInfo g(3, {6, 5, 4});
    DisplacementField u = random_field(g, rng, 1.0);
    DisplacementField s = smooth_field(u, 0.8);
    for (int c = 0; c < 3; ++c) {
        ScalarVolume comp(g);
        std::copy(u.component(c), u.component(c) + g.voxel_count(), comp.data.begin());
        ScalarVolume sc = gaussian_smooth(comp, 0.8);
        for (std::size_t i = 0; i < sc.data.size(); ++i)
            CHECK(s.component(c)[i] == doctest::Approx(sc.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("spatial_gradients is exact on linear ramps") {
    GridInfo g(3, {5, 6, 4});
    ScalarVolume v(g);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 4; ++k) v(i, j, k) = 2.0 * i - 0.5 * j + 3.0 * k;
    FeatureVolume gr = spatial_gradients(v);
    std::size_t N = g.voxel_count();
    for (std::size_t x = 0; x < N; ++x) {
        CHECK(gr.at(0, x) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(gr.at(1, x) == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(gr.at(2, x) == doctest::Approx(3.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(spatial_gradients(ScalarVolume(GridInfo(2, {1, 6, 1}))),
                    std::invalid_argument);
}

TEST_CASE("box_sum matches the brute-force clamped-window oracle") {
    auto rng = make_rng(27);
    for (int nd : {2, 3})
        for (int radius : {1, 2}) {
            GridInfo g(nd, {6, 7, nd == 3 ? 5 : 1});
            ScalarVolume v = random_volume(g, rng);
            ScalarVolume got(g), want(g);
            box_sum(v.data.data(), got.data.data(), g, radius);
            oracle_box_sum(v, radius, want);
            for (std::size_t i = 0; i < got.data.size(); ++i)
                CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-11));
        }
}

TEST_CASE("mind_ssc basics") {
    GridInfo g(3, {10, 10, 10});
    auto rng = make_rng(29);
    ScalarVolume v = random_volume(g, rng);
    FeatureVolume m = mind_ssc(v, 2, 2);
    CHECK(m.channels == 12);
    for (double x : m.data) {
        CHECK(x > 0.0);
        CHECK(x <= 1.0 + 1e-12);
    }
    ScalarVolume flat(g, 0.3);
    FeatureVolume mf = mind_ssc(flat, 2, 2);
    for (double x : mf.data) CHECK(x == doctest::Approx(1.0));
    CHECK_THROWS_AS(mind_ssc(ScalarVolume(GridInfo(2, {8, 8, 1})), 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(mind_ssc(v, 0, 2), std::invalid_argument);
}

TEST_CASE("mind_ssc is invariant to affine intensity changes") {
    GridInfo g(3, {9, 9, 9});
    auto rng = make_rng(31);
    ScalarVolume v = random_volume(g, rng);
    ScalarVolume w(g);
    for (std::size_t i = 0; i < v.data.size(); ++i) w.data[i] = 3.0 * v.data[i] + 0.7;
    FeatureVolume mv = mind_ssc(v, 1, 1);
    FeatureVolume mw = mind_ssc(w, 1, 1);
    for (std::size_t i = 0; i < mv.data.size(); ++i)
        CHECK(mv.data[i] == doctest::Approx(mw.data[i]).epsilon(1e-9));
}

TEST_CASE("mind_ssc channel matches a brute-force patch-SSD oracle") {
    GridInfo g(3, {8, 8, 8});
    auto rng = make_rng(33);
    ScalarVolume v = random_volume(g, rng);
    int radius = 1, dilation = 1;
    FeatureVolume m = mind_ssc(v, radius, dilation);

    // Recompute every channel at one interior voxel from the definition.
    int vi = 4, vj = 3, vk = 4;
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
    auto clampget = [&](int i, int j, int k) {
        return v(std::clamp(i, 0, 7), std::clamp(j, 0, 7), std::clamp(k, 0, 7));
    };
    std::vector<double> D(12);
    for (int e = 0; e < 12; ++e) {
        double acc = 0.0;
        for (int di = -radius; di <= radius; ++di)
            for (int dj = -radius; dj <= radius; ++dj)
                for (int dk = -radius; dk <= radius; ++dk) {
                    int pi = vi + di, pj = vj + dj, pk = vk + dk;
                    double da = clampget(std::clamp(pi, 0, 7) + edges[std::size_t(e)].a[0],
                                         std::clamp(pj, 0, 7) + edges[std::size_t(e)].a[1],
                                         std::clamp(pk, 0, 7) + edges[std::size_t(e)].a[2]);
                    double db = clampget(std::clamp(pi, 0, 7) + edges[std::size_t(e)].b[0],
                                         std::clamp(pj, 0, 7) + edges[std::size_t(e)].b[1],
                                         std::clamp(pk, 0, 7) + edges[std::size_t(e)].b[2]);
                    acc += (da - db) * (da - db);
                }
        D[std::size_t(e)] = acc;
    }
    double mean = 0.0;
    for (double x : v.data) mean += x;
    mean /= double(v.data.size());
    double gvar = 0.0;
    for (double x : v.data) gvar += (x - mean) * (x - mean);
    gvar /= double(v.data.size());
    double V = 0.0;
    for (double d : D) V += d;
    V = std::max(V / 12.0, std::max(1e-6 * gvar, 1e-12));
    std::size_t vox = v.grid.index(vi, vj, vk);
    for (int e = 0; e < 12; ++e)
        CHECK(m.at(e, vox) == doctest::Approx(std::exp(-D[std::size_t(e)] / V)).epsilon(1e-9));
}

TEST_CASE("extract_features channel layout") {
    GridInfo g(3, {8, 8, 8});
    auto rng = make_rng(35);
    ScalarVolume v = random_volume(g, rng);
    FeatureSpec spec;
    spec.sigma = 0.5;
    spec.gradients = true;
    spec.mind = true;
    FeatureVolume f = extract_features(v, spec);
    CHECK(f.channels == 1 + 3 + 12);
    ScalarVolume s = gaussian_smooth(v, 0.5);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(f.at(0, i) == s.data[i]);
    FeatureVolume gr = spatial_gradients(s);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(f.at(1, i) == gr.at(0, i));
}

TEST_CASE("build_pyramid level geometry") {
    GridInfo g(3, {17, 16, 20});
    auto rng = make_rng(37);
    ScalarVolume v = random_volume(g, rng);
    FeatureSpec spec;
    FeaturePyramid p = build_pyramid(v, 3, spec);
    CHECK(p.levels() == 3);
    CHECK(p.image(0).grid.dims == std::array<int, 3>{17, 16, 20});
    CHECK(p.image(1).grid.dims == std::array<int, 3>{9, 8, 10});
    CHECK(p.image(2).grid.dims == std::array<int, 3>{5, 4, 5});
    CHECK(p.image(3).grid.dims == std::array<int, 3>{3, 2, 3});
    CHECK(p.level(1).channels == spec.channel_count(3));
    ScalarVolume d1 = downsample_avg(v);
    for (std::size_t i = 0; i < d1.data.size(); ++i)
        CHECK(p.image(1).data[i] == doctest::Approx(d1.data[i]).epsilon(1e-12));
    CHECK_THROWS_AS(build_pyramid(ScalarVolume(GridInfo(3, {7, 16, 16})), 3, spec),
                    std::invalid_argument);
}

TEST_CASE("warp_features with the zero field is the identity") {
    GridInfo g(3, {6, 6, 6});
    auto rng = make_rng(39);
    ScalarVolume v = random_volume(g, rng);
    FeatureSpec spec;
    FeatureVolume f = extract_features(v, spec);
    FeatureVolume w = warp_features(f, DisplacementField(g));
    for (std::size_t i = 0; i < f.data.size(); ++i)
        CHECK(w.data[i] == doctest::Approx(f.data[i]).epsilon(1e-12));
}
