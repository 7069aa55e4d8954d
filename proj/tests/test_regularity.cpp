#include "regmod/regularity.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace regmod;
using namespace regtest;

TEST_CASE("diffusion of constant fields is zero") {
    GridInfo g(3, {5, 5, 5});
    DisplacementField u(g, 0.7);
    FieldLoss l = diffusion(u);
    CHECK(l.value == doctest::Approx(0.0));
    for (double v : l.grad.data) CHECK(v == doctest::Approx(0.0));
    CHECK_THROWS_AS(diffusion(DisplacementField(GridInfo(2, {1, 5, 1}))), std::invalid_argument);
}

TEST_CASE("diffusion of a unit ramp has the closed-form value") {
    GridInfo g(3, {4, 5, 6});
    DisplacementField u(g);
    std::size_t vox = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j)
            for (int k = 0; k < 6; ++k, ++vox) u.at(0, vox) = double(i);
    // Only component 0 along axis 0 contributes: (n0-1)*n1*n2 unit diffs.
    double N = 4.0 * 5.0 * 6.0;
    double expect = (3.0 * 5.0 * 6.0) / (N * 3.0 * 3.0);
    CHECK(diffusion(u).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("diffusion gradient matches finite differences") {
    auto rng = make_rng(57);
    GridInfo g(3, {6, 5, 4});
    DisplacementField u = random_field(g, rng, 1.0);
    FieldLoss base = diffusion(u);
    std::uniform_int_distribution<std::size_t> pick(0, u.data.size() - 1);
    double h = 1e-6;
    for (int s = 0; s < 60; ++s) {
        std::size_t idx = pick(rng);
        double orig = u.data[idx];
        u.data[idx] = orig + h;
        double up = diffusion(u).value;
        u.data[idx] = orig - h;
        double dn = diffusion(u).value;
        u.data[idx] = orig;
        double fd = (up - dn) / (2.0 * h);
        CHECK(base.grad.data[idx] ==
              doctest::Approx(fd).epsilon(1e-4).scale(std::max(std::fabs(fd), 1e-6)));
    }
}

TEST_CASE("jacobian_det of the zero field is one everywhere") {
    GridInfo g(3, {5, 4, 6});
    JacobianField j = jacobian_det(DisplacementField(g));
    for (double v : j.data) CHECK(v == doctest::Approx(1.0));
    CHECK_THROWS_AS(jacobian_det(DisplacementField(GridInfo(3, {2, 4, 4}))),
                    std::invalid_argument);
}

TEST_CASE("jacobian_det of a uniform scaling field is s^d exactly") {
    double s = 1.12;
    for (int nd : {2, 3}) {
        GridInfo g(nd, {8, 8, nd == 3 ? 8 : 1});
        DisplacementField u(g);
        std::size_t vox = 0;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                for (int k = 0; k < (nd == 3 ? 8 : 1); ++k, ++vox) {
                    double x[3] = {double(i), double(j), double(k)};
                    for (int c = 0; c < nd; ++c) u.at(c, vox) = (s - 1.0) * x[c];
                }
        JacobianField j = jacobian_det(u);
        double expect = std::pow(s, nd);
        // Linear fields: central and one-sided differences are both exact.
        for (double v : j.data) CHECK(v == doctest::Approx(expect).epsilon(1e-9));
        CHECK(sd_log_j(j) == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(ndv(j) == 0.0);
    }
}

TEST_CASE("small random smooth fields stay orientation-preserving") {
    auto rng = make_rng(59);
    GridInfo g(3, {8, 8, 8});
    DisplacementField u = random_field(g, rng, 0.2);
    // Derivatives of a |u| <= 0.2 field are <= 0.4 per axis after the
    // worst-case difference; keep amplitudes well below folding.
    for (double& v : u.data) v *= 0.3;
    JacobianField j = jacobian_det(u);
    for (double v : j.data) CHECK(v > 0.0);
}

TEST_CASE("sd_log_j closed form: half ones, half e^2") {
    JacobianField j;
    j.grid = GridInfo(2, {4, 4, 1});
    j.data.assign(16, 1.0);
    for (int i = 0; i < 8; ++i) j.data[std::size_t(i)] = std::exp(2.0);
    CHECK(sd_log_j(j) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ndv on a reflection strip marks exactly the predicted voxels") {
    GridInfo g(3, {16, 6, 6});
    DisplacementField u(g);
    // u0(x) = -2 x0 on rows 5..10, 0 elsewhere: a reflection inside the strip.
    auto f = [](int i) { return (i >= 5 && i <= 10) ? -2.0 * i : 0.0; };
    std::size_t vox = 0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 6; ++k, ++vox) u.at(0, vox) = f(i);
    JacobianField jf = jacobian_det(u);
    // Independent prediction: det = 1 + central difference of f.
    std::size_t folded = 0;
    vox = 0;
    for (int i = 0; i < 16; ++i) {
        int hi = std::min(i + 1, 15), lo = std::max(i - 1, 0);
        double det = 1.0 + (f(hi) - f(lo)) / double(hi - lo);
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 6; ++k, ++vox) {
                CHECK(jf.data[vox] == doctest::Approx(det).epsilon(1e-12));
                if (det <= 0.0) ++folded;
            }
    }
    CHECK(folded > 0);
    CHECK(ndv(jf) == doctest::Approx(double(folded) / double(g.voxel_count())));
}

TEST_CASE("ndv is monotone under adding folds and respects masks") {
    JacobianField j;
    j.grid = GridInfo(2, {4, 4, 1});
    j.data.assign(16, 1.0);
    double prev = ndv(j);
    for (int i = 0; i < 5; ++i) {
        j.data[std::size_t(i)] = -1.0;
        double cur = ndv(j);
        CHECK(cur >= prev);
        prev = cur;
    }
    j.data.assign(16, 1.0);
    j.data[0] = -1.0;
    LabelVolume mask(j.grid);
    mask.data[0] = 1;
    mask.data[1] = 1;
    CHECK(ndv(j, &mask) == doctest::Approx(0.5));
    LabelVolume empty(j.grid);
    CHECK_THROWS_AS(ndv(j, &empty), std::invalid_argument);
    CHECK_THROWS_AS(sd_log_j(j, &empty), std::invalid_argument);
}

TEST_CASE("all-negative determinants give ndv 1") {
    JacobianField j;
    j.grid = GridInfo(2, {3, 3, 1});
    j.data.assign(9, -0.5);
    CHECK(ndv(j) == 1.0);
}
