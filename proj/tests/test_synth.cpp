#include "regmod/synth.hpp"

#include "regmod/metrics.hpp"
#include "regmod/regularity.hpp"
#include "regmod/similarity.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace regmod;

TEST_CASE("counter rng is deterministic and well ranged") {
    CounterRng a(99), b(99), c(100);
    for (int i = 0; i < 100; ++i) {
        double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(CounterRng(99).next_u64() != c.next_u64());
    CounterRng d(7);
    for (int i = 0; i < 50; ++i) {
        int v = d.uniform_int(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
    }
    CounterRng e(7);
    double lo = 2.0, hi = 5.0;
    for (int i = 0; i < 50; ++i) {
        double v = e.uniform(lo, hi);
        CHECK(v >= lo);
        CHECK(v < hi);
    }
}

TEST_CASE("phantoms are bit-identical under a fixed seed") {
    for (PhantomKind kind : {PhantomKind::Blobs, PhantomKind::Grid, PhantomKind::TwoTissue}) {
        Phantom p1 = make_phantom(kind, {20, 20, 20}, 3, 1234);
        Phantom p2 = make_phantom(kind, {20, 20, 20}, 3, 1234);
        CHECK(p1.image.data == p2.image.data);
        CHECK(p1.labels.data == p2.labels.data);
        CHECK(p1.landmarks.points == p2.landmarks.points);
        Phantom p3 = make_phantom(kind, {20, 20, 20}, 3, 1235);
        CHECK(p1.image.data != p3.image.data);
    }
    CHECK_THROWS_AS(make_phantom(PhantomKind::Blobs, {8, 20, 20}, 3, 1), std::invalid_argument);
}

TEST_CASE("blob phantom has one label and landmark per blob") {
    Phantom p = make_phantom(PhantomKind::Blobs, {32, 32, 32}, 3, 7, 5);
    CHECK(p.landmarks.size() == 5);
    CHECK(p.labels.present_labels() == std::vector<std::int32_t>{1, 2, 3, 4, 5});
    double lo = 1e300, hi = -1e300;
    for (double v : p.image.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= -0.25);  // bounded background texture
    CHECK(hi <= 1.0);
    // Background carries texture: a far corner region is not constant.
    double cmin = 1e300, cmax = -1e300;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) {
                cmin = std::min(cmin, p.image(i, j, k));
                cmax = std::max(cmax, p.image(i, j, k));
            }
    CHECK(cmax - cmin > 0.01);
}

TEST_CASE("two-tissue phantom separates intensities by label") {
    Phantom p = make_phantom(PhantomKind::TwoTissue, {24, 24, 24}, 3, 11);
    CHECK(p.labels.present_labels() == std::vector<std::int32_t>{1, 2});
    std::size_t N = p.image.grid.voxel_count();
    for (std::size_t v = 0; v < N; ++v) {
        if (p.labels.data[v] == 2)
            CHECK(p.image.data[v] > 0.5);
        else
            CHECK(p.image.data[v] < 0.5);
    }
}

TEST_CASE("two-tissue sibling: inverted intensities confuse mse but not mind") {
    Phantom p = make_phantom(PhantomKind::TwoTissue, {20, 20, 20}, 3, 13);
    ScalarVolume inv = invert_intensity(p.image);
    DisplacementField shift(p.image.grid);
    for (std::size_t v = 0; v < p.image.grid.voxel_count(); ++v) shift.at(0, v) = 3.0;
    ScalarVolume shifted = warp(p.image, shift);

    // Same anatomy, flipped contrast: huge mse, small mind distance.
    double mse_inv = mse(p.image, inv).value;
    double mse_shift = mse(p.image, shifted).value;
    CHECK(mse_inv > mse_shift);
    double mind_inv = mind_loss(p.image, inv, 2, 2).value;
    double mind_shift = mind_loss(p.image, shifted, 2, 2).value;
    CHECK(mind_inv < 0.5 * mind_shift);
}

TEST_CASE("invert_intensity is an involution") {
    Phantom p = make_phantom(PhantomKind::Grid, {16, 16, 16}, 3, 3);
    ScalarVolume twice = invert_intensity(invert_intensity(p.image));
    for (std::size_t i = 0; i < twice.data.size(); ++i)
        CHECK(twice.data[i] == doctest::Approx(p.image.data[i]).epsilon(1e-12));
}

TEST_CASE("make_field basics") {
    GridInfo g(3, {24, 24, 24});
    GeneratorField zero = make_field(FieldKind::GaussianBumps, g, 0.0, 5);
    for (double v : zero.u_true.data) CHECK(v == 0.0);
    CHECK_THROWS_AS(make_field(FieldKind::Affine, g, 6.0, 5), std::invalid_argument);

    GeneratorField gb = make_field(FieldKind::GaussianBumps, g, 3.0, 5);
    CHECK(gb.max_disp > 0.5);
    CHECK(gb.max_disp <= 3.0 + 1e-9);
    CHECK(ndv(jacobian_det(gb.u_true)) == 0.0);

    GeneratorField gb2 = make_field(FieldKind::GaussianBumps, g, 3.0, 5);
    CHECK(gb.u_true.data == gb2.u_true.data);  // deterministic
}

TEST_CASE("affine generator fields have constant jacobian and no folds") {
    GridInfo g(3, {24, 24, 24});
    GeneratorField af = make_field(FieldKind::Affine, g, 2.0, 17);
    JacobianField j = jacobian_det(af.u_true);
    CHECK(ndv(j) == 0.0);
    // Affine map: the determinant is spatially constant (exact derivatives
    // of a linear field), so SD log J vanishes.
    CHECK(sd_log_j(j) == doctest::Approx(0.0).epsilon(1e-9));
    double mn = *std::min_element(j.data.begin(), j.data.end());
    double mx = *std::max_element(j.data.begin(), j.data.end());
    CHECK(mx - mn <= 1e-9);
}

TEST_CASE("apply_ground_truth with the zero field copies the phantom") {
    Phantom p = make_phantom(PhantomKind::Blobs, {20, 20, 20}, 3, 19, 3);
    GeneratorField zero = make_field(FieldKind::GaussianBumps, p.image.grid, 0.0, 1);
    GroundTruthPair pair = apply_ground_truth(p, zero);
    CHECK(pair.fixed.data == p.image.data);
    CHECK(pair.moving.data == p.image.data);
    CHECK(pair.fixed_lms.points == pair.moving_lms.points);
    CHECK(pair.moving_labels.data == p.labels.data);
}

TEST_CASE("ground-truth landmark pairs are self-consistent under u_true") {
    Phantom p = make_phantom(PhantomKind::Blobs, {32, 32, 32}, 3, 23, 4);
    GeneratorField f = make_field(FieldKind::GaussianBumps, p.image.grid, 4.0, 29);
    GroundTruthPair pair = apply_ground_truth(p, f);
    // moving landmark = p + u_true(p) by construction, so TRE of u_true is 0.
    TreStats t = tre(f.u_true, pair.fixed_lms, pair.moving_lms, p.image.grid.spacing);
    CHECK(t.mean <= 0.1);
    CHECK(t.mean <= 1e-9);
}

TEST_CASE("labels survive a round trip through the numeric inverse") {
    Phantom p = make_phantom(PhantomKind::Blobs, {28, 28, 28}, 3, 31, 4);
    GeneratorField f = make_field(FieldKind::GaussianBumps, p.image.grid, 3.0, 37);
    GroundTruthPair pair = apply_ground_truth(p, f);
    DisplacementField inv = invert_field(f.u_true);
    LabelVolume back = warp_labels(pair.moving_labels, inv);
    auto d = dice(pair.fixed_labels, back, pair.fixed_labels.present_labels());
    double sum = 0.0;
    int n = 0;
    for (const auto& [label, v] : d) {
        REQUIRE(v.has_value());
        sum += *v;
        ++n;
    }
    CHECK(sum / n >= 95.0);
}

TEST_CASE("invert_field of a constant shift is the negative shift") {
    GridInfo g(3, {16, 16, 16});
    DisplacementField u(g);
    for (std::size_t v = 0; v < g.voxel_count(); ++v) u.at(1, v) = 1.5;
    DisplacementField inv = invert_field(u);
    // Interior voxels (clamping distorts the border).
    for (int i = 4; i < 12; ++i)
        for (int j = 4; j < 12; ++j)
            for (int k = 4; k < 12; ++k) {
                std::size_t v = g.index(i, j, k);
                CHECK(inv.at(1, v) == doctest::Approx(-1.5).epsilon(1e-9));
                CHECK(inv.at(0, v) == doctest::Approx(0.0).epsilon(1e-9));
            }
}
