#include <doctest.h>

#include <cmath>

#include "fabfix/fabsim.hpp"
#include "fabfix/raster.hpp"

using namespace fabfix;

namespace {

// Brute-force oracle: direct 2-D convolution of the bitmap with a freshly
// sampled Gaussian, symmetric (edge-repeating) padding, all in double.
double oracle_blur_at(const Bitmap& bm, double sigma, int px, int py) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    double sum = 0.0, norm = 0.0;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            double w = std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) / (2 * sigma * sigma));
            norm += w;
            int x = px + dx, y = py + dy;
            while (x < 0 || x >= bm.width) x = x < 0 ? -x - 1 : 2 * bm.width - 1 - x;
            while (y < 0 || y >= bm.height) y = y < 0 ? -y - 1 : 2 * bm.height - 1 - y;
            sum += w * bm.at(x, y);
        }
    }
    return sum / norm;
}

Bitmap square_at(int canvas, int x0, int y0, int x1, int y1) {
    return rasterize({{x0, y0, x1, y1}}, canvas, canvas);
}

} // namespace

TEST_CASE("gaussian_kernel: normalization, symmetry, side length") {
    for (double sigma : {0.5, 1.0, 3.0, 5.5}) {
        Kernel k = gaussian_kernel(sigma);
        CHECK(k.side == 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1);
        double sum = 0.0;
        for (double v : k.values) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        // 4-fold symmetry: invariant under 90 degree rotation
        for (int y = 0; y < k.side; ++y) {
            for (int x = 0; x < k.side; ++x) {
                CHECK(k.at(x, y) == doctest::Approx(k.at(k.side - 1 - y, x)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("gaussian_kernel: sigma=1 center fraction") {
    // Independent evaluation of the sampled, normalized Gaussian.
    double one_d = 0.0;
    for (int i = -3; i <= 3; ++i) one_d += std::exp(-0.5 * i * i);
    const double expected_center = 1.0 / (one_d * one_d);
    CHECK(expected_center == doctest::Approx(0.1592).epsilon(1e-3));

    Kernel k = gaussian_kernel(1.0);
    CHECK(k.at(3, 3) == doctest::Approx(expected_center).epsilon(1e-12));
}

TEST_CASE("gaussian_kernel: rejects sigma <= 0") {
    CHECK_THROWS_AS(gaussian_kernel(0.0), ParamError);
    CHECK_THROWS_AS(gaussian_kernel(-1.0), ParamError);
}

TEST_CASE("fabricate: constant layouts are fixed points") {
    FabParams p;
    Bitmap ones(32, 32, 1);
    Bitmap zeros(32, 32, 0);
    CHECK(fabricate(ones, p) == ones);
    CHECK(fabricate(zeros, p) == zeros);
    Field f1 = fabricate_field(ones, p);
    for (float v : f1.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    Field f0 = fabricate_field(zeros, p);
    for (float v : f0.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fabricate: an isolated pixel is lost") {
    Bitmap bm(64, 64, 0);
    bm.at(32, 32) = 1;
    FabParams p; // sigma 3, threshold 0.5
    CHECK(oracle_blur_at(bm, 3.0, 32, 32) < 0.5); // kernel center ~= 0.018
    Bitmap fab = fabricate(bm, p);
    CHECK(fab.foreground_count() == 0);
}

TEST_CASE("fabricate: convex corner apex is etched away") {
    // Large square filling the lower-left region; apex at (39, 39).
    Bitmap bm = square_at(96, 0, 0, 40, 40);
    double apex = oracle_blur_at(bm, 3.0, 39, 39);
    CHECK(apex < 0.5);
    CHECK(apex > 0.2); // quarter-plane limit is ~0.25 + edge terms

    FabParams p;
    Bitmap fab = fabricate(bm, p);
    CHECK(fab.at(39, 39) == 0);
    // Straight edges away from the corner stay put.
    CHECK(fab.at(20, 39) == 1);
    CHECK(fab.at(20, 40) == 0);
}

TEST_CASE("fabricate_field matches the brute-force convolution oracle") {
    Bitmap bm = square_at(48, 10, 14, 30, 38);
    bm.at(40, 8) = 1;
    FabParams p;
    Field f = fabricate_field(bm, p);
    for (int y = 0; y < 48; y += 5) {
        for (int x = 0; x < 48; x += 5) {
            CHECK(f.at(x, y) == doctest::Approx(oracle_blur_at(bm, 3.0, x, y)).epsilon(5e-6));
        }
    }
}

TEST_CASE("fabricate_field: half-plane edge profile") {
    // Half plane covering columns 0..31 of a 64-wide canvas.
    Bitmap bm = rasterize({{0, 0, 32, 64}}, 64, 64);
    FabParams p;
    Field f = fabricate_field(bm, p);
    // Edge column value is 0.5 + g0/2; one past it is 0.5 - g0/2.
    double edge = oracle_blur_at(bm, 3.0, 31, 32);
    double past = oracle_blur_at(bm, 3.0, 32, 32);
    CHECK(edge == doctest::Approx(f.at(31, 32)).epsilon(1e-5));
    CHECK(past == doctest::Approx(f.at(32, 32)).epsilon(1e-5));
    CHECK(edge > 0.5);
    CHECK(past < 0.5);
    CHECK(edge + past == doctest::Approx(1.0).epsilon(1e-9));
    // Monotone decay across the edge.
    for (int x = 20; x < 43; ++x) CHECK(f.at(x, 32) > f.at(x + 1, 32));
}

TEST_CASE("fabricate: deterministic, noise keyed only by seed and coordinates") {
    Bitmap bm = square_at(64, 8, 8, 50, 44);
    FabParams p;
    p.edge_noise_amp = 0.05;
    p.seed = 1234;
    Bitmap a = fabricate(bm, p);
    Bitmap b = fabricate(bm, p);
    CHECK(a == b);
    Field fa = fabricate_field(bm, p);
    Field fb = fabricate_field(bm, p);
    CHECK(fa == fb);

    FabParams q = p;
    q.seed = 1235;
    CHECK(fabricate_field(bm, q) != fa);
}

TEST_CASE("fabricate_field: monotone in the layout (noise disabled)") {
    Bitmap a = square_at(48, 12, 12, 30, 30);
    Bitmap b = a;
    // b strictly contains a
    for (int y = 34; y < 44; ++y) {
        for (int x = 4; x < 20; ++x) b.at(x, y) = 1;
    }
    FabParams p;
    Field fa = fabricate_field(a, p);
    Field fb = fabricate_field(b, p);
    for (std::size_t i = 0; i < fa.values.size(); ++i) {
        CHECK(fa.values[i] <= fb.values[i] + 1e-12f);
    }
}

TEST_CASE("fabricate: translation equivariance in the interior") {
    // Same blob drawn at two positions, both >= 3*sigma from every border.
    const int dx = 5, dy = 7;
    Bitmap a(96, 96, 0);
    Bitmap b(96, 96, 0);
    for (int y = 30; y < 45; ++y) {
        for (int x = 25; x < 50; ++x) {
            a.at(x, y) = 1;
            b.at(x + dx, y + dy) = 1;
        }
    }
    FabParams p;
    Field fa = fabricate_field(a, p);
    Field fb = fabricate_field(b, p);
    for (int y = 15; y < 60; ++y) {
        for (int x = 10; x < 65; ++x) {
            CHECK(fa.at(x, y) == fb.at(x + dx, y + dy));
        }
    }
}

TEST_CASE("fabricate: qualitative fidelity suite") {
    FabParams p;

    // Convex corners lose area: a solid square shrinks.
    Bitmap square = square_at(128, 40, 40, 88, 88);
    Bitmap fab_square = fabricate(square, p);
    CHECK(fab_square.foreground_count() < square.foreground_count());
    CHECK(fab_square.at(40, 40) == 0);
    CHECK(fab_square.at(87, 87) == 0);

    // Concave corners gain: an L-shaped notch fills in.
    Bitmap ell = rasterize({{30, 30, 90, 60}, {30, 60, 60, 90}}, 128, 128);
    Bitmap fab_ell = fabricate(ell, p);
    CHECK(fab_ell.at(61, 61) == 1); // just outside the inner corner

    // Small islands vanish.
    Bitmap island = square_at(64, 30, 30, 34, 34);
    CHECK(fabricate(island, p).foreground_count() == 0);

    // Narrow gaps fill.
    Bitmap gap = rasterize({{8, 8, 31, 56}, {33, 8, 56, 56}}, 64, 64);
    Bitmap fab_gap = fabricate(gap, p);
    CHECK(fab_gap.at(31, 32) == 1);
    CHECK(fab_gap.at(32, 32) == 1);
}

TEST_CASE("fabricate: sigma 0 disables the blur entirely") {
    Bitmap bm = square_at(32, 3, 5, 20, 27);
    FabParams p;
    p.sigma = 0.0;
    CHECK(fabricate(bm, p) == bm);
}

TEST_CASE("FabParams validation") {
    FabParams p;
    p.sigma = -1.0;
    CHECK_THROWS_AS(p.validate(), ParamError);
    p = FabParams{};
    p.threshold = 1.0;
    CHECK_THROWS_AS(p.validate(), ParamError);
    p = FabParams{};
    p.threshold = 0.3;
    p.edge_noise_amp = 0.3;
    CHECK_THROWS_AS(p.validate(), ParamError);
    p.edge_noise_amp = 0.29;
    CHECK_NOTHROW(p.validate());
}
