#include <doctest.h>

#include <cmath>

#include "fabfix/correct.hpp"
#include "fabfix/rng.hpp"

using namespace fabfix;

namespace {

// Zero weights make every forward output exactly sigmoid(0) = 0.5.
Ensemble constant_half_ensemble(Ensemble::Role role, int patch = 32, int members = 2) {
    ArchSpec arch;
    arch.patch = patch;
    Ensemble ens;
    ens.role = role;
    for (int i = 0; i < members; ++i) ens.members.push_back(make_weights<float>(arch));
    return ens;
}

Ensemble random_ensemble(Ensemble::Role role, int patch, int members, std::uint64_t seed) {
    ArchSpec arch;
    arch.patch = patch;
    Ensemble ens;
    ens.role = role;
    for (int i = 0; i < members; ++i) ens.members.push_back(init_weights<float>(arch, seed + static_cast<std::uint64_t>(i)));
    return ens;
}

} // namespace

TEST_CASE("infer_full: constant-output ensemble gives a constant field") {
    Ensemble ens = constant_half_ensemble(Ensemble::Role::Forward);
    Bitmap image(48, 40, 1); // needs D1 padding at stride 16
    for (int stride : {4, 16, 32}) {
        InferenceParams params;
        params.stride = stride;
        Field f = infer_full(image, ens, params, Ensemble::Role::Forward);
        CHECK(f.width == 48);
        CHECK(f.height == 40);
        for (float v : f.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-7));
    }
}

TEST_CASE("infer_full: full-patch stride equals one ensemble-mean pass") {
    const int patch = 32;
    Ensemble ens = random_ensemble(Ensemble::Role::Forward, patch, 3, 900);
    Bitmap image(patch, patch, 0);
    std::mt19937_64 rng(7);
    for (auto& v : image.values) v = rng_below(rng, 2) ? 1 : 0;

    InferenceParams params;
    params.stride = patch;
    Field stitched = infer_full(image, ens, params, Ensemble::Role::Forward);

    Tensor4<float> batch(1, patch, patch, 1);
    for (std::size_t i = 0; i < image.values.size(); ++i) batch.values[i] = image.values[i];
    Tensor4<float> direct = ensemble_mean_forward(ens, batch);
    for (std::size_t i = 0; i < stitched.values.size(); ++i) {
        CHECK(stitched.values[i] == doctest::Approx(direct.values[i]).epsilon(1e-7));
    }
}

TEST_CASE("infer_full: output in [0,1], stable under thread count") {
    Ensemble ens = random_ensemble(Ensemble::Role::Forward, 32, 2, 950);
    Bitmap image(96, 64, 0);
    std::mt19937_64 rng(8);
    for (auto& v : image.values) v = rng_below(rng, 2) ? 1 : 0;

    InferenceParams params;
    params.stride = 8;
    params.batch_size = 4;
    params.threads = 1;
    Field serial = infer_full(image, ens, params, Ensemble::Role::Forward);
    params.threads = 4;
    Field parallel = infer_full(image, ens, params, Ensemble::Role::Forward);
    CHECK(serial == parallel);
    for (float v : serial.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("infer_full: role and parameter validation") {
    Ensemble ens = constant_half_ensemble(Ensemble::Role::Corrector);
    Bitmap image(32, 32, 0);
    InferenceParams params;
    CHECK_THROWS_AS(infer_full(image, ens, params, Ensemble::Role::Forward), ParamError);

    Ensemble fwd = constant_half_ensemble(Ensemble::Role::Forward);
    params.stride = 0;
    CHECK_THROWS_AS(infer_full(image, fwd, params, Ensemble::Role::Forward), ParamError);
    params.stride = 33; // larger than the patch
    CHECK_THROWS_AS(infer_full(image, fwd, params, Ensemble::Role::Forward), ParamError);
}

TEST_CASE("binarize: threshold semantics and idempotence") {
    Field f(4, 1);
    f.at(0, 0) = 0.7f;
    f.at(1, 0) = 0.5f; // exactly at the threshold: foreground
    f.at(2, 0) = 0.49999f;
    f.at(3, 0) = 0.0f;
    Bitmap b = binarize(f, 0.5);
    CHECK(b.at(0, 0) == 1);
    CHECK(b.at(1, 0) == 1);
    CHECK(b.at(2, 0) == 0);
    CHECK(b.at(3, 0) == 0);

    Field all7(8, 8, 0.7f);
    CHECK(binarize(all7, 0.5).foreground_count() == 64);

    Field as_field(4, 1);
    for (int x = 0; x < 4; ++x) as_field.at(x, 0) = static_cast<float>(b.at(x, 0));
    CHECK(binarize(as_field, 0.5) == b);
}

TEST_CASE("uncertainty_mask: band semantics") {
    Field zeros(6, 6, 0.0f);
    Field ones(6, 6, 1.0f);
    Field half(6, 6, 0.5f);
    CHECK(uncertainty_mask(zeros, 0.1, 0.9).foreground_count() == 0);
    CHECK(uncertainty_mask(ones, 0.1, 0.9).foreground_count() == 0);
    CHECK(uncertainty_mask(half, 0.1, 0.9).foreground_count() == 36);

    // analytic sigmoid edge: looser bands give wider masks
    Field edge(64, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 64; ++x) {
            edge.at(x, y) = static_cast<float>(1.0 / (1.0 + std::exp(-(x - 32) / 3.0)));
        }
    }
    std::size_t tight = uncertainty_mask(edge, 0.2, 0.8).foreground_count();
    std::size_t loose = uncertainty_mask(edge, 0.1, 0.9).foreground_count();
    CHECK(loose > tight);
    CHECK(tight > 0);

    // masks of binarized fields are empty
    Bitmap b = binarize(edge, 0.5);
    Field bf(64, 8);
    for (std::size_t i = 0; i < bf.values.size(); ++i) bf.values[i] = static_cast<float>(b.values[i]);
    CHECK(uncertainty_mask(bf, 0.1, 0.9).foreground_count() == 0);
}

TEST_CASE("correct_layout: binarized field and raw field are consistent") {
    Ensemble ens = random_ensemble(Ensemble::Role::Corrector, 32, 2, 1000);
    Bitmap nominal(64, 48, 0);
    for (int y = 16; y < 32; ++y) {
        for (int x = 8; x < 56; ++x) nominal.at(x, y) = 1;
    }
    InferenceParams params;
    params.stride = 16;
    Correction c = correct_layout(nominal, ens, params);
    CHECK(c.field.width == 64);
    CHECK(c.correction.width == 64);
    CHECK(c.correction == binarize(c.field, params.binarize_threshold));
}

TEST_CASE("stitch mean is order-invariant within tolerance") {
    std::mt19937_64 rng(31);
    PatchSet set;
    set.patch_size = 16;
    set.stride = 4;
    for (int oy = 0; oy <= 16; oy += 4) {
        for (int ox = 0; ox <= 16; ox += 4) {
            set.offsets.emplace_back(ox, oy);
            for (int i = 0; i < 256; ++i) set.data.push_back(static_cast<float>(rng_unit(rng)));
        }
    }
    Field a = stitch(set, 32, 32);

    // reverse the patch order
    PatchSet rev;
    rev.patch_size = set.patch_size;
    rev.stride = set.stride;
    for (std::size_t p = set.count(); p-- > 0;) {
        rev.offsets.push_back(set.offsets[p]);
        rev.data.insert(rev.data.end(), set.patch(p), set.patch(p) + set.patch_values());
    }
    Field b = stitch(rev, 32, 32);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-6f);
    }
}
