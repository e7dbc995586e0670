#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "voxreg/synth.hpp"
#include "voxreg/types.hpp"
#include "voxreg/warp.hpp"

using namespace voxreg;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

Volume3 random_volume(Dims3 d, std::mt19937_64& rng) {
    std::vector<double> data(static_cast<std::size_t>(d.voxel_count()));
    for (double& v : data) v = uniform(rng, 0.0, 1.0);
    return Volume3::from_data(d, Spacing3{}, std::move(data));
}

// Random grid with every coordinate strictly inside [0, n-1].
DeformationGrid random_grid(Dims3 d, std::mt19937_64& rng, double margin = 0.0) {
    Field3 f(d);
    for (int axis = 0; axis < 3; ++axis) {
        const double hi = d.extent(axis) - 1.0;
        for (double& v : f.channel(axis)) v = uniform(rng, margin, hi - margin);
    }
    return DeformationGrid::from_field(std::move(f));
}

} // namespace

TEST_SUITE("warp") {

TEST_CASE("identity grid reproduces the input bit-exact") {
    std::mt19937_64 rng(7);
    Volume3 s = random_volume(Dims3{3, 4, 5}, rng);
    Volume3 d = warp(s, identity_grid(s.dims()));
    for (std::size_t i = 0; i < s.data().size(); ++i) CHECK(d.data()[i] == s.data()[i]);
}

TEST_CASE("half-voxel shift reads the ramp midpoint") {
    // V(x) = 10x; shifting the x-coordinate by +0.5 reads 10*(x+0.5).
    const Dims3 d{2, 2, 4};
    Field3 vf(d);
    Volume3 s(d, Spacing3{}, 0.0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) s.at(z, y, x) = 10.0 * x;
    Field3 gf = identity_grid(d).field();
    for (double& v : gf.channel(kAxisX)) v += 0.5;
    Volume3 out = warp(s, DeformationGrid::from_field(std::move(gf)));
    CHECK(out.at(0, 0, 0) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(out.at(1, 1, 2) == doctest::Approx(25.0).epsilon(1e-14));
}

TEST_CASE("matches the brute-force oracle on random cases") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const Dims3 d{4, 4, 4};
        Volume3 s = random_volume(d, rng);
        DeformationGrid g = random_grid(d, rng);
        Volume3 fast = warp(s, g);
        Volume3 slow = brute_force_warp(s, g);
        for (std::size_t i = 0; i < fast.data().size(); ++i) {
            const double scale = std::max(1.0, std::abs(slow.data()[i]));
            CHECK(std::abs(fast.data()[i] - slow.data()[i]) / scale <= 1e-12);
        }
    }
}

TEST_CASE("out-of-bounds coordinates read zero") {
    const Dims3 d{3, 3, 3};
    Volume3 s(d, Spacing3{}, 1.0);
    Field3 f(d, -5.0);
    Volume3 out = warp(s, DeformationGrid::from_field(std::move(f)));
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("partition of unity: constant volume stays constant inside") {
    std::mt19937_64 rng(13);
    const Dims3 d{5, 5, 5};
    Volume3 s(d, Spacing3{}, 1.0);
    DeformationGrid g = random_grid(d, rng);
    Volume3 out = warp(s, g);
    for (double v : out.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear in the source image") {
    std::mt19937_64 rng(17);
    const Dims3 d{4, 5, 4};
    Volume3 s1 = random_volume(d, rng);
    Volume3 s2 = random_volume(d, rng);
    DeformationGrid g = random_grid(d, rng);
    Volume3 combined = warp(add(scale(s1, 0.75), scale(s2, -0.25)), g);
    Volume3 separate = add(scale(warp(s1, g), 0.75), scale(warp(s2, g), -0.25));
    for (std::size_t i = 0; i < combined.data().size(); ++i) {
        CHECK(combined.data()[i] ==
              doctest::Approx(separate.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("gradients vanish on a constant volume") {
    const Dims3 d{3, 3, 3};
    Volume3 s(d, Spacing3{}, 0.4);
    WarpWithGrad wg = warp_with_grad(s, identity_grid(d));
    for (int axis = 0; axis < 3; ++axis)
        for (double v : wg.grad.channel(axis)) CHECK(v == 0.0);
}

TEST_CASE("ramp slope is recovered exactly") {
    const Dims3 d{2, 2, 5};
    Volume3 s(d, Spacing3{}, 0.0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) s.at(z, y, x) = 10.0 * x;
    Field3 gf = identity_grid(d).field();
    for (double& v : gf.channel(kAxisX)) v = std::min(v + 0.25, d.nx - 1.25);
    WarpWithGrad wg = warp_with_grad(s, DeformationGrid::from_field(std::move(gf)));
    CHECK(wg.grad.value(kAxisX, 1, 0, 2) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("gradients match finite differences away from kinks") {
    std::mt19937_64 rng(19);
    const double h = 1e-4;
    for (int rep = 0; rep < 10; ++rep) {
        const Dims3 d{6, 6, 6};
        Volume3 s = random_volume(d, rng);
        // Keep every coordinate at least 2h from an integer so the central
        // difference never straddles a kernel kink.
        Field3 f(d);
        for (int axis = 0; axis < 3; ++axis) {
            for (double& v : f.channel(axis)) {
                v = uniform(rng, 0.0, d.extent(axis) - 1.0);
                const double frac = v - std::floor(v);
                if (frac < 2 * h) v += 2 * h;
                if (frac > 1.0 - 2 * h) v -= 2 * h;
            }
        }
        DeformationGrid g = DeformationGrid::from_field(f);
        WarpWithGrad wg = warp_with_grad(s, g);
        std::uniform_int_distribution<int> pick(0, 5);
        for (int probe = 0; probe < 20; ++probe) {
            const int z = pick(rng), y = pick(rng), x = pick(rng);
            const int axis = pick(rng) % 3;
            Field3 fp = f, fm = f;
            fp.value(axis, z, y, x) += h;
            fm.value(axis, z, y, x) -= h;
            const double vp =
                warp(s, DeformationGrid::from_field(std::move(fp))).at(z, y, x);
            const double vm =
                warp(s, DeformationGrid::from_field(std::move(fm))).at(z, y, x);
            const double fd = (vp - vm) / (2 * h);
            const double an = wg.grad.value(axis, z, y, x);
            CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("mask warp thresholds at 0.5") {
    std::mt19937_64 rng(23);
    const Dims3 d{4, 4, 4};
    std::vector<double> bits(64);
    for (double& b : bits) b = rng() % 2 ? 1.0 : 0.0;
    Mask3 m = Mask3::from_volume(Volume3::from_data(d, Spacing3{}, bits));
    DeformationGrid g = random_grid(d, rng);

    Mask3 warped = warp_mask(m, g);
    Volume3 oracle = brute_force_warp(m.volume(), g);
    for (std::size_t i = 0; i < oracle.data().size(); ++i) {
        CHECK(warped.volume().data()[i] == (oracle.data()[i] >= 0.5 ? 1.0 : 0.0));
    }

    Mask3 ident = warp_mask(m, identity_grid(d));
    for (std::size_t i = 0; i < bits.size(); ++i)
        CHECK(ident.volume().data()[i] == m.volume().data()[i]);

    Mask3 ones = Mask3::from_volume(Volume3(d, Spacing3{}, 1.0));
    Mask3 ones_warped = warp_mask(ones, random_grid(d, rng));
    CHECK(ones_warped.count() == 64);
}

TEST_CASE("shape mismatch is rejected") {
    Volume3 s(Dims3{3, 3, 3}, Spacing3{}, 0.0);
    CHECK_THROWS_AS(warp(s, identity_grid(Dims3{3, 3, 4})), ShapeMismatchError);
    CHECK_THROWS_AS(warp_with_grad(s, identity_grid(Dims3{4, 3, 3})),
                    ShapeMismatchError);
}

TEST_CASE("sample_trilinear interpolates and zero-pads") {
    const Dims3 d{2, 2, 2};
    Volume3 s(d, Spacing3{}, 0.0);
    s.at(1, 1, 1) = 8.0;
    CHECK(sample_trilinear(s, 0.5, 0.5, 0.5) == doctest::Approx(1.0));
    CHECK(sample_trilinear(s, 1.0, 1.0, 1.0) == 8.0);
    CHECK(sample_trilinear(s, -3.0, 0.0, 0.0) == 0.0);
}

} // TEST_SUITE
