#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "voxreg/deform.hpp"
#include "voxreg/objective.hpp"
#include "voxreg/optimizer.hpp"
#include "voxreg/synth.hpp"
#include "voxreg/types.hpp"
#include "voxreg/warp.hpp"

using namespace voxreg;

TEST_SUITE("optimizer") {

TEST_CASE("config validation") {
    OptimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lr0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = OptimConfig{};
    cfg.patience_stop = cfg.patience_drop; // must be strictly larger
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = OptimConfig{};
    cfg.pyramid_levels = {2, 0};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = OptimConfig{};
    cfg.pyramid_levels.clear();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = OptimConfig{};
    cfg.eval_every = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    std::vector<double> params{1.0, -2.0, 3.0};
    std::vector<double> grads{0.0, 0.0, 0.0};
    AdamState st(3);
    adam_step(params, st, grads, 0.1, 0.9, 0.999, 1e-8);
    CHECK(params[0] == 1.0);
    CHECK(params[1] == -2.0);
    CHECK(params[2] == 3.0);
    CHECK(st.t == 1);
}

TEST_CASE("first adam step is bounded by the learning rate") {
    std::vector<double> params{0.0, 0.0, 0.0};
    std::vector<double> grads{3.0, -0.02, 1e-6};
    AdamState st(3);
    adam_step(params, st, grads, 0.05, 0.9, 0.999, 1e-8);
    for (double p : params) CHECK(std::abs(p) <= 0.05 * (1.0 + 1e-9));
    // With bias correction the step magnitude is lr to high accuracy for any
    // appreciable gradient.
    CHECK(std::abs(params[0]) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("adam minimizes a scalar quadratic") {
    std::vector<double> x{1.0};
    AdamState st(1);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> g{2.0 * x[0]};
        adam_step(x, st, g, 0.1, 0.9, 0.999, 1e-8);
    }
    CHECK(std::abs(x[0]) < 0.05);
}

TEST_CASE("adam rejects non-finite gradients and shape mismatch") {
    std::vector<double> params{0.0};
    std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
    AdamState st(1);
    CHECK_THROWS_AS(adam_step(params, st, bad, 0.1, 0.9, 0.999, 1e-8),
                    ValidationError);
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(adam_step(params, st, two, 0.1, 0.9, 0.999, 1e-8),
                    ShapeMismatchError);
}

TEST_CASE("registering a volume to itself stays at the identity") {
    Phantom ph = make_phantom(Dims3{12, 12, 12}, 5);
    OptimConfig cfg;
    cfg.lr0 = 1e-3;
    cfg.max_iters = 500;
    RegistrationResult res = register_volumes(ph.volume, ph.volume, cfg);
    CHECK(res.loss_trace.back().best_total < 1e-8);
    for (int axis = 0; axis < 3; ++axis) {
        const GradientField phi = phi_from_logits(res.theta);
        for (double v : phi.field().channel(axis)) CHECK(std::abs(v - 1.0) < 1e-2);
    }
    const auto ident = AffineParams::identity().coeffs();
    for (int i = 0; i < 12; ++i)
        CHECK(std::abs(res.a.coeffs()[i] - ident[i]) < 1e-2);
}

TEST_CASE("recovers a two-voxel translation") {
    // Smooth blob image translated by two voxels along x; the recovered grid
    // must match the ground-truth shift to a tenth of a voxel on average.
    const Dims3 d{32, 32, 32};
    Volume3 s(d, Spacing3{}, 0.0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const double dz = (z - 15.5) / 7.0;
                const double dy = (y - 15.5) / 7.0;
                const double dx = (x - 15.5) / 7.0;
                s.at(z, y, x) = std::exp(-0.5 * (dz * dz + dy * dy + dx * dx));
            }
    Field3 shift = identity_grid(d).field();
    for (double& v : shift.channel(kAxisX)) v += 2.0;
    DeformationGrid gt = DeformationGrid::from_field(std::move(shift));
    Volume3 r = warp(s, gt);

    OptimConfig cfg;
    cfg.lr0 = 0.01;
    cfg.max_iters = 1200;
    RegistrationResult res = register_volumes(r, s, cfg);

    double err = 0.0;
    long long n = 0;
    for (int axis = 0; axis < 3; ++axis)
        for (std::size_t i = 0; i < res.grid.field().channel(axis).size(); ++i, ++n)
            err += std::abs(res.grid.field().channel(axis)[i] -
                            gt.field().channel(axis)[i]);
    CHECK(err / static_cast<double>(n) < 0.1);
}

TEST_CASE("lr schedule drops exactly on patience") {
    // A pair that is already at its optimum cannot improve, so every round is
    // barren and the schedule is fully predictable: with eval_every = 1,
    // patience_drop = 3 and patience_stop = 7 the lr divides by 10 at rounds
    // 3 and 6 and the run stops after round 7.
    const Dims3 d{8, 8, 8};
    Volume3 r(d, Spacing3{}, 0.5);
    OptimConfig cfg;
    cfg.eval_every = 1;
    cfg.patience_drop = 3;
    cfg.patience_stop = 7;
    cfg.max_iters = 100;
    RegistrationResult res = register_volumes(r, r, cfg);
    CHECK(res.converged);
    CHECK(res.iterations_run == 7);
    REQUIRE(res.loss_trace.size() == 8); // iteration 0 plus 7 rounds
    CHECK(res.loss_trace[3].lr == doctest::Approx(cfg.lr0));
    CHECK(res.loss_trace[4].lr == doctest::Approx(cfg.lr0 / 10.0));
    CHECK(res.loss_trace[7].lr == doctest::Approx(cfg.lr0 / 100.0));
}

TEST_CASE("best loss is monotone along the trace") {
    Phantom ph = make_phantom(Dims3{10, 10, 10}, 9);
    GroundTruth gt = make_ground_truth(ph.volume.dims(), 0.15, 10);
    SynthPair pair = make_pair(ph, gt);
    OptimConfig cfg;
    cfg.lr0 = 0.01;
    cfg.max_iters = 200;
    RegistrationResult res = register_volumes(pair.reference, ph.volume, cfg);
    for (std::size_t i = 1; i < res.loss_trace.size(); ++i)
        CHECK(res.loss_trace[i].best_total <= res.loss_trace[i - 1].best_total);
    // The checkpoint reported is the best, not the last iterate.
    LossBreakdown final_loss = loss(pair.reference, ph.volume, res.theta, res.a,
                                    cfg.alpha, cfg.beta);
    CHECK(final_loss.total ==
          doctest::Approx(res.loss_trace.back().best_total).epsilon(1e-9));
}

TEST_CASE("identical runs produce bit-identical traces") {
    Phantom ph = make_phantom(Dims3{10, 10, 10}, 21);
    GroundTruth gt = make_ground_truth(ph.volume.dims(), 0.2, 22);
    SynthPair pair = make_pair(ph, gt);
    OptimConfig cfg;
    cfg.lr0 = 0.01;
    cfg.max_iters = 60;
    RegistrationResult a = register_volumes(pair.reference, ph.volume, cfg);
    RegistrationResult b = register_volumes(pair.reference, ph.volume, cfg);
    REQUIRE(a.loss_trace.size() == b.loss_trace.size());
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i) {
        CHECK(a.loss_trace[i].loss.total == b.loss_trace[i].loss.total);
        CHECK(a.loss_trace[i].best_total == b.loss_trace[i].best_total);
    }
    for (int i = 0; i < 12; ++i) CHECK(a.a.coeffs()[i] == b.a.coeffs()[i]);
}

TEST_CASE("pyramid levels refine toward the same answer") {
    Phantom ph = make_phantom(Dims3{16, 16, 16}, 33);
    GroundTruth gt = make_ground_truth(ph.volume.dims(), 0.15, 34);
    SynthPair pair = make_pair(ph, gt);
    OptimConfig cfg;
    cfg.lr0 = 0.01;
    cfg.max_iters = 300;
    cfg.pyramid_levels = {2, 1};
    RegistrationResult res = register_volumes(pair.reference, ph.volume, cfg);
    CHECK(res.grid.dims() == ph.volume.dims());
    CHECK(res.theta.dims() == ph.volume.dims());
    // The final trace entry must come from the full-resolution level and beat
    // the initial loss by a wide margin.
    CHECK(res.loss_trace.back().best_total < 0.2 * res.loss_trace.front().loss.total);
}

TEST_CASE("mismatched shapes are rejected") {
    Volume3 r(Dims3{8, 8, 8}, Spacing3{}, 0.0);
    Volume3 s(Dims3{8, 8, 9}, Spacing3{}, 0.0);
    CHECK_THROWS_AS(register_volumes(r, s, OptimConfig{}), ShapeMismatchError);
}

} // TEST_SUITE
