#include "voxreg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxreg/deform.hpp"
#include "voxreg/detail/trilinear.hpp"

namespace voxreg {

void OptimConfig::validate() const {
    if (!(lr0 > 0.0)) throw ValidationError("lr0 must be positive");
    if (!(lr_drop_factor > 0.0)) throw ValidationError("lr_drop_factor must be positive");
    if (patience_drop < 1) throw ValidationError("patience_drop must be at least 1");
    if (patience_stop <= patience_drop) {
        throw ValidationError("patience_stop must exceed patience_drop");
    }
    if (eval_every < 1) throw ValidationError("eval_every must be at least 1");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) {
        throw ValidationError("regularization weights must be non-negative");
    }
    if (max_iters < 0) throw ValidationError("max_iters must be non-negative");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ValidationError("adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ValidationError("adam_eps must be positive");
    if (pyramid_levels.empty()) throw ValidationError("pyramid_levels must not be empty");
    for (int f : pyramid_levels) {
        if (f < 1) throw ValidationError("pyramid factors must be positive integers");
    }
}

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grads,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeMismatchError("adam state, parameter and gradient sizes must match");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) throw ValidationError("non-finite gradient in adam_step");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace {

// Block-mean downsampling by an integer factor; edge blocks are truncated.
Volume3 downsample(const Volume3& v, int factor) {
    if (factor == 1) return v;
    const Dims3 d = v.dims();
    const Dims3 nd{std::max(2, (d.nz + factor - 1) / factor),
                   std::max(2, (d.ny + factor - 1) / factor),
                   std::max(2, (d.nx + factor - 1) / factor)};
    Volume3 out(nd,
                Spacing3{v.spacing().sz * factor, v.spacing().sy * factor,
                         v.spacing().sx * factor},
                0.0);
    for (int z = 0; z < nd.nz; ++z) {
        const int z0 = z * factor, z1 = std::min(d.nz, z0 + factor);
        for (int y = 0; y < nd.ny; ++y) {
            const int y0 = y * factor, y1 = std::min(d.ny, y0 + factor);
            for (int x = 0; x < nd.nx; ++x) {
                const int x0 = x * factor, x1 = std::min(d.nx, x0 + factor);
                double acc = 0.0;
                int cnt = 0;
                for (int zz = z0; zz < z1; ++zz)
                    for (int yy = y0; yy < y1; ++yy)
                        for (int xx = x0; xx < x1; ++xx) {
                            acc += v(zz, yy, xx);
                            ++cnt;
                        }
                out(z, y, x) = acc / cnt;
            }
        }
    }
    return out;
}

// Trilinear resampling of a logits field onto new dims (endpoint-aligned).
Field3 resample_field(const Field3& f, Dims3 nd) {
    const Dims3 d = f.dims();
    Field3 out(nd);
    const double rz = static_cast<double>(d.nz - 1) / (nd.nz - 1);
    const double ry = static_cast<double>(d.ny - 1) / (nd.ny - 1);
    const double rx = static_cast<double>(d.nx - 1) / (nd.nx - 1);
    for (int axis = 0; axis < 3; ++axis) {
        const double* src = f.channel(axis).data();
        auto dst = out.channel(axis);
        std::size_t i = 0;
        for (int z = 0; z < nd.nz; ++z) {
            for (int y = 0; y < nd.ny; ++y) {
                for (int x = 0; x < nd.nx; ++x, ++i) {
                    dst[i] = detail::sample_zero_pad(src, d, z * rz, y * ry, x * rx);
                }
            }
        }
    }
    return out;
}

struct LevelOutcome {
    bool stopped_on_patience = false;
    long long iterations = 0;
};

// One resolution level of the optimization; params hold theta then A.
LevelOutcome run_level(const Volume3& reference, const Volume3& moving,
                       std::vector<double>& params, const OptimConfig& cfg, int max_iters,
                       long long iteration_offset, std::vector<TraceEntry>& trace) {
    const Dims3 d = reference.dims();
    const std::size_t nch = static_cast<std::size_t>(d.voxel_count());
    const std::size_t ntheta = 3 * nch;

    auto theta_of = [&](const std::vector<double>& p) {
        return PhiLogits::from_field(Field3::from_channels(
            d, std::vector<double>(p.begin(), p.begin() + nch),
            std::vector<double>(p.begin() + nch, p.begin() + 2 * nch),
            std::vector<double>(p.begin() + 2 * nch, p.begin() + ntheta)));
    };
    auto affine_of = [&](const std::vector<double>& p) {
        std::array<double, 12> c;
        std::copy(p.begin() + ntheta, p.end(), c.begin());
        return AffineParams::from_array(c);
    };

    auto evaluate = [&](bool with_grad) {
        return with_grad ? loss_grad(reference, moving, theta_of(params), affine_of(params),
                                     cfg.alpha, cfg.beta)
                         : LossGrad{Field3{}, {}, loss(reference, moving, theta_of(params),
                                                      affine_of(params), cfg.alpha, cfg.beta)};
    };

    double lr = cfg.lr0;
    double best = std::numeric_limits<double>::infinity();
    double best_at_last_round = best;
    std::vector<double> best_params = params;
    int rounds_without_improve = 0;

    // Iteration 0: record the starting point so the trace is never empty.
    {
        const LossBreakdown b = evaluate(false).breakdown;
        if (!std::isfinite(b.total)) {
            throw DivergenceError("loss is non-finite at initialization", trace);
        }
        best = b.total;
        best_at_last_round = best;
        trace.push_back({iteration_offset, lr, best, b});
    }

    AdamState adam(params.size());
    std::vector<double> grads(params.size());
    LevelOutcome outcome;

    for (int iter = 1; iter <= max_iters; ++iter) {
        LossGrad lg = loss_grad(reference, moving, theta_of(params), affine_of(params),
                                cfg.alpha, cfg.beta);
        if (!std::isfinite(lg.breakdown.total)) {
            throw DivergenceError("loss became non-finite at iteration " +
                                      std::to_string(iteration_offset + iter),
                                  trace);
        }
        if (lg.breakdown.total < best) {
            best = lg.breakdown.total;
            best_params = params;
        }
        if (iter % cfg.eval_every == 0) {
            trace.push_back({iteration_offset + iter, lr, best, lg.breakdown});
            if (best < best_at_last_round) {
                rounds_without_improve = 0;
            } else {
                ++rounds_without_improve;
            }
            best_at_last_round = best;
            if (rounds_without_improve >= cfg.patience_stop) {
                outcome.stopped_on_patience = true;
                outcome.iterations = iter;
                break;
            }
            if (rounds_without_improve > 0 && rounds_without_improve % cfg.patience_drop == 0) {
                lr /= cfg.lr_drop_factor;
            }
        }

        for (std::size_t i = 0; i < ntheta; ++i) grads[i] = lg.dtheta.channel(i / nch)[i % nch];
        for (std::size_t i = 0; i < 12; ++i) grads[ntheta + i] = lg.daffine[i];
        if (!cfg.enable_affine) {
            std::fill(grads.begin() + ntheta, grads.end(), 0.0);
        }
        adam_step(params, adam, grads, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        outcome.iterations = iter;
    }

    params = best_params;
    return outcome;
}

} // namespace

RegistrationResult register_volumes(const Volume3& reference, const Volume3& moving,
                                    const OptimConfig& cfg) {
    cfg.validate();
    if (!(reference.dims() == moving.dims())) {
        throw ShapeMismatchError("reference dims " + to_string(reference.dims()) +
                                 " do not match moving dims " + to_string(moving.dims()));
    }

    RegistrationResult result;
    long long total_iters = 0;
    bool last_stopped_on_patience = false;

    std::vector<double> params; // theta channels then the 12 affine coefficients
    Dims3 prev_dims{};

    for (std::size_t level = 0; level < cfg.pyramid_levels.size(); ++level) {
        const int factor = cfg.pyramid_levels[level];
        const Volume3 ref_l = downsample(reference, factor);
        const Volume3 mov_l = downsample(moving, factor);
        const Dims3 d = ref_l.dims();
        const std::size_t ntheta = 3 * static_cast<std::size_t>(d.voxel_count());

        std::vector<double> level_params(ntheta + 12, 0.0);
        if (level == 0) {
            const auto ident = AffineParams::identity().coeffs();
            std::copy(ident.begin(), ident.end(), level_params.begin() + ntheta);
        } else {
            // Carry theta across resolutions by trilinear resampling; A lives
            // in normalized coordinates and transfers unchanged.
            Field3 prev(prev_dims);
            const std::size_t pn = static_cast<std::size_t>(prev_dims.voxel_count());
            for (int axis = 0; axis < 3; ++axis) {
                std::copy(params.begin() + axis * pn, params.begin() + (axis + 1) * pn,
                          prev.channel(axis).begin());
            }
            const Field3 up = resample_field(prev, d);
            for (int axis = 0; axis < 3; ++axis) {
                const std::size_t nc = static_cast<std::size_t>(d.voxel_count());
                std::copy(up.channel(axis).begin(), up.channel(axis).end(),
                          level_params.begin() + axis * nc);
            }
            std::copy(params.end() - 12, params.end(), level_params.begin() + ntheta);
        }

        // Coarse levels cost 1/factor^3 per iteration, so a larger budget there
        // is nearly free and lets the large-scale field settle before refinement.
        const LevelOutcome out = run_level(ref_l, mov_l, level_params, cfg,
                                           cfg.max_iters * factor, total_iters,
                                           result.loss_trace);
        total_iters += out.iterations;
        last_stopped_on_patience = out.stopped_on_patience;
        params = std::move(level_params);
        prev_dims = d;
    }

    // Materialize the best checkpoint at full resolution.
    {
        const std::size_t pn = static_cast<std::size_t>(prev_dims.voxel_count());
        Field3 theta_f(prev_dims);
        for (int axis = 0; axis < 3; ++axis) {
            std::copy(params.begin() + axis * pn, params.begin() + (axis + 1) * pn,
                      theta_f.channel(axis).begin());
        }
        if (!(prev_dims == reference.dims())) {
            theta_f = resample_field(theta_f, reference.dims());
        }
        result.theta = PhiLogits::from_field(std::move(theta_f));
    }
    std::array<double, 12> c;
    std::copy(params.end() - 12, params.end(), c.begin());
    result.a = AffineParams::from_array(c);
    result.grid =
        compose_and_warp(moving, phi_from_logits(result.theta), result.a).effective;
    result.iterations_run = total_iters;
    result.converged = last_stopped_on_patience;
    return result;
}

} // namespace voxreg
