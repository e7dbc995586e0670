#include "voxreg/objective.hpp"

#include <cmath>

#include "voxreg/deform.hpp"
#include "voxreg/detail/trilinear.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/warp.hpp"

namespace voxreg {

namespace {

// Sigmoid outputs are clamped a hair inside (0, 1) so Phi stays strictly in
// the open interval (0, 2) even where double precision saturates; theta = 50
// still maps to within 1e-12 of 2.
constexpr double kSigmaClamp = 2.5e-13;

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sign(double x) {
    return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

void check_inputs(const Volume3& r, const Volume3& s, const PhiLogits& theta, double alpha,
                  double beta) {
    if (!(r.dims() == s.dims())) {
        throw ShapeMismatchError("reference dims " + to_string(r.dims()) +
                                 " do not match source dims " + to_string(s.dims()));
    }
    if (!(r.dims() == theta.dims())) {
        throw ShapeMismatchError("logits dims " + to_string(theta.dims()) +
                                 " do not match volume dims " + to_string(r.dims()));
    }
    if (!(alpha >= 0.0) || !(beta >= 0.0)) {
        throw ValidationError("regularization weights must be non-negative");
    }
}

// Transpose of the per-line inclusive cumulative sum: suffix sums along each
// channel's own axis.
Field3 suffix_sum_per_axis(const Field3& in) {
    const Dims3 d = in.dims();
    Field3 out(d);
    {
        auto src = in.channel(kAxisZ);
        auto dst = out.channel(kAxisZ);
        const std::size_t plane = static_cast<std::size_t>(d.ny) * d.nx;
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t base = static_cast<std::size_t>(y) * d.nx + x;
                double run = 0.0;
                for (int z = d.nz - 1; z >= 0; --z) {
                    run += src[base + z * plane];
                    dst[base + z * plane] = run;
                }
            }
        }
    }
    {
        auto src = in.channel(kAxisY);
        auto dst = out.channel(kAxisY);
        for (int z = 0; z < d.nz; ++z) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t base = static_cast<std::size_t>(z) * d.ny * d.nx + x;
                double run = 0.0;
                for (int y = d.ny - 1; y >= 0; --y) {
                    run += src[base + static_cast<std::size_t>(y) * d.nx];
                    dst[base + static_cast<std::size_t>(y) * d.nx] = run;
                }
            }
        }
    }
    {
        auto src = in.channel(kAxisX);
        auto dst = out.channel(kAxisX);
        for (int z = 0; z < d.nz; ++z) {
            for (int y = 0; y < d.ny; ++y) {
                const std::size_t base = (static_cast<std::size_t>(z) * d.ny + y) * d.nx;
                double run = 0.0;
                for (int x = d.nx - 1; x >= 0; --x) {
                    run += src[base + x];
                    dst[base + x] = run;
                }
            }
        }
    }
    return out;
}

LossBreakdown assemble_breakdown(double mse, const AffineParams& a, const GradientField& phi,
                                 double alpha, double beta) {
    LossBreakdown b;
    b.mse = mse;
    b.alpha = alpha;
    b.beta = beta;

    const AffineParams ident;
    double areg = 0.0;
    for (int i = 0; i < 12; ++i) {
        areg += std::abs(a.coeffs()[i] - ident.coeffs()[i]);
    }
    b.affine_reg = areg;

    double preg = 0.0;
    long long n = 0;
    for (int axis = 0; axis < 3; ++axis) {
        for (double v : phi.field().channel(axis)) {
            preg += std::abs(v - 1.0);
            ++n;
        }
    }
    b.phi_reg = preg / static_cast<double>(n);

    b.total = b.mse + alpha * b.affine_reg + beta * b.phi_reg;
    return b;
}

} // namespace

PhiLogits PhiLogits::zeros(Dims3 dims) {
    return PhiLogits(Field3(dims, 0.0));
}

PhiLogits PhiLogits::from_field(Field3 f) {
    for (int axis = 0; axis < 3; ++axis) {
        for (double v : f.channel(axis)) {
            if (!std::isfinite(v)) {
                throw ValidationError("logits must be finite");
            }
        }
    }
    return PhiLogits(std::move(f));
}

GradientField phi_from_logits(const PhiLogits& theta) {
    Field3 phi(theta.dims());
    for (int axis = 0; axis < 3; ++axis) {
        auto src = theta.field().channel(axis);
        auto dst = phi.channel(axis);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            double s = sigmoid(src[i]);
            if (s < kSigmaClamp) s = kSigmaClamp;
            if (s > 1.0 - kSigmaClamp) s = 1.0 - kSigmaClamp;
            dst[i] = 2.0 * s;
        }
    }
    return GradientField::from_field(std::move(phi));
}

LossBreakdown loss(const Volume3& reference, const Volume3& source, const PhiLogits& theta,
                   const AffineParams& a, double alpha, double beta) {
    check_inputs(reference, source, theta, alpha, beta);
    const GradientField phi = phi_from_logits(theta);
    const ComposeResult cw = compose_and_warp(source, phi, a);

    const auto rd = reference.data();
    const auto wd = cw.warped.data();
    double sq = 0.0;
    for (std::size_t i = 0; i < rd.size(); ++i) {
        const double e = wd[i] - rd[i];
        sq += e * e;
    }
    return assemble_breakdown(sq / static_cast<double>(rd.size()), a, phi, alpha,
                              beta);
}

// Gradient assembly, back to front through the two-pass composition:
//
//   out = W(T, G_A),  T = W(S, G_N),  G_N = cumsum(Phi) - 1,  Phi = 2*sigmoid(theta),
//   G_A = affine map of normalized voxel coordinates.
//
// dMSE/dG_A comes from the sampling derivatives of the second pass.
// dMSE/dT is the adjoint of the second pass's trilinear weights (the one
// place intensity derivatives of the sampler are needed); dMSE/dG_N then
// follows from the sampling derivatives of the first pass, and dG_N/dPhi is
// the transposed cumulative sum, i.e. a suffix sum along each axis.
// Voxel reductions run serially in index order so results are reproducible.
LossGrad loss_grad(const Volume3& reference, const Volume3& source, const PhiLogits& theta,
                   const AffineParams& a, double alpha, double beta) {
    check_inputs(reference, source, theta, alpha, beta);
    const Dims3 d = reference.dims();
    const long long n = d.voxel_count();
    const double inv_n = 1.0 / static_cast<double>(n);

    const GradientField phi = phi_from_logits(theta);
    const DeformationGrid gn = integrate_gradients(phi);
    const DeformationGrid ga = affine_grid(a, d);

    const WarpWithGrad first = warp_with_grad(source, gn);
    const WarpWithGrad second = warp_with_grad(first.warped, ga);

    const auto rd = reference.data();
    const auto wd = second.warped.data();

    // dMSE/dout and the loss value itself.
    std::vector<double> dout(static_cast<std::size_t>(n));
    double sq = 0.0;
    for (std::size_t i = 0; i < dout.size(); ++i) {
        const double e = wd[i] - rd[i];
        sq += e * e;
        dout[i] = 2.0 * inv_n * e;
    }
    LossGrad result;
    result.breakdown = assemble_breakdown(sq / static_cast<double>(n), a, phi, alpha, beta);

    // Second pass: dMSE/dG_A per voxel, and the affine gradient via the
    // normalized-coordinate linear map.
    const auto s2z = second.grad.channel(kAxisZ);
    const auto s2y = second.grad.channel(kAxisY);
    const auto s2x = second.grad.channel(kAxisX);
    result.daffine.fill(0.0);
    {
        const double hz = voxreg::detail::half_extent(d.nz);
        const double hy = voxreg::detail::half_extent(d.ny);
        const double hx = voxreg::detail::half_extent(d.nx);
        std::size_t i = 0;
        for (int z = 0; z < d.nz; ++z) {
            const double nzc = voxreg::detail::normalized_coord(z, d.nz);
            for (int y = 0; y < d.ny; ++y) {
                const double nyc = voxreg::detail::normalized_coord(y, d.ny);
                for (int x = 0; x < d.nx; ++x, ++i) {
                    const double nxc = voxreg::detail::normalized_coord(x, d.nx);
                    const double dgz = dout[i] * s2z[i] * hz;
                    const double dgy = dout[i] * s2y[i] * hy;
                    const double dgx = dout[i] * s2x[i] * hx;
                    result.daffine[0] += dgz * nzc;
                    result.daffine[1] += dgz * nyc;
                    result.daffine[2] += dgz * nxc;
                    result.daffine[3] += dgz;
                    result.daffine[4] += dgy * nzc;
                    result.daffine[5] += dgy * nyc;
                    result.daffine[6] += dgy * nxc;
                    result.daffine[7] += dgy;
                    result.daffine[8] += dgx * nzc;
                    result.daffine[9] += dgx * nyc;
                    result.daffine[10] += dgx * nxc;
                    result.daffine[11] += dgx;
                }
            }
        }
    }

    // Adjoint of the second pass onto the intermediate image: scatter each
    // output-voxel residual through its trilinear weight stencil.
    std::vector<double> dinter(static_cast<std::size_t>(n), 0.0);
    {
        const double* az = ga.field().channel(kAxisZ).data();
        const double* ay = ga.field().channel(kAxisY).data();
        const double* ax = ga.field().channel(kAxisX).data();
        for (long long i = 0; i < n; ++i) {
            voxreg::detail::scatter_zero_pad(dinter.data(), d, az[i], ay[i], ax[i],
                                             dout[static_cast<std::size_t>(i)]);
        }
    }

    // First pass: dMSE/dG_N, then transpose the integration into dMSE/dPhi.
    Field3 dgn(d);
    for (int axis = 0; axis < 3; ++axis) {
        auto sg = first.grad.channel(axis);
        auto dst = dgn.channel(axis);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = dinter[i] * sg[i];
        }
    }
    Field3 dphi = suffix_sum_per_axis(dgn);

    // Regularizer pull on Phi, then the chain through the scaled sigmoid:
    // dPhi/dtheta = 2*sigma*(1 - sigma).
    const double phi_reg_w = beta / (3.0 * static_cast<double>(n));
    result.dtheta = Field3(d);
    for (int axis = 0; axis < 3; ++axis) {
        auto ph = phi.field().channel(axis);
        auto dph = dphi.channel(axis);
        auto th = theta.field().channel(axis);
        auto dst = result.dtheta.channel(axis);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            const double g_phi = dph[i] + phi_reg_w * sign(ph[i] - 1.0);
            const double s = sigmoid(th[i]);
            dst[i] = g_phi * 2.0 * s * (1.0 - s);
        }
    }

    // Affine L1 pull toward the identity.
    const AffineParams ident;
    for (int i = 0; i < 12; ++i) {
        result.daffine[i] += alpha * sign(a.coeffs()[i] - ident.coeffs()[i]);
    }
    return result;
}

} // namespace voxreg
