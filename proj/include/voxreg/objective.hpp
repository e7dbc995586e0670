#pragma once

#include <array>

#include "voxreg/types.hpp"

namespace voxreg {

/// Unconstrained optimization variables for the deformable component.
/// Maps to a gradient field via Phi = 2 * sigmoid(theta), so theta = 0 is
/// exactly Phi = 1 (the identity field).
class PhiLogits {
public:
    PhiLogits() = default;

    static PhiLogits zeros(Dims3 dims);
    // Validates all values finite.
    static PhiLogits from_field(Field3 f);

    const Field3& field() const { return f_; }
    const Dims3& dims() const { return f_.dims(); }

private:
    explicit PhiLogits(Field3 f) : f_(std::move(f)) {}
    Field3 f_;
};

/// Phi = 2 * sigmoid(theta) elementwise; output strictly inside (0, 2).
GradientField phi_from_logits(const PhiLogits& theta);

struct LossBreakdown {
    double mse = 0.0;        // mean squared intensity error over voxels
    double affine_reg = 0.0; // sum of |A - A_I| over the 12 entries, pre-weight
    double phi_reg = 0.0;    // mean of |Phi - 1| over all channel values, pre-weight
    double total = 0.0;      // mse + alpha * affine_reg + beta * phi_reg
    double alpha = 0.0;
    double beta = 0.0;
};

/// Registration loss: the reference is compared against the two-pass warp of
/// the source under (theta, a), plus L1 penalties pulling A toward the
/// identity matrix and Phi toward the all-ones field.
LossBreakdown loss(const Volume3& reference, const Volume3& source, const PhiLogits& theta,
                   const AffineParams& a, double alpha, double beta);

struct LossGrad {
    Field3 dtheta;                  // dTotal/dTheta, theta-shaped
    std::array<double, 12> daffine; // dTotal/dA, row-major
    LossBreakdown breakdown;
};

/// Exact analytic gradient of the total loss with respect to theta and A.
/// L1 subgradients use sign with sign(0) = 0, so the identity is a
/// stationary point of the regularizers.
LossGrad loss_grad(const Volume3& reference, const Volume3& source, const PhiLogits& theta,
                   const AffineParams& a, double alpha, double beta);

} // namespace voxreg
