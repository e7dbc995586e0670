#pragma once

#include "voxreg/types.hpp"

namespace voxreg {

/// Backward trilinear warp: D(p) = sum_q S(q) * prod_d max(0, 1 - |G(p)_d - q_d|).
/// Sampling coordinates outside [0, n_d - 1] contribute zero (implicit zero
/// padding, no border replication). Requires s.dims() == g.dims().
Volume3 warp(const Volume3& s, const DeformationGrid& g);

struct WarpWithGrad {
    Volume3 warped;
    // Per-voxel partial derivatives of the warped value with respect to each
    // sampling coordinate. On exact integer coordinates (the hat kernel's
    // kink) the right-sided derivative is reported, i.e. the forward
    // difference toward the next voxel; elsewhere the derivative is exact.
    Field3 grad;
};

WarpWithGrad warp_with_grad(const Volume3& s, const DeformationGrid& g);

/// Warps the mask as a scalar volume, then thresholds at 0.5 back to {0, 1}.
Mask3 warp_mask(const Mask3& m, const DeformationGrid& g);

/// Zero-padded trilinear sample of a volume at one continuous coordinate.
double sample_trilinear(const Volume3& v, double cz, double cy, double cx);

} // namespace voxreg
