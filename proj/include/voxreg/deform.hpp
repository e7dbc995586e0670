#pragma once

#include "voxreg/types.hpp"

namespace voxreg {

/// Integrates a gradient field into sampling coordinates: along each axis d,
/// G_d is the inclusive cumulative sum of Phi_d over that axis minus 1,
/// taken independently per voxel line. Phi == 1 everywhere yields the
/// identity grid; any Phi in (0, 2) yields a grid that is strictly
/// increasing along each channel's own axis, so the deformation cannot fold.
DeformationGrid integrate_gradients(const GradientField& phi);

/// Builds the grid of an affine transform. Each voxel is mapped to normalized
/// coordinates in [-1, 1] per axis (centered on the volume), transformed by
/// the 3x4 matrix on (z, y, x, 1), and mapped back to voxel coordinates.
DeformationGrid affine_grid(const AffineParams& a, Dims3 dims);

struct ComposeResult {
    Volume3 warped; // two-pass result W(W(s, G_N), G_A)
    // G_N sampled trilinearly at G_A per channel, with border replication so
    // boundary coordinates extrapolate instead of collapsing toward zero.
    DeformationGrid effective;
};

/// Applies the deformable component first, then the linear component:
/// warps s by G_N = integrate_gradients(phi), then warps the result by
/// G_A = affine_grid(a). The effective single-pass grid is returned alongside
/// for residual export and landmark mapping.
ComposeResult compose_and_warp(const Volume3& s, const GradientField& phi,
                               const AffineParams& a);

namespace detail {

// Normalized coordinate of 0-based voxel index p on an axis of extent n:
// 2p/(n-1) - 1, endpoints mapping to -1 and 1.
inline double normalized_coord(int p, int n) {
    return 2.0 * p / (n - 1) - 1.0;
}

// Half-extent used to map normalized coordinates back to voxel units.
inline double half_extent(int n) {
    return 0.5 * (n - 1);
}

} // namespace detail

} // namespace voxreg
