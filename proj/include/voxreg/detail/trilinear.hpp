#pragma once

#include <algorithm>
#include <cmath>

#include "voxreg/types.hpp"

namespace voxreg::detail {

// One axis of the hat-kernel stencil max(0, 1 - |t|) at sampling coordinate c:
// the two integer neighbors floor(c) and floor(c)+1 with their weights and
// derivatives. The derivative is the right-sided one: on an exact integer
// coordinate it reports the forward difference toward floor(c)+1 rather
// than 0, so the identity transform is not an artificial stationary point
// of image-driven objectives.
struct AxisStencil {
    int i0 = 0;
    double w0 = 0.0, w1 = 0.0; // weights of i0 and i0 + 1
    static constexpr double d0 = -1.0; // d(w0)/d(coordinate)
    static constexpr double d1 = 1.0;  // d(w1)/d(coordinate)
};

inline AxisStencil axis_stencil(double c) {
    const double fl = std::floor(c);
    const double f = c - fl;
    AxisStencil a;
    a.i0 = static_cast<int>(fl);
    a.w0 = 1.0 - f;
    a.w1 = f;
    return a;
}

// True when the coordinate cannot touch any voxel in [0, n-1]; also guards
// the int conversion in axis_stencil against huge finite coordinates.
inline bool out_of_support(double c, int n) {
    return !(c > -1.0) || !(c < static_cast<double>(n));
}

struct SampleGrad {
    double value = 0.0;
    double dz = 0.0, dy = 0.0, dx = 0.0; // d(value)/d(coordinate) per axis
};

// Zero-padded trilinear sample: neighbors outside [0, n-1] contribute 0.
inline double sample_zero_pad(const double* data, const Dims3& d, double cz, double cy,
                              double cx) {
    if (out_of_support(cz, d.nz) || out_of_support(cy, d.ny) || out_of_support(cx, d.nx)) {
        return 0.0;
    }
    const AxisStencil az = axis_stencil(cz);
    const AxisStencil ay = axis_stencil(cy);
    const AxisStencil ax = axis_stencil(cx);
    double acc = 0.0;
    for (int iz = 0; iz < 2; ++iz) {
        const int z = az.i0 + iz;
        if (z < 0 || z >= d.nz) continue;
        const double wz = iz ? az.w1 : az.w0;
        for (int iy = 0; iy < 2; ++iy) {
            const int y = ay.i0 + iy;
            if (y < 0 || y >= d.ny) continue;
            const double wzy = wz * (iy ? ay.w1 : ay.w0);
            const std::size_t row = (static_cast<std::size_t>(z) * d.ny + y) * d.nx;
            for (int ix = 0; ix < 2; ++ix) {
                const int x = ax.i0 + ix;
                if (x < 0 || x >= d.nx) continue;
                acc += wzy * (ix ? ax.w1 : ax.w0) * data[row + x];
            }
        }
    }
    return acc;
}

// Sample plus the exact partial derivatives with respect to the coordinate.
inline SampleGrad sample_grad_zero_pad(const double* data, const Dims3& d, double cz,
                                       double cy, double cx) {
    SampleGrad out;
    if (out_of_support(cz, d.nz) || out_of_support(cy, d.ny) || out_of_support(cx, d.nx)) {
        return out;
    }
    const AxisStencil az = axis_stencil(cz);
    const AxisStencil ay = axis_stencil(cy);
    const AxisStencil ax = axis_stencil(cx);
    for (int iz = 0; iz < 2; ++iz) {
        const int z = az.i0 + iz;
        if (z < 0 || z >= d.nz) continue;
        const double wz = iz ? az.w1 : az.w0;
        const double gz = iz ? az.d1 : az.d0;
        for (int iy = 0; iy < 2; ++iy) {
            const int y = ay.i0 + iy;
            if (y < 0 || y >= d.ny) continue;
            const double wy = iy ? ay.w1 : ay.w0;
            const double gy = iy ? ay.d1 : ay.d0;
            const std::size_t row = (static_cast<std::size_t>(z) * d.ny + y) * d.nx;
            for (int ix = 0; ix < 2; ++ix) {
                const int x = ax.i0 + ix;
                if (x < 0 || x >= d.nx) continue;
                const double wx = ix ? ax.w1 : ax.w0;
                const double gx = ix ? ax.d1 : ax.d0;
                const double s = data[row + x];
                out.value += wz * wy * wx * s;
                out.dz += gz * wy * wx * s;
                out.dy += wz * gy * wx * s;
                out.dx += wz * wy * gx * s;
            }
        }
    }
    return out;
}

// Border-replicated trilinear sample: the coordinate is clamped into
// [0, n-1] per axis first. Used for resampling coordinate fields, where
// zero padding would fabricate a cliff toward 0 at the border.
inline double sample_replicate(const double* data, const Dims3& d, double cz, double cy,
                               double cx) {
    const AxisStencil az = axis_stencil(std::clamp(cz, 0.0, d.nz - 1.0));
    const AxisStencil ay = axis_stencil(std::clamp(cy, 0.0, d.ny - 1.0));
    const AxisStencil ax = axis_stencil(std::clamp(cx, 0.0, d.nx - 1.0));
    const int z1 = std::min(az.i0 + 1, d.nz - 1);
    const int y1 = std::min(ay.i0 + 1, d.ny - 1);
    const int x1 = std::min(ax.i0 + 1, d.nx - 1);
    auto at = [&](int z, int y, int x) {
        return data[(static_cast<std::size_t>(z) * d.ny + y) * d.nx + x];
    };
    return az.w0 * (ay.w0 * (ax.w0 * at(az.i0, ay.i0, ax.i0) + ax.w1 * at(az.i0, ay.i0, x1)) +
                    ay.w1 * (ax.w0 * at(az.i0, y1, ax.i0) + ax.w1 * at(az.i0, y1, x1))) +
           az.w1 * (ay.w0 * (ax.w0 * at(z1, ay.i0, ax.i0) + ax.w1 * at(z1, ay.i0, x1)) +
                    ay.w1 * (ax.w0 * at(z1, y1, ax.i0) + ax.w1 * at(z1, y1, x1)));
}

// Adjoint of sample_zero_pad: adds `value` times the trilinear weights onto
// the 8 in-bounds neighbors of the coordinate.
inline void scatter_zero_pad(double* target, const Dims3& d, double cz, double cy, double cx,
                             double value) {
    if (out_of_support(cz, d.nz) || out_of_support(cy, d.ny) || out_of_support(cx, d.nx)) {
        return;
    }
    const AxisStencil az = axis_stencil(cz);
    const AxisStencil ay = axis_stencil(cy);
    const AxisStencil ax = axis_stencil(cx);
    for (int iz = 0; iz < 2; ++iz) {
        const int z = az.i0 + iz;
        if (z < 0 || z >= d.nz) continue;
        const double wz = iz ? az.w1 : az.w0;
        for (int iy = 0; iy < 2; ++iy) {
            const int y = ay.i0 + iy;
            if (y < 0 || y >= d.ny) continue;
            const double wzy = wz * (iy ? ay.w1 : ay.w0);
            const std::size_t row = (static_cast<std::size_t>(z) * d.ny + y) * d.nx;
            for (int ix = 0; ix < 2; ++ix) {
                const int x = ax.i0 + ix;
                if (x < 0 || x >= d.nx) continue;
                target[row + x] += value * wzy * (ix ? ax.w1 : ax.w0);
            }
        }
    }
}

} // namespace voxreg::detail
