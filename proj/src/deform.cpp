#include "voxreg/deform.hpp"

#include "voxreg/detail/trilinear.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/warp.hpp"

namespace voxreg {

DeformationGrid integrate_gradients(const GradientField& phi) {
    const Dims3 d = phi.dims();
    Field3 g(d);

    // z channel: cumulative sum down each (y, x) column.
    {
        auto src = phi.field().channel(kAxisZ);
        auto dst = g.channel(kAxisZ);
        const std::size_t plane = static_cast<std::size_t>(d.ny) * d.nx;
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t base = static_cast<std::size_t>(y) * d.nx + x;
                double run = 0.0;
                for (int z = 0; z < d.nz; ++z) {
                    run += src[base + z * plane];
                    dst[base + z * plane] = run - 1.0;
                }
            }
        }
    }
    // y channel: per (z, x) line.
    {
        auto src = phi.field().channel(kAxisY);
        auto dst = g.channel(kAxisY);
        for (int z = 0; z < d.nz; ++z) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t base = static_cast<std::size_t>(z) * d.ny * d.nx + x;
                double run = 0.0;
                for (int y = 0; y < d.ny; ++y) {
                    run += src[base + static_cast<std::size_t>(y) * d.nx];
                    dst[base + static_cast<std::size_t>(y) * d.nx] = run - 1.0;
                }
            }
        }
    }
    // x channel: per (z, y) row.
    {
        auto src = phi.field().channel(kAxisX);
        auto dst = g.channel(kAxisX);
        for (int z = 0; z < d.nz; ++z) {
            for (int y = 0; y < d.ny; ++y) {
                const std::size_t base = (static_cast<std::size_t>(z) * d.ny + y) * d.nx;
                double run = 0.0;
                for (int x = 0; x < d.nx; ++x) {
                    run += src[base + x];
                    dst[base + x] = run - 1.0;
                }
            }
        }
    }
    return DeformationGrid::from_field(std::move(g));
}

DeformationGrid affine_grid(const AffineParams& a, Dims3 dims) {
    if (dims.nz < 2 || dims.ny < 2 || dims.nx < 2) {
        throw ValidationError("dims must be at least 2 per axis, got " + to_string(dims));
    }
    Field3 g(dims);
    auto gz = g.channel(kAxisZ);
    auto gy = g.channel(kAxisY);
    auto gx = g.channel(kAxisX);
    const double hz = detail::half_extent(dims.nz);
    const double hy = detail::half_extent(dims.ny);
    const double hx = detail::half_extent(dims.nx);

    std::size_t i = 0;
    for (int z = 0; z < dims.nz; ++z) {
        const double nzc = detail::normalized_coord(z, dims.nz);
        for (int y = 0; y < dims.ny; ++y) {
            const double nyc = detail::normalized_coord(y, dims.ny);
            for (int x = 0; x < dims.nx; ++x, ++i) {
                const double nxc = detail::normalized_coord(x, dims.nx);
                const double tz = a.at(0, 0) * nzc + a.at(0, 1) * nyc + a.at(0, 2) * nxc + a.at(0, 3);
                const double ty = a.at(1, 0) * nzc + a.at(1, 1) * nyc + a.at(1, 2) * nxc + a.at(1, 3);
                const double tx = a.at(2, 0) * nzc + a.at(2, 1) * nyc + a.at(2, 2) * nxc + a.at(2, 3);
                gz[i] = (tz + 1.0) * hz;
                gy[i] = (ty + 1.0) * hy;
                gx[i] = (tx + 1.0) * hx;
            }
        }
    }
    return DeformationGrid::from_field(std::move(g));
}

ComposeResult compose_and_warp(const Volume3& s, const GradientField& phi,
                               const AffineParams& a) {
    if (!(s.dims() == phi.dims())) {
        throw ShapeMismatchError("volume dims " + to_string(s.dims()) +
                                 " do not match gradient field dims " + to_string(phi.dims()));
    }
    const Dims3 d = s.dims();
    const DeformationGrid gn = integrate_gradients(phi);
    const DeformationGrid ga = affine_grid(a, d);

    Volume3 intermediate = warp(s, gn);
    Volume3 warped = warp(intermediate, ga);

    // Effective single-pass coordinates: each G_N channel interpolated at the
    // affine sampling locations. Coordinates are border-replicated, not
    // zero-padded: a coordinate field has no meaningful zero outside the
    // volume, and padding would fold the grid at the boundary.
    Field3 eff(d);
    const double* az = ga.field().channel(kAxisZ).data();
    const double* ay = ga.field().channel(kAxisY).data();
    const double* ax = ga.field().channel(kAxisX).data();
    for (int axis = 0; axis < 3; ++axis) {
        const double* src = gn.field().channel(axis).data();
        auto dst = eff.channel(axis);
        threading::parallel_for(d.voxel_count(), [&](long long begin, long long end) {
            for (long long i = begin; i < end; ++i) {
                dst[static_cast<std::size_t>(i)] =
                    voxreg::detail::sample_replicate(src, d, az[i], ay[i], ax[i]);
            }
        });
    }
    return {std::move(warped), DeformationGrid::from_field(std::move(eff))};
}

} // namespace voxreg
