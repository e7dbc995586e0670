#include "voxreg/warp.hpp"

#include "voxreg/detail/trilinear.hpp"
#include "voxreg/parallel.hpp"

namespace voxreg {

namespace {

void check_shapes(const Dims3& s, const Dims3& g) {
    if (!(s == g)) {
        throw ShapeMismatchError("volume dims " + to_string(s) + " do not match grid dims " +
                                 to_string(g));
    }
}

} // namespace

Volume3 warp(const Volume3& s, const DeformationGrid& g) {
    check_shapes(s.dims(), g.dims());
    const Dims3 d = s.dims();
    const double* src = s.data().data();
    const double* gz = g.field().channel(kAxisZ).data();
    const double* gy = g.field().channel(kAxisY).data();
    const double* gx = g.field().channel(kAxisX).data();

    std::vector<double> out(static_cast<std::size_t>(d.voxel_count()));
    threading::parallel_for(d.voxel_count(), [&](long long begin, long long end) {
        for (long long i = begin; i < end; ++i) {
            out[static_cast<std::size_t>(i)] =
                detail::sample_zero_pad(src, d, gz[i], gy[i], gx[i]);
        }
    });
    return Volume3::from_data(d, s.spacing(), std::move(out));
}

WarpWithGrad warp_with_grad(const Volume3& s, const DeformationGrid& g) {
    check_shapes(s.dims(), g.dims());
    const Dims3 d = s.dims();
    const double* src = s.data().data();
    const double* gz = g.field().channel(kAxisZ).data();
    const double* gy = g.field().channel(kAxisY).data();
    const double* gx = g.field().channel(kAxisX).data();

    std::vector<double> out(static_cast<std::size_t>(d.voxel_count()));
    Field3 grad(d);
    auto dz = grad.channel(kAxisZ);
    auto dy = grad.channel(kAxisY);
    auto dx = grad.channel(kAxisX);
    threading::parallel_for(d.voxel_count(), [&](long long begin, long long end) {
        for (long long i = begin; i < end; ++i) {
            const auto sg = detail::sample_grad_zero_pad(src, d, gz[i], gy[i], gx[i]);
            const auto k = static_cast<std::size_t>(i);
            out[k] = sg.value;
            dz[k] = sg.dz;
            dy[k] = sg.dy;
            dx[k] = sg.dx;
        }
    });
    return {Volume3::from_data(d, s.spacing(), std::move(out)), std::move(grad)};
}

Mask3 warp_mask(const Mask3& m, const DeformationGrid& g) {
    Volume3 w = warp(m.volume(), g);
    for (double& v : w.data()) {
        v = (v >= 0.5) ? 1.0 : 0.0;
    }
    return Mask3::from_volume(std::move(w));
}

double sample_trilinear(const Volume3& v, double cz, double cy, double cx) {
    return detail::sample_zero_pad(v.data().data(), v.dims(), cz, cy, cx);
}

} // namespace voxreg
