#include "voxreg/evaluate.hpp"

#include <cmath>
#include <limits>

#include "voxreg/detail/trilinear.hpp"

namespace voxreg {

double dice(const Mask3& a, const Mask3& b) {
    if (!(a.dims() == b.dims())) {
        throw ShapeMismatchError("dice mask dims " + to_string(a.dims()) + " vs " +
                                 to_string(b.dims()));
    }
    const auto da = a.volume().data();
    const auto db = b.volume().data();
    long long na = 0, nb = 0, overlap = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const bool ia = da[i] != 0.0;
        const bool ib = db[i] != 0.0;
        na += ia;
        nb += ib;
        overlap += ia && ib;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(na + nb);
}

LandmarkReport landmark_error(const DeformationGrid& g, const LandmarkSet& ref_pts,
                              const LandmarkSet& mov_pts) {
    ref_pts.require_in_bounds(g.dims());

    LandmarkReport report;
    report.entries.reserve(ref_pts.size());
    double sx = 0.0, sy = 0.0, sz = 0.0, ss = 0.0;
    for (const Landmark& r : ref_pts.points()) {
        const Landmark* m = mov_pts.find(r.label);
        if (m == nullptr) {
            throw ValidationError("landmark label '" + r.label +
                                  "' missing from the moving set");
        }
        LandmarkEntry e;
        e.label = r.label;
        e.pred_z = detail::sample_zero_pad(g.field().channel(kAxisZ).data(), g.dims(),
                                           r.z, r.y, r.x);
        e.pred_y = detail::sample_zero_pad(g.field().channel(kAxisY).data(), g.dims(),
                                           r.z, r.y, r.x);
        e.pred_x = detail::sample_zero_pad(g.field().channel(kAxisX).data(), g.dims(),
                                           r.z, r.y, r.x);
        e.dz = std::abs(e.pred_z - m->z);
        e.dy = std::abs(e.pred_y - m->y);
        e.dx = std::abs(e.pred_x - m->x);
        e.ds = std::sqrt(e.dz * e.dz + e.dy * e.dy + e.dx * e.dx);
        sz += e.dz;
        sy += e.dy;
        sx += e.dx;
        ss += e.ds;
        report.entries.push_back(std::move(e));
    }
    if (!report.entries.empty()) {
        const double n = static_cast<double>(report.entries.size());
        report.mean_dx = sx / n;
        report.mean_dy = sy / n;
        report.mean_dz = sz / n;
        report.mean_ds = ss / n;
    }
    return report;
}

FoldReport fold_check(const DeformationGrid& g) {
    const Dims3 d = g.dims();
    FoldReport report;
    report.min_gap = {std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
    report.max_gap = {-std::numeric_limits<double>::infinity(),
                      -std::numeric_limits<double>::infinity(),
                      -std::numeric_limits<double>::infinity()};

    auto scan = [&](int axis, double gap) {
        report.min_gap[axis] = std::min(report.min_gap[axis], gap);
        report.max_gap[axis] = std::max(report.max_gap[axis], gap);
        if (!(gap > 0.0)) report.violations += 1;
    };

    const Field3& f = g.field();
    for (int z = 0; z + 1 < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                scan(kAxisZ, f.value(kAxisZ, z + 1, y, x) - f.value(kAxisZ, z, y, x));
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y + 1 < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                scan(kAxisY, f.value(kAxisY, z, y + 1, x) - f.value(kAxisY, z, y, x));
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x + 1 < d.nx; ++x)
                scan(kAxisX, f.value(kAxisX, z, y, x + 1) - f.value(kAxisX, z, y, x));
    return report;
}

} // namespace voxreg
