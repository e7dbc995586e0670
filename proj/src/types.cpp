#include "voxreg/types.hpp"

#include <cmath>
#include <unordered_set>

namespace voxreg {

namespace {

void check_dims(const Dims3& d) {
    if (d.nz < 2 || d.ny < 2 || d.nx < 2) {
        throw ValidationError("dims must be at least 2 per axis, got " + to_string(d));
    }
}

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string(what) + " contains a non-finite value");
        }
    }
}

void check_same_shape(const Dims3& a, const Dims3& b, const char* what) {
    if (!(a == b)) {
        throw ShapeMismatchError(std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
    }
}

} // namespace

std::string to_string(const Dims3& d) {
    return "(" + std::to_string(d.nz) + "," + std::to_string(d.ny) + "," +
           std::to_string(d.nx) + ")";
}

Volume3::Volume3(Dims3 dims, Spacing3 spacing, double fill)
    : dims_(dims), spacing_(spacing) {
    check_dims(dims);
    if (!std::isfinite(fill)) {
        throw ValidationError("fill value must be finite");
    }
    data_.assign(static_cast<std::size_t>(dims.voxel_count()), fill);
}

Volume3 Volume3::from_data(Dims3 dims, Spacing3 spacing, std::vector<double> data) {
    check_dims(dims);
    if (static_cast<long long>(data.size()) != dims.voxel_count()) {
        throw ValidationError("data length " + std::to_string(data.size()) +
                              " does not match dims " + to_string(dims));
    }
    check_finite(data, "volume data");
    Volume3 v;
    v.dims_ = dims;
    v.spacing_ = spacing;
    v.data_ = std::move(data);
    return v;
}

double Volume3::at(int z, int y, int x) const {
    if (z < 0 || z >= dims_.nz || y < 0 || y >= dims_.ny || x < 0 || x >= dims_.nx) {
        throw std::out_of_range("voxel index out of range");
    }
    return data_[index(z, y, x)];
}

double& Volume3::at(int z, int y, int x) {
    if (z < 0 || z >= dims_.nz || y < 0 || y >= dims_.ny || x < 0 || x >= dims_.nx) {
        throw std::out_of_range("voxel index out of range");
    }
    return data_[index(z, y, x)];
}

Volume3 add(const Volume3& a, const Volume3& b) {
    check_same_shape(a.dims(), b.dims(), "add");
    std::vector<double> out(a.data().begin(), a.data().end());
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    return Volume3::from_data(a.dims(), a.spacing(), std::move(out));
}

Volume3 subtract(const Volume3& a, const Volume3& b) {
    check_same_shape(a.dims(), b.dims(), "subtract");
    std::vector<double> out(a.data().begin(), a.data().end());
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
    return Volume3::from_data(a.dims(), a.spacing(), std::move(out));
}

Volume3 scale(const Volume3& v, double factor) {
    std::vector<double> out(v.data().begin(), v.data().end());
    for (double& x : out) x *= factor;
    return Volume3::from_data(v.dims(), v.spacing(), std::move(out));
}

Mask3 Mask3::from_volume(Volume3 v) {
    for (double x : v.data()) {
        if (x != 0.0 && x != 1.0) {
            throw ValidationError("mask values must be exactly 0 or 1");
        }
    }
    return Mask3(std::move(v));
}

Mask3 Mask3::zeros(Dims3 dims, Spacing3 spacing) {
    return Mask3(Volume3(dims, spacing, 0.0));
}

long long Mask3::count() const {
    long long n = 0;
    for (double x : volume_.data()) n += (x == 1.0) ? 1 : 0;
    return n;
}

Field3::Field3(Dims3 dims, double fill) : dims_(dims) {
    check_dims(dims);
    const auto n = static_cast<std::size_t>(dims.voxel_count());
    for (auto& c : ch_) c.assign(n, fill);
}

Field3 Field3::from_channels(Dims3 dims, std::vector<double> z, std::vector<double> y,
                             std::vector<double> x) {
    check_dims(dims);
    const auto n = static_cast<std::size_t>(dims.voxel_count());
    if (z.size() != n || y.size() != n || x.size() != n) {
        throw ValidationError("channel length does not match dims " + to_string(dims));
    }
    Field3 f;
    f.dims_ = dims;
    f.ch_[kAxisZ] = std::move(z);
    f.ch_[kAxisY] = std::move(y);
    f.ch_[kAxisX] = std::move(x);
    return f;
}

namespace {

Field3 combine(const Field3& a, const Field3& b, double sign) {
    if (!a.same_shape(b)) {
        throw ShapeMismatchError("field shapes differ: " + to_string(a.dims()) + " vs " +
                                 to_string(b.dims()));
    }
    Field3 out(a.dims());
    for (int axis = 0; axis < 3; ++axis) {
        auto ac = a.channel(axis);
        auto bc = b.channel(axis);
        auto oc = out.channel(axis);
        for (std::size_t i = 0; i < oc.size(); ++i) oc[i] = ac[i] + sign * bc[i];
    }
    return out;
}

} // namespace

Field3 add(const Field3& a, const Field3& b) { return combine(a, b, 1.0); }
Field3 subtract(const Field3& a, const Field3& b) { return combine(a, b, -1.0); }

Field3 scale(const Field3& f, double factor) {
    Field3 out(f.dims());
    for (int axis = 0; axis < 3; ++axis) {
        auto fc = f.channel(axis);
        auto oc = out.channel(axis);
        for (std::size_t i = 0; i < oc.size(); ++i) oc[i] = factor * fc[i];
    }
    return out;
}

GradientField GradientField::identity(Dims3 dims) {
    return GradientField(Field3(dims, 1.0));
}

GradientField GradientField::from_field(Field3 f) {
    for (int axis = 0; axis < 3; ++axis) {
        for (double v : f.channel(axis)) {
            if (!(v > 0.0 && v < 2.0)) {
                throw ValidationError("gradient field values must lie strictly in (0, 2)");
            }
        }
    }
    return GradientField(std::move(f));
}

DeformationGrid DeformationGrid::from_field(Field3 f) {
    for (int axis = 0; axis < 3; ++axis) {
        check_finite(f.channel(axis), "deformation grid");
    }
    return DeformationGrid(std::move(f));
}

DeformationGrid identity_grid(Dims3 dims) {
    Field3 f(dims);
    for (int z = 0; z < dims.nz; ++z) {
        for (int y = 0; y < dims.ny; ++y) {
            for (int x = 0; x < dims.nx; ++x) {
                f.value(kAxisZ, z, y, x) = z;
                f.value(kAxisY, z, y, x) = y;
                f.value(kAxisX, z, y, x) = x;
            }
        }
    }
    return DeformationGrid::from_field(std::move(f));
}

DeformationGrid residual_deformation(const DeformationGrid& g) {
    return DeformationGrid::from_field(
        subtract(g.field(), identity_grid(g.dims()).field()));
}

AffineParams::AffineParams() {
    m_.fill(0.0);
    m_[0 * kCols + 0] = 1.0;
    m_[1 * kCols + 1] = 1.0;
    m_[2 * kCols + 2] = 1.0;
}

AffineParams AffineParams::from_array(const std::array<double, 12>& coeffs) {
    for (double v : coeffs) {
        if (!std::isfinite(v)) {
            throw ValidationError("affine coefficients must be finite");
        }
    }
    AffineParams a;
    a.m_ = coeffs;
    return a;
}

LandmarkSet LandmarkSet::from_points(std::vector<Landmark> points) {
    std::unordered_set<std::string> labels;
    for (const auto& p : points) {
        if (!std::isfinite(p.z) || !std::isfinite(p.y) || !std::isfinite(p.x)) {
            throw ValidationError("landmark '" + p.label + "' has non-finite coordinates");
        }
        if (!labels.insert(p.label).second) {
            throw ValidationError("duplicate landmark label '" + p.label + "'");
        }
    }
    return LandmarkSet(std::move(points));
}

const Landmark* LandmarkSet::find(std::string_view label) const {
    for (const auto& p : points_) {
        if (p.label == label) return &p;
    }
    return nullptr;
}

void LandmarkSet::require_in_bounds(Dims3 dims) const {
    for (const auto& p : points_) {
        if (p.z < 0.0 || p.z > dims.nz - 1 || p.y < 0.0 || p.y > dims.ny - 1 ||
            p.x < 0.0 || p.x > dims.nx - 1) {
            throw ValidationError("landmark '" + p.label + "' lies outside volume bounds " +
                                  to_string(dims));
        }
    }
}

} // namespace voxreg
