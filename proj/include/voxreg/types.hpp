#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxreg/error.hpp"

namespace voxreg {

// Axis order is (z, y, x) everywhere: dims triples, coordinate triples,
// channel indices and file layouts. Channel/axis 0 = z, 1 = y, 2 = x.
inline constexpr int kAxisZ = 0;
inline constexpr int kAxisY = 1;
inline constexpr int kAxisX = 2;

struct Dims3 {
    int nz = 0;
    int ny = 0;
    int nx = 0;

    bool operator==(const Dims3&) const = default;

    long long voxel_count() const {
        return static_cast<long long>(nz) * ny * nx;
    }

    int extent(int axis) const {
        return axis == kAxisZ ? nz : (axis == kAxisY ? ny : nx);
    }
};

std::string to_string(const Dims3& d);

// Physical voxel size in mm. Metadata only; all computation is in voxel units.
struct Spacing3 {
    double sz = 1.0;
    double sy = 1.0;
    double sx = 1.0;

    bool operator==(const Spacing3&) const = default;
};

/// Dense 3D scalar field, stored z-major (z slowest, x fastest).
/// All intensities are finite; every extent is at least 2 so trilinear
/// sampling always has two samples per axis.
class Volume3 {
public:
    Volume3() = default;

    // Constant-filled volume. Rejects extents < 2 and non-finite fill.
    Volume3(Dims3 dims, Spacing3 spacing, double fill);

    // Takes ownership of `data` (length nz*ny*nx). Rejects non-finite values.
    static Volume3 from_data(Dims3 dims, Spacing3 spacing, std::vector<double> data);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }

    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }

    // Bounds-checked access; throws on out-of-range indices.
    double at(int z, int y, int x) const;
    double& at(int z, int y, int x);

    // Unchecked access for inner loops.
    double operator()(int z, int y, int x) const { return data_[index(z, y, x)]; }
    double& operator()(int z, int y, int x) { return data_[index(z, y, x)]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

private:
    Dims3 dims_{};
    Spacing3 spacing_{};
    std::vector<double> data_;
};

// Elementwise arithmetic; shapes must match.
Volume3 add(const Volume3& a, const Volume3& b);
Volume3 subtract(const Volume3& a, const Volume3& b);
Volume3 scale(const Volume3& v, double factor);

/// Binary mask stored as a scalar volume restricted to {0, 1}, so masks can
/// pass through the same warp kernel as images.
class Mask3 {
public:
    Mask3() = default;

    static Mask3 from_volume(Volume3 v);
    static Mask3 zeros(Dims3 dims, Spacing3 spacing = {});

    const Volume3& volume() const { return volume_; }
    const Dims3& dims() const { return volume_.dims(); }

    // Number of foreground voxels.
    long long count() const;

private:
    explicit Mask3(Volume3 v) : volume_(std::move(v)) {}
    Volume3 volume_;
};

/// Three per-voxel scalar channels indexed by axis (z, y, x). Shared
/// representation behind gradient fields, deformation grids and logits.
class Field3 {
public:
    Field3() = default;
    explicit Field3(Dims3 dims, double fill = 0.0);

    static Field3 from_channels(Dims3 dims, std::vector<double> z,
                                std::vector<double> y, std::vector<double> x);

    const Dims3& dims() const { return dims_; }

    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }

    double value(int axis, int z, int y, int x) const {
        return ch_[axis][index(z, y, x)];
    }
    double& value(int axis, int z, int y, int x) {
        return ch_[axis][index(z, y, x)];
    }

    std::span<const double> channel(int axis) const { return ch_[axis]; }
    std::span<double> channel(int axis) { return ch_[axis]; }

    bool same_shape(const Field3& other) const { return dims_ == other.dims_; }

private:
    Dims3 dims_{};
    std::array<std::vector<double>, 3> ch_;
};

Field3 add(const Field3& a, const Field3& b);
Field3 subtract(const Field3& a, const Field3& b);
Field3 scale(const Field3& f, double factor);

/// Per-voxel spatial gradients of the deformable component: inter-voxel
/// displacement ratios per axis, strictly inside (0, 2). The identity field
/// is all ones.
class GradientField {
public:
    GradientField() = default;

    static GradientField identity(Dims3 dims);
    // Validates every value lies strictly in (0, 2).
    static GradientField from_field(Field3 f);

    const Field3& field() const { return f_; }
    const Dims3& dims() const { return f_.dims(); }

private:
    explicit GradientField(Field3 f) : f_(std::move(f)) {}
    Field3 f_;
};

/// Per-voxel sampling coordinates in voxel units of the source frame.
/// Coordinates are finite; grids produced by integrate_gradients are
/// additionally strictly increasing along each channel's own axis.
class DeformationGrid {
public:
    DeformationGrid() = default;

    // Validates all coordinates finite. Monotonicity is not required here:
    // hand-built grids and residual fields are legal values of this type.
    static DeformationGrid from_field(Field3 f);

    const Field3& field() const { return f_; }
    const Dims3& dims() const { return f_.dims(); }

private:
    explicit DeformationGrid(Field3 f) : f_(std::move(f)) {}
    Field3 f_;
};

/// Identity grid: G_d(p) = p_d for every voxel and axis.
DeformationGrid identity_grid(Dims3 dims);

/// Displacement field G - G_I. The result is not a sampling grid; it may
/// freely violate monotonicity.
DeformationGrid residual_deformation(const DeformationGrid& g);

/// 3x4 affine matrix acting on augmented normalized coordinates.
/// Rows map to output axes and columns to input axes in (z, y, x, 1) order,
/// matching the global axis convention.
class AffineParams {
public:
    static constexpr int kRows = 3;
    static constexpr int kCols = 4;

    // Constructs the identity [I3 | 0].
    AffineParams();

    static AffineParams identity() { return AffineParams{}; }
    // Row-major 12 coefficients; validates all finite.
    static AffineParams from_array(const std::array<double, 12>& coeffs);

    double at(int row, int col) const { return m_[row * kCols + col]; }
    const std::array<double, 12>& coeffs() const { return m_; }

    bool operator==(const AffineParams&) const = default;

private:
    std::array<double, 12> m_{};
};

struct Landmark {
    std::string label;
    double z = 0.0;
    double y = 0.0;
    double x = 0.0;
};

/// Labelled points in voxel coordinates of a named volume. Labels are unique;
/// bounds are checked against a concrete volume at the point of use.
class LandmarkSet {
public:
    LandmarkSet() = default;

    // Validates finite coordinates and unique labels.
    static LandmarkSet from_points(std::vector<Landmark> points);

    const std::vector<Landmark>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

    const Landmark* find(std::string_view label) const;

    // Throws if any point lies outside [0, extent-1] on some axis.
    void require_in_bounds(Dims3 dims) const;

private:
    explicit LandmarkSet(std::vector<Landmark> points) : points_(std::move(points)) {}
    std::vector<Landmark> points_;
};

} // namespace voxreg
