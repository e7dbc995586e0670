#pragma once

#include <filesystem>

#include "voxreg/optimizer.hpp"
#include "voxreg/types.hpp"

namespace voxreg {

/// Volume format: raw little-endian IEEE f32 payload in z-major order plus a
/// JSON sidecar at <path>.json holding {"dims", "spacing", "dtype": "f32le"}.
/// Writes are atomic (temp file + rename). Round-trips are bit-exact for
/// f32-representable intensities.
Volume3 read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume3& v);

Mask3 read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask3& m);

/// Three-channel fields are stored as one volume file per channel:
/// <prefix>.z.f32, <prefix>.y.f32, <prefix>.x.f32 (each with its sidecar).
Field3 read_field(const std::filesystem::path& prefix);
void write_field(const std::filesystem::path& prefix, const Field3& f);

DeformationGrid read_grid(const std::filesystem::path& prefix);
void write_grid(const std::filesystem::path& prefix, const DeformationGrid& g);

GradientField read_gradient_field(const std::filesystem::path& prefix);
void write_gradient_field(const std::filesystem::path& prefix, const GradientField& phi);

/// Landmark format: CSV `label,z,y,x` with that exact header, coordinates in
/// voxel units, shortest round-trip decimal (locale-free).
LandmarkSet read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const LandmarkSet& pts);

/// Affine format: JSON {"coeffs": [12 row-major values]}.
AffineParams read_affine(const std::filesystem::path& path);
void write_affine(const std::filesystem::path& path, const AffineParams& a);

/// Config format: JSON object mirroring OptimConfig fields verbatim
/// (snake_case keys). Absent keys keep defaults; unknown keys are rejected.
OptimConfig read_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const OptimConfig& cfg);

/// Clamps to [window_lo, window_hi], maps affinely to [0,1], then resamples
/// every axis by scale_factor with the trilinear kernel (endpoint-aligned).
/// scale_factor 1.0 leaves dims untouched.
Volume3 preprocess(const Volume3& v, double window_lo, double window_hi,
                   double scale_factor);

} // namespace voxreg
