#pragma once

#include <array>
#include <string>
#include <vector>

#include "voxreg/types.hpp"

namespace voxreg {

/// Dice overlap 2|A∩B| / (|A|+|B|). Two empty masks score 1.0 by convention
/// so the measure is total.
double dice(const Mask3& a, const Mask3& b);

struct LandmarkEntry {
    std::string label;
    // Predicted moving-frame location: the grid sampled at the reference point.
    double pred_z = 0.0;
    double pred_y = 0.0;
    double pred_x = 0.0;
    // Absolute per-axis errors against the annotated moving point.
    double dz = 0.0;
    double dy = 0.0;
    double dx = 0.0;
    double ds = 0.0; // Euclidean distance
};

struct LandmarkReport {
    std::vector<LandmarkEntry> entries;
    double mean_dx = 0.0; // mean absolute errors per axis
    double mean_dy = 0.0;
    double mean_dz = 0.0;
    double mean_ds = 0.0; // mean Euclidean distance
};

/// Maps each reference landmark through the backward grid (trilinear sample
/// of G at the reference location gives its source-frame preimage) and
/// compares against the annotated moving point with the same label.
/// Reference points must lie in bounds; every reference label must exist in
/// the moving set.
LandmarkReport landmark_error(const DeformationGrid& g, const LandmarkSet& ref_pts,
                              const LandmarkSet& mov_pts);

struct FoldReport {
    // Consecutive-voxel coordinate gaps along each channel's own axis,
    // indexed (z, y, x).
    std::array<double, 3> min_gap{};
    std::array<double, 3> max_gap{};
    long long violations = 0; // gaps that are not strictly positive
};

/// Scans the grid for self-crossings. Grids from integrate_gradients have
/// every gap in (0,2) and therefore zero violations.
FoldReport fold_check(const DeformationGrid& g);

} // namespace voxreg
