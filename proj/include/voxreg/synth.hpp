#pragma once

#include <cstdint>

#include "voxreg/objective.hpp"
#include "voxreg/types.hpp"

namespace voxreg {

struct Phantom {
    Volume3 volume;
    Mask3 mask;
    LandmarkSet landmarks; // 11 points: 6 ellipsoid extremes + 5 blob centers
};

/// Deterministic smooth phantom: five Gaussian blobs over a soft ellipsoid
/// organ whose 0.5-level set is the mask. Intensities span [0,1] exactly.
/// Requires every extent >= 8.
Phantom make_phantom(Dims3 dims, std::uint64_t seed);

struct GroundTruth {
    GradientField phi;
    AffineParams a;
};

/// In-model ground truth. Phi* = 1 + strength * n with n smoothed zero-mean
/// noise rescaled to a fixed RMS and clipped, so Phi* stays within
/// [1-strength, 1+strength] and attains the bounds at its peaks; A* perturbs
/// the identity by +-0.05*strength (linear block) and +-0.1*strength
/// (translation). strength in [0, 1); 0 yields exact identities.
GroundTruth make_ground_truth(Dims3 dims, double strength, std::uint64_t seed);

struct SynthPair {
    Volume3 reference;       // phantom warped by the ground truth
    Mask3 reference_mask;
    LandmarkSet reference_landmarks; // preimages of the phantom landmarks under the grid
    LandmarkSet moving_landmarks;    // phantom landmark positions (moving frame)
    DeformationGrid effective;       // ground-truth effective grid (the oracle)
};

/// Applies the ground truth to a phantom. The phantom plays the moving
/// volume; annotations in both frames are consistent with the effective grid
/// by construction, so perfect recovery scores zero landmark error.
SynthPair make_pair(const Phantom& phantom, const GroundTruth& gt);

/// Literal evaluation of the warp as a full sum over every source voxel.
/// O(N^2); test oracle only.
Volume3 brute_force_warp(const Volume3& s, const DeformationGrid& g);

} // namespace voxreg
