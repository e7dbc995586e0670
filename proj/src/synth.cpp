#include "voxreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "voxreg/deform.hpp"
#include "voxreg/detail/trilinear.hpp"
#include "voxreg/warp.hpp"

namespace voxreg {

namespace {

// Engine output mapped to [0,1) via the top 53 bits; mt19937_64 is fully
// specified by the standard, so generated artifacts are platform-stable.
double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * unit(rng);
}

// In-bounds box average along one axis, window radius r, run twice by the
// caller. Border windows shrink rather than pad.
void box_blur_axis(std::vector<double>& v, Dims3 d, int axis, int r) {
    const int nz = d.nz, ny = d.ny, nx = d.nx;
    std::vector<double> line;
    std::vector<double> out;
    auto blur_line = [&](auto&& get, auto&& set, int n) {
        line.resize(n);
        out.resize(n);
        for (int i = 0; i < n; ++i) line[i] = get(i);
        for (int i = 0; i < n; ++i) {
            const int lo = std::max(0, i - r);
            const int hi = std::min(n - 1, i + r);
            double acc = 0.0;
            for (int j = lo; j <= hi; ++j) acc += line[j];
            out[i] = acc / (hi - lo + 1);
        }
        for (int i = 0; i < n; ++i) set(i, out[i]);
    };
    auto at = [&](int z, int y, int x) -> double& {
        return v[(static_cast<std::size_t>(z) * ny + y) * nx + x];
    };
    if (axis == kAxisZ) {
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                blur_line([&](int i) { return at(i, y, x); },
                          [&](int i, double s) { at(i, y, x) = s; }, nz);
    } else if (axis == kAxisY) {
        for (int z = 0; z < nz; ++z)
            for (int x = 0; x < nx; ++x)
                blur_line([&](int i) { return at(z, i, x); },
                          [&](int i, double s) { at(z, i, x) = s; }, ny);
    } else {
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                blur_line([&](int i) { return at(z, y, i); },
                          [&](int i, double s) { at(z, y, i) = s; }, nx);
    }
}

} // namespace

Phantom make_phantom(Dims3 dims, std::uint64_t seed) {
    if (dims.nz < 8 || dims.ny < 8 || dims.nx < 8) {
        throw ValidationError("phantom dims must be at least 8 per axis, got " +
                              to_string(dims));
    }
    std::mt19937_64 rng(seed);

    const double hz = dims.nz - 1.0, hy = dims.ny - 1.0, hx = dims.nx - 1.0;

    // Soft ellipsoid organ centered in the volume; semi-axes stay below 0.32
    // of each extent so the mask never touches a boundary face.
    const double rz = uniform(rng, 0.22, 0.32);
    const double ry = uniform(rng, 0.22, 0.32);
    const double rx = uniform(rng, 0.22, 0.32);

    // Direction-dependent edge sharpness. The profile stays 0.5 at rho = 1 for
    // every direction, so the mask level set is unaffected, but intensity then
    // varies along the shell and the boundary is texturally anisotropic.
    std::array<double, 8> kc;
    for (double& c : kc) c = uniform(rng, -1.0, 1.0);
    auto edge_k = [&](double ez, double ey, double ex, double rho) {
        const double r = std::max(rho, 1e-9);
        const double uz = ez / r, uy = ey / r, ux = ex / r;
        const double m = 0.55 * (kc[0] * uz + kc[1] * uy + kc[2] * ux) +
                         0.55 * (kc[3] * uz * uy + kc[4] * uz * ux + kc[5] * uy * ux) +
                         0.35 * (kc[6] * (uz * uz - uy * uy) + kc[7] * (uy * uy - ux * ux));
        return std::clamp(10.0 * (1.0 + m), 4.0, 18.0);
    };

    constexpr int kBlobs = 5;
    struct Blob {
        double cz, cy, cx, sigma, amp;
    };
    std::array<Blob, kBlobs> blobs;
    for (Blob& b : blobs) {
        b.cz = uniform(rng, 0.2, 0.8);
        b.cy = uniform(rng, 0.2, 0.8);
        b.cx = uniform(rng, 0.2, 0.8);
        b.sigma = uniform(rng, 0.06, 0.10);
        b.amp = uniform(rng, 0.5, 0.9);
    }

    const std::size_t n = static_cast<std::size_t>(dims.voxel_count());
    std::vector<double> data(n);
    std::vector<double> maskdata(n);
    std::size_t i = 0;
    for (int z = 0; z < dims.nz; ++z) {
        const double uz = z / hz;
        for (int y = 0; y < dims.ny; ++y) {
            const double uy = y / hy;
            for (int x = 0; x < dims.nx; ++x, ++i) {
                const double ux = x / hx;
                const double ez = (uz - 0.5) / rz;
                const double ey = (uy - 0.5) / ry;
                const double ex = (ux - 0.5) / rx;
                const double rho = std::sqrt(ez * ez + ey * ey + ex * ex);
                double v = 0.6 / (1.0 + std::exp(edge_k(ez, ey, ex, rho) * (rho - 1.0)));
                for (const Blob& b : blobs) {
                    const double dz = (uz - b.cz) / b.sigma;
                    const double dy = (uy - b.cy) / b.sigma;
                    const double dx = (ux - b.cx) / b.sigma;
                    v += b.amp * std::exp(-0.5 * (dz * dz + dy * dy + dx * dx));
                }
                data[i] = v;
                maskdata[i] = rho <= 1.0 ? 1.0 : 0.0;
            }
        }
    }

    const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
    const double lo = *lo_it, hi = *hi_it;
    for (double& v : data) v = (v - lo) / (hi - lo);

    std::vector<Landmark> pts;
    pts.reserve(11);
    const double cz = 0.5 * hz, cy = 0.5 * hy, cx = 0.5 * hx;
    pts.push_back({"ell_z_min", cz - rz * hz, cy, cx});
    pts.push_back({"ell_z_max", cz + rz * hz, cy, cx});
    pts.push_back({"ell_y_min", cz, cy - ry * hy, cx});
    pts.push_back({"ell_y_max", cz, cy + ry * hy, cx});
    pts.push_back({"ell_x_min", cz, cy, cx - rx * hx});
    pts.push_back({"ell_x_max", cz, cy, cx + rx * hx});
    for (int b = 0; b < kBlobs; ++b) {
        pts.push_back({"blob_" + std::to_string(b), blobs[b].cz * hz, blobs[b].cy * hy,
                       blobs[b].cx * hx});
    }

    Phantom p;
    p.volume = Volume3::from_data(dims, {}, std::move(data));
    p.mask = Mask3::from_volume(Volume3::from_data(dims, {}, std::move(maskdata)));
    p.landmarks = LandmarkSet::from_points(std::move(pts));
    return p;
}

GroundTruth make_ground_truth(Dims3 dims, double strength, std::uint64_t seed) {
    if (!(strength >= 0.0) || !(strength < 1.0)) {
        throw ValidationError("ground-truth strength must lie in [0, 1)");
    }
    std::mt19937_64 rng(seed);

    const std::size_t n = static_cast<std::size_t>(dims.voxel_count());
    const int radius =
        static_cast<int>(std::ceil(std::min({dims.nz, dims.ny, dims.nx}) / 8.0));

    // Base noise lives on a coarse lattice (one node per ~8 voxels) so that
    // after blurring it stays spatially coherent; per-voxel iid noise would
    // mostly cancel when integrated along grid lines, leaving deformations
    // far weaker than `strength` suggests.
    const Dims3 lattice{std::max(2, dims.nz / 8 + 1), std::max(2, dims.ny / 8 + 1),
                        std::max(2, dims.nx / 8 + 1)};
    const std::size_t ln = static_cast<std::size_t>(lattice.voxel_count());

    Field3 phi(dims);
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> nodes(ln);
        for (double& v : nodes) v = uniform(rng, -1.0, 1.0);
        std::vector<double> noise(n);
        {
            const double rz = static_cast<double>(lattice.nz - 1) / (dims.nz - 1);
            const double ry = static_cast<double>(lattice.ny - 1) / (dims.ny - 1);
            const double rx = static_cast<double>(lattice.nx - 1) / (dims.nx - 1);
            std::size_t i = 0;
            for (int z = 0; z < dims.nz; ++z)
                for (int y = 0; y < dims.ny; ++y)
                    for (int x = 0; x < dims.nx; ++x, ++i)
                        noise[i] = detail::sample_zero_pad(nodes.data(), lattice, z * rz,
                                                           y * ry, x * rx);
        }
        for (int pass = 0; pass < 2; ++pass)
            for (int blur_axis_idx = 0; blur_axis_idx < 3; ++blur_axis_idx)
                box_blur_axis(noise, dims, blur_axis_idx, radius);
        double mean = 0.0;
        for (double v : noise) mean += v;
        mean /= static_cast<double>(n);
        double sq = 0.0;
        for (double& v : noise) {
            v -= mean;
            sq += v * v;
        }
        const double rms = std::sqrt(sq / static_cast<double>(n));
        // Rescale to a fixed RMS; the peaks then really do clip, so the stated
        // [1-strength, 1+strength] range is attained rather than approached.
        const double scale = rms > 0.0 ? 0.36 / rms : 0.0;
        auto ch = phi.channel(axis);
        for (std::size_t i = 0; i < n; ++i) {
            ch[i] = std::clamp(1.0 + strength * scale * noise[i], 1.0 - strength,
                               1.0 + strength);
        }
    }

    std::array<double, 12> coeffs = AffineParams::identity().coeffs();
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 4; ++col) {
            const double scale = col == 3 ? 0.1 : 0.05;
            coeffs[row * 4 + col] += uniform(rng, -scale * strength, scale * strength);
        }
    }

    return {GradientField::from_field(std::move(phi)), AffineParams::from_array(coeffs)};
}

SynthPair make_pair(const Phantom& phantom, const GroundTruth& gt) {
    ComposeResult composed = compose_and_warp(phantom.volume, gt.phi, gt.a);

    // The mask rides through the same two-pass warp as the image, then
    // thresholds at 0.5.
    ComposeResult mask_composed = compose_and_warp(phantom.mask.volume(), gt.phi, gt.a);
    auto md = mask_composed.warped.data();
    std::vector<double> bin(md.begin(), md.end());
    for (double& v : bin) v = v >= 0.5 ? 1.0 : 0.0;

    // Landmarks live on phantom features, which sit in the moving frame. The
    // reference-frame annotation is the preimage under the effective grid,
    // found by fixed-point iteration: p <- p + (c - G(p)). Displacement
    // Jacobians have eigenvalues in (0,2), so the iteration contracts.
    const Dims3 d = phantom.volume.dims();
    const auto gz = composed.effective.field().channel(kAxisZ).data();
    const auto gy = composed.effective.field().channel(kAxisY).data();
    const auto gx = composed.effective.field().channel(kAxisX).data();
    std::vector<Landmark> ref;
    ref.reserve(phantom.landmarks.size());
    for (const Landmark& c : phantom.landmarks.points()) {
        Landmark p = c;
        for (int it = 0; it < 64; ++it) {
            const double mz = detail::sample_replicate(gz, d, p.z, p.y, p.x);
            const double my = detail::sample_replicate(gy, d, p.z, p.y, p.x);
            const double mx = detail::sample_replicate(gx, d, p.z, p.y, p.x);
            p.z += c.z - mz;
            p.y += c.y - my;
            p.x += c.x - mx;
            if (std::abs(c.z - mz) + std::abs(c.y - my) + std::abs(c.x - mx) < 1e-12) break;
        }
        ref.push_back(std::move(p));
    }

    SynthPair pair;
    pair.reference = std::move(composed.warped);
    pair.reference_mask = Mask3::from_volume(
        Volume3::from_data(d, phantom.volume.spacing(), std::move(bin)));
    pair.reference_landmarks = LandmarkSet::from_points(std::move(ref));
    pair.moving_landmarks = phantom.landmarks;
    pair.effective = std::move(composed.effective);
    return pair;
}

Volume3 brute_force_warp(const Volume3& s, const DeformationGrid& g) {
    if (!(s.dims() == g.dims())) {
        throw ShapeMismatchError("brute_force_warp dims " + to_string(s.dims()) + " vs " +
                                 to_string(g.dims()));
    }
    const Dims3 d = s.dims();
    auto kernel = [](double t) { return std::max(0.0, 1.0 - std::abs(t)); };
    Volume3 out(d, s.spacing(), 0.0);
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const double gz = g.field().value(kAxisZ, z, y, x);
                const double gy = g.field().value(kAxisY, z, y, x);
                const double gx = g.field().value(kAxisX, z, y, x);
                double acc = 0.0;
                for (int qz = 0; qz < d.nz; ++qz)
                    for (int qy = 0; qy < d.ny; ++qy)
                        for (int qx = 0; qx < d.nx; ++qx)
                            acc += s(qz, qy, qx) * kernel(gz - qz) * kernel(gy - qy) *
                                   kernel(gx - qx);
                out(z, y, x) = acc;
            }
        }
    }
    return out;
}

} // namespace voxreg
