#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxreg/objective.hpp"
#include "voxreg/types.hpp"

namespace voxreg {

struct OptimConfig {
    double lr0 = 1e-3;
    double lr_drop_factor = 10.0;
    int patience_drop = 50;  // evaluation rounds without improvement before an lr drop
    int patience_stop = 100; // evaluation rounds without improvement before stopping
    int eval_every = 10;     // iterations per evaluation round
    double alpha = 1e-6;
    double beta = 1e-6;
    int max_iters = 2000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    std::vector<int> pyramid_levels{1}; // downsample factors, coarsest first
    bool enable_affine = true;          // false freezes A at the identity

    void validate() const;
};

struct TraceEntry {
    long long iteration = 0; // cumulative across pyramid levels
    double lr = 0.0;
    double best_total = 0.0; // best loss seen so far at this level
    LossBreakdown loss;
};

struct RegistrationResult {
    AffineParams a;
    PhiLogits theta;
    DeformationGrid grid; // effective composed grid at full resolution
    std::vector<TraceEntry> loss_trace;
    long long iterations_run = 0;
    bool converged = false; // stopped on patience rather than max_iters
};

/// Raised when the loss goes non-finite; carries the trace collected so far.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& message, std::vector<TraceEntry> trace)
        : Error("divergence", message), trace_(std::move(trace)) {}

    const std::vector<TraceEntry>& trace() const { return trace_; }

private:
    std::vector<TraceEntry> trace_;
};

/// Standard Adam with bias correction over a flat parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;

    explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}
};

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grads,
               double lr, double beta1, double beta2, double eps);

/// Registers `moving` onto `reference` by minimizing the registration loss
/// over (theta, A), starting from the identity transform. Returns the
/// best-loss checkpoint, not the last iterate. Deterministic for a given
/// config; raises DivergenceError if the loss goes non-finite.
RegistrationResult register_volumes(const Volume3& reference, const Volume3& moving,
                                    const OptimConfig& cfg);

} // namespace voxreg
