#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxreg/deform.hpp"
#include "voxreg/evaluate.hpp"
#include "voxreg/io.hpp"
#include "voxreg/objective.hpp"
#include "voxreg/optimizer.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/synth.hpp"
#include "voxreg/warp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace voxreg;

namespace {

// Command-line value problems that are not data errors; mapped to exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit_error(const std::string& code, const std::string& message,
                const json& extra = json::object()) {
    json err = {{"code", code}, {"message", message}};
    for (const auto& [k, v] : extra.items()) err[k] = v;
    std::cout << json{{"error", err}}.dump(2) << "\n";
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

Dims3 parse_dims(const std::string& text) {
    std::vector<int> parts;
    std::string tok;
    std::istringstream in(text);
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError("--dims expects integers, got '" + tok + "'");
        }
    }
    if (parts.size() == 1) return {parts[0], parts[0], parts[0]};
    if (parts.size() == 3) return {parts[0], parts[1], parts[2]};
    throw UsageError("--dims expects N or NZ,NY,NX");
}

json breakdown_json(const LossBreakdown& b) {
    return {{"mse", b.mse},
            {"affine_reg", b.affine_reg},
            {"phi_reg", b.phi_reg},
            {"total", b.total}};
}

json trace_json(const std::vector<TraceEntry>& trace) {
    json arr = json::array();
    for (const TraceEntry& t : trace) {
        json e = breakdown_json(t.loss);
        e["iteration"] = t.iteration;
        e["lr"] = t.lr;
        e["best_total"] = t.best_total;
        arr.push_back(std::move(e));
    }
    return arr;
}

json config_json(const OptimConfig& cfg) {
    return {{"lr0", cfg.lr0},
            {"lr_drop_factor", cfg.lr_drop_factor},
            {"patience_drop", cfg.patience_drop},
            {"patience_stop", cfg.patience_stop},
            {"eval_every", cfg.eval_every},
            {"alpha", cfg.alpha},
            {"beta", cfg.beta},
            {"max_iters", cfg.max_iters},
            {"adam_beta1", cfg.adam_beta1},
            {"adam_beta2", cfg.adam_beta2},
            {"adam_eps", cfg.adam_eps},
            {"seed", cfg.seed},
            {"pyramid_levels", cfg.pyramid_levels},
            {"enable_affine", cfg.enable_affine}};
}

json fold_json(const FoldReport& r) {
    return {{"min_gap", r.min_gap}, {"max_gap", r.max_gap}, {"violations", r.violations}};
}

json landmarks_json(const LandmarkReport& r) {
    json entries = json::array();
    for (const LandmarkEntry& e : r.entries) {
        entries.push_back({{"label", e.label},
                           {"pred", {e.pred_z, e.pred_y, e.pred_x}},
                           {"dz", e.dz},
                           {"dy", e.dy},
                           {"dx", e.dx},
                           {"ds", e.ds}});
    }
    return {{"mean_dx", r.mean_dx},
            {"mean_dy", r.mean_dy},
            {"mean_dz", r.mean_dz},
            {"mean_ds", r.mean_ds},
            {"entries", std::move(entries)}};
}

// Masks follow the image through the same two-pass composition, then
// threshold at 0.5.
Mask3 warp_mask_two_pass(const Mask3& m, const GradientField& phi, const AffineParams& a) {
    Volume3 w = compose_and_warp(m.volume(), phi, a).warped;
    for (double& v : w.data()) v = v >= 0.5 ? 1.0 : 0.0;
    return Mask3::from_volume(std::move(w));
}

struct RegisterArgs {
    std::string reference, moving, out_dir;
    std::string config, mask_moving, mask_reference, landmarks_ref, landmarks_mov;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iters;
    bool no_affine = false;
    bool residual_deformable = false;
};

int cmd_register(const RegisterArgs& args, bool quiet) {
    OptimConfig cfg;
    if (!args.config.empty()) cfg = read_config(args.config);
    if (args.seed) cfg.seed = *args.seed;
    if (args.max_iters) cfg.max_iters = *args.max_iters;
    if (args.no_affine) cfg.enable_affine = false;
    cfg.validate();

    const Volume3 reference = read_volume(args.reference);
    const Volume3 moving = read_volume(args.moving);

    std::optional<Mask3> mask_mov, mask_ref;
    if (!args.mask_moving.empty()) mask_mov = read_mask(args.mask_moving);
    if (!args.mask_reference.empty()) mask_ref = read_mask(args.mask_reference);
    std::optional<LandmarkSet> lm_ref, lm_mov;
    if (!args.landmarks_ref.empty()) lm_ref = read_landmarks(args.landmarks_ref);
    if (!args.landmarks_mov.empty()) lm_mov = read_landmarks(args.landmarks_mov);

    const auto t0 = std::chrono::steady_clock::now();
    RegistrationResult res = register_volumes(reference, moving, cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const GradientField phi = phi_from_logits(res.theta);
    ComposeResult composed = compose_and_warp(moving, phi, res.a);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_volume(out / "warped.f32", composed.warped);
    write_grid(out / "grid", res.grid);
    const DeformationGrid residual = residual_deformation(
        args.residual_deformable ? integrate_gradients(phi) : res.grid);
    write_grid(out / "residual", residual);
    write_affine(out / "affine.json", res.a);
    write_gradient_field(out / "phi", phi);

    json metrics = {{"config", config_json(cfg)},
                    {"seed", cfg.seed},
                    {"iterations_run", res.iterations_run},
                    {"converged", res.converged},
                    {"final_loss", breakdown_json(res.loss_trace.back().loss)},
                    {"best_total", res.loss_trace.back().best_total},
                    {"loss_trace", trace_json(res.loss_trace)},
                    {"fold_check", fold_json(fold_check(res.grid))}};
    if (mask_mov && mask_ref) {
        metrics["dice"] = dice(warp_mask_two_pass(*mask_mov, phi, res.a), *mask_ref);
        metrics["dice_unregistered"] = dice(*mask_mov, *mask_ref);
    }
    if (lm_ref && lm_mov) {
        metrics["landmarks"] = landmarks_json(landmark_error(res.grid, *lm_ref, *lm_mov));
    }
    metrics["wall_seconds"] = wall;
    write_text_atomic(out / "metrics.json", metrics.dump(2) + "\n");

    if (quiet) {
        std::cout << metrics.dump(2) << "\n";
    } else {
        std::cout << "registered " << to_string(reference.dims()) << " pair in "
                  << res.iterations_run << " iterations ("
                  << (res.converged ? "converged" : "max_iters") << ", " << wall << " s)\n"
                  << "final loss " << res.loss_trace.back().loss.total << ", best "
                  << res.loss_trace.back().best_total << "\n";
        if (metrics.contains("dice")) {
            std::cout << "dice " << metrics["dice"].get<double>() << " (unregistered "
                      << metrics["dice_unregistered"].get<double>() << ")\n";
        }
        if (metrics.contains("landmarks")) {
            std::cout << "landmark mean ds "
                      << metrics["landmarks"]["mean_ds"].get<double>() << " voxels\n";
        }
        std::cout << "outputs in " << args.out_dir << "\n";
    }
    return 0;
}

struct SynthArgs {
    std::string dims = "32";
    double strength = 0.2;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& args, bool quiet) {
    const Dims3 dims = parse_dims(args.dims);
    const Phantom phantom = make_phantom(dims, args.seed);
    const GroundTruth gt =
        make_ground_truth(dims, args.strength, args.seed ^ 0x9e3779b97f4a7c15ULL);
    const SynthPair pair = make_pair(phantom, gt);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_volume(out / "moving.f32", phantom.volume);
    write_mask(out / "moving_mask.f32", phantom.mask);
    write_landmarks(out / "landmarks_mov.csv", pair.moving_landmarks);
    write_volume(out / "reference.f32", pair.reference);
    write_mask(out / "reference_mask.f32", pair.reference_mask);
    write_landmarks(out / "landmarks_ref.csv", pair.reference_landmarks);
    write_gradient_field(out / "gt_phi", gt.phi);
    write_affine(out / "gt_affine.json", gt.a);
    write_grid(out / "gt_grid", pair.effective);

    const json doc = {{"dims", {dims.nz, dims.ny, dims.nx}},
                      {"strength", args.strength},
                      {"seed", args.seed},
                      {"out_dir", args.out_dir}};
    if (quiet) {
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "synthesized " << to_string(dims) << " pair (strength "
                  << args.strength << ", seed " << args.seed << ") in " << args.out_dir
                  << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string grid;
    std::string mask_ref, mask_mov, landmarks_ref, landmarks_mov;
};

int cmd_eval(const EvalArgs& args, bool quiet) {
    const DeformationGrid grid = read_grid(args.grid);
    json doc = {{"fold_check", fold_json(fold_check(grid))}};
    if (!args.mask_ref.empty()) {
        const Mask3 ref = read_mask(args.mask_ref);
        const Mask3 mov = read_mask(args.mask_mov);
        doc["dice"] = dice(warp_mask(mov, grid), ref);
        doc["dice_unregistered"] = dice(mov, ref);
    }
    if (!args.landmarks_ref.empty()) {
        doc["landmarks"] = landmarks_json(landmark_error(
            grid, read_landmarks(args.landmarks_ref), read_landmarks(args.landmarks_mov)));
    }
    if (!quiet) {
        std::cout << "grid " << to_string(grid.dims()) << ", violations "
                  << doc["fold_check"]["violations"].get<long long>() << "\n";
    }
    std::cout << doc.dump(2) << "\n";
    return 0;
}

struct WarpArgs {
    std::string input, grid, output;
};

int cmd_warp(const WarpArgs& args, bool quiet) {
    const Volume3 input = read_volume(args.input);
    const DeformationGrid grid = read_grid(args.grid);
    write_volume(args.output, warp(input, grid));
    if (quiet) {
        std::cout << json{{"output", args.output}}.dump(2) << "\n";
    } else {
        std::cout << "warped " << args.input << " -> " << args.output << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D volume registration: coupled affine and deformable transform "
                 "optimized directly against the reference"};
    app.require_subcommand(1);
    app.fallthrough();

    int threads = 0;
    bool quiet = false;
    app.add_option("--threads", threads, "worker threads for voxel loops (0 = all cores)");
    app.add_flag("--quiet", quiet, "machine-readable JSON only on stdout");

    RegisterArgs reg;
    CLI::App* reg_cmd = app.add_subcommand("register", "register a moving volume onto a reference");
    reg_cmd->add_option("--reference", reg.reference, "reference volume")->required();
    reg_cmd->add_option("--moving", reg.moving, "moving volume")->required();
    reg_cmd->add_option("--out-dir", reg.out_dir, "output directory")->required();
    reg_cmd->add_option("--config", reg.config, "optimizer config JSON");
    reg_cmd->add_option("--mask-moving", reg.mask_moving, "moving-frame mask");
    reg_cmd->add_option("--mask-reference", reg.mask_reference, "reference-frame mask");
    reg_cmd->add_option("--landmarks-ref", reg.landmarks_ref, "reference-frame landmarks CSV");
    reg_cmd->add_option("--landmarks-mov", reg.landmarks_mov, "moving-frame landmarks CSV");
    reg_cmd->add_option("--seed", reg.seed, "override config seed");
    reg_cmd->add_option("--max-iters", reg.max_iters, "override config max_iters");
    reg_cmd->add_flag("--no-affine", reg.no_affine, "freeze the affine part at identity");
    reg_cmd->add_flag("--residual-deformable", reg.residual_deformable,
                      "export the residual of the deformable grid alone, not the composed grid");

    SynthArgs syn;
    CLI::App* syn_cmd = app.add_subcommand("synth", "generate a synthetic pair with ground truth");
    syn_cmd->add_option("--dims", syn.dims, "N or NZ,NY,NX");
    syn_cmd->add_option("--strength", syn.strength, "deformation strength in [0,1)");
    syn_cmd->add_option("--seed", syn.seed, "generator seed");
    syn_cmd->add_option("--out-dir", syn.out_dir, "output directory")->required();

    EvalArgs ev;
    CLI::App* ev_cmd = app.add_subcommand("eval", "score a stored grid against masks/landmarks");
    ev_cmd->add_option("--grid", ev.grid, "grid file prefix")->required();
    auto* ev_mr = ev_cmd->add_option("--mask-ref", ev.mask_ref, "reference mask");
    auto* ev_mm = ev_cmd->add_option("--mask-mov", ev.mask_mov, "moving mask");
    ev_mr->needs(ev_mm);
    ev_mm->needs(ev_mr);
    auto* ev_lr = ev_cmd->add_option("--landmarks-ref", ev.landmarks_ref, "reference landmarks");
    auto* ev_lm = ev_cmd->add_option("--landmarks-mov", ev.landmarks_mov, "moving landmarks");
    ev_lr->needs(ev_lm);
    ev_lm->needs(ev_lr);

    WarpArgs wp;
    CLI::App* wp_cmd = app.add_subcommand("warp", "apply a stored grid to a volume");
    wp_cmd->add_option("--input", wp.input, "input volume")->required();
    wp_cmd->add_option("--grid", wp.grid, "grid file prefix")->required();
    wp_cmd->add_option("--output", wp.output, "output volume path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        emit_error("usage", e.what());
        return 2;
    }

    threading::set_num_threads(threads);

    try {
        if (reg_cmd->parsed()) return cmd_register(reg, quiet);
        if (syn_cmd->parsed()) return cmd_synth(syn, quiet);
        if (ev_cmd->parsed()) return cmd_eval(ev, quiet);
        return cmd_warp(wp, quiet);
    } catch (const UsageError& e) {
        emit_error("usage", e.what());
        return 2;
    } catch (const DivergenceError& e) {
        emit_error(e.code(), e.what(), json{{"loss_trace", trace_json(e.trace())}});
        return 4;
    } catch (const Error& e) {
        emit_error(e.code(), e.what());
        return 3;
    } catch (const std::exception& e) {
        emit_error("internal_error", e.what());
        return 3;
    }
}
