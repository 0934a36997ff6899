// bs: command line front end for the bilateral solver.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bsolve/apps.hpp"
#include "bsolve/io.hpp"

namespace {

using namespace bsolve;

struct CommonFlags {
    std::optional<double> sigma_xy, sigma_l, sigma_uv, lambda;
    std::optional<int> iters;
    std::string precond = "pyr";
    std::string init = "pyr";
    std::optional<std::string> dt_post;
    bool no_dt_post = false;
    std::string report;
    int png_bits = 8;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_dt = true)
{
    cmd->add_option("--sigma-xy", f.sigma_xy, "spatial grid cell size in pixels");
    cmd->add_option("--sigma-l", f.sigma_l, "luma grid cell size");
    cmd->add_option("--sigma-uv", f.sigma_uv, "chroma grid cell size");
    cmd->add_option("--lambda", f.lambda, "smoothness weight");
    cmd->add_option("--iters", f.iters, "PCG iterations")->check(CLI::PositiveNumber);
    cmd->add_option("--precond", f.precond, "preconditioner")
        ->check(CLI::IsMember({"jacobi", "pyr", "none"}))
        ->capture_default_str();
    cmd->add_option("--init", f.init, "initialization")->check(CLI::IsMember({"flat", "pyr"}))->capture_default_str();
    if (with_dt) {
        cmd->add_option("--dt-post", f.dt_post, "domain transform post-filter as SXY:SRGB");
        cmd->add_flag("--no-dt-post", f.no_dt_post, "disable the domain transform post-filter");
    }
    cmd->add_option("--report", f.report, "CSV report path (iteration,config,image,loss,wall_ms)");
    cmd->add_option("--png-bits", f.png_bits, "bit depth for PNG outputs")
        ->check(CLI::IsMember({8, 16}))
        ->capture_default_str();
}

GridParams grid_from(const CommonFlags& f, GridParams g)
{
    if (f.sigma_xy) g.sigma_xy = *f.sigma_xy;
    if (f.sigma_l) g.sigma_l = *f.sigma_l;
    if (f.sigma_uv) g.sigma_uv = *f.sigma_uv;
    g.validate();
    return g;
}

SolverConfig solver_from(const CommonFlags& f, SolverConfig c)
{
    if (f.iters) c.n_iters = *f.iters;
    c.preconditioner = f.precond == "jacobi" ? Preconditioner::jacobi
                       : f.precond == "none" ? Preconditioner::none
                                             : Preconditioner::hierarchical;
    c.init = f.init == "flat" ? Initialization::flat : Initialization::hierarchical;
    c.validate();
    return c;
}

DTParams parse_dt(const std::string& s)
{
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ParameterError("--dt-post expects SXY:SRGB, got '" + s + "'");
    try {
        DTParams p{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1)), 3};
        if (!(p.sigma_xy_prime > 0.0) || !(p.sigma_rgb_prime > 0.0)) throw ParameterError("");
        return p;
    } catch (const std::exception&) {
        throw ParameterError("--dt-post expects two positive numbers as SXY:SRGB, got '" + s + "'");
    }
}

std::optional<DTParams> dt_from(const CommonFlags& f, std::optional<DTParams> dflt)
{
    if (f.no_dt_post) return std::nullopt;
    if (f.dt_post) return parse_dt(*f.dt_post);
    return dflt;
}

std::string stem(const std::string& path) { return std::filesystem::path(path).filename().string(); }

void finish(const apps::RunReport& rep, const CommonFlags& f)
{
    for (const auto& [k, v] : rep.params) std::printf("%s = %s\n", k.c_str(), v.c_str());
    std::printf("construction_ms = %.3f\noptimization_ms = %.3f\n", rep.construction_ms, rep.optimization_ms);
    if (!f.report.empty()) apps::write_report_csv(f.report, rep.rows);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fast bilateral solver"};
    app.require_subcommand(1);
    const int threads = threads_from_env();

    // solve
    CommonFlags solve_f;
    std::string s_ref, s_target, s_conf, s_out;
    auto* solve_cmd = app.add_subcommand("solve", "edge-aware smoothing of a target guided by a reference");
    solve_cmd->add_option("--reference", s_ref, "reference image")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--target", s_target, "target raster")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--confidence", s_conf, "confidence raster (default: 1 everywhere)")
        ->check(CLI::ExistingFile);
    solve_cmd->add_option("--out", s_out, "output raster (.png or BSF1)")->required();
    add_common(solve_cmd, solve_f);

    // superres
    CommonFlags sr_f;
    std::string sr_depth, sr_ref, sr_out;
    int sr_factor = 0;
    auto* sr_cmd = app.add_subcommand("superres", "depth superresolution guided by a high resolution image");
    sr_cmd->add_option("--depth", sr_depth, "low resolution depth")->required()->check(CLI::ExistingFile);
    sr_cmd->add_option("--reference", sr_ref, "high resolution reference")->required()->check(CLI::ExistingFile);
    sr_cmd->add_option("--factor", sr_factor, "upsampling factor")->required()->check(CLI::Range(2, 1 << 16));
    sr_cmd->add_option("--out", sr_out, "output depth")->required();
    add_common(sr_cmd, sr_f);

    // colorize
    CommonFlags col_f;
    std::string col_gray, col_scribbles, col_out;
    auto* col_cmd = app.add_subcommand("colorize", "propagate scribbled chroma over a gray image");
    col_cmd->add_option("--gray", col_gray, "gray image")->required()->check(CLI::ExistingFile);
    col_cmd->add_option("--scribbles", col_scribbles, "gray image with colored scribbles")
        ->required()
        ->check(CLI::ExistingFile);
    col_cmd->add_option("--out", col_out, "RGB output")->required();
    add_common(col_cmd, col_f);

    // segsmooth
    CommonFlags seg_f;
    std::string seg_probs, seg_ref, seg_labels, seg_out_probs;
    double seg_eps = 0.01;
    auto* seg_cmd = app.add_subcommand("segsmooth", "smooth per-class probability maps and relabel");
    seg_cmd->add_option("--probs", seg_probs, "multi-channel probability raster (BSF1)")
        ->required()
        ->check(CLI::ExistingFile);
    seg_cmd->add_option("--reference", seg_ref, "reference image")->required()->check(CLI::ExistingFile);
    seg_cmd->add_option("--epsilon", seg_eps, "dropped-mass tolerance of the low-rank reduction")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
    seg_cmd->add_option("--out-labels", seg_labels, "label raster")->required();
    seg_cmd->add_option("--out-probs", seg_out_probs, "smoothed probabilities (BSF1)");
    add_common(seg_cmd, seg_f);

    // stereo-post
    CommonFlags st_f;
    std::string st_depth, st_ref, st_out, st_conf_out;
    int st_zero_left = 0;
    double st_sigma_gm = 1.0;
    int st_irls = 32;
    auto* st_cmd = app.add_subcommand("stereo-post", "robust refinement of a noisy depth map");
    st_cmd->add_option("--depth", st_depth, "input depth or disparity")->required()->check(CLI::ExistingFile);
    st_cmd->add_option("--reference", st_ref, "reference image")->required()->check(CLI::ExistingFile);
    st_cmd->add_option("--out", st_out, "refined depth")->required();
    st_cmd->add_option("--out-confidence", st_conf_out, "write the initial confidence here");
    st_cmd->add_option("--zero-left-cols", st_zero_left, "zero the initial confidence of this many left columns")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    st_cmd->add_option("--sigma-gm", st_sigma_gm, "Geman-McClure scale")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    st_cmd->add_option("--irls", st_irls, "IRLS iterations")->check(CLI::PositiveNumber)->capture_default_str();
    add_common(st_cmd, st_f);

    // defocus-prep
    std::string df_lower, df_upper, df_target, df_conf;
    auto* df_cmd = app.add_subcommand("defocus-prep", "turn depth intervals into target and confidence");
    df_cmd->add_option("--lower", df_lower, "lower bound raster")->required()->check(CLI::ExistingFile);
    df_cmd->add_option("--upper", df_upper, "upper bound raster")->required()->check(CLI::ExistingFile);
    df_cmd->add_option("--out-target", df_target, "target output (BSF1 recommended)")->required();
    df_cmd->add_option("--out-confidence", df_conf, "confidence output (BSF1 recommended)")->required();

    // bench-precond
    CommonFlags bp_f;
    std::vector<std::string> bp_refs, bp_targets, bp_confs;
    int bp_ref_iters = 200;
    auto* bp_cmd = app.add_subcommand("bench-precond", "compare preconditioner and initialization choices");
    bp_cmd->add_option("references", bp_refs, "reference images")->required()->check(CLI::ExistingFile);
    bp_cmd->add_option("--targets", bp_targets, "one target per reference (default: synthetic)")
        ->check(CLI::ExistingFile);
    bp_cmd->add_option("--confidences", bp_confs, "one confidence per reference")->check(CLI::ExistingFile);
    bp_cmd->add_option("--reference-iters", bp_ref_iters, "iterations of the normalization anchor solve")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_common(bp_cmd, bp_f, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve_cmd) {
            apps::SolveOptions opt;
            opt.grid = grid_from(solve_f, GridParams{});
            opt.lambda = solve_f.lambda.value_or(1.0);
            opt.solver = solver_from(solve_f, SolverConfig{});
            opt.dt_post = dt_from(solve_f, std::nullopt);
            std::optional<Raster> conf;
            if (!s_conf.empty()) conf = read_raster(s_conf);
            const auto out = apps::solve_raster(read_raster(s_ref), read_raster(s_target), conf, opt, stem(s_target));
            write_raster(s_out, out.output, solve_f.png_bits);
            finish(out.report, solve_f);
        } else if (*sr_cmd) {
            apps::SuperresOptions opt;
            opt.factor = sr_factor;
            opt.grid = grid_from(sr_f, opt.grid);
            opt.lambda = sr_f.lambda;
            opt.solver = solver_from(sr_f, opt.solver);
            opt.dt_post = dt_from(sr_f, opt.dt_post);
            const auto out = apps::superres(read_raster(sr_depth), read_raster(sr_ref), opt, stem(sr_depth));
            write_raster(sr_out, out.depth, sr_f.png_bits);
            finish(out.report, sr_f);
        } else if (*col_cmd) {
            apps::ColorizeOptions opt;
            opt.grid = grid_from(col_f, opt.grid);
            opt.lambda = col_f.lambda.value_or(opt.lambda);
            opt.solver = solver_from(col_f, opt.solver);
            opt.dt_post = dt_from(col_f, opt.dt_post);
            opt.threads = threads;
            const auto out = apps::colorize(read_raster(col_gray), read_raster(col_scribbles), opt, stem(col_gray));
            write_raster(col_out, out.rgb, col_f.png_bits);
            finish(out.report, col_f);
        } else if (*seg_cmd) {
            apps::SegsmoothOptions opt;
            opt.grid = grid_from(seg_f, opt.grid);
            opt.lambda = seg_f.lambda.value_or(opt.lambda);
            opt.epsilon = seg_eps;
            opt.solver = solver_from(seg_f, opt.solver);
            opt.dt_post = dt_from(seg_f, opt.dt_post);
            opt.threads = threads;
            const auto out = apps::segsmooth(read_raster(seg_probs), read_raster(seg_ref), opt, stem(seg_probs));
            write_raster(seg_labels, out.labels, seg_f.png_bits);
            if (!seg_out_probs.empty()) write_raster(seg_out_probs, out.probabilities, seg_f.png_bits);
            finish(out.report, seg_f);
        } else if (*st_cmd) {
            apps::StereoOptions opt;
            opt.grid = grid_from(st_f, opt.grid);
            opt.lambda = st_f.lambda.value_or(opt.lambda);
            opt.robust.sigma_gm = st_sigma_gm;
            opt.robust.n_irls = st_irls;
            opt.robust.inner = solver_from(st_f, opt.robust.inner);
            opt.confidence.zero_left_columns = st_zero_left;
            opt.dt_post = dt_from(st_f, opt.dt_post);
            const Raster depth = read_raster(st_depth);
            const auto out = apps::stereo_post(depth, read_raster(st_ref), opt, stem(st_depth));
            write_raster(st_out, out.depth, st_f.png_bits);
            if (!st_conf_out.empty()) {
                write_raster(st_conf_out, raster_from(out.confidence_init, depth.width, depth.height));
            }
            finish(out.report, st_f);
        } else if (*df_cmd) {
            const auto [target, conf] = apps::defocus_prep(read_raster(df_lower), read_raster(df_upper));
            write_raster(df_target, target, 16);
            write_raster(df_conf, conf, 16);
        } else if (*bp_cmd) {
            if (!bp_targets.empty() && bp_targets.size() != bp_refs.size()) {
                throw ParameterError("bench-precond: --targets needs one entry per reference");
            }
            if (!bp_confs.empty() && bp_confs.size() != bp_refs.size()) {
                throw ParameterError("bench-precond: --confidences needs one entry per reference");
            }
            std::vector<apps::BenchInput> inputs;
            for (std::size_t k = 0; k < bp_refs.size(); ++k) {
                apps::BenchInput in{stem(bp_refs[k]), read_raster(bp_refs[k]), {}};
                if (bp_targets.empty()) {
                    in.problem = apps::synthetic_problem(in.reference, k + 1);
                } else {
                    in.problem.target = channel_as_double(read_raster(bp_targets[k]));
                    in.problem.confidence = bp_confs.empty() ? std::vector<double>(in.problem.target.size(), 1.0)
                                                             : channel_as_double(read_raster(bp_confs[k]));
                }
                inputs.push_back(std::move(in));
            }
            apps::BenchOptions opt;
            opt.grid = grid_from(bp_f, opt.grid);
            opt.lambda = bp_f.lambda.value_or(opt.lambda);
            opt.n_iters = bp_f.iters.value_or(opt.n_iters);
            opt.reference_iters = bp_ref_iters;
            opt.threads = threads;
            const auto out = apps::bench_precond(inputs, opt);
            finish(out.report, bp_f);
        }
    } catch (const bsolve::Error& e) {
        std::fprintf(stderr, "bs: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bs: %s\n", e.what());
        return 2;
    }
    return 0;
}
