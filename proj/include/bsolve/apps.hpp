#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bsolve/domain_transform.hpp"
#include "bsolve/imaging.hpp"
#include "bsolve/multichannel.hpp"
#include "bsolve/parallel.hpp"
#include "bsolve/robust.hpp"
#include "bsolve/solver.hpp"

// Application pipelines behind the `bs` command line tool.

namespace bsolve::apps {

struct ReportRow {
    int iteration = 0;
    std::string config;
    std::string image;
    double loss = 0.0;
    double wall_ms = 0.0;
};

/// Per-iteration losses, the construction/optimization timing split and the parameters used.
struct RunReport {
    std::vector<ReportRow> rows;
    double construction_ms = 0.0;
    double optimization_ms = 0.0;
    std::vector<std::pair<std::string, std::string>> params;

    void echo(std::string key, double value)
    {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        params.emplace_back(std::move(key), buf);
    }
    void echo(std::string key, std::string value) { params.emplace_back(std::move(key), std::move(value)); }

    void add_history(const std::string& config, const std::string& image, const std::vector<double>& loss,
                     const std::vector<double>& wall_ms)
    {
        for (std::size_t i = 0; i < loss.size(); ++i) {
            rows.push_back({static_cast<int>(i), config, image, loss[i], i < wall_ms.size() ? wall_ms[i] : 0.0});
        }
    }
};

inline void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "iteration,config,image,loss,wall_ms\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.6f", r.loss, r.wall_ms);
        out << r.iteration << ',' << r.config << ',' << r.image << ',' << buf << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string config_label(const SolverConfig& cfg)
{
    std::string p;
    switch (cfg.preconditioner) {
    case Preconditioner::none: return "none";
    case Preconditioner::jacobi: p = "jacobi"; break;
    case Preconditioner::hierarchical: p = "pyr"; break;
    }
    return p + (cfg.init == Initialization::hierarchical ? "+pyr-init" : "+flat");
}

namespace detail {

inline double since_ms(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void echo_grid(RunReport& rep, const GridParams& g, double lambda, const SolverConfig& cfg)
{
    rep.echo("sigma_xy", g.sigma_xy);
    rep.echo("sigma_l", g.sigma_l);
    rep.echo("sigma_uv", g.sigma_uv);
    rep.echo("lambda", lambda);
    rep.echo("iters", static_cast<double>(cfg.n_iters));
    rep.echo("config", config_label(cfg));
}

inline void echo_dt(RunReport& rep, const std::optional<DTParams>& dt)
{
    if (dt) {
        rep.echo("dt_sigma_xy", dt->sigma_xy_prime);
        rep.echo("dt_sigma_rgb", dt->sigma_rgb_prime);
    } else {
        rep.echo("dt_post", "off");
    }
}

}  // namespace detail

// ---- solve ----

struct SolveOptions {
    GridParams grid;
    double lambda = 1.0;
    SolverConfig solver;
    std::optional<DTParams> dt_post;
};

struct SolveOutput {
    Raster output;
    RunReport report;
};

/// Solves every channel of `target` against the shared confidence. A missing confidence means 1
/// everywhere.
inline SolveOutput solve_raster(const Raster& reference, const Raster& target, const std::optional<Raster>& confidence,
                                const SolveOptions& opt, const std::string& image = "input")
{
    require_same_size(reference, target, "solve target");
    std::vector<double> c(reference.pixels(), 1.0);
    if (confidence) {
        require_same_size(reference, *confidence, "solve confidence");
        if (confidence->channels != 1) throw DimensionError("solve: confidence must have 1 channel");
        c = channel_as_double(*confidence);
    }
    opt.solver.validate();
    SolveOutput out;
    detail::echo_grid(out.report, opt.grid, opt.lambda, opt.solver);
    detail::echo_dt(out.report, opt.dt_post);

    const auto t0 = std::chrono::steady_clock::now();
    auto space = BilateralSpace::build(ReferenceImage::from_raster(reference), opt.grid);
    out.report.construction_ms += detail::since_ms(t0);

    out.output = Raster(target.width, target.height, target.channels);
    for (int ch = 0; ch < target.channels; ++ch) {
        Problem p{channel_as_double(target, ch), c};
        SolveResult r = solve(space, p, opt.lambda, opt.solver);
        if (opt.dt_post) {
            const auto t1 = std::chrono::steady_clock::now();
            r.output = dt_filter(r.output, reference, *opt.dt_post);
            r.optimization_ms += detail::since_ms(t1);
        }
        out.report.construction_ms += r.construction_ms;
        out.report.optimization_ms += r.optimization_ms;
        const std::string label = target.channels == 1 ? config_label(opt.solver)
                                                       : config_label(opt.solver) + "/ch" + std::to_string(ch);
        out.report.add_history(label, image, r.loss_history, r.wall_ms);
        std::transform(r.output.begin(), r.output.end(), out.output.channel(ch).begin(),
                       [](double v) { return static_cast<float>(v); });
    }
    return out;
}

// ---- superres ----

struct SuperresOptions {
    int factor = 2;
    GridParams grid{8.0, 4.0, 3.0};
    std::optional<double> lambda;  ///< defaults to 4^(f - 1/2)
    SolverConfig solver = [] {
        SolverConfig c;
        c.n_iters = 15;
        return c;
    }();
    std::optional<DTParams> dt_post = DTParams{16.0, 16.0, 3};
};

struct SuperresOutput {
    Raster depth;
    Raster bicubic;
    double lambda = 0.0;
    double sigma = 0.0;
    RunReport report;
};

inline SuperresOutput superres(const Raster& low_res, const Raster& reference, const SuperresOptions& opt,
                               const std::string& image = "input")
{
    if (opt.factor < 2) throw ParameterError("superres: factor must be >= 2");
    if (low_res.channels != 1) throw DimensionError("superres: depth must have 1 channel");
    if (reference.width != low_res.width * opt.factor || reference.height != low_res.height * opt.factor) {
        throw DimensionError("superres: reference is " + std::to_string(reference.width) + "x" +
                             std::to_string(reference.height) + ", expected " +
                             std::to_string(low_res.width * opt.factor) + "x" +
                             std::to_string(low_res.height * opt.factor) + " for factor " +
                             std::to_string(opt.factor));
    }
    SuperresOutput out;
    out.lambda = opt.lambda.value_or(superres_lambda(opt.factor));
    out.sigma = superres_sigma(opt.factor);

    const auto t0 = std::chrono::steady_clock::now();
    out.bicubic = bicubic_resize(low_res, reference.width, reference.height);
    Problem p{channel_as_double(out.bicubic), superres_confidence(opt.factor, reference.width, reference.height)};
    const double prep_ms = detail::since_ms(t0);

    SolveResult r = solve(reference, p, opt.grid, opt.solver, out.lambda, opt.dt_post);
    out.depth = raster_from(r.output, reference.width, reference.height);

    out.report.construction_ms = prep_ms + r.construction_ms;
    out.report.optimization_ms = r.optimization_ms;
    out.report.echo("factor", static_cast<double>(opt.factor));
    out.report.echo("confidence_sigma", out.sigma);
    detail::echo_grid(out.report, opt.grid, out.lambda, opt.solver);
    detail::echo_dt(out.report, opt.dt_post);
    out.report.add_history(config_label(opt.solver), image, r.loss_history, r.wall_ms);
    return out;
}

// ---- colorize ----

struct ColorizeOptions {
    GridParams grid{4.0, 4.0, 4.0};
    double lambda = 0.5;
    SolverConfig solver;
    std::optional<DTParams> dt_post;  ///< off unless requested; the usual setting is (4, 8)
    int threads = 1;
};

struct ColorizeOutput {
    Raster yuv;
    Raster rgb;
    std::size_t scribbled = 0;
    RunReport report;
};

/// 1 where any scribble channel differs from the gray image by more than one level, else 0.
inline std::vector<double> scribble_mask(const Raster& gray, const Raster& scribbles)
{
    require_same_size(gray, scribbles, "scribble image");
    if (gray.channels != 1 && gray.channels != 3) throw DimensionError("colorize: gray image needs 1 or 3 channels");
    if (scribbles.channels != 3) throw DimensionError("colorize: scribble image must be RGB");
    std::vector<double> mask(gray.pixels(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const float g = gray.channel(gray.channels == 1 ? 0 : c)[i];
            if (std::abs(scribbles.channel(c)[i] - g) > 1.0f) mask[i] = 1.0;
        }
    }
    return mask;
}

/// Luma of a 1- or 3-channel image as a single-channel raster.
inline Raster luma_of(const Raster& img)
{
    if (img.channels == 1) return img;
    if (img.channels != 3) throw DimensionError("luma_of: expected 1 or 3 channels");
    Raster y(img.width, img.height, 1);
    const Raster yuv = rgb_to_yuv(img);
    std::copy(yuv.channel(0).begin(), yuv.channel(0).end(), y.values.begin());
    return y;
}

inline ColorizeOutput colorize(const Raster& gray, const Raster& scribbles, const ColorizeOptions& opt,
                               const std::string& image = "input")
{
    const std::vector<double> mask = scribble_mask(gray, scribbles);
    ColorizeOutput out;
    out.scribbled = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1.0));
    if (out.scribbled == 0) throw ParameterError("colorize: no scribbles found (no pixel differs from the gray image)");
    opt.solver.validate();

    const Raster luma = luma_of(gray);
    const Raster scribble_yuv = rgb_to_yuv(scribbles);

    const auto t0 = std::chrono::steady_clock::now();
    auto space = BilateralSpace::build(ReferenceImage::from_raster(luma), opt.grid);
    // Chroma is solved relative to the neutral 128 so regions no scribble reaches stay gray.
    Matrix b(space->nverts(), 2);
    Problem p;
    p.confidence = mask;
    p.target.assign(mask.size(), 0.0);
    const BilateralSystem sys = assemble(space, p, opt.lambda);
    for (int ch = 0; ch < 2; ++ch) {
        std::vector<double> t(mask.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = scribble_yuv.channel(ch + 1)[i] - 128.0;
        const auto bc = splat_weighted(space->grid, mask, t);
        std::copy(bc.begin(), bc.end(), b.col(ch).begin());
    }
    out.report.construction_ms = detail::since_ms(t0);

    const auto t1 = std::chrono::steady_clock::now();
    const MultiSolveResult ms = solve_multi(sys, b, 0.0, opt.solver, opt.threads);
    out.yuv = Raster(gray.width, gray.height, 3);
    std::copy(luma.values.begin(), luma.values.end(), out.yuv.channel(0).begin());
    for (int ch = 0; ch < 2; ++ch) {
        std::vector<double> x = slice(space->grid, ms.y.col(ch));
        for (auto& v : x) v += 128.0;
        if (opt.dt_post) x = dt_filter(x, luma, *opt.dt_post);
        std::transform(x.begin(), x.end(), out.yuv.channel(ch + 1).begin(),
                       [](double v) { return static_cast<float>(v); });
    }
    out.rgb = yuv_to_rgb(out.yuv);
    out.report.optimization_ms = detail::since_ms(t1);

    detail::echo_grid(out.report, opt.grid, opt.lambda, opt.solver);
    detail::echo_dt(out.report, opt.dt_post);
    out.report.echo("scribbled_pixels", static_cast<double>(out.scribbled));
    const char* names[2] = {"/u", "/v"};
    for (int ch = 0; ch < 2; ++ch) {
        out.report.add_history(config_label(opt.solver) + names[ch], image, ms.loss_histories[ch], ms.wall_ms[ch]);
    }
    return out;
}

// ---- segsmooth ----

struct SegsmoothOptions {
    GridParams grid;
    double lambda = 1.0;
    double epsilon = 0.01;
    SolverConfig solver;
    std::optional<DTParams> dt_post;
    int threads = 1;
};

struct SegsmoothOutput {
    Raster probabilities;
    Raster labels;
    std::size_t solves = 0;
    RunReport report;
};

/// Per-pixel index of the largest channel; ties go to the lowest index.
inline std::vector<int> argmax_labels(const Raster& probs)
{
    std::vector<int> labels(probs.pixels(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        float best = probs.channel(0)[i];
        for (int c = 1; c < probs.channels; ++c) {
            if (probs.channel(c)[i] > best) {
                best = probs.channel(c)[i];
                labels[i] = c;
            }
        }
    }
    return labels;
}

inline SegsmoothOutput segsmooth(const Raster& probs, const Raster& reference, const SegsmoothOptions& opt,
                                 const std::string& image = "input")
{
    require_same_size(reference, probs, "segsmooth probabilities");
    if (probs.channels < 2) throw DimensionError("segsmooth: need at least 2 probability channels");
    if (!probs.all_finite()) throw NumericalError("segsmooth: probabilities must be finite");
    opt.solver.validate();

    SegsmoothOutput out;
    const auto t0 = std::chrono::steady_clock::now();
    auto space = BilateralSpace::build(ReferenceImage::from_raster(reference), opt.grid);
    const BilateralSystem sys = assemble(space, Problem::uniform(std::vector<double>(probs.pixels(), 0.0)), opt.lambda);
    Matrix b(space->nverts(), static_cast<std::size_t>(probs.channels));
    for (int ch = 0; ch < probs.channels; ++ch) {
        const auto bc = splat(space->grid, channel_as_double(probs, ch));
        std::copy(bc.begin(), bc.end(), b.col(ch).begin());
    }
    out.report.construction_ms = detail::since_ms(t0);

    const auto t1 = std::chrono::steady_clock::now();
    const MultiSolveResult ms = solve_multi(sys, b, opt.epsilon, opt.solver, opt.threads);
    out.solves = ms.solves;
    out.probabilities = Raster(probs.width, probs.height, probs.channels);
    for (int ch = 0; ch < probs.channels; ++ch) {
        std::vector<double> x = slice(space->grid, ms.y.col(ch));
        if (opt.dt_post) x = dt_filter(x, reference, *opt.dt_post);
        std::transform(x.begin(), x.end(), out.probabilities.channel(ch).begin(),
                       [](double v) { return static_cast<float>(v); });
    }
    const auto labels = argmax_labels(out.probabilities);
    out.labels = Raster(probs.width, probs.height, 1);
    std::transform(labels.begin(), labels.end(), out.labels.values.begin(),
                   [](int l) { return static_cast<float>(l); });
    out.report.optimization_ms = detail::since_ms(t1);

    detail::echo_grid(out.report, opt.grid, opt.lambda, opt.solver);
    detail::echo_dt(out.report, opt.dt_post);
    out.report.echo("epsilon", opt.epsilon);
    out.report.echo("solves", static_cast<double>(ms.solves));
    for (std::size_t j = 0; j < ms.loss_histories.size(); ++j) {
        out.report.add_history(config_label(opt.solver) + "/col" + std::to_string(j), image, ms.loss_histories[j],
                               ms.wall_ms[j]);
    }
    return out;
}

// ---- stereo-post ----

struct StereoOptions {
    GridParams grid{4.0, 4.0, 4.0};
    double lambda = 0.25;
    RobustParams robust;
    ConfidenceInitParams confidence;
    std::optional<DTParams> dt_post = DTParams{4.0, 4.0, 3};
};

struct StereoOutput {
    Raster depth;
    std::vector<double> confidence_init;
    std::vector<double> objective_history;
    RunReport report;
};

inline StereoOutput stereo_post(const Raster& depth, const Raster& reference, const StereoOptions& opt,
                                const std::string& image = "input")
{
    require_same_size(reference, depth, "stereo depth");
    if (depth.channels != 1) throw DimensionError("stereo-post: depth must have 1 channel");
    opt.robust.validate();

    StereoOutput out;
    const auto z = channel_as_double(depth);
    const auto t0 = std::chrono::steady_clock::now();
    out.confidence_init = variance_confidence(z, reference, opt.confidence);
    auto space = BilateralSpace::build(ReferenceImage::from_raster(reference), opt.grid);
    out.report.construction_ms = detail::since_ms(t0);

    const auto t1 = std::chrono::steady_clock::now();
    RobustResult r = robust_solve(space, z, out.confidence_init, GemanMcClure{opt.robust.sigma_gm},
                                  opt.robust.n_irls, opt.lambda, opt.robust.inner);
    if (opt.dt_post) r.output = dt_filter(r.output, reference, *opt.dt_post);
    out.report.optimization_ms = detail::since_ms(t1);
    out.depth = raster_from(r.output, depth.width, depth.height);
    out.objective_history = r.objective_history;

    detail::echo_grid(out.report, opt.grid, opt.lambda, opt.robust.inner);
    detail::echo_dt(out.report, opt.dt_post);
    out.report.echo("sigma_gm", opt.robust.sigma_gm);
    out.report.echo("irls", static_cast<double>(opt.robust.n_irls));
    out.report.echo("zero_left_cols", static_cast<double>(opt.confidence.zero_left_columns));
    out.report.add_history("irls", image, r.objective_history, {});
    return out;
}

// ---- defocus-prep ----

inline std::pair<Raster, Raster> defocus_prep(const Raster& lower, const Raster& upper)
{
    require_same_size(lower, upper, "defocus upper bound");
    if (lower.channels != 1 || upper.channels != 1) throw DimensionError("defocus-prep: bounds must have 1 channel");
    const Problem p = interval_to_target_confidence({channel_as_double(lower), channel_as_double(upper)});
    return {raster_from(p.target, lower.width, lower.height), raster_from(p.confidence, lower.width, lower.height)};
}

// ---- bench-precond ----

struct BenchInput {
    std::string name;
    Raster reference;
    Problem problem;
};

struct BenchOptions {
    GridParams grid;
    double lambda = 1.0;
    int n_iters = 25;
    /// Iterations of the long hierarchical solve that anchors the bottom of the normalization.
    int reference_iters = 200;
    int threads = 1;
};

/// The five configurations compared by the benchmark, in output order.
inline std::vector<SolverConfig> bench_configs(int n_iters)
{
    std::vector<SolverConfig> out;
    auto make = [&](Preconditioner p, Initialization i) {
        SolverConfig c;
        c.n_iters = n_iters;
        c.preconditioner = p;
        c.init = i;
        out.push_back(c);
    };
    make(Preconditioner::jacobi, Initialization::flat);
    make(Preconditioner::hierarchical, Initialization::flat);
    make(Preconditioner::jacobi, Initialization::hierarchical);
    make(Preconditioner::hierarchical, Initialization::hierarchical);
    make(Preconditioner::none, Initialization::flat);
    return out;
}

/// A reproducible problem for a reference with no supplied target: noisy luma with random
/// confidence in [0, 1], seeded by `seed`.
inline Problem synthetic_problem(const Raster& reference, std::uint64_t seed)
{
    const Raster luma = luma_of(reference);
    std::mt19937_64 rng(seed);
    Problem p;
    p.target.resize(luma.pixels());
    p.confidence.resize(luma.pixels());
    for (std::size_t i = 0; i < p.target.size(); ++i) {
        const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        const double gauss = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        p.target[i] = luma.values[i] + 20.0 * gauss;
        p.confidence[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
    return p;
}

struct BenchResult {
    /// normalized[image][config][iteration]
    std::vector<std::vector<std::vector<double>>> normalized;
    RunReport report;
};

/// Runs every configuration on every input and normalizes each image's losses to [0, 1]: 1 is the
/// largest loss seen for that image, 0 the lowest loss reached by any configuration or by a long
/// hierarchical reference solve.
inline BenchResult bench_precond(const std::vector<BenchInput>& inputs, const BenchOptions& opt)
{
    if (inputs.empty()) throw ParameterError("bench-precond: need at least one reference image");
    const auto configs = bench_configs(opt.n_iters);
    BenchResult out;
    out.normalized.resize(inputs.size());
    std::vector<std::vector<std::vector<double>>> wall(inputs.size());

    parallel_for(inputs.size(), opt.threads, [&](std::size_t k) {
        const auto& in = inputs[k];
        auto space = BilateralSpace::build(ReferenceImage::from_raster(in.reference), opt.grid);
        const BilateralSystem sys = assemble(space, in.problem, opt.lambda);
        std::vector<std::vector<double>> losses;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& cfg : configs) {
            PcgResult r = solve_system(sys, sys.b, cfg);
            for (double l : r.loss_history) {
                lo = std::min(lo, l);
                hi = std::max(hi, l);
            }
            losses.push_back(std::move(r.loss_history));
            wall[k].push_back(std::move(r.wall_ms));
        }
        SolverConfig long_cfg;
        long_cfg.n_iters = opt.reference_iters;
        for (double l : solve_system(sys, sys.b, long_cfg).loss_history) lo = std::min(lo, l);
        const double span = hi - lo;
        for (auto& h : losses) {
            for (auto& l : h) l = span > 0.0 ? (l - lo) / span : 0.0;
        }
        out.normalized[k] = std::move(losses);
    });

    detail::echo_grid(out.report, opt.grid, opt.lambda, configs.front());
    out.report.params.pop_back();  // config varies per row
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t c = 0; c < configs.size(); ++c) {
            out.report.add_history(config_label(configs[c]), inputs[k].name, out.normalized[k][c], wall[k][c]);
        }
    }
    return out;
}

}  // namespace bsolve::apps
