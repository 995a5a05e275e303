#pragma once

// The csvc command-line tool. run() is the whole program; main() forwards argv.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 format/corruption.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csvc/csvc.hpp"

namespace csvc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitFormat = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct InputFlags {
    std::string path;
    std::string format = "auto";
    int width = 0;
    int height = 0;
    double fps = 30.0;
};

struct SolverFlags {
    SolverParams params;
    bool anisotropic = false;
    unsigned workers = csvc::detail::default_workers();

    SolverParams get() const {
        SolverParams p = params;
        p.isotropic = !anisotropic;
        return p;
    }
};

inline void add_input_flags(CLI::App* cmd, InputFlags& f, const std::string& flag, const std::string& help,
                            bool required = true) {
    auto* opt = cmd->add_option(flag, f.path, help);
    if (required) opt->required();
    cmd->add_option("--format", f.format, "pgm-dir, y4m, raw or auto")->capture_default_str();
    cmd->add_option("--width", f.width, "frame width (raw input)");
    cmd->add_option("--height", f.height, "frame height (raw input)");
    cmd->add_option("--fps", f.fps, "frame rate (raw and pgm-dir input)")->capture_default_str();
}

inline void add_solver_flags(CLI::App* cmd, SolverFlags& s) {
    cmd->add_option("--mu", s.params.mu, "final data-fidelity weight")->capture_default_str();
    cmd->add_option("--beta", s.params.beta, "splitting weight")->capture_default_str();
    cmd->add_option("--tol", s.params.tol, "relative-change tolerance")->capture_default_str();
    cmd->add_option("--max-outer", s.params.max_outer, "continuation stages")->capture_default_str();
    cmd->add_option("--max-inner", s.params.max_inner, "iterations per stage")->capture_default_str();
    cmd->add_flag("--anisotropic", s.anisotropic, "anisotropic TV");
    cmd->add_option("--workers", s.workers, "decoder threads");
}

inline void check_solver(const SolverFlags& s) {
    const auto& p = s.params;
    if (!(p.mu > 0) || !std::isfinite(p.mu)) throw UsageError("--mu must be > 0");
    if (!(p.beta > 0) || !std::isfinite(p.beta)) throw UsageError("--beta must be > 0");
    if (!(p.tol > 0) || !std::isfinite(p.tol)) throw UsageError("--tol must be > 0");
    if (p.max_outer < 1) throw UsageError("--max-outer must be >= 1");
    if (p.max_inner < 1) throw UsageError("--max-inner must be >= 1");
    if (s.workers < 1) throw UsageError("--workers must be >= 1");
}

inline void check_gop(int gop, double cr_key, double cr_cs) {
    if (gop < 1 || gop > 255) throw UsageError("--gop must be in [1, 255]");
    if (!(cr_key > 1) || !std::isfinite(cr_key)) throw UsageError("--cr-key must be > 1");
    if (!(cr_cs >= 1) || !std::isfinite(cr_cs)) throw UsageError("--cr-cs must be >= 1");
}

inline SequenceFormat input_format(const InputFlags& f) {
    if (f.format == "auto") return guess_sequence_format(f.path);
    try {
        return parse_sequence_format(f.format);
    } catch (const InvalidArgument& e) {
        throw UsageError(std::string("--format: ") + e.what());
    }
}

/// .y4m -> y4m, .raw/.yuv/.gray -> raw, anything else -> pgm-dir.
inline SequenceFormat output_format(const std::string& path, const std::string& flag) {
    if (flag != "auto") {
        try {
            return parse_sequence_format(flag);
        } catch (const InvalidArgument& e) {
            throw UsageError(std::string("--format: ") + e.what());
        }
    }
    const auto ext = std::filesystem::path(path).extension();
    if (ext == ".y4m") return SequenceFormat::Y4m;
    if (ext == ".raw" || ext == ".yuv" || ext == ".gray") return SequenceFormat::Raw;
    return SequenceFormat::PgmDir;
}

inline VideoSequence load_input(const InputFlags& f) {
    if (!std::filesystem::exists(f.path)) throw IoError("'" + f.path + "' does not exist");
    const auto fmt = input_format(f);
    std::optional<RawGeometry> geom;
    if (fmt == SequenceFormat::Raw) {
        if (f.width <= 0 || f.height <= 0) throw UsageError("raw input needs --width and --height");
        geom = RawGeometry{f.width, f.height, f.fps};
    } else if (fmt == SequenceFormat::PgmDir) {
        geom = RawGeometry{0, 0, f.fps};
    }
    return load_sequence(f.path, fmt, geom);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("'" + path + "' does not exist");
    return csvc::detail::read_file(path);
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    csvc::detail::write_file(path, std::span<const std::uint8_t>(
                                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Box parse_box(const std::string& text) {
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    Box b;
    if (!(in >> b.cx >> b.cy >> b.w >> b.h)) throw UsageError("--box expects cx,cy,w,h");
    std::string rest;
    if (in >> rest) throw UsageError("--box expects cx,cy,w,h");
    return b;
}

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace detail;
    CLI::App app{"Compressive-sensing surveillance video codec", "csvc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "csvc 1.0");

    // encode
    InputFlags enc_in;
    std::string enc_out;
    GopConfig enc_cfg;
    auto* encode = app.add_subcommand("encode", "sequence -> .csvc container");
    add_input_flags(encode, enc_in, "-i,--input", "input sequence");
    encode->add_option("-o,--output", enc_out, "output container")->required();
    encode->add_option("--gop", enc_cfg.gop_size, "frames per GOP")->capture_default_str();
    encode->add_option("--cr-key", enc_cfg.cr_key, "key-frame compression ratio")->capture_default_str();
    encode->add_option("--cr-cs", enc_cfg.cr_cs, "CS-frame ratio n/m")->capture_default_str();
    encode->add_option("--seed", enc_cfg.seed, "measurement matrix seed")->capture_default_str();

    // decode
    std::string dec_in;
    std::string dec_out;
    std::string dec_format = "auto";
    SolverFlags dec_solver;
    auto* decode = app.add_subcommand("decode", ".csvc container -> sequence");
    decode->add_option("-i,--input", dec_in, "input container")->required();
    decode->add_option("-o,--output", dec_out, "output sequence")->required();
    decode->add_option("--format", dec_format, "pgm-dir, y4m, raw or auto (by extension)")->capture_default_str();
    add_solver_flags(decode, dec_solver);

    // info
    std::string info_in;
    auto* info = app.add_subcommand("info", "print container header and compression ratios");
    info->add_option("-i,--input,input", info_in, "container")->required();

    // psnr
    InputFlags psnr_ref;
    InputFlags psnr_test;
    std::string psnr_out;
    auto* psnr_cmd = app.add_subcommand("psnr", "per-frame PSNR of two sequences as CSV");
    psnr_cmd->add_option("--ref", psnr_ref.path, "reference sequence")->required();
    psnr_cmd->add_option("--test", psnr_test.path, "test sequence")->required();
    psnr_cmd->add_option("--format", psnr_ref.format, "format of both sequences")->capture_default_str();
    psnr_cmd->add_option("--width", psnr_ref.width, "frame width (raw input)");
    psnr_cmd->add_option("--height", psnr_ref.height, "frame height (raw input)");
    psnr_cmd->add_option("-o,--output", psnr_out, "CSV file (default stdout)");

    // sweep
    InputFlags sw_in;
    std::string sw_truth;
    std::string sw_out;
    std::vector<int> sw_gops{3, 5, 7};
    double sw_key = 23.0;
    std::vector<double> sw_cs{40, 60, 80};
    int sw_frames = 48;
    SweepOptions sw_opt;
    SolverFlags sw_solver;
    auto* sweep = app.add_subcommand("sweep", "encode/decode a grid of configurations, CSV report");
    add_input_flags(sweep, sw_in, "-i,--input", "input sequence (default: synthetic benchmark)", false);
    sweep->add_option("--truth", sw_truth, "ground-truth boxes for tracking SR");
    sweep->add_option("--gops", sw_gops, "GOP sizes")->delimiter(',')->capture_default_str();
    sweep->add_option("--cr-key", sw_key, "key-frame compression ratio")->capture_default_str();
    sweep->add_option("--cr-cs", sw_cs, "CS-frame ratios")->delimiter(',')->capture_default_str();
    sweep->add_option("--seed", sw_opt.seed, "measurement matrix seed")->capture_default_str();
    sweep->add_option("--frames", sw_frames, "synthetic benchmark length")->capture_default_str();
    sweep->add_option("--threshold", sw_opt.sr_threshold, "SR center-distance threshold")->capture_default_str();
    sweep->add_option("-o,--output", sw_out, "CSV file (default stdout)");
    add_solver_flags(sweep, sw_solver);

    // noise
    InputFlags nz_in;
    std::string nz_truth;
    std::string nz_out;
    std::vector<double> nz_var{0, 1, 4, 16, 64, 256, 1024, 4096};
    std::uint64_t nz_seed = 1;
    int nz_frames = 48;
    double nz_threshold = kDefaultSuccessThreshold;
    auto* noise = app.add_subcommand("noise", "PSNR and tracking SR over a noise-variance ladder, CSV");
    add_input_flags(noise, nz_in, "-i,--input", "input sequence (default: synthetic benchmark)", false);
    noise->add_option("--truth", nz_truth, "ground-truth boxes for tracking SR");
    noise->add_option("--variances", nz_var, "noise variances")->delimiter(',')->capture_default_str();
    noise->add_option("--seed", nz_seed, "noise seed")->capture_default_str();
    noise->add_option("--frames", nz_frames, "synthetic benchmark length")->capture_default_str();
    noise->add_option("--threshold", nz_threshold, "SR center-distance threshold")->capture_default_str();
    noise->add_option("-o,--output", nz_out, "CSV file (default stdout)");

    // track
    InputFlags tr_in;
    std::string tr_box;
    std::string tr_truth;
    std::string tr_out;
    TrackerOptions tr_opt;
    double tr_threshold = kDefaultSuccessThreshold;
    auto* track_cmd = app.add_subcommand("track", "template tracking; boxes out, SR against ground truth");
    add_input_flags(track_cmd, tr_in, "-i,--input", "input sequence");
    track_cmd->add_option("--box", tr_box, "initial box cx,cy,w,h (default: first truth box)");
    track_cmd->add_option("--truth", tr_truth, "ground-truth boxes");
    track_cmd->add_option("--radius", tr_opt.search_radius, "search radius in pixels")->capture_default_str();
    track_cmd->add_option("--threshold", tr_threshold, "SR center-distance threshold")->capture_default_str();
    track_cmd->add_option("-o,--output", tr_out, "boxes file (default stdout)");

    // synth
    SceneOptions sy_opt;
    std::string sy_out;
    std::string sy_format = "auto";
    std::string sy_truth;
    auto* synth = app.add_subcommand("synth", "write the synthetic moving-target benchmark");
    synth->add_option("-o,--output", sy_out, "output sequence")->required();
    synth->add_option("--format", sy_format, "pgm-dir, y4m, raw or auto (by extension)")->capture_default_str();
    synth->add_option("--truth", sy_truth, "write ground-truth boxes here");
    synth->add_option("--frames", sy_opt.frames, "frame count")->capture_default_str();
    synth->add_option("--width", sy_opt.width, "frame width")->capture_default_str();
    synth->add_option("--height", sy_opt.height, "frame height")->capture_default_str();
    synth->add_option("--noise", sy_opt.sensor_noise, "sensor noise variance")->capture_default_str();
    synth->add_option("--seed", sy_opt.seed, "scene seed")->capture_default_str();

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return kExitOk;
        } catch (const CLI::CallForVersion&) {
            out << app.version() << "\n";
            return kExitOk;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return kExitOk;
        }

        auto synthetic_or = [&](const InputFlags& in, int frames, const std::string& truth_path,
                                std::vector<Box>& truth) {
            if (in.path.empty()) {
                if (frames < 1) throw UsageError("--frames must be >= 1");
                SceneOptions so;
                so.frames = frames;
                auto scene = make_scene(so);
                truth = std::move(scene.truth);
                return std::move(scene.sequence);
            }
            auto seq = load_input(in);
            if (!truth_path.empty()) truth = load_boxes(truth_path);
            return seq;
        };

        if (*encode) {
            check_gop(enc_cfg.gop_size, enc_cfg.cr_key, enc_cfg.cr_cs);
            const auto seq = load_input(enc_in);
            const auto bytes = write_container(seq, enc_cfg);
            csvc::detail::write_file(enc_out, bytes);
            const auto stats = container_stats(parse_container(bytes));
            out << "encoded " << seq.size() << " frames (" << seq.width() << "x" << seq.height() << ") into "
                << bytes.size() << " bytes, nominal CR " << fmt("%.2f", stats.nominal_gop_cr) << ", realized CR "
                << fmt("%.2f", stats.realized_cr) << "\n";
        } else if (*decode) {
            check_solver(dec_solver);
            const auto fmt_out = output_format(dec_out, dec_format);
            const auto decoded = read_container(read_bytes(dec_in), dec_solver.get(), dec_solver.workers);
            save_sequence(decoded.sequence, dec_out, fmt_out);
            std::size_t capped = 0;
            for (bool c : decoded.converged) capped += c ? 0 : 1;
            out << "decoded " << decoded.sequence.size() << " frames";
            if (capped > 0) out << " (" << capped << " CS frames stopped at the iteration cap)";
            out << "\n";
        } else if (*info) {
            const auto bytes = read_bytes(info_in);
            const auto c = parse_container(bytes);
            const auto s = container_stats(c);
            const auto& h = c.header;
            out << "version: " << int(h.version) << "\n"
                << "width: " << h.width << "\n"
                << "height: " << h.height << "\n"
                << "frames: " << h.frame_count << "\n"
                << "gop: " << int(h.gop_size) << "\n"
                << "cr_key: " << fmt("%g", h.cr_key) << " (achieved " << fmt("%.2f", s.key_cr_achieved) << ")\n"
                << "cr_cs: " << fmt("%g", h.cr_cs) << " (m = " << h.m << ")\n"
                << "seed: " << h.seed << "\n"
                << "frame_rate: " << fmt("%g", h.frame_rate) << "\n"
                << "bytes: " << c.byte_size << "\n"
                << "nominal total CR: " << fmt("%.2f", s.nominal_gop_cr) << "\n"
                << "nominal sequence CR: " << fmt("%.2f", s.nominal_sequence_cr) << "\n"
                << "realized CR: " << fmt("%.2f", s.realized_cr) << "\n";
        } else if (*psnr_cmd) {
            psnr_test.format = psnr_ref.format;
            psnr_test.width = psnr_ref.width;
            psnr_test.height = psnr_ref.height;
            const auto a = load_input(psnr_ref);
            const auto b = load_input(psnr_test);
            const auto scores = psnr_per_frame(a, b);
            std::string csv = "frame,psnr\n";
            double sum = 0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                csv += std::to_string(i) + "," + fmt("%.4f", scores[i]) + "\n";
                sum += scores[i];
            }
            csv += "mean," + fmt("%.4f", sum / static_cast<double>(scores.size())) + "\n";
            write_text(psnr_out, csv, out);
        } else if (*sweep) {
            check_solver(sw_solver);
            if (sw_gops.empty() || sw_cs.empty()) throw UsageError("--gops and --cr-cs must not be empty");
            for (int g : sw_gops) {
                for (double cs : sw_cs) check_gop(g, sw_key, cs);
            }
            std::vector<Box> truth;
            const auto seq = synthetic_or(sw_in, sw_frames, sw_truth, truth);
            sw_opt.solver = sw_solver.get();
            sw_opt.workers = sw_solver.workers;
            const auto grid = make_grid(sw_gops, sw_key, sw_cs);
            const auto rows = run_sweep(seq, grid, sw_opt, truth.empty() ? nullptr : &truth);
            write_text(sw_out, sweep_csv(rows), out);
            for (const auto& r : rows) {
                if (!r.error.empty()) err << "csvc: warning: cell G=" << r.gop_size << " " << r.cr_key << ":"
                                          << r.cr_cs << " failed: " << r.error << "\n";
            }
        } else if (*noise) {
            for (double v : nz_var) {
                if (!(v >= 0) || !std::isfinite(v)) throw UsageError("--variances must be >= 0");
            }
            if (nz_var.empty()) throw UsageError("--variances must not be empty");
            std::vector<Box> truth;
            const auto seq = synthetic_or(nz_in, nz_frames, nz_truth, truth);
            TrackerOptions topt;
            const auto rows =
                run_noise_ladder(seq, nz_var, nz_seed, truth.empty() ? nullptr : &truth, topt, nz_threshold);
            write_text(nz_out, noise_csv(rows), out);
        } else if (*track_cmd) {
            if (tr_box.empty() && tr_truth.empty()) throw UsageError("track needs --box or --truth");
            if (tr_opt.search_radius < 0) throw UsageError("--radius must be >= 0");
            const auto seq = load_input(tr_in);
            std::vector<Box> truth;
            if (!tr_truth.empty()) truth = load_boxes(tr_truth);
            if (!truth.empty() && truth.size() != seq.size()) {
                throw UsageError("--truth has " + std::to_string(truth.size()) + " boxes for " +
                                 std::to_string(seq.size()) + " frames");
            }
            Box init = tr_box.empty() ? truth.front() : parse_box(tr_box);
            if (!init.inside(seq.width(), seq.height())) throw UsageError("--box lies outside the frame");
            const auto boxes = csvc::track(seq, init, tr_opt);
            write_text(tr_out, format_boxes(boxes), out);
            if (!truth.empty()) {
                std::ostream& sr_stream = (tr_out.empty() || tr_out == "-") ? err : out;
                sr_stream << "success rate: " << fmt("%.2f", success_rate(boxes, truth, tr_threshold)) << "%\n";
            }
        } else if (*synth) {
            if (sy_opt.frames < 1) throw UsageError("--frames must be >= 1");
            if (sy_opt.width < kMinFrameSide || sy_opt.height < kMinFrameSide) {
                throw UsageError("--width and --height must be >= 8");
            }
            if (!(sy_opt.sensor_noise >= 0)) throw UsageError("--noise must be >= 0");
            const auto fmt_out = output_format(sy_out, sy_format);
            const auto scene = make_scene(sy_opt);
            save_sequence(scene.sequence, sy_out, fmt_out);
            if (!sy_truth.empty()) write_text(sy_truth, format_boxes(scene.truth), out);
        }
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "csvc: error: " << e.what() << "\n";
        return kExitFormat;
    }
}

}  // namespace csvc::cli
