#pragma once

// Quality and downstream-task probes: PSNR, seeded noise injection, a
// normalized cross-correlation template tracker with success-rate scoring,
// a synthetic surveillance-style benchmark and the configuration sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csvc/codec.hpp"
#include "csvc/errors.hpp"
#include "csvc/frame.hpp"
#include "csvc/measurement.hpp"
#include "csvc/tv_solver.hpp"

namespace csvc {

/// Reported for identical frames instead of +inf.
inline constexpr double kPsnrCap = 99.0;

inline double mse(const Frame& a, const Frame& b) {
    detail::require_same_shape(a, b, "psnr");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

inline double psnr(const Frame& a, const Frame& b) {
    const double e = mse(a, b);
    if (e == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / e));
}

inline std::vector<double> psnr_per_frame(const VideoSequence& a, const VideoSequence& b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("psnr: sequences have " + std::to_string(a.size()) + " and " +
                              std::to_string(b.size()) + " frames");
    }
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(psnr(a.frames[i], b.frames[i]));
    return out;
}

/// Add N(0, variance) noise per pixel, round and clamp. Deterministic per seed.
inline Frame add_noise(const Frame& f, double variance, std::uint64_t seed) {
    if (!(variance >= 0) || !std::isfinite(variance)) throw InvalidArgument("noise variance must be >= 0");
    if (variance == 0.0) return f;
    const double sigma = std::sqrt(variance);
    GaussianStream gauss(seed);
    Frame out(f.width(), f.height());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double v = std::round(static_cast<double>(f[i]) + sigma * gauss.next());
        out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

/// Noise every frame with its own stream (seed + frame index).
inline VideoSequence add_noise(const VideoSequence& seq, double variance, std::uint64_t seed) {
    VideoSequence out;
    out.frame_rate = seq.frame_rate;
    for (std::size_t i = 0; i < seq.size(); ++i) out.frames.push_back(add_noise(seq.frames[i], variance, seed + i));
    return out;
}

// ---------------------------------------------------------------------------
// Tracking

/// Axis-aligned target box given by its center and integer size.
struct Box {
    double cx = 0;
    double cy = 0;
    int w = 0;
    int h = 0;

    int left() const { return static_cast<int>(std::lround(cx - w / 2.0)); }
    int top() const { return static_cast<int>(std::lround(cy - h / 2.0)); }

    static Box from_corner(int left, int top, int w, int h) {
        return {left + w / 2.0, top + h / 2.0, w, h};
    }

    bool inside(int width, int height) const {
        return w > 0 && h > 0 && left() >= 0 && top() >= 0 && left() + w <= width && top() + h <= height;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

inline double center_distance(const Box& a, const Box& b) { return std::hypot(a.cx - b.cx, a.cy - b.cy); }

struct TrackerOptions {
    int search_radius = 8;
    double blend_rate = 0.05;
    /// Minimum correlation for a match to update the template.
    double confidence = 0.5;
};

struct TrackState {
    std::vector<double> patch;  // h x w template, row-major
    Box box;
    int search_radius = 8;
};

namespace detail {

inline std::vector<double> extract_patch(const Frame& f, int left, int top, int w, int h) {
    std::vector<double> p(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) p[static_cast<std::size_t>(y * w + x)] = f(left + x, top + y);
    }
    return p;
}

// Normalized cross-correlation of the template (already mean-free, with norm
// tnorm) against the window at (left, top).
inline double ncc_at(const Frame& f, std::span<const double> centered, double tnorm, int left, int top, int w,
                     int h) {
    double sum = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) sum += f(left + x, top + y);
    }
    const double mean = sum / (static_cast<double>(w) * h);
    double cross = 0.0;
    double pnorm2 = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double p = f(left + x, top + y) - mean;
            cross += p * centered[static_cast<std::size_t>(y * w + x)];
            pnorm2 += p * p;
        }
    }
    const double denom = tnorm * std::sqrt(pnorm2);
    return denom > 0.0 ? cross / denom : 0.0;
}

}  // namespace detail

/// Template tracker. Returns one box per frame; boxes[0] is init_box.
inline std::vector<Box> track(const VideoSequence& seq, const Box& init_box, const TrackerOptions& opt = {}) {
    seq.validate();
    if (!init_box.inside(seq.width(), seq.height())) throw InvalidArgument("track: initial box outside frame 0");
    if (opt.search_radius < 0) throw InvalidArgument("track: negative search radius");

    TrackState state;
    state.box = init_box;
    state.search_radius = opt.search_radius;
    state.patch = detail::extract_patch(seq.frames[0], init_box.left(), init_box.top(), init_box.w, init_box.h);

    std::vector<Box> out{init_box};
    const int w = init_box.w;
    const int h = init_box.h;
    std::vector<double> centered(state.patch.size());
    for (std::size_t k = 1; k < seq.size(); ++k) {
        const Frame& f = seq.frames[k];
        double tmean = 0.0;
        for (double v : state.patch) tmean += v;
        tmean /= static_cast<double>(state.patch.size());
        double tnorm2 = 0.0;
        for (std::size_t i = 0; i < centered.size(); ++i) {
            centered[i] = state.patch[i] - tmean;
            tnorm2 += centered[i] * centered[i];
        }
        const double tnorm = std::sqrt(tnorm2);

        const int left0 = state.box.left();
        const int top0 = state.box.top();
        double best = -2.0;
        int best_left = left0;
        int best_top = top0;
        for (int dy = -state.search_radius; dy <= state.search_radius; ++dy) {
            const int top = top0 + dy;
            if (top < 0 || top + h > f.height()) continue;
            for (int dx = -state.search_radius; dx <= state.search_radius; ++dx) {
                const int left = left0 + dx;
                if (left < 0 || left + w > f.width()) continue;
                const double score = detail::ncc_at(f, centered, tnorm, left, top, w, h);
                // Prefer the smaller displacement on ties so static scenes stay put.
                if (score > best + 1e-12 ||
                    (std::abs(score - best) <= 1e-12 &&
                     std::abs(dx) + std::abs(dy) < std::abs(best_left - left0) + std::abs(best_top - top0))) {
                    best = score;
                    best_left = left;
                    best_top = top;
                }
            }
        }
        state.box = Box::from_corner(best_left, best_top, w, h);
        if (best >= opt.confidence) {
            const auto patch = detail::extract_patch(f, best_left, best_top, w, h);
            for (std::size_t i = 0; i < patch.size(); ++i) {
                state.patch[i] = (1.0 - opt.blend_rate) * state.patch[i] + opt.blend_rate * patch[i];
            }
        }
        out.push_back(state.box);
    }
    return out;
}

inline constexpr double kDefaultSuccessThreshold = 20.0;

/// Percentage of frames whose predicted center lies within `threshold` pixels of the truth.
inline double success_rate(std::span<const Box> pred, std::span<const Box> truth,
                           double threshold = kDefaultSuccessThreshold) {
    if (pred.size() != truth.size()) {
        throw InvalidArgument("success_rate: " + std::to_string(pred.size()) + " predictions for " +
                              std::to_string(truth.size()) + " ground-truth boxes");
    }
    if (pred.empty()) throw InvalidArgument("success_rate: no frames");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (center_distance(pred[i], truth[i]) <= threshold) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// One `frame_index,cx,cy,w,h` line per frame.
inline std::string format_boxes(std::span<const Box> boxes) {
    std::string out;
    char line[128];
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.2f,%.2f,%d,%d\n", i, boxes[i].cx, boxes[i].cy, boxes[i].w,
                      boxes[i].h);
        out += line;
    }
    return out;
}

inline std::vector<Box> parse_boxes(std::istream& in) {
    std::vector<Box> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::size_t index = 0;
        Box b;
        if (!(fields >> index >> b.cx >> b.cy >> b.w >> b.h)) {
            if (lineno == 1) continue;  // header row
            throw FormatError("boxes: malformed line " + std::to_string(lineno));
        }
        if (index != boxes.size()) throw FormatError("boxes: frame index out of order at line " + std::to_string(lineno));
        boxes.push_back(b);
    }
    return boxes;
}

inline std::vector<Box> load_boxes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_boxes(in);
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct SceneOptions {
    int width = 176;
    int height = 144;
    int frames = 48;
    int target_size = 16;
    /// Target intensity offset over the local background.
    double target_contrast = 70.0;
    double vx = 2.0;
    double vy = 1.0;
    /// Per-frame sensor noise variance (0 = clean).
    double sensor_noise = 0.0;
    /// Amplitude of the static background texture.
    double texture = 12.0;
    std::uint64_t seed = 1;
};

struct SyntheticScene {
    VideoSequence sequence;
    std::vector<Box> truth;
};

/// Static textured background (illumination gradient, a few fixed objects,
/// smooth random texture) with one textured square moving at constant
/// velocity and bouncing off the borders.
inline SyntheticScene make_scene(const SceneOptions& opt) {
    if (opt.target_size < 4 || opt.target_size * 2 > std::min(opt.width, opt.height)) {
        throw InvalidArgument("scene: target size does not fit the frame");
    }
    const int w = opt.width;
    const int h = opt.height;
    GaussianStream gauss(opt.seed);

    // Value noise on a coarse 8-pixel lattice, bilinearly interpolated.
    const int gw = w / 8 + 2;
    const int gh = h / 8 + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * static_cast<std::size_t>(gh));
    for (auto& v : lattice) v = gauss.next();
    std::vector<double> bg(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fx = x / 8.0;
            const double fy = y / 8.0;
            const int ix = static_cast<int>(fx);
            const int iy = static_cast<int>(fy);
            const double tx = fx - ix;
            const double ty = fy - iy;
            auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j * gw + i)]; };
            const double noise = (1 - ty) * ((1 - tx) * at(ix, iy) + tx * at(ix + 1, iy)) +
                                 ty * ((1 - tx) * at(ix, iy + 1) + tx * at(ix + 1, iy + 1));
            bg[static_cast<std::size_t>(y * w + x)] = 90.0 + 60.0 * x / w + 30.0 * y / h + opt.texture * noise;
        }
    }
    // A few static "furniture" rectangles.
    const int n_rects = 4;
    for (int r = 0; r < n_rects; ++r) {
        const int rw = w / 6 + static_cast<int>(std::abs(gauss.next()) * w / 12);
        const int rh = h / 6 + static_cast<int>(std::abs(gauss.next()) * h / 12);
        const int rx = static_cast<int>(std::fmod(std::abs(gauss.next()) * w, std::max(1, w - rw)));
        const int ry = static_cast<int>(std::fmod(std::abs(gauss.next()) * h, std::max(1, h - rh)));
        const double shade = 20.0 * gauss.next();
        for (int y = ry; y < std::min(h, ry + rh); ++y) {
            for (int x = rx; x < std::min(w, rx + rw); ++x) bg[static_cast<std::size_t>(y * w + x)] += shade;
        }
    }

    // Target texture: a fixed aperiodic 4x4 pattern of bright and dim cells.
    constexpr std::array<int, 16> kCells = {1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 0, 1};
    const int ts = opt.target_size;
    std::vector<double> target(static_cast<std::size_t>(ts) * static_cast<std::size_t>(ts));
    for (int y = 0; y < ts; ++y) {
        for (int x = 0; x < ts; ++x) {
            const auto cell = static_cast<std::size_t>((y * 4 / ts) * 4 + x * 4 / ts);
            target[static_cast<std::size_t>(y * ts + x)] = opt.target_contrast * (kCells[cell] ? 1.0 : 0.3);
        }
    }

    SyntheticScene scene;
    scene.sequence.frame_rate = 30.0;
    double px = w / 4.0 - ts / 2.0;
    double py = h / 3.0 - ts / 2.0;
    double vx = opt.vx;
    double vy = opt.vy;
    for (int k = 0; k < opt.frames; ++k) {
        const int left = static_cast<int>(std::lround(px));
        const int top = static_cast<int>(std::lround(py));
        Frame f(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double v = bg[static_cast<std::size_t>(y * w + x)];
                if (x >= left && x < left + ts && y >= top && y < top + ts) {
                    v += target[static_cast<std::size_t>((y - top) * ts + (x - left))];
                }
                f(x, y) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
            }
        }
        if (opt.sensor_noise > 0) f = add_noise(f, opt.sensor_noise, opt.seed * 7919 + static_cast<std::uint64_t>(k));
        scene.sequence.frames.push_back(std::move(f));
        scene.truth.push_back(Box::from_corner(left, top, ts, ts));

        px += vx;
        py += vy;
        if (px < 0 || px + ts > w) {
            vx = -vx;
            px += 2 * vx;
        }
        if (py < 0 || py + ts > h) {
            vy = -vy;
            py += 2 * vy;
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
    int gop_size = 5;
    double cr_key = 23.0;
    double cr_cs = 50.0;
};

struct SweepRow {
    int gop_size = 0;
    double cr_key = 0;
    double cr_cs = 0;
    double nominal_total_cr = 0;
    double realized_total_cr = 0;
    double mean_psnr_db = 0;
    double key_psnr_db = 0;
    std::optional<double> track_sr_percent;
    /// Set when the cell failed; the metric fields are then meaningless.
    std::string error;
};

struct SweepOptions {
    std::uint64_t seed = 42;
    SolverParams solver;
    unsigned workers = 1;
    TrackerOptions tracker;
    double sr_threshold = kDefaultSuccessThreshold;
};

/// Grid built from GOP sizes and CS ratios at one key-frame ratio.
inline std::vector<SweepCell> make_grid(std::span<const int> gops, double cr_key, std::span<const double> cs_ratios) {
    std::vector<SweepCell> grid;
    for (int g : gops) {
        for (double cs : cs_ratios) grid.push_back({g, cr_key, cs});
    }
    return grid;
}

/// Encode, decode and score one configuration.
inline SweepRow run_cell(const VideoSequence& seq, const SweepCell& cell, const SweepOptions& opt,
                         const std::vector<Box>* truth = nullptr) {
    SweepRow row;
    row.gop_size = cell.gop_size;
    row.cr_key = cell.cr_key;
    row.cr_cs = cell.cr_cs;
    try {
        row.nominal_total_cr = total_cr(cell.gop_size, cell.cr_key, cell.cr_cs);
        GopConfig cfg;
        cfg.gop_size = cell.gop_size;
        cfg.cr_key = cell.cr_key;
        cfg.cr_cs = cell.cr_cs;
        cfg.seed = opt.seed;
        const auto bytes = write_container(seq, cfg);
        const auto parsed = parse_container(bytes);
        row.realized_total_cr = container_stats(parsed).realized_cr;
        const auto decoded = decode_container(parsed, opt.solver, opt.workers);

        const auto scores = psnr_per_frame(seq, decoded.sequence);
        double all = 0.0;
        double keys = 0.0;
        std::size_t key_count = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            all += scores[i];
            if (i % static_cast<std::size_t>(cell.gop_size) == 0) {
                keys += scores[i];
                ++key_count;
            }
        }
        row.mean_psnr_db = all / static_cast<double>(scores.size());
        row.key_psnr_db = keys / static_cast<double>(key_count);
        if (truth) {
            const auto boxes = track(decoded.sequence, truth->front(), opt.tracker);
            row.track_sr_percent = success_rate(boxes, *truth, opt.sr_threshold);
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

/// Run every cell in grid order. Failing cells are reported in their row.
inline std::vector<SweepRow> run_sweep(const VideoSequence& seq, std::span<const SweepCell> grid,
                                       const SweepOptions& opt = {}, const std::vector<Box>* truth = nullptr) {
    if (grid.empty()) throw InvalidArgument("sweep: empty grid");
    seq.validate();
    if (truth && truth->size() != seq.size()) {
        throw InvalidArgument("sweep: " + std::to_string(truth->size()) + " ground-truth boxes for " +
                              std::to_string(seq.size()) + " frames");
    }
    std::vector<SweepRow> rows;
    for (const auto& cell : grid) rows.push_back(run_cell(seq, cell, opt, truth));
    return rows;
}

inline constexpr const char* kSweepCsvHeader = "gop,cr_key,cr_cs,nominal_cr,realized_cr,mean_psnr,key_psnr,track_sr";

inline std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = std::string(kSweepCsvHeader) + "\n";
    char buf[256];
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            std::snprintf(buf, sizeof buf, "%d,%g,%g,%.2f,NA,NA,NA,NA\n", r.gop_size, r.cr_key, r.cr_cs,
                          r.nominal_total_cr);
        } else if (r.track_sr_percent) {
            std::snprintf(buf, sizeof buf, "%d,%g,%g,%.2f,%.2f,%.4f,%.4f,%.2f\n", r.gop_size, r.cr_key, r.cr_cs,
                          r.nominal_total_cr, r.realized_total_cr, r.mean_psnr_db, r.key_psnr_db,
                          *r.track_sr_percent);
        } else {
            std::snprintf(buf, sizeof buf, "%d,%g,%g,%.2f,%.2f,%.4f,%.4f,NA\n", r.gop_size, r.cr_key, r.cr_cs,
                          r.nominal_total_cr, r.realized_total_cr, r.mean_psnr_db, r.key_psnr_db);
        }
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Noise ladder

struct NoiseRow {
    double variance = 0;
    double mean_psnr_db = 0;
    std::optional<double> track_sr_percent;
};

/// Degrade the sequence at each variance, score PSNR and (with ground truth) tracking.
inline std::vector<NoiseRow> run_noise_ladder(const VideoSequence& seq, std::span<const double> variances,
                                              std::uint64_t seed, const std::vector<Box>* truth = nullptr,
                                              const TrackerOptions& tracker = {},
                                              double sr_threshold = kDefaultSuccessThreshold) {
    seq.validate();
    std::vector<NoiseRow> rows;
    for (double v : variances) {
        const auto noisy = add_noise(seq, v, seed);
        NoiseRow row;
        row.variance = v;
        double sum = 0.0;
        for (double p : psnr_per_frame(seq, noisy)) sum += p;
        row.mean_psnr_db = sum / static_cast<double>(seq.size());
        if (truth) row.track_sr_percent = success_rate(track(noisy, truth->front(), tracker), *truth, sr_threshold);
        rows.push_back(row);
    }
    return rows;
}

inline std::string noise_csv(std::span<const NoiseRow> rows) {
    std::string out = "variance,psnr,track_sr\n";
    char buf[128];
    for (const auto& r : rows) {
        if (r.track_sr_percent) {
            std::snprintf(buf, sizeof buf, "%g,%.4f,%.2f\n", r.variance, r.mean_psnr_db, *r.track_sr_percent);
        } else {
            std::snprintf(buf, sizeof buf, "%g,%.4f,NA\n", r.variance, r.mean_psnr_db);
        }
        out += buf;
    }
    return out;
}

}  // namespace csvc
