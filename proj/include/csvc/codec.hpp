#pragma once

// GOP coding and the .csvc container.
//
// Each GOP is one intra-coded key frame followed by G-1 CS frames. A CS frame
// is sent as the quantized Gaussian measurements of its difference from the
// *decoded* key frame, so the key codec's error is inside the residual and
// cancels when the decoder adds the reconstructed residual back.
//
// Container layout (little-endian):
//   "CSVC", u8 version = 1, u16 width, u16 height, u32 frame_count,
//   u8 gop_size, f32 cr_key, f32 cr_cs, u32 m, u64 seed, f32 frame_rate
//   per GOP: u32 key length, IntraBitstream
//            per CS frame: f32 scale, m x i16 codes

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csvc/detail/byte_io.hpp"
#include "csvc/detail/parallel.hpp"
#include "csvc/errors.hpp"
#include "csvc/frame.hpp"
#include "csvc/intra_codec.hpp"
#include "csvc/measurement.hpp"
#include "csvc/tv_solver.hpp"

namespace csvc {

struct GopConfig {
    int gop_size = 5;
    double cr_key = 23.0;
    double cr_cs = 50.0;
    std::uint64_t seed = 42;
    /// Measure GOP k with the matrix of seed ^ k instead of one matrix for the
    /// whole video. Library-level only; the v1 container always uses one matrix.
    bool per_gop_seed = false;

    void validate() const {
        if (gop_size < 1 || gop_size > 255) throw InvalidArgument("gop size must be in [1, 255]");
        if (!(cr_key > 1.0) || !std::isfinite(cr_key)) throw InvalidArgument("cr_key must be > 1");
        if (!(cr_cs >= 1.0) || !std::isfinite(cr_cs)) throw InvalidArgument("cr_cs must be >= 1");
    }

    std::size_t rows(std::size_t n) const { return rows_for_ratio(n, cr_cs); }

    std::uint64_t seed_for_gop(std::size_t gop_index) const {
        return per_gop_seed ? seed ^ static_cast<std::uint64_t>(gop_index) : seed;
    }
};

struct EncodedGop {
    IntraBitstream key;
    std::vector<QuantizedMeasurements> cs_frames;

    friend bool operator==(const EncodedGop&, const EncodedGop&) = default;
};

/// GOP-level compression ratio: G frames over (1/cr_key + (G-1)/cr_cs) frames' worth of data.
inline double total_cr(int gop_size, double cr_key, double cr_cs) {
    if (gop_size < 1 || !(cr_key > 0) || !(cr_cs > 0)) throw InvalidArgument("total_cr: arguments must be positive");
    return gop_size / (1.0 / cr_key + (gop_size - 1) / cr_cs);
}

/// Lengths of consecutive GOPs covering frame_count frames; the last may be short.
inline std::vector<int> gop_lengths(std::size_t frame_count, int gop_size) {
    if (gop_size < 1) throw InvalidArgument("gop size must be >= 1");
    std::vector<int> out;
    for (std::size_t done = 0; done < frame_count; done += static_cast<std::size_t>(gop_size)) {
        out.push_back(static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(gop_size), frame_count - done)));
    }
    return out;
}

/// Sample-count CR of a whole sequence, counting a short final GOP as it is.
inline double nominal_sequence_cr(std::size_t frame_count, int gop_size, double cr_key, double cr_cs) {
    double coded_frames = 0.0;
    for (int len : gop_lengths(frame_count, gop_size)) coded_frames += 1.0 / cr_key + (len - 1) / cr_cs;
    return static_cast<double>(frame_count) / coded_frames;
}

namespace detail {

inline EncodedGop encode_group(std::span<const Frame> frames, const GopConfig& cfg,
                               const MeasurementMatrix& a) {
    if (frames.empty()) throw InvalidArgument("encode_gop: empty GOP");
    for (const auto& f : frames) {
        if (f.size() != a.cols()) {
            throw InvalidArgument("encode_gop: frame has " + std::to_string(f.size()) +
                                  " pixels, matrix expects " + std::to_string(a.cols()));
        }
        require_same_shape(f, frames.front(), "encode_gop");
    }
    EncodedGop gop;
    gop.key = encode_at_cr(frames.front(), cfg.cr_key).bitstream;
    // Residuals reference the key frame as the decoder will see it.
    const Frame key_decoded = decode_intra(gop.key);
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const auto residual = to_vector(frame_diff(frames[i], key_decoded));
        gop.cs_frames.push_back(quantize(measure(a, residual)));
    }
    return gop;
}

}  // namespace detail

/// Encode exactly G frames: key = frames[0], CS frames = frames[1..G-1].
inline EncodedGop encode_gop(std::span<const Frame> frames, const GopConfig& cfg,
                             const MeasurementMatrix& a) {
    cfg.validate();
    if (frames.size() != static_cast<std::size_t>(cfg.gop_size)) {
        throw InvalidArgument("encode_gop: got " + std::to_string(frames.size()) + " frames, GOP size is " +
                              std::to_string(cfg.gop_size));
    }
    return detail::encode_group(frames, cfg, a);
}

struct GopDecodeResult {
    std::vector<Frame> frames;
    /// Per output frame; the key frame is always true. A false entry means the
    /// solver hit its iteration cap (the frame is still produced).
    std::vector<bool> converged;
};

namespace detail {

inline Frame decode_cs_frame(const Frame& key, const QuantizedMeasurements& q, const MeasurementMatrix& a,
                             const SolverParams& solver, bool& converged) {
    if (q.codes.size() != a.rows()) {
        throw FormatError("CS frame has " + std::to_string(q.codes.size()) + " measurements, expected " +
                          std::to_string(a.rows()));
    }
    const auto rec = reconstruct(a, dequantize(q), key.width(), key.height(), solver);
    converged = rec.converged;
    return frame_add(key, residual_from_vector(rec.x, key.width(), key.height()));
}

}  // namespace detail

/// Decode one GOP. CS frames are reconstructed on up to `workers` threads;
/// the output does not depend on the worker count.
inline GopDecodeResult decode_gop(const EncodedGop& g, const GopConfig& cfg, const MeasurementMatrix& a,
                                  const SolverParams& solver = {}, unsigned workers = 1) {
    if (g.cs_frames.size() + 1 > static_cast<std::size_t>(cfg.gop_size)) {
        throw FormatError("decode_gop: more CS frames than the GOP size allows");
    }
    const Frame key = decode_intra(g.key);
    if (key.size() != a.cols()) throw FormatError("decode_gop: key frame size does not match the matrix");

    GopDecodeResult out;
    out.frames.resize(g.cs_frames.size() + 1);
    std::vector<char> converged(g.cs_frames.size() + 1, 1);
    out.frames[0] = key;
    detail::parallel_for(g.cs_frames.size(), workers, [&](std::size_t i) {
        bool ok = false;
        out.frames[i + 1] = detail::decode_cs_frame(key, g.cs_frames[i], a, solver, ok);
        converged[i + 1] = ok;
    });
    out.converged.assign(converged.begin(), converged.end());
    return out;
}

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 38;

struct ContainerHeader {
    std::uint8_t version = kContainerVersion;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint32_t frame_count = 0;
    std::uint8_t gop_size = 0;
    /// Key-frame CR the encoder was asked for. The achieved value follows
    /// from the key-frame sizes (see ContainerStats).
    float cr_key = 0;
    float cr_cs = 0;
    std::uint32_t m = 0;
    std::uint64_t seed = 0;
    float frame_rate = 0;

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }

    GopConfig config() const {
        GopConfig cfg;
        cfg.gop_size = gop_size;
        cfg.cr_key = cr_key;
        cfg.cr_cs = cr_cs;
        cfg.seed = seed;
        return cfg;
    }

    friend bool operator==(const ContainerHeader&, const ContainerHeader&) = default;
};

struct ParsedContainer {
    ContainerHeader header;
    std::vector<EncodedGop> gops;
    std::size_t byte_size = 0;
};

/// Rate figures for one container.
struct ContainerStats {
    double nominal_gop_cr = 0;       // total_cr(G, cr_key, cr_cs)
    double nominal_sequence_cr = 0;  // same accounting with the real GOP lengths
    double realized_cr = 0;          // original bytes / container bytes
    double key_cr_achieved = 0;      // original key bytes / coded key bytes
    double cs_cr_realized = 0;       // per CS frame: n bytes / (4 + 2m)
};

inline ContainerStats container_stats(const ParsedContainer& c) {
    const auto& h = c.header;
    ContainerStats s;
    s.nominal_gop_cr = total_cr(h.gop_size, h.cr_key, h.cr_cs);
    s.nominal_sequence_cr = nominal_sequence_cr(h.frame_count, h.gop_size, h.cr_key, h.cr_cs);
    const double n = static_cast<double>(h.pixels());
    s.realized_cr = n * h.frame_count / static_cast<double>(c.byte_size);
    double key_bytes = 0;
    for (const auto& g : c.gops) key_bytes += static_cast<double>(g.key.size_bytes());
    s.key_cr_achieved = n * static_cast<double>(c.gops.size()) / key_bytes;
    s.cs_cr_realized = n / (4.0 + 2.0 * h.m);
    return s;
}

/// Encode a whole sequence into container bytes.
inline std::vector<std::uint8_t> write_container(const VideoSequence& seq, const GopConfig& cfg_in) {
    seq.validate();
    cfg_in.validate();
    if (cfg_in.per_gop_seed) throw InvalidArgument("container v1 does not support per-GOP seeds");
    if (seq.width() > 0xFFFF || seq.height() > 0xFFFF) throw InvalidArgument("frame too large for container");
    if (seq.size() > 0xFFFFFFFFu) throw InvalidArgument("too many frames for container");

    // The header stores ratios as f32; derive everything from the stored values.
    GopConfig cfg = cfg_in;
    cfg.cr_key = static_cast<float>(cfg_in.cr_key);
    cfg.cr_cs = static_cast<float>(cfg_in.cr_cs);

    const std::size_t n = seq.frames.front().size();
    const std::size_t m = cfg.rows(n);
    const auto matrix = MatrixCache::global().get(cfg.seed, m, n);

    detail::ByteWriter out;
    out.put_tag("CSVC", 4);
    out.put(kContainerVersion);
    out.put(static_cast<std::uint16_t>(seq.width()));
    out.put(static_cast<std::uint16_t>(seq.height()));
    out.put(static_cast<std::uint32_t>(seq.size()));
    out.put(static_cast<std::uint8_t>(cfg.gop_size));
    out.put_f32(static_cast<float>(cfg.cr_key));
    out.put_f32(static_cast<float>(cfg.cr_cs));
    out.put(static_cast<std::uint32_t>(m));
    out.put(cfg.seed);
    out.put_f32(static_cast<float>(seq.frame_rate));

    std::size_t start = 0;
    for (int len : gop_lengths(seq.size(), cfg.gop_size)) {
        const auto gop = detail::encode_group(
            std::span<const Frame>(seq.frames).subspan(start, static_cast<std::size_t>(len)), cfg, *matrix);
        out.put(static_cast<std::uint32_t>(gop.key.size_bytes()));
        write_intra(out, gop.key);
        for (const auto& q : gop.cs_frames) {
            out.put_f32(q.scale);
            for (auto c : q.codes) out.put(c);
        }
        start += static_cast<std::size_t>(len);
    }
    return out.take();
}

inline ContainerHeader read_container_header(detail::ByteReader& in) {
    const auto magic = in.get_bytes(4);
    if (!(magic[0] == 'C' && magic[1] == 'S' && magic[2] == 'V' && magic[3] == 'C')) {
        throw FormatError("container: bad magic");
    }
    ContainerHeader h;
    h.version = in.get<std::uint8_t>();
    if (h.version != kContainerVersion) {
        throw FormatError("container: unsupported version " + std::to_string(h.version));
    }
    h.width = in.get<std::uint16_t>();
    h.height = in.get<std::uint16_t>();
    h.frame_count = in.get<std::uint32_t>();
    h.gop_size = in.get<std::uint8_t>();
    h.cr_key = in.get_f32();
    h.cr_cs = in.get_f32();
    h.m = in.get<std::uint32_t>();
    h.seed = in.get<std::uint64_t>();
    h.frame_rate = in.get_f32();

    if (h.width < kMinFrameSide || h.height < kMinFrameSide) throw FormatError("container: bad dimensions");
    if (h.frame_count < 1) throw FormatError("container: no frames");
    if (h.gop_size < 1) throw FormatError("container: bad GOP size");
    if (!(h.cr_key > 1.0f) || !std::isfinite(h.cr_key) || !(h.cr_cs >= 1.0f) || !std::isfinite(h.cr_cs)) {
        throw FormatError("container: bad compression ratios");
    }
    if (h.m != rows_for_ratio(h.pixels(), h.cr_cs)) {
        throw FormatError("container: m = " + std::to_string(h.m) + " inconsistent with cr_cs");
    }
    return h;
}

/// Split container bytes into header and per-GOP payloads without decoding.
inline ParsedContainer parse_container(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, "container");
    ParsedContainer c;
    c.header = read_container_header(in);
    c.byte_size = bytes.size();
    for (int len : gop_lengths(c.header.frame_count, c.header.gop_size)) {
        EncodedGop gop;
        const auto key_len = in.get<std::uint32_t>();
        const auto key_bytes = in.get_bytes(key_len);
        gop.key = parse_intra(key_bytes);
        if (gop.key.width != c.header.width || gop.key.height != c.header.height) {
            throw FormatError("container: key frame dimensions differ from header");
        }
        for (int i = 1; i < len; ++i) {
            QuantizedMeasurements q;
            q.scale = in.get_f32();
            if (!(q.scale > 0) || !std::isfinite(q.scale)) throw FormatError("container: bad measurement scale");
            q.codes.resize(c.header.m);
            for (auto& code : q.codes) code = in.get<std::int16_t>();
            gop.cs_frames.push_back(std::move(q));
        }
        c.gops.push_back(std::move(gop));
    }
    if (in.remaining() != 0) throw FormatError("container: trailing bytes");
    return c;
}

struct DecodedContainer {
    ContainerHeader header;
    VideoSequence sequence;
    std::vector<bool> converged;  // per frame
};

inline DecodedContainer decode_container(const ParsedContainer& c, const SolverParams& solver = {},
                                         unsigned workers = 1) {
    const auto& h = c.header;
    const auto matrix = MatrixCache::global().get(h.seed, h.m, h.pixels());

    DecodedContainer out;
    out.header = h;
    out.sequence.frame_rate = h.frame_rate;
    out.sequence.frames.resize(h.frame_count);
    std::vector<char> converged(h.frame_count, 1);

    struct Job {
        std::size_t gop;
        std::size_t cs;
        std::size_t frame;
    };
    std::vector<Frame> keys;
    std::vector<Job> jobs;
    std::size_t frame = 0;
    for (std::size_t g = 0; g < c.gops.size(); ++g) {
        keys.push_back(decode_intra(c.gops[g].key));
        out.sequence.frames[frame] = keys.back();
        for (std::size_t i = 0; i < c.gops[g].cs_frames.size(); ++i) jobs.push_back({g, i, frame + 1 + i});
        frame += 1 + c.gops[g].cs_frames.size();
    }
    detail::parallel_for(jobs.size(), workers, [&](std::size_t j) {
        const auto& job = jobs[j];
        bool ok = false;
        out.sequence.frames[job.frame] =
            detail::decode_cs_frame(keys[job.gop], c.gops[job.gop].cs_frames[job.cs], *matrix, solver, ok);
        converged[job.frame] = ok;
    });
    out.converged.assign(converged.begin(), converged.end());
    return out;
}

/// parse_container followed by decode_container.
inline DecodedContainer read_container(std::span<const std::uint8_t> bytes, const SolverParams& solver = {},
                                       unsigned workers = 1) {
    return decode_container(parse_container(bytes), solver, workers);
}

}  // namespace csvc
