#pragma once

// Key-frame coder: 8x8 block DCT, uniform quantization against the standard
// luminance matrix, zigzag run-length symbols and per-frame canonical prefix
// codes. A bisection on the quantizer scale hits a requested compression ratio.
//
// IntraBitstream layout (little-endian):
//   u16 width, u16 height, f32 quant_scale, u32 payload length, payload
// payload:
//   DC code table, AC code table, u32 entropy byte count, entropy bytes,
//   u32 CRC-32 of everything before it in the payload

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <zlib.h>

#include "csvc/detail/bit_io.hpp"
#include "csvc/detail/byte_io.hpp"
#include "csvc/detail/huffman.hpp"
#include "csvc/errors.hpp"
#include "csvc/frame.hpp"

namespace csvc {

inline constexpr float kMinQuantScale = 1.0f / 32.0f;
inline constexpr float kMaxQuantScale = 64.0f;

/// Header bytes in front of every intra payload.
inline constexpr std::size_t kIntraHeaderBytes = 12;

struct IntraBitstream {
    int width = 0;
    int height = 0;
    float quant_scale = 1.0f;
    std::vector<std::uint8_t> payload;

    std::size_t size_bytes() const { return kIntraHeaderBytes + payload.size(); }

    friend bool operator==(const IntraBitstream&, const IntraBitstream&) = default;
};

inline void write_intra(detail::ByteWriter& out, const IntraBitstream& b) {
    out.put(static_cast<std::uint16_t>(b.width));
    out.put(static_cast<std::uint16_t>(b.height));
    out.put_f32(b.quant_scale);
    out.put(static_cast<std::uint32_t>(b.payload.size()));
    out.put_bytes(b.payload);
}

inline std::vector<std::uint8_t> serialize_intra(const IntraBitstream& b) {
    detail::ByteWriter out;
    write_intra(out, b);
    return out.take();
}

inline IntraBitstream read_intra(detail::ByteReader& in) {
    IntraBitstream b;
    b.width = in.get<std::uint16_t>();
    b.height = in.get<std::uint16_t>();
    b.quant_scale = in.get_f32();
    const auto len = in.get<std::uint32_t>();
    const auto bytes = in.get_bytes(len);
    b.payload.assign(bytes.begin(), bytes.end());
    return b;
}

inline IntraBitstream parse_intra(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, "intra");
    auto b = read_intra(in);
    if (in.remaining() != 0) throw FormatError("intra: trailing bytes after payload");
    return b;
}

namespace detail {

// ITU-T T.81 Annex K, Table K.1, in natural (row-major) order.
inline constexpr std::array<int, 64> kLumaQuant = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

// zigzag position -> natural index
inline constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,   //
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,  //
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,  //
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
};

inline constexpr std::uint8_t kEob = 0x00;
inline constexpr std::uint8_t kZrl = 0xF0;
inline constexpr int kMaxMagnitudeBits = 15;

struct DctBasis {
    std::array<double, 64> c{};  // c[u * 8 + x]
    DctBasis() {
        for (int u = 0; u < 8; ++u) {
            const double norm = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) {
                c[static_cast<std::size_t>(u * 8 + x)] =
                    norm * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
            }
        }
    }
};

inline const DctBasis& dct_basis() {
    static const DctBasis basis;
    return basis;
}

// Orthonormal 2-D DCT-II of one 8x8 block, in place.
inline void fdct8x8(std::array<double, 64>& block) {
    const auto& c = dct_basis().c;
    std::array<double, 64> tmp{};
    for (int y = 0; y < 8; ++y) {
        for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int x = 0; x < 8; ++x) s += c[static_cast<std::size_t>(u * 8 + x)] * block[static_cast<std::size_t>(y * 8 + x)];
            tmp[static_cast<std::size_t>(y * 8 + u)] = s;
        }
    }
    for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int y = 0; y < 8; ++y) s += c[static_cast<std::size_t>(v * 8 + y)] * tmp[static_cast<std::size_t>(y * 8 + u)];
            block[static_cast<std::size_t>(v * 8 + u)] = s;
        }
    }
}

inline void idct8x8(std::array<double, 64>& block) {
    const auto& c = dct_basis().c;
    std::array<double, 64> tmp{};
    for (int v = 0; v < 8; ++v) {
        for (int x = 0; x < 8; ++x) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += c[static_cast<std::size_t>(u * 8 + x)] * block[static_cast<std::size_t>(v * 8 + u)];
            tmp[static_cast<std::size_t>(v * 8 + x)] = s;
        }
    }
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            double s = 0;
            for (int v = 0; v < 8; ++v) s += c[static_cast<std::size_t>(v * 8 + y)] * tmp[static_cast<std::size_t>(v * 8 + x)];
            block[static_cast<std::size_t>(y * 8 + x)] = s;
        }
    }
}

inline std::array<double, 64> quant_steps(float quant_scale) {
    std::array<double, 64> steps{};
    for (std::size_t k = 0; k < 64; ++k) {
        steps[k] = std::max(1.0, static_cast<double>(quant_scale) * kLumaQuant[k]);
    }
    return steps;
}

inline int magnitude_bits(int v) {
    return static_cast<int>(std::bit_width(static_cast<unsigned>(v < 0 ? -v : v)));
}

inline std::uint32_t magnitude_code(int v, int size) {
    return static_cast<std::uint32_t>(v >= 0 ? v : v + (1 << size) - 1);
}

inline int magnitude_value(std::uint32_t code, int size) {
    if (size == 0) return 0;
    if (code >> (size - 1)) return static_cast<int>(code);
    return static_cast<int>(code) - (1 << size) + 1;
}

inline int padded(int side) { return (side + 7) / 8 * 8; }

// One coded symbol plus its magnitude bits.
struct Token {
    std::uint8_t symbol;
    bool dc;
    std::uint32_t extra;
    int extra_bits;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace detail

/// Transform-code one frame at a fixed quantizer scale.
inline IntraBitstream encode_intra(const Frame& f, float quant_scale) {
    if (!(quant_scale > 0) || !std::isfinite(quant_scale)) {
        throw InvalidArgument("intra: quant_scale must be positive");
    }
    if (f.width() > 0xFFFF || f.height() > 0xFFFF) throw InvalidArgument("intra: frame too large");
    const auto steps = detail::quant_steps(quant_scale);
    const int pw = detail::padded(f.width());
    const int ph = detail::padded(f.height());

    std::vector<detail::Token> tokens;
    std::array<std::uint64_t, 256> dc_freq{};
    std::array<std::uint64_t, 256> ac_freq{};
    auto emit = [&](std::uint8_t symbol, bool dc, int value, int size) {
        tokens.push_back({symbol, dc, detail::magnitude_code(value, size), size});
        ++(dc ? dc_freq : ac_freq)[symbol];
    };

    int prev_dc = 0;
    std::array<double, 64> block{};
    std::array<int, 64> q{};
    for (int by = 0; by < ph; by += 8) {
        for (int bx = 0; bx < pw; bx += 8) {
            for (int y = 0; y < 8; ++y) {
                const int sy = std::min(by + y, f.height() - 1);
                for (int x = 0; x < 8; ++x) {
                    const int sx = std::min(bx + x, f.width() - 1);
                    block[static_cast<std::size_t>(y * 8 + x)] = static_cast<double>(f(sx, sy)) - 128.0;
                }
            }
            detail::fdct8x8(block);
            for (std::size_t k = 0; k < 64; ++k) q[k] = static_cast<int>(std::lround(block[k] / steps[k]));

            const int diff = q[0] - prev_dc;
            prev_dc = q[0];
            const int dc_size = detail::magnitude_bits(diff);
            emit(static_cast<std::uint8_t>(dc_size), true, diff, dc_size);

            int run = 0;
            for (int z = 1; z < 64; ++z) {
                const int v = q[static_cast<std::size_t>(detail::kZigzag[static_cast<std::size_t>(z)])];
                if (v == 0) {
                    ++run;
                    continue;
                }
                while (run > 15) {
                    emit(detail::kZrl, false, 0, 0);
                    run -= 16;
                }
                const int size = detail::magnitude_bits(v);
                emit(static_cast<std::uint8_t>((run << 4) | size), false, v, size);
                run = 0;
            }
            if (run > 0) emit(detail::kEob, false, 0, 0);
        }
    }

    const auto dc_table = detail::HuffmanTable::from_frequencies(dc_freq);
    const auto ac_table = detail::HuffmanTable::from_frequencies(ac_freq);
    detail::BitWriter bits;
    for (const auto& t : tokens) {
        (t.dc ? dc_table : ac_table).encode(bits, t.symbol);
        if (t.extra_bits > 0) bits.put(t.extra, t.extra_bits);
    }
    const auto entropy = bits.finish();

    detail::ByteWriter payload;
    dc_table.write(payload);
    ac_table.write(payload);
    payload.put(static_cast<std::uint32_t>(entropy.size()));
    payload.put_bytes(entropy);
    payload.put(detail::crc32_of(payload.bytes()));

    return {f.width(), f.height(), quant_scale, payload.take()};
}

/// Inverse of encode_intra. Throws FormatError on any inconsistency, including
/// a checksum mismatch.
inline Frame decode_intra(const IntraBitstream& b) {
    if (b.width < kMinFrameSide || b.height < kMinFrameSide) throw FormatError("intra: bad dimensions");
    if (!(b.quant_scale > 0) || !std::isfinite(b.quant_scale)) throw FormatError("intra: bad quant_scale");
    if (b.payload.size() < 4) throw FormatError("intra: truncated payload");
    const std::span<const std::uint8_t> body(b.payload.data(), b.payload.size() - 4);
    {
        detail::ByteReader tail(std::span<const std::uint8_t>(b.payload).subspan(body.size()), "intra");
        if (tail.get<std::uint32_t>() != detail::crc32_of(body)) throw FormatError("intra: checksum mismatch");
    }

    detail::ByteReader in(body, "intra");
    const auto dc_table = detail::HuffmanTable::read(in);
    const auto ac_table = detail::HuffmanTable::read(in);
    const auto entropy_len = in.get<std::uint32_t>();
    detail::BitReader bits(in.get_bytes(entropy_len));
    if (in.remaining() != 0) throw FormatError("intra: trailing payload bytes");

    const auto steps = detail::quant_steps(b.quant_scale);
    const int pw = detail::padded(b.width);
    const int ph = detail::padded(b.height);
    Frame out(b.width, b.height);

    int prev_dc = 0;
    std::array<double, 64> block{};
    for (int by = 0; by < ph; by += 8) {
        for (int bx = 0; bx < pw; bx += 8) {
            std::array<int, 64> q{};
            const int dc_size = dc_table.decode(bits);
            if (dc_size > detail::kMaxMagnitudeBits) throw FormatError("intra: bad DC symbol");
            prev_dc += detail::magnitude_value(bits.bits(dc_size), dc_size);
            q[0] = prev_dc;
            for (int z = 1; z < 64;) {
                const auto sym = ac_table.decode(bits);
                if (sym == detail::kEob) break;
                if (sym == detail::kZrl) {
                    z += 16;
                    if (z > 64) throw FormatError("intra: run past end of block");
                    continue;
                }
                const int run = sym >> 4;
                const int size = sym & 0x0F;
                if (size == 0) throw FormatError("intra: bad AC symbol");
                z += run;
                if (z >= 64) throw FormatError("intra: run past end of block");
                q[static_cast<std::size_t>(detail::kZigzag[static_cast<std::size_t>(z)])] =
                    detail::magnitude_value(bits.bits(size), size);
                ++z;
            }
            for (std::size_t k = 0; k < 64; ++k) block[k] = q[k] * steps[k];
            detail::idct8x8(block);
            for (int y = 0; y < 8 && by + y < b.height; ++y) {
                for (int x = 0; x < 8 && bx + x < b.width; ++x) {
                    const long v = std::lround(block[static_cast<std::size_t>(y * 8 + x)] + 128.0);
                    out(bx + x, by + y) = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
                }
            }
        }
    }
    if (bits.bits_left() >= 8) throw FormatError("intra: unused entropy data");
    return out;
}

struct IntraRateResult {
    IntraBitstream bitstream;
    double achieved_cr = 0;
    /// Compressed size landed within +-5% of the target.
    bool target_met = false;
    int probes = 0;
};

/// Compression ratio of a bitstream: original 8-bit samples over coded bytes
/// (header included).
inline double intra_cr(const IntraBitstream& b) {
    return static_cast<double>(b.width) * b.height / static_cast<double>(b.size_bytes());
}

/// Search the quantizer scale (log-domain bisection, at most 20 encodes) for a
/// bitstream of n*8/target_cr bits +-5%. When the target is outside the
/// codec's range the closest probe is returned with target_met == false.
inline IntraRateResult encode_at_cr(const Frame& f, double target_cr) {
    if (!(target_cr > 1.0) || !std::isfinite(target_cr)) throw InvalidArgument("intra: target CR must be > 1");
    constexpr int kMaxProbes = 20;
    constexpr double kTolerance = 0.05;
    const double target_bytes = static_cast<double>(f.size()) / target_cr;

    IntraRateResult best;
    double best_err = std::numeric_limits<double>::infinity();
    auto probe = [&](float scale) {
        auto b = encode_intra(f, scale);
        ++best.probes;
        const double size = static_cast<double>(b.size_bytes());
        const double err = std::abs(size - target_bytes);
        if (err < best_err) {
            best_err = err;
            best.bitstream = std::move(b);
        }
        return size;
    };
    auto done = [&] { return best_err <= kTolerance * target_bytes; };

    // Larger scale -> coarser quantization -> fewer bytes.
    const double size_fine = probe(kMinQuantScale);
    if (!done() && size_fine > target_bytes) {
        const double size_coarse = probe(kMaxQuantScale);
        if (!done() && size_coarse < target_bytes) {
            double lo = std::log2(static_cast<double>(kMinQuantScale));
            double hi = std::log2(static_cast<double>(kMaxQuantScale));
            while (!done() && best.probes < kMaxProbes) {
                const double mid = 0.5 * (lo + hi);
                const double size = probe(static_cast<float>(std::exp2(mid)));
                (size > target_bytes ? lo : hi) = mid;
            }
        }
    }
    best.target_met = done();
    best.achieved_cr = intra_cr(best.bitstream);
    return best;
}

}  // namespace csvc
