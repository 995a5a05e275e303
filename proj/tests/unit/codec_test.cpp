#include <gtest/gtest.h>

#include <cstring>

#include "csvc/codec.hpp"
#include "csvc/eval.hpp"
#include "test_support.hpp"

using namespace csvc;
using csvc::testing::natural_frame;

namespace {

VideoSequence scene(int w, int h, int frames, std::uint64_t seed = 1) {
    SceneOptions o;
    o.width = w;
    o.height = h;
    o.frames = frames;
    o.seed = seed;
    return make_scene(o).sequence;
}

template <typename T>
T read_le(const std::vector<std::uint8_t>& b, std::size_t at) {
    T v;
    std::memcpy(&v, b.data() + at, sizeof v);
    return v;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST(TotalCr, PublishedRows) {
    struct Row {
        int g;
        double cs;
        double expected;
    };
    const Row rows[] = {{3, 40, 32.09}, {3, 60, 39.06}, {3, 80, 43.81}, {5, 40, 34.85}, {5, 60, 45.39},
                        {5, 80, 53.49}, {7, 40, 36.18}, {7, 60, 48.79}, {7, 80, 59.08}};
    for (const auto& r : rows) {
        const double cr = total_cr(r.g, 23.0, r.cs);
        EXPECT_NEAR(std::round(cr * 100.0) / 100.0, r.expected, 0.01 + 1e-9) << r.g << " 23:" << r.cs;
        // bits per GOP: one key at n*8/23 plus G-1 CS frames at n*8/cs
        const double n = 25344.0;
        EXPECT_NEAR(cr, r.g * n * 8.0 / (n * 8.0 / 23.0 + (r.g - 1) * n * 8.0 / r.cs), 1e-9);
    }
}

TEST(TotalCr, KeyOnlyGop) {
    for (double k : {2.0, 23.0, 100.0}) EXPECT_DOUBLE_EQ(total_cr(1, k, 50.0), k);
    EXPECT_THROW(total_cr(0, 23, 50), InvalidArgument);
}

TEST(TotalCr, IncreasingInGopWhenCsRatioExceedsKey) {
    for (double cs : {40.0, 60.0, 80.0}) {
        for (int g = 1; g < 12; ++g) EXPECT_LT(total_cr(g, 23, cs), total_cr(g + 1, 23, cs));
    }
}

TEST(GopLengths, Partition) {
    EXPECT_EQ(gop_lengths(10, 4), (std::vector<int>{4, 4, 2}));
    EXPECT_EQ(gop_lengths(10, 5), (std::vector<int>{5, 5}));
    EXPECT_EQ(gop_lengths(3, 1), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(gop_lengths(2, 7), (std::vector<int>{2}));
    EXPECT_DOUBLE_EQ(nominal_sequence_cr(10, 5, 23, 50), total_cr(5, 23, 50));
    EXPECT_DOUBLE_EQ(nominal_sequence_cr(10, 4, 23, 50), 10.0 / (3.0 / 23 + 7.0 / 50));
}

TEST(GopConfig, Validation) {
    GopConfig c;
    EXPECT_NO_THROW(c.validate());
    c.gop_size = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.cr_key = 1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.cr_cs = 0.5;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.cr_cs = 1.0;
    EXPECT_NO_THROW(c.validate());
}

TEST(EncodeGop, SingleFrameGopIsKeyOnly) {
    const auto f = natural_frame(32, 32);
    GopConfig cfg;
    cfg.gop_size = 1;
    const auto a = build_matrix(cfg.seed, cfg.rows(f.size()), f.size());
    const std::vector<Frame> frames{f};
    const auto g = encode_gop(frames, cfg, a);
    EXPECT_TRUE(g.cs_frames.empty());
    const auto out = decode_gop(g, cfg, a);
    ASSERT_EQ(out.frames.size(), 1u);
    EXPECT_EQ(out.frames[0], decode_intra(encode_at_cr(f, cfg.cr_key).bitstream));
}

TEST(EncodeGop, FrameCountAndShapeErrors) {
    const auto f = natural_frame(32, 32);
    GopConfig cfg;
    cfg.gop_size = 3;
    const auto a = build_matrix(1, cfg.rows(f.size()), f.size());
    EXPECT_THROW(encode_gop(std::vector<Frame>{f, f}, cfg, a), InvalidArgument);
    EXPECT_THROW(encode_gop(std::vector<Frame>{f, f, natural_frame(32, 24)}, cfg, a), InvalidArgument);
}

TEST(EncodeGop, IdenticalFramesWithExactKeyGiveZeroMeasurements) {
    // a flat frame survives intra coding unchanged
    const Frame flat(32, 32, 128);
    ASSERT_EQ(decode_intra(encode_at_cr(flat, 23).bitstream), flat);
    GopConfig cfg;
    cfg.gop_size = 4;
    cfg.cr_cs = 1.0;
    const auto a = build_matrix(cfg.seed, flat.size(), flat.size());
    const auto g = encode_gop(std::vector<Frame>(4, flat), cfg, a);
    ASSERT_EQ(g.cs_frames.size(), 3u);
    for (const auto& q : g.cs_frames) {
        for (double v : dequantize(q)) EXPECT_LT(std::abs(v), q.scale);
    }
}

TEST(EncodeGop, MeasurementNormGrowsWithMovingPixels) {
    const auto bg = natural_frame(48, 48, 3);
    std::vector<Frame> frames{bg};
    for (int side : {4, 8, 12, 16}) {
        Frame f = bg;
        for (int y = 10; y < 10 + side; ++y) {
            for (int x = 12; x < 12 + side; ++x) f(x, y) = static_cast<std::uint8_t>(255 - f(x, y) / 4);
        }
        frames.push_back(f);
    }
    GopConfig cfg;
    cfg.gop_size = 5;
    const auto a = build_matrix(cfg.seed, cfg.rows(bg.size()), bg.size());
    const auto g = encode_gop(frames, cfg, a);
    double prev = 0.0;
    for (const auto& q : g.cs_frames) {
        const double n = norm(dequantize(q));
        EXPECT_GT(n, prev);
        prev = n;
    }
}

TEST(EncodeGop, ClosedLoopResidualUsesDecodedKey) {
    const auto seq = scene(32, 32, 3);
    GopConfig cfg;
    cfg.gop_size = 3;
    const auto a = build_matrix(cfg.seed, cfg.rows(seq.frames[0].size()), seq.frames[0].size());
    const auto g = encode_gop(seq.frames, cfg, a);
    const auto key = encode_at_cr(seq.frames[0], cfg.cr_key).bitstream;
    EXPECT_EQ(g.key, key);
    const auto decoded_key = decode_intra(key);
    ASSERT_NE(decoded_key, seq.frames[0]);
    for (std::size_t i = 1; i < 3; ++i) {
        EXPECT_EQ(g.cs_frames[i - 1], quantize(measure(a, to_vector(frame_diff(seq.frames[i], decoded_key)))));
    }
}

TEST(EncodeGop, DecoderKeyMatchesEncoderKey) {
    const auto seq = scene(32, 32, 6);
    GopConfig cfg;
    cfg.gop_size = 3;
    const auto bytes = write_container(seq, cfg);
    const auto parsed = parse_container(bytes);
    const auto decoded = decode_container(parsed);
    for (std::size_t g = 0; g < parsed.gops.size(); ++g) {
        const auto& enc_key = parsed.gops[g].key;
        EXPECT_EQ(enc_key, encode_at_cr(seq.frames[3 * g], cfg.cr_key).bitstream);
        EXPECT_EQ(decoded.sequence.frames[3 * g], decode_intra(enc_key));
    }
}

TEST(DecodeGop, StaticGopIsSharp) {
    const auto f = natural_frame(64, 64, 2);
    GopConfig cfg;
    cfg.gop_size = 5;
    cfg.cr_key = 5.0;
    cfg.cr_cs = 50.0;
    const auto a = build_matrix(cfg.seed, cfg.rows(f.size()), f.size());
    const auto out = decode_gop(encode_gop(std::vector<Frame>(5, f), cfg, a), cfg, a);
    for (std::size_t i = 1; i < out.frames.size(); ++i) EXPECT_GE(psnr(f, out.frames[i]), 40.0) << "frame " << i;
}

TEST(DecodeGop, LosslessDiagnosticCancelsKeyError) {
    const auto seq = scene(32, 32, 3, 4);
    const auto a = build_matrix(42, 1024, 1024);
    std::vector<double> cs_psnr;
    for (double cr_key : {10.0, 23.0, 50.0}) {
        GopConfig cfg;
        cfg.gop_size = 3;
        cfg.cr_key = cr_key;
        cfg.cr_cs = 1.0;
        const auto out = decode_gop(encode_gop(seq.frames, cfg, a), cfg, a);
        double sum = 0.0;
        for (std::size_t i = 1; i < 3; ++i) {
            const double p = psnr(seq.frames[i], out.frames[i]);
            EXPECT_GE(p, 50.0) << "cr_key " << cr_key << " frame " << i;
            sum += p;
        }
        cs_psnr.push_back(sum / 2);
        EXPECT_LT(psnr(seq.frames[0], out.frames[0]), 50.0);
    }
    const auto [lo, hi] = std::minmax_element(cs_psnr.begin(), cs_psnr.end());
    EXPECT_LE(*hi - *lo, 0.1);
}

TEST(DecodeGop, WorkerCountDoesNotChangeOutput) {
    const auto seq = scene(32, 32, 5, 6);
    GopConfig cfg;
    const auto a = build_matrix(cfg.seed, cfg.rows(1024), 1024);
    const auto g = encode_gop(seq.frames, cfg, a);
    const auto one = decode_gop(g, cfg, a, {}, 1);
    const auto three = decode_gop(g, cfg, a, {}, 3);
    EXPECT_EQ(one.frames, three.frames);
    EXPECT_EQ(one.converged, three.converged);
}

TEST(DecodeGop, CapReachedStillProducesFrames) {
    const auto seq = scene(32, 32, 3, 6);
    GopConfig cfg;
    cfg.gop_size = 3;
    const auto a = build_matrix(cfg.seed, cfg.rows(1024), 1024);
    SolverParams p;
    p.max_inner = 1;
    const auto out = decode_gop(encode_gop(seq.frames, cfg, a), cfg, a, p);
    ASSERT_EQ(out.frames.size(), 3u);
    EXPECT_TRUE(out.converged[0]);
    EXPECT_FALSE(out.converged[1]);
    EXPECT_FALSE(out.converged[2]);
}

TEST(Container, HeaderLayout) {
    auto seq = scene(48, 32, 7);
    seq.frame_rate = 25.0;
    GopConfig cfg;
    cfg.gop_size = 3;
    cfg.cr_key = 23.0;
    cfg.cr_cs = 60.0;
    cfg.seed = 0x0123456789ABCDEFull;
    const auto b = write_container(seq, cfg);
    ASSERT_GE(b.size(), kContainerHeaderBytes);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "CSVC");
    EXPECT_EQ(b[4], 1);
    EXPECT_EQ(read_le<std::uint16_t>(b, 5), 48);
    EXPECT_EQ(read_le<std::uint16_t>(b, 7), 32);
    EXPECT_EQ(read_le<std::uint32_t>(b, 9), 7u);
    EXPECT_EQ(b[13], 3);
    EXPECT_EQ(read_le<float>(b, 14), 23.0f);
    EXPECT_EQ(read_le<float>(b, 18), 60.0f);
    EXPECT_EQ(read_le<std::uint32_t>(b, 22), 26u);  // round(1536 / 60)
    EXPECT_EQ(read_le<std::uint64_t>(b, 26), cfg.seed);
    EXPECT_EQ(read_le<float>(b, 34), 25.0f);

    // walk the GOPs: 3, 3, 1 frames
    std::size_t pos = kContainerHeaderBytes;
    for (int len : {3, 3, 1}) {
        const auto key_len = read_le<std::uint32_t>(b, pos);
        EXPECT_EQ(read_le<std::uint16_t>(b, pos + 4), 48);
        EXPECT_EQ(read_le<std::uint32_t>(b, pos + 12), key_len - kIntraHeaderBytes);
        pos += 4 + key_len + static_cast<std::size_t>(len - 1) * (4 + 2 * 26);
    }
    EXPECT_EQ(pos, b.size());
}

TEST(Container, TenFramesAtGopFour) {
    const auto seq = scene(32, 32, 10);
    GopConfig cfg;
    cfg.gop_size = 4;
    const auto parsed = parse_container(write_container(seq, cfg));
    ASSERT_EQ(parsed.gops.size(), 3u);
    EXPECT_EQ(parsed.gops[0].cs_frames.size(), 3u);
    EXPECT_EQ(parsed.gops[1].cs_frames.size(), 3u);
    EXPECT_EQ(parsed.gops[2].cs_frames.size(), 1u);
    const auto d = decode_container(parsed);
    EXPECT_EQ(d.sequence.size(), 10u);
    EXPECT_EQ(d.sequence.width(), 32);
    EXPECT_EQ(d.converged.size(), 10u);
}

TEST(Container, RealizedRatioOnQcif) {
    const auto seq = scene(176, 144, 48);
    GopConfig cfg;
    cfg.cr_cs = 60.0;
    const auto bytes = write_container(seq, cfg);
    const auto stats = container_stats(parse_container(bytes));
    EXPECT_NEAR(stats.nominal_gop_cr, 45.39, 0.005);
    EXPECT_DOUBLE_EQ(stats.realized_cr, 25344.0 * 48 / static_cast<double>(bytes.size()));
    EXPECT_DOUBLE_EQ(stats.cs_cr_realized, 25344.0 / (4 + 2 * 422));
    // 16-bit codes cost twice the sample-count budget
    EXPECT_LT(stats.realized_cr, stats.nominal_gop_cr);
    EXPECT_GT(stats.realized_cr, 0.4 * stats.nominal_gop_cr);
    EXPECT_NEAR(stats.key_cr_achieved, 23.0, 23.0 * 0.05 + 1e-9);
    EXPECT_NEAR(stats.nominal_sequence_cr, nominal_sequence_cr(48, 5, 23, 60), 1e-12);
}

TEST(Container, TwoDecodesAreByteIdentical) {
    const auto seq = scene(32, 32, 7, 9);
    GopConfig cfg;
    cfg.gop_size = 4;
    const auto bytes = write_container(seq, cfg);
    EXPECT_EQ(write_container(seq, cfg), bytes);
    const auto a = read_container(bytes);
    const auto b = read_container(bytes, {}, 2);
    EXPECT_EQ(a.sequence.frames, b.sequence.frames);
    EXPECT_EQ(psnr_per_frame(seq, a.sequence), psnr_per_frame(seq, b.sequence));
}

TEST(Container, DecodeMatchesPerGopDecode) {
    const auto seq = scene(32, 32, 6, 2);
    GopConfig cfg;
    cfg.gop_size = 3;
    const auto parsed = parse_container(write_container(seq, cfg));
    const auto whole = decode_container(parsed);
    const auto a = build_matrix(cfg.seed, cfg.rows(1024), 1024);
    for (std::size_t g = 0; g < 2; ++g) {
        const auto part = decode_gop(parsed.gops[g], cfg, a);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(whole.sequence.frames[3 * g + i], part.frames[i]);
    }
}

TEST(Container, RejectsDamage) {
    const auto seq = scene(32, 32, 4);
    GopConfig cfg;
    cfg.gop_size = 2;
    const auto good = write_container(seq, cfg);
    EXPECT_NO_THROW(parse_container(good));

    auto bad = good;
    bad[0] = 'X';
    EXPECT_THROW(parse_container(bad), FormatError);
    bad = good;
    bad[4] = 2;
    EXPECT_THROW(parse_container(bad), FormatError);
    bad = good;
    bad[22] ^= 1;  // m
    EXPECT_THROW(parse_container(bad), FormatError);
    bad = good;
    bad.push_back(0);
    EXPECT_THROW(parse_container(bad), FormatError);
    for (std::size_t cut : {std::size_t{3}, kContainerHeaderBytes - 1, kContainerHeaderBytes + 2, good.size() - 1}) {
        EXPECT_THROW(parse_container(std::span(good).first(cut)), FormatError) << cut;
    }
    bad = good;
    bad[kContainerHeaderBytes + 20] ^= 0xFF;  // inside the first key payload
    EXPECT_THROW(read_container(bad), FormatError);
}

TEST(Container, RejectsPerGopSeeds) {
    GopConfig cfg;
    cfg.per_gop_seed = true;
    EXPECT_THROW(write_container(scene(32, 32, 2), cfg), InvalidArgument);
}

TEST(GopConfig, PerGopSeedChangesMatrixSeed) {
    GopConfig cfg;
    EXPECT_EQ(cfg.seed_for_gop(3), cfg.seed);
    cfg.per_gop_seed = true;
    EXPECT_EQ(cfg.seed_for_gop(0), cfg.seed);
    EXPECT_EQ(cfg.seed_for_gop(3), cfg.seed ^ 3u);
}
