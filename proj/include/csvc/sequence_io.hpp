#pragma once

// Sequence file I/O: directories of binary PGM files, YUV4MPEG2 (luma only)
// and headerless planar 8-bit luma.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csvc/errors.hpp"
#include "csvc/frame.hpp"

namespace csvc {

enum class SequenceFormat { PgmDir, Y4m, Raw };

inline SequenceFormat parse_sequence_format(std::string_view name) {
    if (name == "pgm-dir" || name == "pgm") return SequenceFormat::PgmDir;
    if (name == "y4m") return SequenceFormat::Y4m;
    if (name == "raw") return SequenceFormat::Raw;
    throw InvalidArgument("unknown sequence format '" + std::string(name) + "'");
}

inline std::string_view to_string(SequenceFormat f) {
    switch (f) {
        case SequenceFormat::PgmDir: return "pgm-dir";
        case SequenceFormat::Y4m: return "y4m";
        case SequenceFormat::Raw: return "raw";
    }
    return "?";
}

/// Directory -> pgm-dir, *.y4m -> y4m, anything else -> raw.
inline SequenceFormat guess_sequence_format(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return SequenceFormat::PgmDir;
    if (path.extension() == ".y4m") return SequenceFormat::Y4m;
    return SequenceFormat::Raw;
}

/// Dimensions for raw input, which carries no header.
struct RawGeometry {
    int width = 0;
    int height = 0;
    double frame_rate = 30.0;
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

// Netpbm header tokens are separated by whitespace; '#' starts a comment to end of line.
class PgmHeaderReader {
public:
    PgmHeaderReader(std::span<const std::uint8_t> bytes, std::string name)
        : bytes_(bytes), name_(std::move(name)) {}

    std::string token() {
        skip_space_and_comments();
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) throw FormatError(name_ + ": truncated PGM header");
        return out;
    }

    int number() {
        const std::string t = token();
        if (!std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
            t.size() > 9) {
            throw FormatError(name_ + ": bad PGM header field '" + t + "'");
        }
        return std::stoi(t);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw FormatError(name_ + ": malformed PGM header");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string name_;
};

}  // namespace detail

/// Parse one binary (P5) PGM image with maxval 255.
inline Frame decode_pgm(std::span<const std::uint8_t> bytes, const std::string& name = "pgm") {
    detail::PgmHeaderReader header(bytes, name);
    if (header.token() != "P5") throw FormatError(name + ": not a binary PGM (P5)");
    const int width = header.number();
    const int height = header.number();
    const int maxval = header.number();
    if (maxval != 255) throw FormatError(name + ": only maxval 255 is supported");
    const std::size_t offset = header.raster_offset();
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() < offset + count) throw FormatError(name + ": truncated raster");
    try {
        return Frame(width, height,
                     std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                               bytes.begin() + static_cast<std::ptrdiff_t>(offset + count)));
    } catch (const InvalidArgument& e) {
        throw FormatError(name + ": " + e.what());
    }
}

inline std::vector<std::uint8_t> encode_pgm(const Frame& f) {
    const std::string header =
        "P5\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), f.samples().begin(), f.samples().end());
    return out;
}

namespace detail {

struct Y4mLayout {
    int width = 0;
    int height = 0;
    double frame_rate = 30.0;
    std::size_t chroma_bytes = 0;
};

inline std::size_t y4m_chroma_bytes(std::string_view tag, int w, int h) {
    const auto cw = static_cast<std::size_t>((w + 1) / 2);
    const auto ch = static_cast<std::size_t>((h + 1) / 2);
    const auto uw = static_cast<std::size_t>(w);
    const auto uh = static_cast<std::size_t>(h);
    if (tag.empty() || tag.starts_with("420")) return 2 * cw * ch;
    if (tag == "422") return 2 * cw * uh;
    if (tag == "411") return 2 * static_cast<std::size_t>((w + 3) / 4) * uh;
    if (tag == "444") return 2 * uw * uh;
    if (tag == "444alpha") return 3 * uw * uh;
    if (tag == "mono") return 0;
    throw FormatError("y4m: unsupported colour space C" + std::string(tag));
}

inline Y4mLayout parse_y4m_header(std::string_view line) {
    constexpr std::string_view kMagic = "YUV4MPEG2";
    if (!line.starts_with(kMagic)) throw FormatError("y4m: missing YUV4MPEG2 signature");
    Y4mLayout layout;
    std::string colour;
    std::istringstream fields{std::string(line.substr(kMagic.size()))};
    std::string field;
    while (fields >> field) {
        const char key = field[0];
        const std::string value = field.substr(1);
        try {
            if (key == 'W') {
                layout.width = std::stoi(value);
            } else if (key == 'H') {
                layout.height = std::stoi(value);
            } else if (key == 'F') {
                const auto colon = value.find(':');
                if (colon == std::string::npos) throw FormatError("y4m: bad frame rate");
                const double num = std::stod(value.substr(0, colon));
                const double den = std::stod(value.substr(colon + 1));
                if (den > 0 && num > 0) layout.frame_rate = num / den;
            } else if (key == 'C') {
                colour = value;
            }
        } catch (const std::logic_error&) {
            throw FormatError("y4m: bad header field '" + field + "'");
        }
    }
    if (layout.width < kMinFrameSide || layout.height < kMinFrameSide) {
        throw FormatError("y4m: missing or invalid frame dimensions");
    }
    layout.chroma_bytes = y4m_chroma_bytes(colour, layout.width, layout.height);
    return layout;
}

}  // namespace detail

inline VideoSequence decode_y4m(std::span<const std::uint8_t> bytes) {
    auto line_end = [&](std::size_t from) {
        for (std::size_t i = from; i < bytes.size(); ++i) {
            if (bytes[i] == '\n') return i;
        }
        throw FormatError("y4m: unterminated header line");
    };
    std::size_t pos = line_end(0);
    const auto layout = detail::parse_y4m_header(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), pos));
    ++pos;

    const std::size_t luma = static_cast<std::size_t>(layout.width) * static_cast<std::size_t>(layout.height);
    VideoSequence seq;
    seq.frame_rate = layout.frame_rate;
    while (pos < bytes.size()) {
        const std::size_t eol = line_end(pos);
        const std::string_view marker(reinterpret_cast<const char*>(bytes.data()) + pos, eol - pos);
        if (!marker.starts_with("FRAME")) throw FormatError("y4m: expected FRAME marker");
        pos = eol + 1;
        if (bytes.size() - pos < luma + layout.chroma_bytes) throw FormatError("y4m: truncated frame");
        seq.frames.emplace_back(layout.width, layout.height,
                                std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                          bytes.begin() + static_cast<std::ptrdiff_t>(pos + luma)));
        pos += luma + layout.chroma_bytes;
    }
    if (seq.frames.empty()) throw FormatError("y4m: no frames");
    return seq;
}

/// Written as 4:2:0 with neutral chroma so ordinary players accept the file.
inline std::vector<std::uint8_t> encode_y4m(const VideoSequence& seq) {
    seq.validate();
    const int fps_num = static_cast<int>(std::lround(seq.frame_rate * 1000.0));
    std::string header = "YUV4MPEG2 W" + std::to_string(seq.width()) + " H" +
                         std::to_string(seq.height()) + " F" + std::to_string(fps_num) +
                         ":1000 Ip A1:1 C420jpeg\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t chroma = detail::y4m_chroma_bytes("420jpeg", seq.width(), seq.height());
    constexpr std::string_view kFrame = "FRAME\n";
    for (const auto& f : seq.frames) {
        out.insert(out.end(), kFrame.begin(), kFrame.end());
        out.insert(out.end(), f.samples().begin(), f.samples().end());
        out.insert(out.end(), chroma, std::uint8_t{128});
    }
    return out;
}

namespace detail {

inline std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            files.push_back(entry.path());
        }
    }
    if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace detail

/// Load frames in temporal order. Raw input needs `geometry`; the other
/// formats carry their own dimensions.
inline VideoSequence load_sequence(const std::filesystem::path& path, SequenceFormat format,
                                   std::optional<RawGeometry> geometry = std::nullopt) {
    if (!std::filesystem::exists(path)) throw IoError("'" + path.string() + "' does not exist");
    VideoSequence seq;
    switch (format) {
        case SequenceFormat::PgmDir: {
            if (!std::filesystem::is_directory(path)) {
                throw IoError("'" + path.string() + "' is not a directory");
            }
            for (const auto& file : detail::list_pgm_files(path)) {
                seq.frames.push_back(decode_pgm(detail::read_file(file), file.filename().string()));
            }
            if (seq.frames.empty()) throw FormatError("no frames in '" + path.string() + "'");
            if (geometry) seq.frame_rate = geometry->frame_rate;
            break;
        }
        case SequenceFormat::Y4m:
            seq = decode_y4m(detail::read_file(path));
            break;
        case SequenceFormat::Raw: {
            if (!geometry || geometry->width <= 0 || geometry->height <= 0) {
                throw InvalidArgument("raw input requires width and height");
            }
            const auto bytes = detail::read_file(path);
            const std::size_t frame_bytes =
                static_cast<std::size_t>(geometry->width) * static_cast<std::size_t>(geometry->height);
            if (bytes.empty()) throw FormatError("no frames in '" + path.string() + "'");
            if (bytes.size() % frame_bytes != 0) {
                throw FormatError("raw file size " + std::to_string(bytes.size()) +
                                  " is not a multiple of the frame size " + std::to_string(frame_bytes));
            }
            for (std::size_t off = 0; off < bytes.size(); off += frame_bytes) {
                seq.frames.emplace_back(
                    geometry->width, geometry->height,
                    std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                              bytes.begin() + static_cast<std::ptrdiff_t>(off + frame_bytes)));
            }
            seq.frame_rate = geometry->frame_rate;
            break;
        }
    }
    try {
        seq.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
    return seq;
}

/// File name of frame `index` inside a pgm-dir sequence.
inline std::string pgm_frame_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.pgm", index);
    return buf;
}

inline void save_sequence(const VideoSequence& seq, const std::filesystem::path& path,
                          SequenceFormat format) {
    seq.validate();
    switch (format) {
        case SequenceFormat::PgmDir: {
            std::error_code ec;
            std::filesystem::create_directories(path, ec);
            if (ec) throw IoError("cannot create '" + path.string() + "': " + ec.message());
            // drop frames left over from an earlier save
            for (const auto& old : detail::list_pgm_files(path)) {
                if (old.filename().string().rfind("frame_", 0) == 0) std::filesystem::remove(old, ec);
            }
            for (std::size_t i = 0; i < seq.frames.size(); ++i) {
                detail::write_file(path / pgm_frame_name(i), encode_pgm(seq.frames[i]));
            }
            break;
        }
        case SequenceFormat::Y4m:
            detail::write_file(path, encode_y4m(seq));
            break;
        case SequenceFormat::Raw: {
            std::vector<std::uint8_t> bytes;
            bytes.reserve(seq.frames.size() * seq.frames.front().size());
            for (const auto& f : seq.frames) bytes.insert(bytes.end(), f.samples().begin(), f.samples().end());
            detail::write_file(path, bytes);
            break;
        }
    }
}

}  // namespace csvc
