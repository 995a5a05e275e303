#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csvc/errors.hpp"

namespace csvc {

/// Smallest accepted plane edge; one intra transform block.
inline constexpr int kMinFrameSide = 8;

namespace detail {

template <typename Sample>
class Plane {
public:
    using value_type = Sample;

    Plane() = default;

    Plane(int width, int height, Sample fill = Sample{})
        : width_(width), height_(height) {
        check_dims(width, height);
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Plane(int width, int height, std::vector<Sample> data)
        : width_(width), height_(height), data_(std::move(data)) {
        check_dims(width, height);
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw InvalidArgument("plane data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height));
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Sample operator()(int x, int y) const { return data_[index(x, y)]; }
    Sample& operator()(int x, int y) { return data_[index(x, y)]; }
    Sample operator[](std::size_t i) const { return data_[i]; }
    Sample& operator[](std::size_t i) { return data_[i]; }

    std::span<const Sample> samples() const { return data_; }
    std::span<Sample> samples() { return data_; }

    bool same_shape(int width, int height) const { return width_ == width && height_ == height; }

    template <typename Other>
    bool same_shape(const Other& other) const {
        return same_shape(other.width(), other.height());
    }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    static void check_dims(int width, int height) {
        if (width < kMinFrameSide || height < kMinFrameSide) {
            throw InvalidArgument("frame must be at least 8x8, got " + std::to_string(width) + "x" +
                                  std::to_string(height));
        }
    }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Sample> data_;
};

}  // namespace detail

/// One 8-bit luma plane, row-major. Row-major order is also the order of the
/// real vector the measurement operator and the solver work on.
using Frame = detail::Plane<std::uint8_t>;

/// Signed difference of two frames. Samples stay within [-255, 255].
using Residual = detail::Plane<std::int16_t>;

struct VideoSequence {
    std::vector<Frame> frames;
    double frame_rate = 30.0;

    int width() const { return frames.empty() ? 0 : frames.front().width(); }
    int height() const { return frames.empty() ? 0 : frames.front().height(); }
    std::size_t size() const { return frames.size(); }

    /// Throws unless the sequence is non-empty and all frames share one size.
    void validate() const {
        if (frames.empty()) throw InvalidArgument("no frames");
        for (std::size_t i = 1; i < frames.size(); ++i) {
            if (!frames[i].same_shape(frames.front())) {
                throw InvalidArgument("frame " + std::to_string(i) + " is " +
                                      std::to_string(frames[i].width()) + "x" +
                                      std::to_string(frames[i].height()) + ", expected " +
                                      std::to_string(width()) + "x" + std::to_string(height()));
            }
        }
    }
};

namespace detail {

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* op) {
    if (!a.same_shape(b)) {
        throw InvalidArgument(std::string(op) + ": dimension mismatch " +
                              std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                              " vs " + std::to_string(b.width()) + "x" +
                              std::to_string(b.height()));
    }
}

}  // namespace detail

/// a - b per sample, exact (no clamping).
inline Residual frame_diff(const Frame& a, const Frame& b) {
    detail::require_same_shape(a, b, "frame_diff");
    Residual out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<std::int16_t>(static_cast<int>(a[i]) - static_cast<int>(b[i]));
    }
    return out;
}

/// base + r per sample, saturated to [0, 255].
inline Frame frame_add(const Frame& base, const Residual& r) {
    detail::require_same_shape(base, r, "frame_add");
    Frame out(base.width(), base.height());
    for (std::size_t i = 0; i < base.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(base[i]) + r[i], 0, 255));
    }
    return out;
}

/// Residual converted to the solver's real-valued vector.
inline std::vector<double> to_vector(const Residual& r) {
    return {r.samples().begin(), r.samples().end()};
}

/// Solver output rounded to the nearest integer and limited to the legal residual range.
inline Residual residual_from_vector(std::span<const double> x, int width, int height) {
    if (x.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw InvalidArgument("residual_from_vector: length mismatch");
    }
    Residual out(width, height);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = std::clamp(x[i], -255.0, 255.0);
        out[i] = static_cast<std::int16_t>(std::lround(v));
    }
    return out;
}

}  // namespace csvc
