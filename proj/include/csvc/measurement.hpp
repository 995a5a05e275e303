#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "csvc/errors.hpp"

namespace csvc {

/// Standard normal deviates from a seed: std::mt19937_64 feeding the
/// trigonometric Box-Muller transform. Both stages are fully specified, so a
/// seed yields the same sequence on any IEEE-754 platform
/// (std::normal_distribution is implementation-defined).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = unit_open_closed();
        const double u2 = unit_open_closed();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    // 53 random mantissa bits mapped to (0, 1].
    double unit_open_closed() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Measurement count for a CS compression ratio: m = round(n / cr), kept in [1, n].
inline std::size_t rows_for_ratio(std::size_t n, double cr) {
    if (!(cr >= 1.0) || !std::isfinite(cr)) throw InvalidArgument("CS compression ratio must be >= 1");
    const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / cr));
    return std::clamp<std::size_t>(m, 1, n);
}

/// Dense m x n operator, row-major, 32-bit entries. Only (seed, m, n) is ever
/// stored or transmitted; the entries are regenerated on demand.
///
/// For m < n the entries are i.i.d. N(0, 1/m). The square case m == n is the
/// lossless diagnostic mode: the same Gaussian draw is orthonormalized (QR,
/// with the sign convention diag(R) > 0) so the operator is invertible and
/// well conditioned. A square Gaussian matrix has a smallest singular value of
/// order 1/n, which no iterative reconstruction can get past.
class MeasurementMatrix {
public:
    MeasurementMatrix(std::uint64_t seed, std::size_t rows, std::size_t cols,
                      std::vector<float> entries)
        : seed_(seed), rows_(rows), cols_(cols), entries_(std::move(entries)) {}

    std::uint64_t seed() const { return seed_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool lossless() const { return rows_ == cols_; }

    std::span<const float> entries() const { return entries_; }
    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(entries_).subspan(i * cols_, cols_);
    }
    float operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

private:
    std::uint64_t seed_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<float> entries_;
};

inline MeasurementMatrix build_matrix(std::uint64_t seed, std::size_t m, std::size_t n) {
    if (m < 1 || n < 1) throw InvalidArgument("measurement matrix needs m >= 1 and n >= 1");
    if (m > n) {
        throw InvalidArgument("measurement matrix with m=" + std::to_string(m) + " > n=" +
                              std::to_string(n) + " is not compressive");
    }
    GaussianStream gauss(seed);
    std::vector<float> entries(m * n);
    if (m < n) {
        const double sigma = 1.0 / std::sqrt(static_cast<double>(m));
        for (auto& e : entries) e = static_cast<float>(sigma * gauss.next());
        return {seed, m, n, std::move(entries)};
    }

    Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = gauss.next();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = 0; j < q.cols(); ++j) {
            entries[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] =
                static_cast<float>(q(i, j));
        }
    }
    return {seed, m, n, std::move(entries)};
}

namespace detail {

inline void measure_into(const MeasurementMatrix& a, std::span<const double> x, std::span<double> y) {
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const float* row = a.entries().data() + i * n;
        // Four partial sums; fixed order keeps the result deterministic.
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            s0 += static_cast<double>(row[j]) * x[j];
            s1 += static_cast<double>(row[j + 1]) * x[j + 1];
            s2 += static_cast<double>(row[j + 2]) * x[j + 2];
            s3 += static_cast<double>(row[j + 3]) * x[j + 3];
        }
        for (; j < n; ++j) s0 += static_cast<double>(row[j]) * x[j];
        y[i] = (s0 + s1) + (s2 + s3);
    }
}

inline void adjoint_into(const MeasurementMatrix& a, std::span<const double> v, std::span<double> x) {
    const std::size_t n = a.cols();
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const float* row = a.entries().data() + i * n;
        for (std::size_t j = 0; j < n; ++j) x[j] += static_cast<double>(row[j]) * vi;
    }
}

}  // namespace detail

/// y = A x
inline std::vector<double> measure(const MeasurementMatrix& a, std::span<const double> x) {
    if (x.size() != a.cols()) {
        throw InvalidArgument("measure: vector length " + std::to_string(x.size()) +
                              " != matrix columns " + std::to_string(a.cols()));
    }
    std::vector<double> y(a.rows());
    detail::measure_into(a, x, y);
    return y;
}

/// A^T v
inline std::vector<double> adjoint(const MeasurementMatrix& a, std::span<const double> v) {
    if (v.size() != a.rows()) {
        throw InvalidArgument("adjoint: vector length " + std::to_string(v.size()) +
                              " != matrix rows " + std::to_string(a.rows()));
    }
    std::vector<double> x(a.cols());
    detail::adjoint_into(a, v, x);
    return x;
}

/// Process-wide cache of generated matrices keyed by (seed, m, n). A QCIF
/// matrix at CR 50 is ~51 MB, so only the most recently used few are kept.
class MatrixCache {
public:
    explicit MatrixCache(std::size_t capacity = 4) : capacity_(capacity) {}

    std::shared_ptr<const MeasurementMatrix> get(std::uint64_t seed, std::size_t m, std::size_t n) {
        const Key key{seed, m, n};
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            it->second.last_use = ++clock_;
            return it->second.matrix;
        }
        auto matrix = std::make_shared<const MeasurementMatrix>(build_matrix(seed, m, n));
        if (entries_.size() >= capacity_) {
            auto oldest = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
                return a.second.last_use < b.second.last_use;
            });
            entries_.erase(oldest);
        }
        entries_[key] = Slot{matrix, ++clock_};
        return matrix;
    }

    static MatrixCache& global() {
        static MatrixCache cache;
        return cache;
    }

private:
    using Key = std::tuple<std::uint64_t, std::size_t, std::size_t>;
    struct Slot {
        std::shared_ptr<const MeasurementMatrix> matrix;
        std::uint64_t last_use = 0;
    };

    std::size_t capacity_;
    std::uint64_t clock_ = 0;
    std::map<Key, Slot> entries_;
    std::mutex mutex_;
};

/// 16-bit uniform quantization of one measurement vector.
struct QuantizedMeasurements {
    float scale = 1.0f;
    std::vector<std::int16_t> codes;

    friend bool operator==(const QuantizedMeasurements&, const QuantizedMeasurements&) = default;
};

/// scale = max|y| / 32767 (1 for an all-zero vector), code = round(y / scale).
/// The scale is rounded to f32 first because that is what the container stores.
inline QuantizedMeasurements quantize(std::span<const double> y) {
    double peak = 0.0;
    for (double v : y) {
        if (!std::isfinite(v)) throw InvalidArgument("quantize: non-finite measurement");
        peak = std::max(peak, std::abs(v));
    }
    QuantizedMeasurements q;
    q.scale = peak > 0.0 ? static_cast<float>(peak / 32767.0) : 1.0f;
    if (!(q.scale > 0.0f)) q.scale = std::numeric_limits<float>::min();
    const double scale = q.scale;
    q.codes.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double c = std::clamp(std::nearbyint(y[i] / scale), -32767.0, 32767.0);
        q.codes[i] = static_cast<std::int16_t>(c);
    }
    return q;
}

inline std::vector<double> dequantize(const QuantizedMeasurements& q) {
    std::vector<double> y(q.codes.size());
    const double scale = q.scale;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = q.codes[i] * scale;
    return y;
}

}  // namespace csvc
