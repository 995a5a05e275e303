#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "csvc/errors.hpp"

namespace csvc::detail {

// Little-endian serialization of fixed-width integers and IEEE-754 floats.

class ByteWriter {
public:
    template <typename T>
        requires std::is_integral_v<T>
    void put(T value) {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(u & 0xFFu));
            if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
        }
    }

    void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }

    void put_bytes(std::span<const std::uint8_t> data) {
        bytes_.insert(bytes_.end(), data.begin(), data.end());
    }

    void put_tag(const char* tag, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) bytes_.push_back(static_cast<std::uint8_t>(tag[i]));
    }

    std::size_t size() const { return bytes_.size(); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data, std::string what = "stream")
        : data_(data), what_(std::move(what)) {}

    template <typename T>
        requires std::is_integral_v<T>
    T get() {
        need(sizeof(T));
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u = static_cast<U>(u | (static_cast<U>(data_[pos_ + i]) << (8 * i)));
        }
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }

    float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

    std::span<const std::uint8_t> get_bytes(std::size_t count) {
        need(count);
        auto out = data_.subspan(pos_, count);
        pos_ += count;
        return out;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t count) const {
        if (count > remaining()) throw FormatError(what_ + ": truncated");
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

}  // namespace csvc::detail
