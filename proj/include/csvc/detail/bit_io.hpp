#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csvc/errors.hpp"

namespace csvc::detail {

/// MSB-first bit packer. The final partial byte is padded with 1 bits.
class BitWriter {
public:
    void put(std::uint32_t bits, int count) {
        for (int i = count - 1; i >= 0; --i) {
            acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((bits >> i) & 1u));
            if (++filled_ == 8) flush_byte();
        }
    }

    std::vector<std::uint8_t> finish() {
        while (filled_ != 0) put(1, 1);
        return std::move(bytes_);
    }

private:
    void flush_byte() {
        bytes_.push_back(acc_);
        acc_ = 0;
        filled_ = 0;
    }

    std::vector<std::uint8_t> bytes_;
    std::uint8_t acc_ = 0;
    int filled_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint32_t bit() {
        if (pos_ >= data_.size() * 8) throw FormatError("intra: bitstream exhausted");
        const std::uint32_t b = (data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
        ++pos_;
        return b;
    }

    std::uint32_t bits(int count) {
        std::uint32_t v = 0;
        for (int i = 0; i < count; ++i) v = (v << 1) | bit();
        return v;
    }

    std::size_t bits_left() const { return data_.size() * 8 - pos_; }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace csvc::detail
