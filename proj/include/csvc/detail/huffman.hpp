#pragma once

// Canonical prefix codes over byte symbols, limited to 16-bit code lengths and
// serialized the JPEG DHT way: 16 counts (codes per length) then the symbols
// in code order.

#include <algorithm>
#include <array>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include "csvc/detail/bit_io.hpp"
#include "csvc/detail/byte_io.hpp"
#include "csvc/errors.hpp"

namespace csvc::detail {

inline constexpr int kMaxCodeLength = 16;

class HuffmanTable {
public:
    HuffmanTable() = default;

    /// Optimal code for the given symbol frequencies.
    static HuffmanTable from_frequencies(const std::array<std::uint64_t, 256>& freq) {
        auto counts = freq;
        for (;;) {
            auto lengths = code_lengths(counts);
            if (*std::max_element(lengths.begin(), lengths.end()) <= kMaxCodeLength) {
                return from_lengths(lengths);
            }
            // Flatten the distribution until the tree is shallow enough.
            for (auto& c : counts) {
                if (c > 0) c = std::max<std::uint64_t>(1, c / 2);
            }
        }
    }

    static HuffmanTable read(ByteReader& in) {
        HuffmanTable t;
        std::size_t total = 0;
        for (int len = 1; len <= kMaxCodeLength; ++len) {
            t.counts_[static_cast<std::size_t>(len)] = in.get<std::uint8_t>();
            total += t.counts_[static_cast<std::size_t>(len)];
        }
        if (total > 256) throw FormatError("intra: code table has too many symbols");
        const auto syms = in.get_bytes(total);
        t.symbols_.assign(syms.begin(), syms.end());
        // Kraft: a canonical code must fit in the code space.
        std::uint64_t space = 0;
        for (int len = 1; len <= kMaxCodeLength; ++len) {
            space += static_cast<std::uint64_t>(t.counts_[static_cast<std::size_t>(len)])
                     << (kMaxCodeLength - len);
        }
        if (space > (std::uint64_t{1} << kMaxCodeLength)) throw FormatError("intra: invalid code table");
        std::array<bool, 256> seen{};
        for (auto s : t.symbols_) {
            if (seen[s]) throw FormatError("intra: duplicate symbol in code table");
            seen[s] = true;
        }
        t.assign_codes();
        return t;
    }

    void write(ByteWriter& out) const {
        for (int len = 1; len <= kMaxCodeLength; ++len) {
            out.put(static_cast<std::uint8_t>(counts_[static_cast<std::size_t>(len)]));
        }
        out.put_bytes(symbols_);
    }

    void encode(BitWriter& out, std::uint8_t symbol) const {
        const int len = length_[symbol];
        if (len == 0) throw InvalidArgument("intra: symbol has no code");
        out.put(code_[symbol], len);
    }

    std::uint8_t decode(BitReader& in) const {
        std::int32_t code = 0;
        std::size_t index = 0;
        for (int len = 1; len <= kMaxCodeLength; ++len) {
            code = (code << 1) | static_cast<std::int32_t>(in.bit());
            const int count = counts_[static_cast<std::size_t>(len)];
            if (count > 0 && code - first_code_[static_cast<std::size_t>(len)] < count) {
                return symbols_[index + static_cast<std::size_t>(code - first_code_[static_cast<std::size_t>(len)])];
            }
            index += static_cast<std::size_t>(count);
        }
        throw FormatError("intra: invalid prefix code");
    }

    std::size_t symbol_count() const { return symbols_.size(); }
    int length(std::uint8_t symbol) const { return length_[symbol]; }

private:
    // Plain Huffman construction. Ties are broken by node id so the result is deterministic.
    static std::array<int, 256> code_lengths(const std::array<std::uint64_t, 256>& freq) {
        std::array<int, 256> lengths{};
        struct Node {
            std::uint64_t weight;
            int id;
        };
        auto heavier = [](const Node& a, const Node& b) {
            return a.weight != b.weight ? a.weight > b.weight : a.id > b.id;
        };
        std::priority_queue<Node, std::vector<Node>, decltype(heavier)> heap(heavier);
        std::vector<int> parent;
        std::vector<int> leaf_of_node;
        for (int s = 0; s < 256; ++s) {
            if (freq[static_cast<std::size_t>(s)] == 0) continue;
            heap.push({freq[static_cast<std::size_t>(s)], static_cast<int>(parent.size())});
            parent.push_back(-1);
            leaf_of_node.push_back(s);
        }
        if (parent.empty()) return lengths;
        if (parent.size() == 1) {
            lengths[static_cast<std::size_t>(leaf_of_node[0])] = 1;
            return lengths;
        }
        while (heap.size() > 1) {
            const Node a = heap.top();
            heap.pop();
            const Node b = heap.top();
            heap.pop();
            const int id = static_cast<int>(parent.size());
            parent.push_back(-1);
            parent[static_cast<std::size_t>(a.id)] = id;
            parent[static_cast<std::size_t>(b.id)] = id;
            heap.push({a.weight + b.weight, id});
        }
        for (std::size_t leaf = 0; leaf < leaf_of_node.size(); ++leaf) {
            int depth = 0;
            for (int p = parent[leaf]; p != -1; p = parent[static_cast<std::size_t>(p)]) ++depth;
            lengths[static_cast<std::size_t>(leaf_of_node[leaf])] = depth;
        }
        return lengths;
    }

    static HuffmanTable from_lengths(const std::array<int, 256>& lengths) {
        HuffmanTable t;
        for (int len = 1; len <= kMaxCodeLength; ++len) {
            for (int s = 0; s < 256; ++s) {
                if (lengths[static_cast<std::size_t>(s)] == len) {
                    t.symbols_.push_back(static_cast<std::uint8_t>(s));
                    ++t.counts_[static_cast<std::size_t>(len)];
                }
            }
        }
        t.assign_codes();
        return t;
    }

    void assign_codes() {
        length_.fill(0);
        code_.fill(0);
        std::int32_t code = 0;
        std::size_t index = 0;
        for (int len = 1; len <= kMaxCodeLength; ++len) {
            first_code_[static_cast<std::size_t>(len)] = code;
            for (int i = 0; i < counts_[static_cast<std::size_t>(len)]; ++i) {
                const auto s = symbols_[index++];
                length_[s] = len;
                code_[s] = static_cast<std::uint32_t>(code++);
            }
            code <<= 1;
        }
    }

    std::array<int, kMaxCodeLength + 1> counts_{};
    std::array<std::int32_t, kMaxCodeLength + 1> first_code_{};
    std::vector<std::uint8_t> symbols_;
    std::array<int, 256> length_{};
    std::array<std::uint32_t, 256> code_{};
};

}  // namespace csvc::detail
