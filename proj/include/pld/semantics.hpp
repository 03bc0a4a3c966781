#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pld/common.hpp"
#include "pld/rng.hpp"

namespace pld {

// Confidential message: a single decimal digit.
struct Message {
    int value = 0;

    Message() = default;
    explicit Message(int v) : value(v) {
        if (v < 0 || v > 9) throw std::invalid_argument("Message: digit must be in 0..9");
    }
    friend bool operator==(Message a, Message b) { return a.value == b.value; }
    friend bool operator!=(Message a, Message b) { return a.value != b.value; }
};

// Semantic tag: the categorical label space of the visual codec.
enum class SemanticTag : int {
    airplane = 0,
    automobile,
    bird,
    cat,
    deer,
    dog,
    frog,
    horse,
    ship,
    truck,
};

std::string_view tag_name(SemanticTag tag);
SemanticTag tag_from_name(std::string_view name);
SemanticTag tag_from_index(int index);

// Bijection between the 10 digit messages and the 10 semantic tags. The
// default table is the canonical class-index order (0=airplane ... 9=truck).
class MappingTable {
public:
    MappingTable();  // canonical order
    explicit MappingTable(const std::array<SemanticTag, kNumClasses>& message_to_tag);

    SemanticTag tag_of(Message m) const { return forward_[std::size_t(m.value)]; }
    Message message_of(SemanticTag tag) const { return Message(inverse_[std::size_t(tag)]); }

private:
    std::array<SemanticTag, kNumClasses> forward_{};
    std::array<int, kNumClasses> inverse_{};
};

// A 32x32 RGB image with 8-bit channels plus its semantic tag. Channel data
// is stored planar (all R, then all G, then all B, each row-major), the same
// layout as a CIFAR-10 record body.
struct ImageRecord {
    std::array<std::uint8_t, kImageValues> data{};
    SemanticTag tag = SemanticTag::airplane;

    std::uint8_t at(int channel, int y, int x) const {
        return data[std::size_t(channel) * kPixelsPerChannel + std::size_t(y) * kImageSide +
                    std::size_t(x)];
    }
    std::uint8_t& at(int channel, int y, int x) {
        return data[std::size_t(channel) * kPixelsPerChannel + std::size_t(y) * kImageSide +
                    std::size_t(x)];
    }
    friend bool operator==(const ImageRecord& a, const ImageRecord& b) {
        return a.data == b.data && a.tag == b.tag;
    }
};

// Packed bit sequence. Bit order within the vector is logical: index 0 is the
// first transmitted bit. Backed by 64-bit words so XOR and comparisons run
// word-wise.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t n_bits) : n_(n_bits), words_((n_bits + 63) / 64, 0) {}

    std::size_t size() const { return n_; }
    bool empty() const { return n_ == 0; }

    bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i, bool v) {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }

    // bitwise XOR; lengths must match
    BitVector xor_with(const BitVector& other) const;

    std::size_t count_ones() const;
    std::size_t count_differing(const BitVector& other) const;

    const std::vector<std::uint64_t>& words() const { return words_; }

    friend bool operator==(const BitVector& a, const BitVector& b) {
        return a.n_ == b.n_ && a.words_ == b.words_;
    }
    friend bool operator!=(const BitVector& a, const BitVector& b) { return !(a == b); }

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

// Class-bucketed image corpus.
struct ImageDatabase {
    std::array<std::vector<ImageRecord>, kNumClasses> classes;
    std::string provenance;

    std::size_t total_images() const {
        std::size_t n = 0;
        for (const auto& bucket : classes) n += bucket.size();
        return n;
    }
};

Message choose_falsified(Message m, RandomSource& rng);

SemanticTag message_to_tag(Message m, const MappingTable& table);
Message tag_to_message(SemanticTag tag, const MappingTable& table);

// Uniform draw from the bucket matching the message's tag.
const ImageRecord& encode_visual(Message m, const ImageDatabase& db, const MappingTable& table,
                                 RandomSource& rng);

// Canonical serialization: row-major pixel scan, R,G,B per pixel, MSB first
// within each channel byte. Both ends of the link must use this order.
BitVector image_to_bits(const ImageRecord& img);
ImageRecord bits_to_image(const BitVector& bits);

// CIFAR-10 binary ingestion: 3073-byte records, 1 label byte + 3072 planar
// channel bytes.
ImageDatabase load_cifar10(const std::string& path);

// Procedural 10-class corpus so the test suite needs no external downloads.
// Class identity rides in a faint full-field texture (one fixed spatial mode
// per class); shapes and palettes are drawn independently of the class so
// they carry no label information. Deterministic per (seed, class, index)
// regardless of generation order.
ImageDatabase generate_synthetic_dataset(std::size_t n_per_class, int image_side,
                                         std::uint64_t seed);

// Lossless export for eyeballing images (binary PPM, P6).
void write_ppm(const ImageRecord& img, const std::string& path);

}  // namespace pld
