#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "pld/poisoner.hpp"
#include "pld/rng.hpp"
#include "pld/semantics.hpp"

using namespace pld;

namespace {

ImageRecord random_image(RandomSource& rng) {
    ImageRecord img;
    for (auto& v : img.data) v = std::uint8_t(rng.uniform_index(256));
    img.tag = tag_from_index(int(rng.uniform_index(kNumClasses)));
    return img;
}

BitVector random_bits(std::size_t n, RandomSource& rng) {
    BitVector b(n);
    for (std::size_t i = 0; i < n; ++i) b.set(i, rng.uniform_index(2) == 1);
    return b;
}

}  // namespace

TEST_CASE("message digits are validated") {
    CHECK_NOTHROW(Message(0));
    CHECK_NOTHROW(Message(9));
    CHECK_THROWS_AS(Message(-1), std::invalid_argument);
    CHECK_THROWS_AS(Message(10), std::invalid_argument);
}

TEST_CASE("tag names and indices round-trip") {
    for (int i = 0; i < kNumClasses; ++i) {
        const SemanticTag t = tag_from_index(i);
        CHECK(tag_from_name(tag_name(t)) == t);
        CHECK(int(t) == i);
    }
    CHECK_THROWS_AS(tag_from_index(10), std::invalid_argument);
    CHECK_THROWS_AS(tag_from_name("zebra"), std::invalid_argument);
}

TEST_CASE("default mapping table is the canonical class order") {
    const MappingTable table;
    CHECK(table.tag_of(Message(0)) == SemanticTag::airplane);
    CHECK(table.tag_of(Message(2)) == SemanticTag::bird);
    CHECK(table.tag_of(Message(9)) == SemanticTag::truck);
    for (int i = 0; i < kNumClasses; ++i) {
        const Message m(i);
        CHECK(table.message_of(table.tag_of(m)) == m);
        CHECK(message_to_tag(m, table) == table.tag_of(m));
        CHECK(tag_to_message(table.tag_of(m), table) == m);
    }
}

TEST_CASE("custom mapping tables must be bijective") {
    std::array<SemanticTag, kNumClasses> perm{};
    for (int i = 0; i < kNumClasses; ++i) perm[std::size_t(i)] = tag_from_index(9 - i);
    const MappingTable reversed(perm);
    CHECK(reversed.tag_of(Message(0)) == SemanticTag::truck);
    CHECK(reversed.message_of(SemanticTag::airplane) == Message(9));

    perm[3] = perm[4];  // duplicate entry
    CHECK_THROWS_AS((void)MappingTable{perm}, std::invalid_argument);
}

TEST_CASE("falsified message never equals the true message and covers all others") {
    RandomSource rng(11);
    for (int v = 0; v < kNumClasses; ++v) {
        const Message m(v);
        std::set<int> seen;
        for (int i = 0; i < 400; ++i) {
            const Message f = choose_falsified(m, rng);
            CHECK(f != m);
            seen.insert(f.value);
        }
        CHECK(seen.size() == std::size_t(kNumClasses - 1));
    }
}

TEST_CASE("bit vector get/set works across word boundaries") {
    BitVector b(130);
    for (std::size_t i : {std::size_t(0), std::size_t(63), std::size_t(64), std::size_t(127),
                          std::size_t(129)}) {
        CHECK_FALSE(b.get(i));
        b.set(i, true);
        CHECK(b.get(i));
    }
    CHECK(b.count_ones() == 5);
    b.set(64, false);
    CHECK(b.count_ones() == 4);
}

TEST_CASE("bit vector xor and distance obey the usual algebra") {
    RandomSource rng(22);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(300);
        const BitVector a = random_bits(n, rng);
        const BitVector b = random_bits(n, rng);
        const BitVector x = a.xor_with(b);
        CHECK(x.count_ones() == a.count_differing(b));
        CHECK(a.count_differing(b) == b.count_differing(a));
        CHECK(x.xor_with(b) == a);
        CHECK(x.xor_with(a) == b);
        CHECK(a.xor_with(a).count_ones() == 0);
    }
    const BitVector a = random_bits(64, rng);
    const BitVector c = random_bits(65, rng);
    CHECK_THROWS_AS((void)a.xor_with(c), LengthMismatch);
    CHECK_THROWS_AS((void)a.count_differing(c), LengthMismatch);
}

TEST_CASE("mask computation and application invert each other") {
    RandomSource rng(33);
    for (int rep = 0; rep < 2000; ++rep) {
        const std::size_t n = (rep % 2 == 0) ? std::size_t(kImageBits)
                                             : 1 + rng.uniform_index(2048);
        const BitVector original = random_bits(n, rng);
        const BitVector poisoned = random_bits(n, rng);
        const PoisonMask mask = compute_mask(original, poisoned);
        CHECK(apply_mask(original, mask) == poisoned);
        // applying the same mask twice is the identity
        CHECK(apply_mask(apply_mask(original, mask), mask) == original);
    }
}

TEST_CASE("image serialization round-trips exactly") {
    RandomSource rng(44);
    for (int rep = 0; rep < 200; ++rep) {
        const ImageRecord img = random_image(rng);
        const BitVector bits = image_to_bits(img);
        CHECK(bits.size() == std::size_t(kImageBits));
        const ImageRecord back = bits_to_image(bits);
        CHECK(back.data == img.data);
    }
    CHECK_THROWS_AS((void)bits_to_image(BitVector(100)), LengthMismatch);
}

TEST_CASE("serialization order is pixel-major, R,G,B per pixel, MSB first") {
    // bit index of (x, y, channel, bit b counted from the MSB):
    //   ((y*32 + x)*3 + channel)*8 + b
    ImageRecord img;  // all zero

    SUBCASE("MSB of the first red channel value is bit 0") {
        img.at(0, 0, 0) = 0x80;
        const BitVector bits = image_to_bits(img);
        CHECK(bits.count_ones() == 1);
        CHECK(bits.get(0));
    }
    SUBCASE("LSB of the green channel of pixel (y=0, x=1) is bit 39") {
        img.at(1, 0, 1) = 0x01;
        const BitVector bits = image_to_bits(img);
        CHECK(bits.count_ones() == 1);
        CHECK(bits.get(39));
    }
    SUBCASE("blue channel of the last pixel fills the final byte") {
        img.at(2, 31, 31) = 0xFF;
        const BitVector bits = image_to_bits(img);
        CHECK(bits.count_ones() == 8);
        for (int b = 0; b < 8; ++b) CHECK(bits.get(std::size_t(24568 + b)));
    }
}

TEST_CASE("synthetic corpus is deterministic per (seed, class, index)") {
    const ImageDatabase small = generate_synthetic_dataset(4, kImageSide, 7);
    const ImageDatabase large = generate_synthetic_dataset(9, kImageSide, 7);
    const ImageDatabase other = generate_synthetic_dataset(4, kImageSide, 8);

    CHECK(small.total_images() == 40);
    CHECK(large.total_images() == 90);
    for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(small.classes[std::size_t(c)][i] == large.classes[std::size_t(c)][i]);
            CHECK(small.classes[std::size_t(c)][i].tag == tag_from_index(c));
        }
        CHECK(small.classes[std::size_t(c)][0].data != other.classes[std::size_t(c)][0].data);
    }
    CHECK_THROWS_AS(generate_synthetic_dataset(0, kImageSide, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic_dataset(1, 16, 1), std::invalid_argument);
}

TEST_CASE("visual encoding draws from the bucket matching the message tag") {
    const ImageDatabase db = generate_synthetic_dataset(5, kImageSide, 9);
    const MappingTable table;
    RandomSource rng(55);
    for (int v = 0; v < kNumClasses; ++v) {
        const Message m(v);
        for (int rep = 0; rep < 8; ++rep) {
            const ImageRecord& img = encode_visual(m, db, table, rng);
            CHECK(img.tag == table.tag_of(m));
        }
    }
    ImageDatabase empty;
    CHECK_THROWS_AS((void)encode_visual(Message(3), empty, table, rng), EmptyClassBucket);
}

TEST_CASE("binary corpus files parse record by record") {
    const std::string path = "test_corpus_records.bin";
    RandomSource rng(66);
    std::vector<ImageRecord> originals;
    {
        std::ofstream out(path, std::ios::binary);
        for (int rec = 0; rec < 3; ++rec) {
            ImageRecord img = random_image(rng);
            img.tag = tag_from_index(rec * 3);  // labels 0, 3, 6
            originals.push_back(img);
            out.put(char(rec * 3));
            // payload is planar: all red, all green, all blue
            out.write(reinterpret_cast<const char*>(img.data.data()),
                      std::streamsize(img.data.size()));
        }
    }
    const ImageDatabase db = load_cifar10(path);
    CHECK(db.total_images() == 3);
    for (int rec = 0; rec < 3; ++rec) {
        const auto& bucket = db.classes[std::size_t(rec * 3)];
        REQUIRE(bucket.size() == 1);
        CHECK(bucket[0].data == originals[std::size_t(rec)].data);
        CHECK(bucket[0].tag == tag_from_index(rec * 3));
    }
    std::remove(path.c_str());
}

TEST_CASE("malformed binary corpus files are rejected") {
    const std::string path = "test_corpus_malformed.bin";

    SUBCASE("truncated record") {
        std::ofstream(path, std::ios::binary) << std::string(3072, '\0');
        CHECK_THROWS_AS((void)load_cifar10(path), MalformedRecord);
    }
    SUBCASE("label byte out of range") {
        std::string rec(3073, '\0');
        rec[0] = char(10);
        std::ofstream(path, std::ios::binary) << rec;
        CHECK_THROWS_AS((void)load_cifar10(path), MalformedRecord);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)load_cifar10("no_such_file.bin"), IoError);
    }
    std::remove(path.c_str());
}
