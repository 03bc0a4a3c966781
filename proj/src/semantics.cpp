#include "pld/semantics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pld {

namespace {

constexpr std::array<std::string_view, kNumClasses> kTagNames = {
    "airplane", "automobile", "bird",  "cat",  "deer",
    "dog",      "frog",       "horse", "ship", "truck",
};

}  // namespace

std::string_view tag_name(SemanticTag tag) {
    return kTagNames[std::size_t(tag)];
}

SemanticTag tag_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kTagNames.size(); ++i)
        if (kTagNames[i] == name) return SemanticTag(int(i));
    throw std::invalid_argument("tag_from_name: unknown tag '" + std::string(name) + "'");
}

SemanticTag tag_from_index(int index) {
    if (index < 0 || index >= kNumClasses)
        throw std::invalid_argument("tag_from_index: index must be in 0..9");
    return SemanticTag(index);
}

MappingTable::MappingTable() {
    for (int i = 0; i < kNumClasses; ++i) {
        forward_[std::size_t(i)] = SemanticTag(i);
        inverse_[std::size_t(i)] = i;
    }
}

MappingTable::MappingTable(const std::array<SemanticTag, kNumClasses>& message_to_tag)
    : forward_(message_to_tag) {
    std::array<bool, kNumClasses> seen{};
    for (int m = 0; m < kNumClasses; ++m) {
        const auto t = std::size_t(forward_[std::size_t(m)]);
        if (t >= kNumClasses || seen[t])
            throw std::invalid_argument("MappingTable: entries must form a bijection");
        seen[t] = true;
        inverse_[t] = m;
    }
}

BitVector BitVector::xor_with(const BitVector& other) const {
    if (n_ != other.n_) throw LengthMismatch("BitVector::xor_with: length mismatch");
    BitVector out(n_);
    for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w] ^ other.words_[w];
    return out;
}

std::size_t BitVector::count_ones() const {
    std::size_t n = 0;
    for (std::uint64_t w : words_) n += std::size_t(std::popcount(w));
    return n;
}

std::size_t BitVector::count_differing(const BitVector& other) const {
    if (n_ != other.n_) throw LengthMismatch("BitVector::count_differing: length mismatch");
    std::size_t n = 0;
    for (std::size_t w = 0; w < words_.size(); ++w)
        n += std::size_t(std::popcount(words_[w] ^ other.words_[w]));
    return n;
}

Message choose_falsified(Message m, RandomSource& rng) {
    const auto d = int(rng.uniform_index(kNumClasses - 1));
    return Message(d >= m.value ? d + 1 : d);
}

SemanticTag message_to_tag(Message m, const MappingTable& table) {
    return table.tag_of(m);
}

Message tag_to_message(SemanticTag tag, const MappingTable& table) {
    return table.message_of(tag);
}

const ImageRecord& encode_visual(Message m, const ImageDatabase& db, const MappingTable& table,
                                 RandomSource& rng) {
    const SemanticTag tag = table.tag_of(m);
    const auto& bucket = db.classes[std::size_t(tag)];
    if (bucket.empty())
        throw EmptyClassBucket("encode_visual: no images for tag '" +
                               std::string(tag_name(tag)) + "'");
    return bucket[rng.uniform_index(bucket.size())];
}

BitVector image_to_bits(const ImageRecord& img) {
    BitVector bits(kImageBits);
    std::size_t pos = 0;
    for (int p = 0; p < kPixelsPerChannel; ++p) {
        for (int c = 0; c < kImageChannels; ++c) {
            const std::uint8_t v = img.data[std::size_t(c) * kPixelsPerChannel + std::size_t(p)];
            for (int b = 7; b >= 0; --b) bits.set(pos++, (v >> b) & 1u);
        }
    }
    return bits;
}

ImageRecord bits_to_image(const BitVector& bits) {
    if (bits.size() != kImageBits)
        throw LengthMismatch("bits_to_image: expected " + std::to_string(kImageBits) +
                             " bits, got " + std::to_string(bits.size()));
    ImageRecord img;
    std::size_t pos = 0;
    for (int p = 0; p < kPixelsPerChannel; ++p) {
        for (int c = 0; c < kImageChannels; ++c) {
            std::uint8_t v = 0;
            for (int b = 7; b >= 0; --b)
                if (bits.get(pos++)) v |= std::uint8_t(1u << b);
            img.data[std::size_t(c) * kPixelsPerChannel + std::size_t(p)] = v;
        }
    }
    return img;
}

ImageDatabase load_cifar10(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_cifar10: cannot open '" + path + "'");
    in.seekg(0, std::ios::end);
    const auto file_size = std::size_t(in.tellg());
    in.seekg(0, std::ios::beg);
    constexpr std::size_t record_size = 1 + kImageValues;
    if (file_size == 0 || file_size % record_size != 0)
        throw MalformedRecord("load_cifar10: file size " + std::to_string(file_size) +
                              " is not a positive multiple of " + std::to_string(record_size));

    ImageDatabase db;
    db.provenance = "cifar10:" + path;
    const std::size_t n_records = file_size / record_size;
    std::vector<char> record(record_size);
    for (std::size_t r = 0; r < n_records; ++r) {
        if (!in.read(record.data(), std::streamsize(record_size)))
            throw IoError("load_cifar10: short read in '" + path + "'");
        const auto label = std::uint8_t(record[0]);
        if (label >= kNumClasses)
            throw MalformedRecord("load_cifar10: label byte " + std::to_string(label) +
                                  " out of range in record " + std::to_string(r));
        ImageRecord img;
        std::copy(record.begin() + 1, record.end(),
                  reinterpret_cast<char*>(img.data.data()));
        img.tag = SemanticTag(int(label));
        db.classes[label].push_back(img);
    }
    return db;
}

namespace {

struct Rgb {
    double r, g, b;
};

// h in degrees (any value), s and v in [0,1]
Rgb hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    if (h < 0.0) h += 360.0;
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1)      { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else             { r = c; b = x; }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

std::uint8_t to_byte(double v01) {
    const double scaled = std::round(v01 * 255.0);
    return std::uint8_t(std::clamp(scaled, 0.0, 255.0));
}

// Signed distance to a rounded box of half-extent (bx, by): negative inside.
double sd_box(double dx, double dy, double bx, double by) {
    const double qx = std::fabs(dx) - bx;
    const double qy = std::fabs(dy) - by;
    const double ox = std::max(qx, 0.0);
    const double oy = std::max(qy, 0.0);
    return std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0);
}

// Distance from (px, py) to the segment (ax, ay)-(bx, by).
double sd_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax;
    const double dy = by - ay;
    const double t =
        std::clamp(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

// Decorative foreground shapes as signed distances (negative inside). The
// shape index is drawn independently of the class, so the shaped content of
// an image carries no class information. All shapes are compact blobs with
// rounded outlines, rendered soft-focus below, so their edges stay locally
// smooth the way slightly defocused photographic content is.
double motif_distance(int shape, int x, int y, double cx, double cy, double r) {
    const double dx = x - cx;
    const double dy = y - cy;
    switch (shape) {
        case 0:  // filled disk
            return std::hypot(dx, dy) - r;
        case 1:  // ring
            return std::fabs(std::hypot(dx, dy) - 0.775 * r) - 0.225 * r;
        case 2:  // rounded square
            return sd_box(dx, dy, 0.55 * r, 0.55 * r) - 0.25 * r;
        case 3:  // rounded square frame
            return std::fabs(sd_box(dx, dy, 0.62 * r, 0.62 * r) - 0.16 * r) - 0.18 * r;
        case 4:  // plus sign (two capsules)
            return std::min(sd_segment(dx, dy, 0.0, -0.75 * r, 0.0, 0.75 * r),
                            sd_segment(dx, dy, -0.75 * r, 0.0, 0.75 * r, 0.0)) -
                   0.3 * r;
        case 5:  // diagonal cross (two capsules)
            return std::min(
                       sd_segment(dx, dy, -0.65 * r, -0.65 * r, 0.65 * r, 0.65 * r),
                       sd_segment(dx, dy, -0.65 * r, 0.65 * r, 0.65 * r, -0.65 * r)) -
                   0.28 * r;
        case 6: {  // rounded upward triangle (intersection of three half-planes)
            const double d1 = dy - 0.65 * r;
            const double inv = 1.0 / std::hypot(1.0, 0.62);
            const double d2 = (dx - 0.62 * dy - 0.558 * r) * inv;
            const double d3 = (-dx - 0.62 * dy - 0.558 * r) * inv;
            return std::max({d1, d2, d3}) - 0.12 * r;
        }
        case 7: {  // diamond (rotated rounded square)
            const double inv_sqrt2 = 0.7071067811865476;
            const double u = (dx + dy) * inv_sqrt2;
            const double v = (dx - dy) * inv_sqrt2;
            return sd_box(u, v, 0.58 * r, 0.58 * r) - 0.2 * r;
        }
        case 8: {  // crescent (disk minus offset disk)
            const double outer = std::hypot(dx, dy) - r;
            const double inner = std::hypot(dx - 0.45 * r, dy) - 0.8 * r;
            return std::max(outer, -inner);
        }
        default:  // 9: two vertical bars (capsules)
            return std::min(
                       sd_segment(dx, dy, -0.55 * r, -0.7 * r, -0.55 * r, 0.7 * r),
                       sd_segment(dx, dy, 0.55 * r, -0.7 * r, 0.55 * r, 0.7 * r)) -
                   0.2 * r;
    }
}

// Soft-focus coverage: a smoothstep over a feather band around the outline,
// so edges ramp over ~5 px instead of stepping.
double motif_coverage(double sd) {
    constexpr double kFeather = 2.5;
    const double u = std::clamp((kFeather - sd) / (2.0 * kFeather), 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// Class identity is carried by a faint full-field cosine texture, one spatial
// frequency per class. The per-pixel amplitude is small while the evidence is
// spread over every pixel, so a classifier that pools over the image separates
// the classes reliably even though no small patch gives the class away. This
// mirrors discrimination driven by distributed low-contrast cues (fur, grain,
// foliage) rather than by a single high-contrast landmark. Frequencies are
// distinct integer modes of the 32-pixel torus, hence exactly orthogonal, and
// mid-band: high enough to survive local-mean removal, low enough that the
// pixel-to-pixel swing stays gentle.
constexpr int kTextureModes[kNumClasses][2] = {
    {3, 1}, {1, 3}, {3, -1}, {1, -3}, {3, 2},
    {2, 3}, {3, -2}, {2, -3}, {4, 1}, {1, 4},
};

ImageRecord synthesize_image(int klass, std::uint64_t image_seed) {
    RandomSource rng(image_seed);

    // Colors are class-uninformative: hues uniform over the circle with the
    // foreground a near-tone of the background (slightly brighter, hue within
    // +-35 degrees). Keeping the foreground/background contrast gentle in
    // every channel matches low-key photographic content; the class evidence
    // lives in the texture, not in the shape outline.
    const double bg_hue = rng.uniform(0.0, 360.0);
    const Rgb bg = hsv_to_rgb(bg_hue, rng.uniform(0.15, 0.35), rng.uniform(0.42, 0.50));
    const double fg_hue = bg_hue + rng.uniform(-35.0, 35.0);
    Rgb fg = hsv_to_rgb(fg_hue, rng.uniform(0.15, 0.35),
                        rng.uniform(0.42, 0.50) + rng.uniform(0.09, 0.13));
    constexpr double kMaxChannelContrast = 0.14;
    const double dmax = std::max({std::fabs(fg.r - bg.r), std::fabs(fg.g - bg.g),
                                  std::fabs(fg.b - bg.b)});
    if (dmax > kMaxChannelContrast) {
        const double k = kMaxChannelContrast / dmax;
        fg = {bg.r + (fg.r - bg.r) * k, bg.g + (fg.g - bg.g) * k,
              bg.b + (fg.b - bg.b) * k};
    }

    const int shape = int(rng.uniform_index(kNumClasses));
    const double cx = 15.5 + rng.uniform(-3.5, 3.5);
    const double cy = 15.5 + rng.uniform(-3.5, 3.5);
    const double r = 10.5 * (1.0 + rng.uniform(-0.2, 0.2));
    const double noise_sigma = rng.uniform(1.0, 3.0);

    const double amplitude = rng.uniform(6.0, 9.0);
    const int fu = kTextureModes[klass][0];
    const int fv = kTextureModes[klass][1];
    constexpr double kTau = 2.0 * 3.14159265358979323846;

    // Mild illumination ramp across a random direction, as a texture cue the
    // classes share.
    const double ramp_angle = rng.uniform(0.0, kTau);
    const double ramp_gain = rng.uniform(0.0, 0.15);
    const double rx = std::cos(ramp_angle), ry = std::sin(ramp_angle);

    ImageRecord img;
    img.tag = SemanticTag(klass);
    for (int y = 0; y < kImageSide; ++y) {
        for (int x = 0; x < kImageSide; ++x) {
            const double cov = motif_coverage(motif_distance(shape, x, y, cx, cy, r));
            const double shade =
                1.0 + ramp_gain * ((x - 15.5) * rx + (y - 15.5) * ry) / 15.5;
            const double texture =
                amplitude * std::cos(kTau * (fu * x + fv * y) / double(kImageSide));
            const double chans[3] = {bg.r + (fg.r - bg.r) * cov,
                                     bg.g + (fg.g - bg.g) * cov,
                                     bg.b + (fg.b - bg.b) * cov};
            for (int c = 0; c < kImageChannels; ++c) {
                const double v =
                    chans[c] * shade * 255.0 + texture + noise_sigma * rng.normal();
                img.at(c, y, x) = std::uint8_t(std::clamp(std::round(v), 0.0, 255.0));
            }
        }
    }
    return img;
}

}  // namespace

ImageDatabase generate_synthetic_dataset(std::size_t n_per_class, int image_side,
                                         std::uint64_t seed) {
    if (n_per_class < 1)
        throw std::invalid_argument("generate_synthetic_dataset: n_per_class must be >= 1");
    if (image_side != kImageSide)
        throw std::invalid_argument("generate_synthetic_dataset: only side " +
                                    std::to_string(kImageSide) + " is supported");
    ImageDatabase db;
    db.provenance = "synthetic:" + std::to_string(seed);
    const std::uint64_t stream = fnv1a64("synthetic-image");
    for (int klass = 0; klass < kNumClasses; ++klass) {
        auto& bucket = db.classes[std::size_t(klass)];
        bucket.reserve(n_per_class);
        for (std::size_t i = 0; i < n_per_class; ++i)
            bucket.push_back(
                synthesize_image(klass, derive_seed(seed, stream, std::uint64_t(klass), i)));
    }
    return db;
}

void write_ppm(const ImageRecord& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ppm: cannot open '" + path + "'");
    out << "P6\n" << kImageSide << " " << kImageSide << "\n255\n";
    for (int y = 0; y < kImageSide; ++y)
        for (int x = 0; x < kImageSide; ++x)
            for (int c = 0; c < kImageChannels; ++c) out.put(char(img.at(c, y, x)));
    if (!out) throw IoError("write_ppm: write failed for '" + path + "'");
}

}  // namespace pld
