#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pld {

// Fixed wire image geometry: 32x32 RGB, 8 bits per channel.
inline constexpr int kImageSide = 32;
inline constexpr int kImageChannels = 3;
inline constexpr int kPixelsPerChannel = kImageSide * kImageSide;
inline constexpr int kImageValues = kPixelsPerChannel * kImageChannels;  // 3072
inline constexpr int kImageBits = kImageValues * 8;                      // 24576
inline constexpr int kNumClasses = 10;

struct LengthMismatch : std::invalid_argument {
    explicit LengthMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct ShapeMismatch : std::invalid_argument {
    explicit ShapeMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct MalformedRecord : std::runtime_error {
    explicit MalformedRecord(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyClassBucket : std::runtime_error {
    explicit EmptyClassBucket(const std::string& what) : std::runtime_error(what) {}
};

struct Diverged : std::runtime_error {
    explicit Diverged(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateAlpha : std::logic_error {
    explicit DegenerateAlpha(const std::string& what) : std::logic_error(what) {}
};

struct Unreachable : std::runtime_error {
    explicit Unreachable(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pld
