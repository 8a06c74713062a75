#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace polopt {

// Fixed-length bit vector. Position 0 is the least significant bit when the
// vector is read as a little-endian integer, which is the order used for
// deterministic tie-breaks.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  static BitVector from_string(std::string_view bits);
  static BitVector from_value(std::size_t size, std::uint64_t value);

  std::size_t size() const noexcept { return size_; }

  bool test(std::size_t i) const noexcept { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool v = true) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (v) {
      words_[i / 64] |= mask;
    } else {
      words_[i / 64] &= ~mask;
    }
  }
  void flip(std::size_t i) noexcept { words_[i / 64] ^= std::uint64_t{1} << (i % 64); }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  bool any() const noexcept {
    for (auto w : words_) {
      if (w != 0) return true;
    }
    return false;
  }
  bool none() const noexcept { return !any(); }

  // '0'/'1' characters, position 0 first.
  std::string to_string() const;

  std::size_t hash() const noexcept;

  bool operator==(const BitVector&) const = default;

  // Ordering by little-endian integer value (shorter vectors first).
  std::strong_ordering operator<=>(const BitVector& other) const noexcept {
    if (auto c = size_ <=> other.size_; c != 0) return c;
    for (std::size_t k = words_.size(); k-- > 0;) {
      if (auto c = words_[k] <=> other.words_[k]; c != 0) return c;
    }
    return std::strong_ordering::equal;
  }

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct BitVectorHash {
  std::size_t operator()(const BitVector& b) const noexcept { return b.hash(); }
};

}  // namespace polopt
