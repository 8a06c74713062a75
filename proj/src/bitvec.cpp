#include "polopt/bitvec.hpp"

#include <stdexcept>

#include "polopt/rng.hpp"

namespace polopt {

BitVector BitVector::from_string(std::string_view bits) {
  BitVector out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      out.set(i);
    } else if (bits[i] != '0') {
      throw std::invalid_argument("bit string may only contain '0' and '1'");
    }
  }
  return out;
}

BitVector BitVector::from_value(std::size_t size, std::uint64_t value) {
  BitVector out(size);
  for (std::size_t i = 0; i < size && i < 64; ++i) {
    if ((value >> i) & 1U) out.set(i);
  }
  return out;
}

std::string BitVector::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

std::size_t BitVector::hash() const noexcept {
  std::uint64_t h = mix64(size_);
  for (auto w : words_) h = mix64(h ^ w);
  return static_cast<std::size_t>(h);
}

}  // namespace polopt
