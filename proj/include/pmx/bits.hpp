#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pmx {

using Nat = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>, boost::multiprecision::et_off>;

/// Machine word parameters. Valid addresses are 1 .. 2^N - 1.
struct WordParams {
  unsigned N = 32;
  unsigned k0 = 20;  // nonce length used by new~
  enum class Endian { Little } endian = Endian::Little;

  Nat word_limit() const { return Nat(1) << N; }
};

/// A finite bit sequence. Bit i of byte j of a byte literal sits at index 8j+i.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  static BitString from_bytes(std::string_view bytes);
  static BitString zeros(std::size_t n) { return BitString(std::vector<std::uint8_t>(n, 0)); }

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  void push_back(bool v) { bits_.push_back(v ? 1 : 0); }
  const std::vector<std::uint8_t>& raw() const { return bits_; }

  bool byte_aligned() const { return bits_.size() % 8 == 0; }
  /// Requires byte_aligned().
  std::string to_bytes() const;

  friend bool operator==(const BitString&, const BitString&) = default;
  friend auto operator<=>(const BitString& a, const BitString& b) { return a.bits_ <=> b.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
};

BitString bs(const Nat& n, const WordParams& p);
inline BitString bs(std::uint64_t n, const WordParams& p) { return bs(Nat(n), p); }
Nat val(const BitString& b, const WordParams& p);
std::optional<BitString> sub(const BitString& b, const Nat& o, const Nat& l);
BitString concat(const BitString& a, const BitString& b);

/// Minimal little-endian base-2 encoding (ε for 0).
BitString min_bits(const Nat& n);

/// Parses `x"AB"`, `"abc"`, `i<dec>`, `iN`, `b"0101"`, `eps`.
std::optional<BitString> parse_literal(std::string_view text, const WordParams& p);
/// Canonical literal: i<dec> for N-bit words, ASCII or hex when byte aligned, b"..." otherwise.
std::string format_literal(const BitString& b, const WordParams& p);
std::string to_hex(const BitString& b);

std::uint64_t to_u64(const Nat& n);

}  // namespace pmx
