#include "pmx/bits.hpp"

#include <cctype>
#include <stdexcept>

namespace pmx {

BitString BitString::from_bytes(std::string_view bytes) {
  std::vector<std::uint8_t> bits;
  bits.reserve(bytes.size() * 8);
  for (unsigned char c : bytes)
    for (int i = 0; i < 8; ++i) bits.push_back((c >> i) & 1);
  return BitString(std::move(bits));
}

std::string BitString::to_bytes() const {
  std::string out(bits_.size() / 8, '\0');
  for (std::size_t j = 0; j < out.size(); ++j) {
    unsigned v = 0;
    for (int i = 0; i < 8; ++i) v |= unsigned(bits_[8 * j + i]) << i;
    out[j] = char(v);
  }
  return out;
}

BitString min_bits(const Nat& n) {
  std::vector<std::uint8_t> bits;
  Nat m = n;
  while (m > 0) {
    bits.push_back(static_cast<std::uint8_t>(m & 1));
    m >>= 1;
  }
  return BitString(std::move(bits));
}

BitString bs(const Nat& n, const WordParams& p) {
  if (n >= p.word_limit()) return min_bits(n);
  std::vector<std::uint8_t> bits(p.N, 0);
  Nat m = n;
  for (unsigned i = 0; i < p.N && m > 0; ++i, m >>= 1) bits[i] = static_cast<std::uint8_t>(m & 1);
  return BitString(std::move(bits));
}

Nat val(const BitString& b, const WordParams&) {
  Nat r = 0;
  for (std::size_t i = b.size(); i-- > 0;) {
    r <<= 1;
    if (b[i]) r |= 1;
  }
  return r;
}

std::optional<BitString> sub(const BitString& b, const Nat& o, const Nat& l) {
  if (o + l > b.size()) return std::nullopt;
  auto off = static_cast<std::size_t>(o), len = static_cast<std::size_t>(l);
  return BitString(std::vector<std::uint8_t>(b.raw().begin() + off, b.raw().begin() + off + len));
}

BitString concat(const BitString& a, const BitString& b) {
  auto bits = a.raw();
  bits.insert(bits.end(), b.raw().begin(), b.raw().end());
  return BitString(std::move(bits));
}

static int hexval(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<BitString> parse_literal(std::string_view t, const WordParams& p) {
  if (t == "eps" || t == "\xCE\xB5") return BitString();
  if (t == "iN") return bs(p.N, p);
  auto quoted = [&](std::size_t start) -> std::optional<std::string_view> {
    if (t.size() < start + 2 || t[start] != '"' || t.back() != '"') return std::nullopt;
    return t.substr(start + 1, t.size() - start - 2);
  };
  if (t.size() >= 2 && t[0] == 'i' && std::isdigit(static_cast<unsigned char>(t[1]))) {
    Nat n = 0;
    for (char c : t.substr(1)) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      n = n * 10 + (c - '0');
    }
    return bs(n, p);
  }
  if (!t.empty() && t[0] == 'x') {
    auto body = quoted(1);
    if (!body || body->size() % 2) return std::nullopt;
    std::string bytes;
    for (std::size_t i = 0; i < body->size(); i += 2) {
      int hi = hexval((*body)[i]), lo = hexval((*body)[i + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      bytes.push_back(char(hi * 16 + lo));
    }
    return BitString::from_bytes(bytes);
  }
  if (!t.empty() && t[0] == 'b') {
    auto body = quoted(1);
    if (!body) return std::nullopt;
    BitString r;
    for (char c : *body) {
      if (c != '0' && c != '1') return std::nullopt;
      r.push_back(c == '1');
    }
    return r;
  }
  if (auto body = quoted(0)) {
    std::string bytes;
    for (std::size_t i = 0; i < body->size(); ++i) {
      char c = (*body)[i];
      if (c == '\\' && i + 1 < body->size()) c = (*body)[++i];
      bytes.push_back(c);
    }
    return BitString::from_bytes(bytes);
  }
  return std::nullopt;
}

std::string to_hex(const BitString& b) {
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : b.to_bytes()) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

std::string format_literal(const BitString& b, const WordParams& p) {
  if (b.empty()) return "eps";
  if (b.byte_aligned()) {
    std::string bytes = b.to_bytes();
    bool printable = true, alnum = true, letter = false;
    for (unsigned char c : bytes) {
      if (c < 0x20 || c > 0x7e || c == '"' || c == '\\') printable = false;
      if (!std::isalnum(c)) alnum = false;
      if (std::isalpha(c)) letter = true;
    }
    if (b.size() == p.N && !(alnum && letter)) return "i" + val(b, p).str();
    if (printable) return "\"" + bytes + "\"";
    return "x\"" + to_hex(b) + "\"";
  }
  if (b.size() == p.N) return "i" + val(b, p).str();
  std::string out = "b\"";
  for (std::size_t i = 0; i < b.size(); ++i) out.push_back(b[i] ? '1' : '0');
  return out + "\"";
}

std::uint64_t to_u64(const Nat& n) {
  if (n > Nat(std::numeric_limits<std::uint64_t>::max())) throw std::overflow_error("value exceeds 64 bits");
  return static_cast<std::uint64_t>(n);
}

}  // namespace pmx
