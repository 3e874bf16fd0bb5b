#include "pmx/bits.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pmx;

namespace {

// Oracle: direct positional expansion, written independently of val/bs.
std::uint64_t oracle_val(const BitString& b) {
  std::uint64_t r = 0, w = 1;
  for (std::size_t i = 0; i < b.size(); ++i, w <<= 1)
    if (b[i]) r += w;
  return r;
}

BitString oracle_bits(std::uint64_t n, unsigned width) {
  BitString b;
  for (unsigned i = 0; i < width; ++i) b.push_back((n >> i) & 1);
  return b;
}

}  // namespace

TEST(Bits, WordEncodingOfTen) {
  WordParams p{8};
  EXPECT_EQ(bs(10, p), oracle_bits(10, 8));
  EXPECT_EQ(format_literal(bs(10, p), p), "i10");
}

TEST(Bits, ZeroIsAllZeroWord) {
  WordParams p{8};
  EXPECT_EQ(bs(0, p), BitString::zeros(8));
}

TEST(Bits, RoundTripRandom) {
  std::mt19937_64 rng(1);
  for (unsigned N : {8u, 16u, 32u}) {
    WordParams p{N};
    for (int i = 0; i < 1000; ++i) {
      std::uint64_t n = rng() & ((std::uint64_t(1) << N) - 1);
      BitString b = bs(n, p);
      ASSERT_EQ(b.size(), N);
      ASSERT_EQ(b, oracle_bits(n, N));
      ASSERT_EQ(val(b, p), n);
    }
  }
}

TEST(Bits, ValExhaustive16) {
  WordParams p{16};
  for (std::uint64_t n = 0; n < (1u << 16); ++n) {
    BitString b = oracle_bits(n, 16);
    ASSERT_EQ(val(b, p), oracle_val(b));
  }
}

TEST(Bits, ValOfEmptyIsZero) { EXPECT_EQ(val(BitString(), WordParams{}), 0); }

TEST(Bits, LargeValuesUseMinimalEncoding) {
  WordParams p{4};
  EXPECT_EQ(bs(16, p), oracle_bits(16, 5));
  EXPECT_EQ(val(bs(1000, p), p), 1000);
}

TEST(Bits, SubIdentityAndBounds) {
  BitString b = BitString::from_bytes("abc");
  EXPECT_EQ(sub(b, 0, b.size()), b);
  EXPECT_FALSE(sub(b, 20, 5).has_value());
  EXPECT_TRUE(sub(b, 19, 5).has_value());
}

TEST(Bits, SubOfAsciiPair) {
  EXPECT_EQ(sub(BitString::from_bytes("ab"), 8, 8), BitString::from_bytes("b"));
}

TEST(Bits, ConcatIdentityAndSplit) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    BitString a = oracle_bits(rng(), rng() % 40), b = oracle_bits(rng(), rng() % 40), c = oracle_bits(rng(), rng() % 9);
    EXPECT_EQ(concat(a, BitString()), a);
    EXPECT_EQ(concat(BitString(), a), a);
    EXPECT_EQ(sub(concat(a, b), a.size(), b.size()), b);
    EXPECT_EQ(concat(concat(a, b), c), concat(a, concat(b, c)));
  }
}

TEST(Bits, SubComposition) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    BitString b = oracle_bits(rng(), rng() % 64);
    unsigned o1 = rng() % 70, l1 = rng() % 70, o2 = rng() % 70, l2 = rng() % 70;
    auto inner = sub(b, o1, l1);
    auto lhs = inner ? sub(*inner, o2, l2) : std::nullopt;
    auto rhs = sub(b, o1 + o2, l2);
    if (lhs && rhs) EXPECT_EQ(*lhs, *rhs);
    EXPECT_EQ(sub(b, o1, l1).has_value(), o1 + l1 <= b.size());
  }
}

TEST(Bits, Literals) {
  WordParams p{16};
  EXPECT_EQ(parse_literal("x\"0100\"", p), bs(1, p));
  EXPECT_EQ(parse_literal("\"ab\"", p), BitString::from_bytes("ab"));
  EXPECT_EQ(parse_literal("i20", p), bs(20, p));
  EXPECT_EQ(parse_literal("iN", p), bs(16, p));
  EXPECT_EQ(parse_literal("eps", p), BitString());
  EXPECT_EQ(parse_literal("b\"101\"", p), oracle_bits(5, 3));
  for (auto s : {"x\"DEADBEEF\"", "\"msg1\"", "i7", "eps", "b\"10110\""}) {
    auto b = parse_literal(s, p);
    ASSERT_TRUE(b);
    EXPECT_EQ(parse_literal(format_literal(*b, p), p), b) << s;
  }
}
