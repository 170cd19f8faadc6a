#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace spectral_tower {

/// Exact dyadic rational num / 2^exp.
///
/// All tower lengths and grid spacings are dyadic so that faces, windows and
/// grid lines coincide exactly. The representation is kept normalized
/// (num odd, or exp == 0), so equality is structural.
class Dyadic {
 public:
  constexpr Dyadic() = default;
  Dyadic(std::int64_t num, int exp = 0);

  /// num / den with den a positive power of two.
  static Dyadic ratio(std::int64_t num, std::int64_t den);

  /// Accepts "3", "-3", "1/32", "0.375", "2^-5".
  static Dyadic parse(std::string_view text);

  std::int64_t numerator() const { return num_; }
  int exponent() const { return exp_; }
  /// Smallest power-of-two denominator that represents the value.
  std::int64_t denominator() const { return std::int64_t{1} << exp_; }

  double to_double() const;
  std::string str() const;

  bool is_positive() const { return num_ > 0; }
  bool is_zero() const { return num_ == 0; }

  /// True iff *this / unit is an integer. unit must be positive.
  bool is_multiple_of(const Dyadic& unit) const;
  /// *this / unit as an integer; throws ValidationError if not a multiple.
  std::int64_t divide_exact(const Dyadic& unit) const;

  Dyadic half() const;

  friend Dyadic operator+(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator-(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator*(const Dyadic& a, const Dyadic& b);
  friend Dyadic operator*(const Dyadic& a, std::int64_t k);
  friend bool operator==(const Dyadic& a, const Dyadic& b) = default;
  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b);

 private:
  void normalize();

  std::int64_t num_ = 0;
  int exp_ = 0;
};

Dyadic min(const Dyadic& a, const Dyadic& b);
Dyadic max(const Dyadic& a, const Dyadic& b);

}  // namespace spectral_tower
