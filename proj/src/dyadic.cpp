#include "spectral_tower/dyadic.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "spectral_tower/errors.hpp"

namespace spectral_tower {

namespace {

constexpr int kMaxExponent = 60;

std::int64_t checked_shift(std::int64_t value, int bits) {
  if (bits == 0 || value == 0) return value;
  if (bits >= 62) throw ValidationError("dyadic overflow");
  const std::int64_t limit = std::numeric_limits<std::int64_t>::max() >> bits;
  if (value > limit || value < -limit) throw ValidationError("dyadic overflow");
  return value * (std::int64_t{1} << bits);
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw ValidationError("dyadic overflow");
  return out;
}

std::int64_t parse_int(std::string_view text, std::string_view whole) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ValidationError("not a dyadic number: '" + std::string(whole) + "'");
  return value;
}

bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(std::int64_t v) {
  int e = 0;
  while ((std::int64_t{1} << e) < v) ++e;
  return e;
}

}  // namespace

Dyadic::Dyadic(std::int64_t num, int exp) : num_(num), exp_(exp) {
  if (exp_ < 0) {
    num_ = checked_shift(num_, -exp_);
    exp_ = 0;
  }
  normalize();
}

void Dyadic::normalize() {
  if (num_ == 0) {
    exp_ = 0;
    return;
  }
  while (exp_ > 0 && (num_ % 2) == 0) {
    num_ /= 2;
    --exp_;
  }
  if (exp_ > kMaxExponent) throw ValidationError("dyadic exponent too large");
}

Dyadic Dyadic::ratio(std::int64_t num, std::int64_t den) {
  if (!is_power_of_two(den))
    throw ValidationError("denominator " + std::to_string(den) + " is not a power of two");
  return Dyadic(num, log2_exact(den));
}

Dyadic Dyadic::parse(std::string_view text) {
  const std::string_view whole = text;
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) throw ValidationError("empty dyadic value");

  if (text.starts_with("2^")) {
    const auto e = parse_int(text.substr(2), whole);
    if (e < -kMaxExponent || e > 62) throw ValidationError("dyadic exponent out of range: '" + std::string(whole) + "'");
    return e >= 0 ? Dyadic(std::int64_t{1} << e) : Dyadic(1, static_cast<int>(-e));
  }
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const auto num = parse_int(text.substr(0, slash), whole);
    const auto den = parse_int(text.substr(slash + 1), whole);
    return ratio(num, den);
  }
  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    bool negative = false;
    std::string_view int_part = text.substr(0, dot);
    if (!int_part.empty() && (int_part.front() == '-' || int_part.front() == '+')) {
      negative = int_part.front() == '-';
      int_part.remove_prefix(1);
    }
    const std::string_view frac = text.substr(dot + 1);
    if (frac.empty() || frac.size() > 18) throw ValidationError("not a dyadic number: '" + std::string(whole) + "'");
    const std::int64_t ip = int_part.empty() ? 0 : parse_int(int_part, whole);
    std::int64_t fp = 0;
    for (char c : frac) {
      if (c < '0' || c > '9') throw ValidationError("not a dyadic number: '" + std::string(whole) + "'");
      fp = fp * 10 + (c - '0');
    }
    // frac digits k: value fp / 10^k = fp / (5^k 2^k); dyadic iff 5^k divides fp.
    std::int64_t five_pow = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) five_pow *= 5;
    if (fp % five_pow != 0) throw ValidationError("value '" + std::string(whole) + "' is not a dyadic rational");
    const int k = static_cast<int>(frac.size());
    Dyadic frac_value(fp / five_pow, k);
    Dyadic value = Dyadic(ip) + frac_value;
    return negative ? Dyadic(0) - value : value;
  }
  return Dyadic(parse_int(text, whole));
}

double Dyadic::to_double() const { return std::ldexp(static_cast<double>(num_), -exp_); }

std::string Dyadic::str() const {
  if (exp_ == 0) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(denominator());
}

bool Dyadic::is_multiple_of(const Dyadic& unit) const {
  if (!unit.is_positive()) throw ValidationError("dyadic unit must be positive");
  // (num/2^e) / (u/2^f) = num * 2^(f-e) / u
  const int shift = unit.exp_ - exp_;
  if (shift >= 0) return checked_shift(num_, shift) % unit.num_ == 0;
  // need num / (u * 2^(e-f)) integral
  const std::int64_t denom = checked_shift(unit.num_, -shift);
  return num_ % denom == 0;
}

std::int64_t Dyadic::divide_exact(const Dyadic& unit) const {
  if (!is_multiple_of(unit))
    throw ValidationError(str() + " is not an integer multiple of " + unit.str());
  const int shift = unit.exp_ - exp_;
  if (shift >= 0) return checked_shift(num_, shift) / unit.num_;
  return num_ / checked_shift(unit.num_, -shift);
}

Dyadic Dyadic::half() const { return Dyadic(num_, exp_ + 1); }

Dyadic operator+(const Dyadic& a, const Dyadic& b) {
  const int e = std::max(a.exp_, b.exp_);
  const std::int64_t x = checked_shift(a.num_, e - a.exp_);
  const std::int64_t y = checked_shift(b.num_, e - b.exp_);
  std::int64_t sum = 0;
  if (__builtin_add_overflow(x, y, &sum)) throw ValidationError("dyadic overflow");
  return Dyadic(sum, e);
}

Dyadic operator-(const Dyadic& a, const Dyadic& b) { return a + Dyadic(-b.num_, b.exp_); }

Dyadic operator*(const Dyadic& a, const Dyadic& b) {
  return Dyadic(checked_mul(a.num_, b.num_), a.exp_ + b.exp_);
}

Dyadic operator*(const Dyadic& a, std::int64_t k) { return Dyadic(checked_mul(a.num_, k), a.exp_); }

std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) {
  const int e = std::max(a.exp_, b.exp_);
  return checked_shift(a.num_, e - a.exp_) <=> checked_shift(b.num_, e - b.exp_);
}

Dyadic min(const Dyadic& a, const Dyadic& b) { return b < a ? b : a; }
Dyadic max(const Dyadic& a, const Dyadic& b) { return a < b ? b : a; }

}  // namespace spectral_tower
