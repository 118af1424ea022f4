#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pi01forge {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline Int rat_num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline Int rat_den(const Rat& r) { return boost::multiprecision::denominator(r); }

std::string int_to_string(const Int& v);
Int int_from_string(const std::string& s);
std::string rat_to_string(const Rat& r); // "num/den" reduced form

Int pow_int(const Int& base, std::uint64_t exp);
bool is_power_of_two(const Int& v);
// Exact log2 for powers of two; nullopt otherwise.
std::optional<std::uint64_t> log2_exact(const Int& v);
// floor(log2(v)) for v >= 1.
std::uint64_t floor_log2(const Int& v);

bool is_prime(const Int& v);            // deterministic trial division (desk scale)
Int next_prime_above(const Int& v);     // least prime > v
std::vector<std::uint64_t> primes_first(std::size_t count); // 2, 3, 5, ...

// Closed interval with exact rational endpoints.  Arithmetic widens outward, so a
// chain of operations yields a rigorous enclosure of the exact real value.
struct RatInterval {
    Rat lo;
    Rat hi;

    RatInterval() = default;
    RatInterval(Rat point) : lo(point), hi(std::move(point)) {}
    RatInterval(Rat l, Rat h);

    Rat width() const { return hi - lo; }
    bool contains(const Rat& x) const { return lo <= x && x <= hi; }
};

RatInterval operator+(const RatInterval& a, const RatInterval& b);
RatInterval operator-(const RatInterval& a, const RatInterval& b);
RatInterval operator*(const RatInterval& a, const RatInterval& b);

// Enclosures via truncated Taylor/atanh series with explicit remainder bounds.
// `terms` steers the work; width shrinks geometrically as terms grows.
RatInterval exp_interval(const Rat& x, unsigned terms);  // any rational x
RatInterval ln_interval(const Rat& x, unsigned terms);   // requires x > 0
RatInterval ln2_interval(unsigned terms);

// Exact divisor sum sigma(n) = sum of all divisors of n, n >= 1.
Int divisor_sigma(const Int& n);
// Exact harmonic number H_n = 1 + 1/2 + ... + 1/n.
Rat harmonic(std::uint64_t n);

} // namespace pi01forge
