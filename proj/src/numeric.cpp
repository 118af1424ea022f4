#include "pi01forge/numeric.hpp"
#include "pi01forge/error.hpp"

#include <algorithm>
#include <cctype>

namespace pi01forge {

std::string int_to_string(const Int& v) { return v.str(); }

Int int_from_string(const std::string& s) {
    if (s.empty()) fail("BadNumber", "empty string");
    std::size_t start = (s[0] == '-') ? 1 : 0;
    if (start == s.size()) fail("BadNumber", "sign without digits");
    for (std::size_t i = start; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            fail("BadNumber", "not a decimal integer: " + s);
    }
    return Int(s);
}

std::string rat_to_string(const Rat& r) {
    return rat_num(r).str() + "/" + rat_den(r).str();
}

Int pow_int(const Int& base, std::uint64_t exp) {
    Int result = 1;
    Int b = base;
    while (exp > 0) {
        if (exp & 1) result *= b;
        exp >>= 1;
        if (exp > 0) b *= b;
    }
    return result;
}

bool is_power_of_two(const Int& v) {
    if (v <= 0) return false;
    return (v & (v - 1)) == 0;
}

std::optional<std::uint64_t> log2_exact(const Int& v) {
    if (!is_power_of_two(v)) return std::nullopt;
    return boost::multiprecision::msb(v);
}

std::uint64_t floor_log2(const Int& v) {
    if (v < 1) fail("BadNumber", "floor_log2 needs v >= 1");
    return boost::multiprecision::msb(v);
}

bool is_prime(const Int& v) {
    if (v < 2) return false;
    if (v < 4) return true;
    if (v % 2 == 0) return false;
    for (Int d = 3; d * d <= v; d += 2) {
        if (v % d == 0) return false;
    }
    return true;
}

Int next_prime_above(const Int& v) {
    Int c = v + 1;
    if (c <= 2) return 2;
    if (c % 2 == 0) {
        if (c == 2) return 2;
        ++c;
    }
    while (!is_prime(c)) c += 2;
    return c;
}

std::vector<std::uint64_t> primes_first(std::size_t count) {
    std::vector<std::uint64_t> out;
    out.reserve(count);
    std::uint64_t candidate = 2;
    while (out.size() < count) {
        bool prime = true;
        for (std::uint64_t p : out) {
            if (p * p > candidate) break;
            if (candidate % p == 0) { prime = false; break; }
        }
        if (prime) out.push_back(candidate);
        candidate += (candidate == 2) ? 1 : 2;
    }
    return out;
}

RatInterval::RatInterval(Rat l, Rat h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo > hi) fail("IntervalInverted", "lo > hi");
}

RatInterval operator+(const RatInterval& a, const RatInterval& b) {
    return RatInterval(a.lo + b.lo, a.hi + b.hi);
}

RatInterval operator-(const RatInterval& a, const RatInterval& b) {
    return RatInterval(a.lo - b.hi, a.hi - b.lo);
}

RatInterval operator*(const RatInterval& a, const RatInterval& b) {
    Rat c1 = a.lo * b.lo, c2 = a.lo * b.hi, c3 = a.hi * b.lo, c4 = a.hi * b.hi;
    return RatInterval(std::min({c1, c2, c3, c4}), std::max({c1, c2, c3, c4}));
}

namespace {

RatInterval interval_inv_positive(const RatInterval& a) {
    if (a.lo <= 0) fail("IntervalInverted", "reciprocal of non-positive interval");
    return RatInterval(Rat(1) / a.hi, Rat(1) / a.lo);
}

RatInterval interval_pow(const RatInterval& a, std::int64_t e) {
    if (e < 0) return interval_inv_positive(interval_pow(a, -e));
    RatInterval result{Rat(1)};
    for (std::int64_t i = 0; i < e; ++i) result = result * a;
    return result;
}

// e = sum 1/j! enclosed with remainder <= 2/(T+1)!.
RatInterval euler_e(unsigned terms) {
    Rat sum = 0;
    Rat fact = 1;
    for (unsigned j = 0; j <= terms; ++j) {
        if (j > 0) fact *= j;
        sum += Rat(1) / fact;
    }
    Rat rem = Rat(2) / (fact * Rat(terms + 1));
    return RatInterval(sum, sum + rem);
}

// 2*atanh(u) = ln((1+u)/(1-u)) for 0 <= u < 1, with explicit tail bound.
RatInterval atanh2(const Rat& u, unsigned terms) {
    Rat sum = 0;
    Rat upow = u; // u^(2j+1)
    Rat u2 = u * u;
    for (unsigned j = 0; j <= terms; ++j) {
        sum += upow / Rat(2 * j + 1);
        upow *= u2;
    }
    // tail: sum_{j>terms} u^(2j+1)/(2j+1) <= u^(2T+3) / ((2T+3)(1-u^2))
    Rat rem = upow / (Rat(2 * terms + 3) * (Rat(1) - u2));
    return RatInterval(2 * sum, 2 * (sum + rem));
}

} // namespace

RatInterval exp_interval(const Rat& x, unsigned terms) {
    // x = m + f with m integral, f in [0,1); exp(x) = e^m * exp(f).
    Int num = rat_num(x), den = rat_den(x);
    Int m = num / den;
    if (x < 0 && m * den != num) m -= 1; // floor for negatives
    Rat f = x - Rat(m);

    RatInterval frac_part = [&] {
        Rat sum = 0, fact = 1, fpow = 1;
        for (unsigned j = 0; j <= terms; ++j) {
            if (j > 0) { fact *= j; fpow *= f; }
            sum += fpow / fact;
        }
        Rat rem = 2 * fpow * f / (fact * Rat(terms + 1));
        return RatInterval(sum, sum + rem);
    }();

    if (m == 0) return frac_part;
    if (m < Int(std::numeric_limits<std::int64_t>::min() / 2) ||
        m > Int(std::numeric_limits<std::int64_t>::max() / 2))
        fail("PrecisionExhausted", "exponent out of supported range");
    return interval_pow(euler_e(terms), static_cast<std::int64_t>(m)) * frac_part;
}

RatInterval ln2_interval(unsigned terms) {
    return atanh2(Rat(1, 3), terms);
}

RatInterval ln_interval(const Rat& x, unsigned terms) {
    if (x <= 0) fail("BadNumber", "ln of non-positive value");
    // Normalize x = 2^t * z with z in [1,2).
    std::int64_t t = 0;
    Rat z = x;
    while (z >= 2) { z /= 2; ++t; }
    while (z < 1) { z *= 2; --t; }
    Rat u = (z - 1) / (z + 1); // in [0, 1/3)
    RatInterval lnz = atanh2(u, terms);
    if (t == 0) return lnz;
    RatInterval t_ln2 = RatInterval(Rat(t)) * ln2_interval(terms);
    return t_ln2 + lnz;
}

Int divisor_sigma(const Int& n) {
    if (n < 1) fail("BadNumber", "divisor_sigma needs n >= 1");
    Int rest = n;
    Int sigma = 1;
    auto absorb = [&](const Int& p) {
        Int pk = 1;
        while (rest % p == 0) {
            rest /= p;
            pk *= p;
        }
        // contribution (p^(a+1) - 1)/(p - 1)
        sigma *= (pk * p - 1) / (p - 1);
    };
    if (rest % 2 == 0) absorb(2);
    for (Int d = 3; d * d <= rest; d += 2) {
        if (rest % d == 0) absorb(d);
    }
    if (rest > 1) sigma *= rest + 1;
    return sigma;
}

Rat harmonic(std::uint64_t n) {
    Rat h = 0;
    for (std::uint64_t k = 1; k <= n; ++k) h += Rat(1, k);
    return h;
}

} // namespace pi01forge
