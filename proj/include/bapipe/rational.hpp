#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace bapipe {

// Exact rational on int64 with 128-bit intermediates. All planner and
// simulator arithmetic goes through this type so results carry no
// floating-point drift.
class Rat {
public:
    constexpr Rat() : num_(0), den_(1) {}
    constexpr Rat(std::int64_t v) : num_(v), den_(1) {}
    Rat(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }

    bool is_integer() const { return den_ == 1; }

    friend Rat operator+(const Rat& a, const Rat& b) {
        return Rat::from128((__int128)a.num_ * b.den_ + (__int128)b.num_ * a.den_,
                            (__int128)a.den_ * b.den_);
    }
    friend Rat operator-(const Rat& a, const Rat& b) {
        return Rat::from128((__int128)a.num_ * b.den_ - (__int128)b.num_ * a.den_,
                            (__int128)a.den_ * b.den_);
    }
    friend Rat operator*(const Rat& a, const Rat& b) {
        return Rat::from128((__int128)a.num_ * b.num_, (__int128)a.den_ * b.den_);
    }
    friend Rat operator/(const Rat& a, const Rat& b) {
        if (b.num_ == 0) throw std::domain_error("Rat: division by zero");
        return Rat::from128((__int128)a.num_ * b.den_, (__int128)a.den_ * b.num_);
    }
    Rat operator-() const { Rat r; r.num_ = -num_; r.den_ = den_; return r; }

    Rat& operator+=(const Rat& o) { *this = *this + o; return *this; }
    Rat& operator-=(const Rat& o) { *this = *this - o; return *this; }
    Rat& operator*=(const Rat& o) { *this = *this * o; return *this; }
    Rat& operator/=(const Rat& o) { *this = *this / o; return *this; }

    friend bool operator==(const Rat& a, const Rat& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
    friend bool operator<(const Rat& a, const Rat& b) {
        return (__int128)a.num_ * b.den_ < (__int128)b.num_ * a.den_;
    }
    friend bool operator>(const Rat& a, const Rat& b) { return b < a; }
    friend bool operator<=(const Rat& a, const Rat& b) { return !(b < a); }
    friend bool operator>=(const Rat& a, const Rat& b) { return !(a < b); }

    // Largest integer <= value.
    std::int64_t floor() const {
        std::int64_t q = num_ / den_;
        if (num_ % den_ != 0 && num_ < 0) --q;
        return q;
    }
    std::int64_t ceil() const {
        std::int64_t q = num_ / den_;
        if (num_ % den_ != 0 && num_ > 0) ++q;
        return q;
    }

    double to_double() const { return double(num_) / double(den_); }

    // "p/q" for non-integers, plain "p" otherwise.
    std::string str() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

    friend std::ostream& operator<<(std::ostream& os, const Rat& r) {
        return os << r.str();
    }

private:
    static Rat from128(__int128 n, __int128 d) {
        if (d == 0) throw std::domain_error("Rat: zero denominator");
        if (d < 0) { n = -n; d = -d; }
        __int128 an = n < 0 ? -n : n;
        __int128 g = gcd128(an, d);
        if (g > 1) { n /= g; d /= g; }
        Rat r;
        if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX)
            throw std::overflow_error("Rat: overflow");
        r.num_ = (std::int64_t)n;
        r.den_ = (std::int64_t)d;
        return r;
    }
    static __int128 gcd128(__int128 a, __int128 b) {
        while (b != 0) { __int128 t = a % b; a = b; b = t; }
        return a == 0 ? 1 : a;
    }
    void normalize() {
        if (den_ == 0) throw std::domain_error("Rat: zero denominator");
        if (den_ < 0) { num_ = -num_; den_ = -den_; }
        std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
        if (den_ == 0) den_ = 1;
    }

    std::int64_t num_;
    std::int64_t den_;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return (a + b - 1) / b;
}

}  // namespace bapipe
