// Exact decimal numbers (scaled 64-bit integers).
//
// ASTs and cellmaps never hold binary floats; a Decimal is units * 10^-scale
// with no trailing zero digits, so equal values have equal representations
// and text round-trips are bit-exact.
#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>

namespace mm {

class Decimal {
public:
    Decimal() = default;
    Decimal(long long units, int scale) : units_(units), scale_(scale) { normalize(); }
    static Decimal from_int(long long v) { return Decimal(v, 0); }

    static std::optional<Decimal> parse(std::string_view text) {
        if (text.empty()) return std::nullopt;
        bool neg = false;
        std::size_t i = 0;
        if (text[0] == '-' || text[0] == '+') { neg = text[0] == '-'; i = 1; }
        long long units = 0;
        int scale = 0;
        bool seen_digit = false, seen_dot = false;
        for (; i < text.size(); ++i) {
            char c = text[i];
            if (c == '.') {
                if (seen_dot) return std::nullopt;
                seen_dot = true;
            } else if (c >= '0' && c <= '9') {
                if (units > (INT64_MAX - 9) / 10) return std::nullopt;
                units = units * 10 + (c - '0');
                if (seen_dot) ++scale;
                seen_digit = true;
            } else {
                return std::nullopt;
            }
        }
        if (!seen_digit) return std::nullopt;
        return Decimal(neg ? -units : units, scale);
    }

    long long units() const { return units_; }
    int scale() const { return scale_; }
    bool is_zero() const { return units_ == 0; }
    bool is_negative() const { return units_ < 0; }

    bool is_integer() const { return scale_ == 0; }
    long long to_int() const { return units_; }  // valid only when is_integer()

    double to_double() const {
        // Convert via the canonical text so the mapping is the shortest
        // double for the decimal, identically on every platform.
        return std::strtod(to_string().c_str(), nullptr);
    }

    std::string to_string() const {
        std::string digits = std::to_string(units_ < 0 ? -units_ : units_);
        if ((int)digits.size() <= scale_)
            digits.insert(0, scale_ + 1 - digits.size(), '0');
        std::string out;
        if (units_ < 0) out += '-';
        out += digits.substr(0, digits.size() - scale_);
        if (scale_ > 0) {
            out += '.';
            out += digits.substr(digits.size() - scale_);
        }
        return out;
    }

    Decimal operator-() const { return Decimal(-units_, scale_); }

    friend Decimal operator+(const Decimal& a, const Decimal& b) {
        auto [au, bu, s] = aligned(a, b);
        return Decimal(au + bu, s);
    }
    friend Decimal operator-(const Decimal& a, const Decimal& b) {
        auto [au, bu, s] = aligned(a, b);
        return Decimal(au - bu, s);
    }
    friend Decimal operator*(const Decimal& a, const Decimal& b) {
        __int128 p = (__int128)a.units_ * b.units_;
        return Decimal((long long)p, a.scale_ + b.scale_);
    }

    // Division and exponentiation succeed only when the result is a finite
    // decimal within range; callers fall back to symbolic form otherwise.
    static std::optional<Decimal> div(const Decimal& a, const Decimal& b) {
        if (b.units_ == 0) return std::nullopt;
        __int128 num = a.units_;
        int scale = a.scale_ - b.scale_;
        for (int extra = 0; extra <= 24; ++extra) {
            if (num % b.units_ == 0) {
                __int128 q = num / b.units_;
                if (q > INT64_MAX || q < INT64_MIN) return std::nullopt;
                return Decimal((long long)q, scale + extra);
            }
            num *= 10;
            if (num > (__int128)INT64_MAX * 1000000000LL) return std::nullopt;
        }
        return std::nullopt;
    }

    static std::optional<Decimal> pow(const Decimal& base, long long exp) {
        if (exp < 0) {
            auto p = pow(base, -exp);
            if (!p) return std::nullopt;
            return div(Decimal::from_int(1), *p);
        }
        Decimal acc = Decimal::from_int(1);
        for (long long i = 0; i < exp; ++i) {
            __int128 p = (__int128)acc.units_ * base.units_;
            if (p > INT64_MAX || p < INT64_MIN) return std::nullopt;
            acc = acc * base;
        }
        return acc;
    }

    friend bool operator==(const Decimal& a, const Decimal& b) {
        return a.units_ == b.units_ && a.scale_ == b.scale_;
    }
    friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
        auto [au, bu, s] = aligned(a, b);
        return au <=> bu;
    }

private:
    struct Aligned { __int128 a, b; int scale; };
    static Aligned aligned(const Decimal& a, const Decimal& b) {
        __int128 au = a.units_, bu = b.units_;
        int s = a.scale_;
        for (int i = a.scale_; i < b.scale_; ++i) au *= 10;
        for (int i = b.scale_; i < a.scale_; ++i) bu *= 10;
        if (b.scale_ > s) s = b.scale_;
        return {au, bu, s};
    }
    Decimal(__int128 units, int scale) : units_((long long)units), scale_(scale) { normalize(); }

    void normalize() {
        while (scale_ > 0 && units_ % 10 == 0) { units_ /= 10; --scale_; }
        if (units_ == 0) scale_ = 0;
    }

    long long units_ = 0;
    int scale_ = 0;
};

}  // namespace mm
