#pragma once

#include <cmath>

namespace afgn {

// A point in Valence-Arousal-Dominance space. Dictionary entries live in
// [1,9] per component; running sums may leave that range.
struct VadVector {
    double v = 0.0;
    double a = 0.0;
    double d = 0.0;

    friend VadVector operator+(const VadVector& x, const VadVector& y) {
        return {x.v + y.v, x.a + y.a, x.d + y.d};
    }
    friend VadVector operator-(const VadVector& x, const VadVector& y) {
        return {x.v - y.v, x.a - y.a, x.d - y.d};
    }
    friend VadVector operator/(const VadVector& x, double s) {
        return {x.v / s, x.a / s, x.d / s};
    }
    friend bool operator==(const VadVector& x, const VadVector& y) {
        return x.v == y.v && x.a == y.a && x.d == y.d;
    }
};

// The affect vector assigned to words missing from the dictionary.
inline constexpr VadVector kNeutralVad{5.0, 1.0, 5.0};

inline double dot(const VadVector& x, const VadVector& y) {
    return x.v * y.v + x.a * y.a + x.d * y.d;
}

inline double norm(const VadVector& x) { return std::sqrt(dot(x, x)); }

// Euclidean distance between two affect vectors.
inline double affect_distance(const VadVector& p, const VadVector& q) {
    return norm(p - q);
}

// Cosine similarity; 0 when either vector has zero norm (empty prefixes
// at decode start produce the zero vector).
inline double cosine_sim(const VadVector& p, const VadVector& q) {
    const double np = norm(p);
    const double nq = norm(q);
    if (np == 0.0 || nq == 0.0) return 0.0;
    return dot(p, q) / (np * nq);
}

}  // namespace afgn
