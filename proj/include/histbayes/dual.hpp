#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace histbayes {

/// Forward-mode dual number carrying the partial derivatives with respect to
/// every model parameter at once.
///
/// All duals taking part in one evaluation have the same partials length; a
/// constant is a dual with all-zero partials.
struct DualVector {
    double value = 0.0;
    std::vector<double> partials;

    DualVector() = default;
    DualVector(double v, std::size_t n) : value(v), partials(n, 0.0) {}
    DualVector(double v, std::vector<double> d) : value(v), partials(std::move(d)) {}

    /// Independent variable `index` out of `n`.
    static DualVector variable(double v, std::size_t index, std::size_t n) {
        DualVector x(v, n);
        x.partials[index] = 1.0;
        return x;
    }

    std::size_t size() const noexcept { return partials.size(); }

    DualVector& operator+=(const DualVector& o) {
        value += o.value;
        for (std::size_t i = 0; i < partials.size(); ++i) partials[i] += o.partials[i];
        return *this;
    }
    DualVector& operator-=(const DualVector& o) {
        value -= o.value;
        for (std::size_t i = 0; i < partials.size(); ++i) partials[i] -= o.partials[i];
        return *this;
    }
    DualVector& operator*=(const DualVector& o) {
        for (std::size_t i = 0; i < partials.size(); ++i)
            partials[i] = partials[i] * o.value + value * o.partials[i];
        value *= o.value;
        return *this;
    }
    DualVector& operator/=(const DualVector& o) {
        const double inv = 1.0 / o.value;
        const double q = value * inv;
        for (std::size_t i = 0; i < partials.size(); ++i)
            partials[i] = (partials[i] - q * o.partials[i]) * inv;
        value = q;
        return *this;
    }
    DualVector& operator+=(double c) {
        value += c;
        return *this;
    }
    DualVector& operator-=(double c) {
        value -= c;
        return *this;
    }
    DualVector& operator*=(double c) {
        value *= c;
        for (double& d : partials) d *= c;
        return *this;
    }
    DualVector& operator/=(double c) { return *this *= (1.0 / c); }

    DualVector operator-() const {
        DualVector r = *this;
        r *= -1.0;
        return r;
    }
};

inline DualVector operator+(DualVector a, const DualVector& b) { return a += b; }
inline DualVector operator-(DualVector a, const DualVector& b) { return a -= b; }
inline DualVector operator*(DualVector a, const DualVector& b) { return a *= b; }
inline DualVector operator/(DualVector a, const DualVector& b) { return a /= b; }
inline DualVector operator+(DualVector a, double c) { return a += c; }
inline DualVector operator+(double c, DualVector a) { return a += c; }
inline DualVector operator-(DualVector a, double c) { return a -= c; }
inline DualVector operator-(double c, DualVector a) {
    a *= -1.0;
    return a += c;
}
inline DualVector operator*(DualVector a, double c) { return a *= c; }
inline DualVector operator*(double c, DualVector a) { return a *= c; }
inline DualVector operator/(DualVector a, double c) { return a /= c; }
inline DualVector operator/(double c, const DualVector& a) {
    DualVector r(c / a.value, a.size());
    const double scale = -c / (a.value * a.value);
    for (std::size_t i = 0; i < a.size(); ++i) r.partials[i] = scale * a.partials[i];
    return r;
}

inline DualVector log(DualVector a) {
    const double inv = 1.0 / a.value;
    for (double& d : a.partials) d *= inv;
    a.value = std::log(a.value);
    return a;
}

inline DualVector exp(DualVector a) {
    a.value = std::exp(a.value);
    for (double& d : a.partials) d *= a.value;
    return a;
}

inline DualVector sqrt(DualVector a) {
    a.value = std::sqrt(a.value);
    const double scale = 0.5 / a.value;
    for (double& d : a.partials) d *= scale;
    return a;
}

/// Scalar-generic access so templated code runs on both double and DualVector.
inline double value_of(double x) noexcept { return x; }
inline double value_of(const DualVector& x) noexcept { return x.value; }

template <typename T>
T constant_like(double v, const T& like);

template <>
inline double constant_like<double>(double v, const double&) {
    return v;
}

template <>
inline DualVector constant_like<DualVector>(double v, const DualVector& like) {
    return DualVector(v, like.size());
}

}  // namespace histbayes
