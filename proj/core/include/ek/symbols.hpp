#pragma once

#include <cmath>

// Radial dispersive symbols of the linearized flow (normalized units).
namespace ek::propagator {

inline double symbol_H(double r) { return r * std::sqrt(2.0 + r * r); }
inline double symbol_U(double r) { return r / std::sqrt(2.0 + r * r); }
// zero mode maps to 0 by convention
inline double symbol_U_inv(double r) { return r == 0.0 ? 0.0 : std::sqrt(2.0 + r * r) / r; }
inline double symbol_H_prime(double r) { return (2.0 + 2.0 * r * r) / std::sqrt(2.0 + r * r); }
inline double symbol_H_second(double r) {
    double q = 2.0 + r * r;
    return r * (6.0 + 2.0 * r * r) / (q * std::sqrt(q));
}

}  // namespace ek::propagator
