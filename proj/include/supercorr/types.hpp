#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace supercorr {

using cdouble = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

// All lengths are measured in units of the transition wavelength, so the
// resonant wavenumber is fixed.
inline constexpr double wave_number = 2.0 * pi;

// Single-emitter decay rate; the unit of every rate in the code.
inline constexpr double unit_decay_rate = 1.0;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

// Shared complex dipole orientation, unit norm.
using PolVec = std::array<cdouble, 3>;

inline double pol_norm(const PolVec& d) {
    double s = 0.0;
    for (const auto& c : d) s += std::norm(c);
    return std::sqrt(s);
}

}  // namespace supercorr
