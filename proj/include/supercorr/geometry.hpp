#pragma once

#include <optional>
#include <string>
#include <vector>

#include "supercorr/types.hpp"

namespace supercorr {

enum class LatticeKind { chain, ring, square, cube, waveguide, custom };
enum class Polarization { circular, linear };

const char* to_string(LatticeKind k);

struct EmitterArray {
    std::vector<Vec3> positions;
    PolVec polarization{};            // shared complex unit vector
    LatticeKind kind = LatticeKind::custom;
    std::optional<double> spacing;    // nearest-neighbor distance, absent for custom
    int n() const { return static_cast<int>(positions.size()); }
};

// Unit dipole vectors used throughout: circular in-plane (1, i, 0)/sqrt(2),
// linear out-of-plane (0, 0, 1).
PolVec polarization_vector(Polarization p);

// Bravais lattices in the xy-plane (chain along x, ring in xy, cube in xyz).
// dims must match the kind: chain/ring take (N), square (nx, ny),
// cube (nx, ny, nz). Spacing a > 0 in units of the transition wavelength.
EmitterArray build_lattice(LatticeKind kind, const std::vector<int>& dims, double a,
                           Polarization pol);

// Plain-text emitter file: a header line
//   d = (dx_re dx_im dy_re dy_im dz_re dz_im)
// followed by one "x y z" triple per line; '#' starts a comment.
EmitterArray load_custom(const std::string& path);

}  // namespace supercorr
