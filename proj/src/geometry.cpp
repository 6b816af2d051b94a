#include "supercorr/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "supercorr/errors.hpp"

namespace supercorr {

const char* to_string(LatticeKind k) {
    switch (k) {
        case LatticeKind::chain: return "chain";
        case LatticeKind::ring: return "ring";
        case LatticeKind::square: return "square";
        case LatticeKind::cube: return "cube";
        case LatticeKind::waveguide: return "waveguide";
        case LatticeKind::custom: return "custom";
    }
    return "?";
}

PolVec polarization_vector(Polarization p) {
    if (p == Polarization::circular) {
        const double s = 1.0 / std::sqrt(2.0);
        return {cdouble(s, 0.0), cdouble(0.0, s), cdouble(0.0, 0.0)};
    }
    return {cdouble(0.0, 0.0), cdouble(0.0, 0.0), cdouble(1.0, 0.0)};
}

namespace {

void check_dims(const std::vector<int>& dims, std::size_t expected, const char* kind) {
    if (dims.size() != expected)
        throw std::invalid_argument(std::string("build_lattice: ") + kind + " expects " +
                                    std::to_string(expected) + " dimension(s), got " +
                                    std::to_string(dims.size()));
    for (int d : dims)
        if (d < 1)
            throw std::invalid_argument(std::string("build_lattice: ") + kind +
                                        " dimensions must be >= 1");
}

}  // namespace

EmitterArray build_lattice(LatticeKind kind, const std::vector<int>& dims, double a,
                           Polarization pol) {
    if (!(a > 0.0)) throw std::invalid_argument("build_lattice: spacing must be > 0");

    EmitterArray arr;
    arr.kind = kind;
    arr.spacing = a;
    arr.polarization = polarization_vector(pol);

    switch (kind) {
        case LatticeKind::chain: {
            check_dims(dims, 1, "chain");
            const int n = dims[0];
            arr.positions.reserve(n);
            for (int i = 0; i < n; ++i) arr.positions.push_back({i * a, 0.0, 0.0});
            break;
        }
        case LatticeKind::ring: {
            check_dims(dims, 1, "ring");
            const int n = dims[0];
            if (n < 2)
                throw std::invalid_argument("build_lattice: a ring needs at least 2 emitters");
            // Chord between neighbors equals the requested spacing.
            const double radius = a / (2.0 * std::sin(pi / n));
            arr.positions.reserve(n);
            for (int i = 0; i < n; ++i) {
                const double phi = 2.0 * pi * i / n;
                arr.positions.push_back({radius * std::cos(phi), radius * std::sin(phi), 0.0});
            }
            break;
        }
        case LatticeKind::square: {
            check_dims(dims, 2, "square");
            arr.positions.reserve(static_cast<std::size_t>(dims[0]) * dims[1]);
            for (int i = 0; i < dims[0]; ++i)
                for (int j = 0; j < dims[1]; ++j)
                    arr.positions.push_back({i * a, j * a, 0.0});
            break;
        }
        case LatticeKind::cube: {
            check_dims(dims, 3, "cube");
            arr.positions.reserve(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
            for (int i = 0; i < dims[0]; ++i)
                for (int j = 0; j < dims[1]; ++j)
                    for (int k = 0; k < dims[2]; ++k)
                        arr.positions.push_back({i * a, j * a, k * a});
            break;
        }
        default:
            throw std::invalid_argument(
                "build_lattice: kind must be chain, ring, square or cube");
    }
    return arr;
}

EmitterArray load_custom(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("load_custom: cannot open '" + path + "'");

    EmitterArray arr;
    arr.kind = LatticeKind::custom;

    auto strip = [](std::string s) {
        const auto hash = s.find('#');
        if (hash != std::string::npos) s.erase(hash);
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };

    std::string line;
    int line_no = 0;
    bool have_pol = false;
    std::vector<int> source_lines;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = strip(line);
        if (body.empty()) continue;
        if (!have_pol) {
            // Expect: d = (a b c d e f)
            const auto eq = body.find('=');
            const auto lp = body.find('(');
            const auto rp = body.rfind(')');
            if (body.substr(0, 1) != "d" || eq == std::string::npos ||
                lp == std::string::npos || rp == std::string::npos || rp < lp)
                throw parse_error("load_custom: line " + std::to_string(line_no) +
                                  ": expected polarization header 'd = (...)'");
            std::istringstream iss(body.substr(lp + 1, rp - lp - 1));
            double v[6];
            for (double& x : v)
                if (!(iss >> x))
                    throw parse_error("load_custom: line " + std::to_string(line_no) +
                                      ": polarization needs 6 numbers");
            arr.polarization = {cdouble(v[0], v[1]), cdouble(v[2], v[3]), cdouble(v[4], v[5])};
            const double nrm = pol_norm(arr.polarization);
            if (std::abs(nrm - 1.0) > 1e-6)
                throw parse_error("load_custom: line " + std::to_string(line_no) +
                                  ": polarization norm " + std::to_string(nrm) +
                                  " is not 1 within 1e-6");
            if (std::abs(nrm - 1.0) > 1e-12) {
                std::cerr << "load_custom: normalizing polarization (|d| = " << nrm << ")\n";
                for (auto& c : arr.polarization) c /= nrm;
            }
            have_pol = true;
            continue;
        }
        std::istringstream iss(body);
        double x, y, z;
        if (!(iss >> x >> y >> z))
            throw parse_error("load_custom: line " + std::to_string(line_no) +
                              ": expected 'x y z'");
        std::string extra;
        if (iss >> extra)
            throw parse_error("load_custom: line " + std::to_string(line_no) +
                              ": trailing content '" + extra + "'");
        arr.positions.push_back({x, y, z});
        source_lines.push_back(line_no);
    }
    if (!have_pol) throw parse_error("load_custom: missing polarization header");
    if (arr.positions.empty()) throw parse_error("load_custom: no emitters");

    for (std::size_t i = 0; i < arr.positions.size(); ++i)
        for (std::size_t j = i + 1; j < arr.positions.size(); ++j)
            if ((arr.positions[i] - arr.positions[j]).norm() <= 1e-12)
                throw parse_error("load_custom: line " + std::to_string(source_lines[j]) +
                                  ": duplicate of position on line " +
                                  std::to_string(source_lines[i]));
    return arr;
}

}  // namespace supercorr
