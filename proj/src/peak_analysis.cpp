#include "supercorr/peak_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace supercorr {

PeakResult find_peak(const Trajectory& traj) {
    const auto& s = traj.samples;
    if (s.size() < 3) throw std::domain_error("find_peak: need at least 3 samples");

    std::size_t imax = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].rate > s[imax].rate) imax = i;  // strict: earliest tie wins

    PeakResult pk;
    pk.method = traj.meta.method;
    pk.n_emitters = traj.meta.n_emitters;

    if (imax == 0) {
        pk.boundary_peak = true;
        pk.t_peak = 0.0;
        pk.r_peak = s[0].rate;
        return pk;
    }
    if (imax == s.size() - 1) {
        // Truncated run; report the edge sample unrefined.
        pk.t_peak = s[imax].t;
        pk.r_peak = s[imax].rate;
        return pk;
    }

    // Parabola through the three bracketing samples.
    const double t0 = s[imax - 1].t, t1 = s[imax].t, t2 = s[imax + 1].t;
    const double r0 = s[imax - 1].rate, r1 = s[imax].rate, r2 = s[imax + 1].rate;
    const double d01 = (r1 - r0) / (t1 - t0);
    const double d12 = (r2 - r1) / (t2 - t1);
    const double curv = (d12 - d01) / (t2 - t0);  // half the second derivative
    if (curv >= 0.0) {
        // Degenerate (flat or concave-up bracket); keep the discrete maximum.
        pk.t_peak = t1;
        pk.r_peak = r1;
        return pk;
    }
    double tv = 0.5 * (t0 + t1) - d01 / (2.0 * curv);
    tv = std::clamp(tv, t0, t2);  // refinement never leaves the bracket
    const double rv = r0 + d01 * (tv - t0) + curv * (tv - t0) * (tv - t1);
    pk.t_peak = tv;
    pk.r_peak = std::max(rv, r1);
    pk.refined = true;
    return pk;
}

ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::domain_error("fit_scaling: need at least 3 points");
    for (const auto& [n, r] : points)
        if (!(n > 0.0) || !(r > 0.0))
            throw std::domain_error("fit_scaling: points must be positive");

    const double m = static_cast<double>(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, r] : points) {
        const double x = std::log(n), y = std::log(r);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) < 1e-300)
        throw std::domain_error("fit_scaling: degenerate abscissae");

    ScalingFit fit;
    fit.exponent = (m * sxy - sx * sy) / denom;
    fit.log_prefactor = (sy - fit.exponent * sx) / m;
    double ss = 0.0;
    for (const auto& [n, r] : points) {
        const double resid = std::log(r) - (fit.log_prefactor + fit.exponent * std::log(n));
        ss += resid * resid;
    }
    fit.rms_residual = std::sqrt(ss / m);
    return fit;
}

}  // namespace supercorr
