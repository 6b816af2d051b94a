#include "supercorr/symmetric_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace supercorr {

namespace {

double off_diagonal_norm(const std::vector<double>& a, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
}

}  // namespace

SymmetricEigen eigen_symmetric(const std::vector<double>& input, int n) {
    if (n <= 0 || input.size() != static_cast<std::size_t>(n) * n)
        throw std::domain_error("eigen_symmetric: bad dimensions");
    double frob = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(input[i * n + j] - input[j * n + i]) >
                1e-12 * (1.0 + std::abs(input[i * n + j])))
                throw std::domain_error("eigen_symmetric: matrix not symmetric");
            frob += 2.0 * input[i * n + j] * input[i * n + j];
        }
    for (int i = 0; i < n; ++i) frob += input[i * n + i] * input[i * n + i];
    frob = std::sqrt(frob);

    std::vector<double> a = input;
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;

    const double target = 1e-12 * std::max(frob, 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        if (off_diagonal_norm(a, n) < target) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0)
                                     ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                     : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // A <- J^T A J on rows/columns p and q.
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a[i * n + i] > a[j * n + j]; });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int k = 0; k < n; ++k) {
        const int col = order[k];
        out.values[k] = a[col * n + col];
        // Column col of v is the eigenvector; store as row k with a fixed
        // sign convention.
        int imax = 0;
        double vmax = 0.0;
        for (int i = 0; i < n; ++i) {
            const double val = v[i * n + col];
            out.vectors[k * n + i] = val;
            if (std::abs(val) > vmax) {
                vmax = std::abs(val);
                imax = i;
            }
        }
        if (out.vectors[k * n + imax] < 0.0)
            for (int i = 0; i < n; ++i) out.vectors[k * n + i] = -out.vectors[k * n + i];
    }
    return out;
}

}  // namespace supercorr
