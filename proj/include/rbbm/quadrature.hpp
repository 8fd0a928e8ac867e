// SPDX-License-Identifier: MIT
/**
 * Adaptive one-dimensional quadrature.  Thin wrapper over Boost's
 * Gauss-Kronrod 15-point rule; infinite end points are handled by the
 * library's own variable maps.  Failure to reach the requested tolerance
 * is reported instead of silently returning a poor estimate.
 */
#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace rbbm {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadResult {
    double value;
    double error;
};

/// Integrate f over [a, b] (either end may be infinite) to absolute
/// tolerance tol.  Throws RuntimeError if the estimate does not converge.
template <class F>
QuadResult integrate(F&& f, double a, double b, double tol = 1e-10,
                     unsigned max_depth = 15) {
    require(!(std::isnan(a) || std::isnan(b)), "quadrature: NaN bound");
    if (a == b) return {0.0, 0.0};
    double err = 0.0;
    double l1 = 0.0;
    // Boost refines until a relative criterion is met; ask for one well below
    // tol and judge the absolute error estimate ourselves.
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::function<double(double)>(f), a, b, max_depth, 1e-3 * tol, &err, &l1);
    if (!std::isfinite(v) || err > tol) {
        std::ostringstream os;
        os << "quadrature did not converge on [" << a << ", " << b
           << "]: error estimate " << err << " > tol " << tol;
        throw RuntimeError(os.str());
    }
    return {v, err};
}

template <class F>
double quad(F&& f, double a, double b, double tol = 1e-10) {
    return integrate(std::forward<F>(f), a, b, tol).value;
}

} // namespace rbbm
