#pragma once

#include <Eigen/Dense>

namespace rdkin {

/// Fritsch-Carlson monotone (shape-preserving) cubic Hermite slopes.
/// `x` strictly increasing, size >= 2. On monotone data the resulting
/// interpolant is monotone on every subinterval; on linear data it
/// degenerates to the exact line.
Eigen::VectorXd pchip_slopes(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Cubic Hermite value on [x0, x1] from endpoint values and slopes.
double hermite_value(double x0, double x1, double y0, double y1, double m0,
                     double m1, double x);

/// Analytic derivative of hermite_value with respect to x.
double hermite_derivative(double x0, double x1, double y0, double y1, double m0,
                          double m1, double x);

/// Index k with x[k] <= q <= x[k+1] (clamped to the end intervals).
Eigen::Index hunt_interval(const Eigen::VectorXd& x, double q);

}  // namespace rdkin
