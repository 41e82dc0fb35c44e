#pragma once

#include "cdpforge/forward_model.hpp"

namespace cdpforge {

/// Value reported when the mean squared error is below kPsnrZeroMse.
inline constexpr double kPsnrCap = 200.0;
inline constexpr double kPsnrZeroMse = 1e-20;

double mean_squared_error(const Real2D& a, const Real2D& b);

/// 10 log10(1 / MSE) with peak 1.0; returns kPsnrCap for (near) zero MSE.
double psnr(const Signal& reference, const Signal& estimate);

}  // namespace cdpforge
