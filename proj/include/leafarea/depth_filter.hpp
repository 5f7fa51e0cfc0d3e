#pragma once

#include "leafarea/common.hpp"

namespace leafarea {

struct BilateralParams {
    int diameter = 10;          // pixels; even values are rounded up to the next odd
    double sigma_color = 150.0; // raw depth units
    double sigma_space = 50.0;  // pixels

    int normalized_diameter() const { return diameter % 2 == 0 ? diameter + 1 : diameter; }
    void validate() const;
};

/// Edge-preserving smoothing of raw depth. A pixel's neighbors are the valid
/// (non-zero) pixels q with |q - p| <= diameter / 2; zero pixels stay zero.
DepthRaster bilateral_filter(const DepthRaster& depth, const BilateralParams& params);

/// Median of the non-zero values in the kernel x kernel window, clipped at the
/// raster border. With an even number of valid values the lower middle one is
/// taken; a window without valid values yields 0.
DepthRaster median_filter(const DepthRaster& depth, int kernel);

}  // namespace leafarea
