#pragma once

// Derivative evaluation on polar grids shared by the PDE right-hand sides and
// the spectral operator.

#include "ovalab/grid.hpp"

#include <vector>

namespace ovalab {

struct PolarDerivs {
    double f, fy, fyy, fp, fpp, fyp;
};

struct CartDerivs {
    double f, g1, g2, h11, h12, h22;
};

// Fourth-order derivatives at node (i, j), i >= 1.
PolarDerivs polar_derivs(const PolarGrid& G, const double* f, int i, int j);

// Gradient and Hessian at the pole from the low Fourier harmonics of rings 1
// and 2 (Richardson-combined).
CartDerivs pole_derivs(const PolarGrid& G, const double* f);

// Convert polar derivatives at radius y, angle phi to Cartesian ones.
CartDerivs to_cartesian(const PolarDerivs& d, double y, double phi);

// Dense circulant matrices for spectral differentiation in phi.
struct FourierDiff {
    int n = 0;
    std::vector<double> d1, d2; // row-major n x n
};
const FourierDiff& fourier_diff(int n);

} // namespace ovalab
