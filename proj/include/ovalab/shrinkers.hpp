#pragma once

#include "ovalab/grid.hpp"

#include <vector>

namespace ovalab {

// Values below this are treated as outside the body.
inline constexpr double v_floor = 1e-6;

ScalarField bubble_sheet_field(GridPtr grid);
// sqrt(6 - y^2), clamped to 0 outside the sphere.
ScalarField sphere_field(GridPtr grid);
// sqrt(4 - (y sin phi)^2), clamped to 0 where not real.
ScalarField neck_field(GridPtr grid);

// Translating bowl in R^3 with speed 1/sqrt(2), written as a graph
// z = Z(rho) over its tip.
class BowlProfile {
public:
    BowlProfile(double drho, std::vector<double> rho, std::vector<double> z, std::vector<double> dz);

    double rho_max() const { return rho_.back(); }
    const std::vector<double>& rho() const { return rho_; }
    const std::vector<double>& z() const { return z_; }
    const std::vector<double>& dz() const { return dz_; }

    // Hermite interpolation of the table; second derivative from the ODE.
    double value(double rho) const;
    double deriv(double rho) const;
    double second(double rho) const;

    // Rescaled tip profile |tau|^{-1/2} Z(|tau|^{1/2} v) and its v-derivatives.
    double rescaled(double v, double tau) const;
    double rescaled_deriv(double v, double tau) const;

private:
    double h_;
    std::vector<double> rho_, z_, dz_;
};

double bowl_second_derivative(double rho, double dz);

BowlProfile solve_bowl(double rho_max, double drho);

struct EllipsoidSpec {
    double a = 0.5;
    double ell = 1.0;
    double R = 1.0;
    double T = -1.0;
};

void validate(const EllipsoidSpec& spec);
// V^2 of the ellipsoid graph at the point (x1, x2); negative outside.
double ellipsoid_q(const EllipsoidSpec& spec, double x1, double x2);
ScalarField ellipsoid_initial(const EllipsoidSpec& spec, GridPtr grid);

} // namespace ovalab
