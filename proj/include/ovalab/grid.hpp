#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ovalab {

enum class Stretching { uniform, tanh_clustered };

struct ClusterSpec {
    double center = 2.5;   // radius where nodes concentrate
    double width = 0.2;
    double strength = 20.0; // peak density relative to the background
};

// Five-point finite-difference weights for one radial node. Offsets refer to
// signed positions along the line through the origin, so index -1 at the first
// ring means the ring-1 value at the opposite angle.
struct RadialStencil {
    int first = 0; // signed index of the first stencil node
    int count = 0;
    std::array<double, 5> d1{};
    std::array<double, 5> d2{};
};

class PolarGrid {
public:
    PolarGrid(std::vector<double> y_nodes, int n_phi);

    int n_r() const { return static_cast<int>(y_.size()) - 1; }
    int n_phi() const { return n_phi_; }
    int size() const { return static_cast<int>(y_.size()) * n_phi_; }
    double y_max() const { return y_.back(); }
    double y(int i) const { return y_[i]; }
    const std::vector<double>& y_nodes() const { return y_; }
    double phi(int j) const;
    double dphi() const;
    int index(int i, int j) const { return i * n_phi_ + wrap(j); }
    int wrap(int j) const { return ((j % n_phi_) + n_phi_) % n_phi_; }

    // Quadrature weight of node (i, j) for the measure e^{-y^2/4} y dy dphi.
    double weight(int i, int /*j*/) const { return radial_w_[i] * dphi(); }
    double radial_weight(int i) const { return radial_w_[i]; }

    const RadialStencil& stencil4(int i) const { return st4_[i]; }
    const RadialStencil& stencil2(int i) const { return st2_[i]; }

    // Signed coordinate of stencil node k: negative k mirrors across the pole.
    double signed_y(int k) const { return k < 0 ? -y_[-k] : y_[k]; }
    // Index of the value at signed radial index k on the ray at angle index j.
    int mirrored(int k, int j) const {
        // f(-y, phi) = f(y, phi + pi)
        return k < 0 ? index(-k, j + n_phi_ / 2) : index(k, j);
    }

    int locate(double y) const; // i with y_i <= y < y_{i+1}, clamped

    bool same_as(const PolarGrid& other) const;

private:
    std::vector<double> y_;
    int n_phi_;
    std::vector<double> radial_w_;
    std::vector<RadialStencil> st4_;
    std::vector<RadialStencil> st2_;
};

using GridPtr = std::shared_ptr<const PolarGrid>;

GridPtr build_grid(int n_r, int n_phi, double y_max, Stretching stretching = Stretching::uniform,
                   const ClusterSpec& cluster = {});

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(GridPtr grid, double value = 0.0);
    ScalarField(GridPtr grid, std::vector<double> values);

    const PolarGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    double& operator()(int i, int j) { return v_[grid_->index(i, j)]; }
    double operator()(int i, int j) const { return v_[grid_->index(i, j)]; }
    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }
    bool empty() const { return !grid_; }

private:
    GridPtr grid_;
    std::vector<double> v_;
};

ScalarField sample(GridPtr grid, const std::function<double(double y, double phi)>& f);

double inner_product_H(const ScalarField& f, const ScalarField& g);
double norm_H(const ScalarField& f);

enum class Direction { y, phi };
// Second-order finite differences; reflection across the pole, one-sided at
// y_max, periodic in phi.
ScalarField diff(const ScalarField& f, Direction dir, int order);

// Quadrature weights for \int_{x_0}^{x_n} f(x) w(x) dx from nodal values,
// integrating the local cubic interpolant of f against w exactly up to
// Gauss-Legendre accuracy on each panel.
std::vector<double> cubic_panel_weights(std::span<const double> x,
                                        const std::function<double(double)>& w);

void write_field_csv(std::ostream& os, const ScalarField& f);
ScalarField read_field_csv(std::istream& is);
void write_field_csv(const std::string& path, const ScalarField& f);
ScalarField read_field_csv(const std::string& path);

} // namespace ovalab
