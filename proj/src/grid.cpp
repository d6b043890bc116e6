#include "ovalab/grid.hpp"

#include "ovalab/errors.hpp"
#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ovalab {

namespace {

std::vector<double> clustered_nodes(int n_r, double y_max, const ClusterSpec& c) {
    // Node density 1 + A sech^2((y - c)/w); invert the normalized cumulative.
    auto cum = [&](double y) {
        return y + c.strength * c.width *
                       (std::tanh((y - c.center) / c.width) + std::tanh(c.center / c.width));
    };
    const double total = cum(y_max);
    std::vector<double> y(n_r + 1);
    y[0] = 0.0;
    y[n_r] = y_max;
    for (int i = 1; i < n_r; ++i) {
        const double target = total * i / n_r;
        double lo = 0.0, hi = y_max;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * y_max; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cum(mid) < target ? lo : hi) = mid;
        }
        y[i] = 0.5 * (lo + hi);
    }
    return y;
}

RadialStencil make_stencil(const PolarGrid& g, int i, int half) {
    const int n = g.n_r();
    int width = 2 * half + 1;
    int first = i - half;
    if (first + width - 1 > n) {
        // One-sided near y_max; one extra node keeps the second derivative at
        // the same order as the centered stencil.
        width = std::min(width + 1, 5);
        first = n - width + 1;
    }
    RadialStencil s;
    s.first = first;
    s.count = width;
    std::vector<double> x(width);
    for (int k = 0; k < width; ++k) x[k] = g.signed_y(first + k);
    const auto w = fd_weights(g.y(i), x, 2);
    for (int k = 0; k < width; ++k) {
        s.d1[k] = w[k][1];
        s.d2[k] = w[k][2];
    }
    return s;
}

} // namespace

PolarGrid::PolarGrid(std::vector<double> y_nodes, int n_phi) : y_(std::move(y_nodes)), n_phi_(n_phi) {
    require(y_.size() >= 9, ErrorKind::parameter, "need N_r >= 8");
    require(n_phi_ >= 4 && n_phi_ % 2 == 0, ErrorKind::parameter, "N_phi must be even and >= 4");
    require(y_[0] == 0.0, ErrorKind::parameter, "first radial node must be 0");
    for (size_t i = 1; i < y_.size(); ++i)
        require(y_[i] > y_[i - 1], ErrorKind::parameter, "radial nodes must increase");

    radial_w_ = cubic_panel_weights(y_, [](double y) { return y * std::exp(-0.25 * y * y); });

    st4_.resize(y_.size());
    st2_.resize(y_.size());
    for (int i = 0; i <= n_r(); ++i) {
        st4_[i] = make_stencil(*this, i, 2);
        st2_[i] = make_stencil(*this, i, 1);
    }
}

double PolarGrid::phi(int j) const { return 2.0 * std::numbers::pi * wrap(j) / n_phi_; }
double PolarGrid::dphi() const { return 2.0 * std::numbers::pi / n_phi_; }

int PolarGrid::locate(double y) const {
    if (y <= 0.0) return 0;
    if (y >= y_.back()) return n_r() - 1;
    auto it = std::upper_bound(y_.begin(), y_.end(), y);
    return static_cast<int>(it - y_.begin()) - 1;
}

bool PolarGrid::same_as(const PolarGrid& o) const {
    return this == &o || (n_phi_ == o.n_phi_ && y_ == o.y_);
}

GridPtr build_grid(int n_r, int n_phi, double y_max, Stretching stretching, const ClusterSpec& cluster) {
    require(n_r >= 8, ErrorKind::parameter, "N_r must be at least 8");
    require(n_phi >= 4 && n_phi % 2 == 0, ErrorKind::parameter, "N_phi must be even and at least 4");
    require(y_max > 0.0 && std::isfinite(y_max), ErrorKind::parameter, "y_max must be positive");
    std::vector<double> y;
    if (stretching == Stretching::uniform) {
        y.resize(n_r + 1);
        for (int i = 0; i <= n_r; ++i) y[i] = y_max * i / n_r;
        y[n_r] = y_max;
    } else {
        require(cluster.width > 0.0 && cluster.strength >= 0.0, ErrorKind::parameter,
                "cluster width must be positive and strength nonnegative");
        y = clustered_nodes(n_r, y_max, cluster);
    }
    return std::make_shared<const PolarGrid>(std::move(y), n_phi);
}

ScalarField::ScalarField(GridPtr grid, double value) : grid_(std::move(grid)) {
    v_.assign(grid_->size(), value);
}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), v_(std::move(values)) {
    require(static_cast<int>(v_.size()) == grid_->size(), ErrorKind::shape, "value count does not match grid");
}

ScalarField sample(GridPtr grid, const std::function<double(double, double)>& f) {
    ScalarField out(grid);
    for (int i = 0; i <= grid->n_r(); ++i)
        for (int j = 0; j < grid->n_phi(); ++j) out(i, j) = f(grid->y(i), grid->phi(j));
    return out;
}

double inner_product_H(const ScalarField& f, const ScalarField& g) {
    require(!f.empty() && !g.empty() && f.grid().same_as(g.grid()), ErrorKind::shape,
            "fields live on different grids");
    const auto& G = f.grid();
    double total = 0.0;
    for (int i = 0; i <= G.n_r(); ++i) {
        double ring = 0.0;
        for (int j = 0; j < G.n_phi(); ++j) ring += f(i, j) * g(i, j);
        total += ring * G.weight(i, 0);
    }
    return total;
}

double norm_H(const ScalarField& f) { return std::sqrt(inner_product_H(f, f)); }

ScalarField diff(const ScalarField& f, Direction dir, int order) {
    require(order == 1 || order == 2, ErrorKind::parameter, "order must be 1 or 2");
    const auto& G = f.grid();
    ScalarField out(f.grid_ptr());
    if (dir == Direction::phi) {
        const double h = G.dphi();
        for (int i = 0; i <= G.n_r(); ++i)
            for (int j = 0; j < G.n_phi(); ++j) {
                const double fm = f(i, j - 1), f0 = f(i, j), fp = f(i, j + 1);
                out(i, j) = order == 1 ? (fp - fm) / (2 * h) : (fp - 2 * f0 + fm) / (h * h);
            }
        return out;
    }
    for (int i = 0; i <= G.n_r(); ++i) {
        const auto& s = G.stencil2(i);
        for (int j = 0; j < G.n_phi(); ++j) {
            double acc = 0.0;
            for (int k = 0; k < s.count; ++k) {
                const double w = order == 1 ? s.d1[k] : s.d2[k];
                acc += w * f.values()[G.mirrored(s.first + k, j)];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

std::vector<double> cubic_panel_weights(std::span<const double> x, const std::function<double(double)>& w) {
    const int n = static_cast<int>(x.size()) - 1;
    require(n >= 1, ErrorKind::parameter, "need at least two nodes");
    std::vector<double> W(x.size(), 0.0);
    const auto& gl = gauss_legendre_8();
    for (int p = 0; p < n; ++p) {
        int lo = std::clamp(p - 1, 0, std::max(0, n - 3));
        int hi = std::min(lo + 3, n);
        const int m = hi - lo + 1;
        const double a = x[p], b = x[p + 1];
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (const auto& [t, gw] : gl) {
            const double xs = mid + half * t;
            const double ww = gw * half * w(xs);
            for (int k = 0; k < m; ++k) {
                double L = 1.0;
                for (int q = 0; q < m; ++q)
                    if (q != k) L *= (xs - x[lo + q]) / (x[lo + k] - x[lo + q]);
                W[lo + k] += ww * L;
            }
        }
    }
    return W;
}

void write_field_csv(std::ostream& os, const ScalarField& f) {
    const auto& G = f.grid();
    char buf[256];
    std::snprintf(buf, sizeof buf, "# y_nodes=%d phi_nodes=%d y_max=%.17g\n", G.n_r(), G.n_phi(), G.y_max());
    os << buf;
    for (int i = 0; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            std::snprintf(buf, sizeof buf, "%d, %d, %.17g, %.17g, %.17g\n", i, j, G.y(i), G.phi(j), f(i, j));
            os << buf;
        }
}

ScalarField read_field_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::io, "empty field file");
    int n_r = 0, n_phi = 0;
    double y_max = 0.0;
    require(std::sscanf(line.c_str(), "# y_nodes=%d phi_nodes=%d y_max=%lg", &n_r, &n_phi, &y_max) == 3,
            ErrorKind::io, "bad field header: " + line);
    require(n_r >= 8 && n_phi >= 4, ErrorKind::io, "bad field dimensions");
    std::vector<double> y(n_r + 1, 0.0), vals(static_cast<size_t>(n_r + 1) * n_phi, 0.0);
    std::vector<char> seen(vals.size(), 0);
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        int i, j;
        double yi, ph, fv;
        require(std::sscanf(line.c_str(), "%d , %d , %lg , %lg , %lg", &i, &j, &yi, &ph, &fv) == 5, ErrorKind::io,
                "bad field row: " + line);
        require(i >= 0 && i <= n_r && j >= 0 && j < n_phi, ErrorKind::io, "field index out of range");
        y[i] = yi;
        vals[static_cast<size_t>(i) * n_phi + j] = fv;
        seen[static_cast<size_t>(i) * n_phi + j] = 1;
    }
    require(std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }), ErrorKind::io,
            "field file is missing rows");
    auto grid = std::make_shared<const PolarGrid>(std::move(y), n_phi);
    return ScalarField(grid, std::move(vals));
}

void write_field_csv(const std::string& path, const ScalarField& f) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::io, "cannot write " + path);
    write_field_csv(os, f);
}

ScalarField read_field_csv(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::io, "cannot read " + path);
    return read_field_csv(is);
}

} // namespace ovalab
