#include "numerics.hpp"

#include "ovalab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ovalab {

std::vector<std::array<double, 3>> fd_weights(double x0, std::span<const double> x, int max_order) {
    const int n = static_cast<int>(x.size());
    std::vector<std::array<double, 3>> c(n, {0.0, 0.0, 0.0});
    double c1 = 1.0, c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, max_order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k > 0; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k > 0; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    return c;
}

const std::array<std::pair<double, double>, 8>& gauss_legendre_8() {
    static const std::array<std::pair<double, double>, 8> table = {{
        {-0.9602898564975363, 0.1012285362903763},
        {-0.7966664774136267, 0.2223810344533745},
        {-0.5255324099163290, 0.3137066458778873},
        {-0.1834346424956498, 0.3626837833783620},
        {0.1834346424956498, 0.3626837833783620},
        {0.5255324099163290, 0.3137066458778873},
        {0.7966664774136267, 0.2223810344533745},
        {0.9602898564975363, 0.1012285362903763},
    }};
    return table;
}

double smoothstep5(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return std::min(1.0, s * s * s * (10.0 + s * (-15.0 + 6.0 * s)));
}

double smoothstep5_deriv(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return 30.0 * s * s * (1.0 - s) * (1.0 - s);
}

double lagrange4(double x, const double* xs, const double* fs) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        double L = 1.0;
        for (int q = 0; q < 4; ++q)
            if (q != k) L *= (x - xs[q]) / (xs[k] - xs[q]);
        acc += L * fs[k];
    }
    return acc;
}

double periodic_cubic(std::span<const double> f, double s) {
    const int n = static_cast<int>(f.size());
    const double fl = std::floor(s);
    const int j = static_cast<int>(fl);
    const double t = s - fl;
    auto at = [&](int k) { return f[((k % n) + n) % n]; };
    const double fm = at(j - 1), f0 = at(j), f1 = at(j + 1), f2 = at(j + 2);
    // Cubic Lagrange through offsets -1, 0, 1, 2.
    return fm * (-t * (t - 1) * (t - 2) / 6) + f0 * ((t + 1) * (t - 1) * (t - 2) / 2) +
           f1 * (-(t + 1) * t * (t - 2) / 2) + f2 * ((t + 1) * t * (t - 1) / 6);
}

Pchip::Pchip(std::vector<double> x, std::vector<double> f) : x_(std::move(x)), f_(std::move(f)) {
    const size_t n = x_.size();
    require(n >= 2 && f_.size() == n, ErrorKind::parameter, "pchip needs matching arrays of size >= 2");
    d_.assign(n, 0.0);
    std::vector<double> h(n - 1), del(n - 1);
    for (size_t k = 0; k + 1 < n; ++k) {
        h[k] = x_[k + 1] - x_[k];
        del[k] = (f_[k + 1] - f_[k]) / h[k];
    }
    if (n == 2) {
        d_[0] = d_[1] = del[0];
        return;
    }
    for (size_t k = 1; k + 1 < n; ++k) {
        if (del[k - 1] * del[k] <= 0.0) {
            d_[k] = 0.0;
        } else {
            const double w1 = 2 * h[k] + h[k - 1], w2 = h[k] + 2 * h[k - 1];
            d_[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3 * d0)) return 3 * d0;
        return d;
    };
    d_[0] = end_slope(h[0], h[1], del[0], del[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
}

double Pchip::operator()(double x) const {
    const size_t n = x_.size();
    size_t k = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    k = std::clamp<size_t>(k, 1, n - 1) - 1;
    const double h = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * f_[k] + h10 * h * d_[k] + h01 * f_[k + 1] + h11 * h * d_[k + 1];
}

double Pchip::deriv(double x) const {
    const size_t n = x_.size();
    size_t k = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    k = std::clamp<size_t>(k, 1, n - 1) - 1;
    const double h = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / h;
    const double d00 = 6 * t * (t - 1) / h, d10 = (1 - t) * (1 - 3 * t);
    const double d01 = -d00, d11 = t * (3 * t - 2);
    return d00 * f_[k] + d10 * d_[k] + d01 * f_[k + 1] + d11 * d_[k + 1];
}

double brent(const std::function<double(double)>& f, double a, double b, double tol, int max_iter) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    require(fa * fb < 0.0, ErrorKind::search, "root is not bracketed");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (fb * fc > 0.0) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2 * 1e-16 * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2 * xm * s;
                q = 1 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2 * xm * q * (q - r) - (b - a) * (r - 1));
                q = (q - 1) * (r - 1) * (s - 1);
            }
            if (p > 0) q = -q;
            p = std::abs(p);
            if (2 * p < std::min(3 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
    }
    return b;
}

} // namespace ovalab
