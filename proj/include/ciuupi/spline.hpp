#pragma once

// Natural cubic spline interpolation with constant extension outside the
// knot range.

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <vector>

namespace ciuupi {

class CubicSpline {
  public:
    CubicSpline() = default;

    // Natural boundary: second derivative zero at both end knots.
    static CubicSpline natural(std::vector<double> knots, std::vector<double> values) {
        if (knots.size() != values.size() || knots.size() < 2)
            throw std::domain_error("CubicSpline: need >= 2 knots with matching values");
        for (std::size_t i = 1; i < knots.size(); ++i)
            if (!(knots[i] > knots[i - 1]))
                throw std::domain_error("CubicSpline: knots must be strictly increasing");

        const std::size_t n = knots.size();
        std::vector<double> m(n, 0.0);
        if (n > 2) {
            // tridiagonal system for interior second derivatives
            std::vector<double> diag(n - 2), rhs(n - 2), sub(n - 2), sup(n - 2);
            for (std::size_t i = 1; i + 1 < n; ++i) {
                double hl = knots[i] - knots[i - 1];
                double hr = knots[i + 1] - knots[i];
                sub[i - 1] = hl / 6.0;
                diag[i - 1] = (hl + hr) / 3.0;
                sup[i - 1] = hr / 6.0;
                rhs[i - 1] = (values[i + 1] - values[i]) / hr - (values[i] - values[i - 1]) / hl;
            }
            for (std::size_t i = 1; i < n - 2; ++i) {
                double w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 3] / diag[n - 3];
            for (std::size_t ii = n - 3; ii-- > 0;)
                m[ii + 1] = (rhs[ii] - sup[ii] * m[ii + 2]) / diag[ii];
        }
        CubicSpline s;
        s.x_ = std::move(knots);
        s.y_ = std::move(values);
        s.m_ = std::move(m);
        return s;
    }

    // Constant-extended evaluation: clamps to the nearest end value outside
    // [first knot, last knot].
    double operator()(double t) const {
        assert(!x_.empty());
        if (t <= x_.front()) return y_.front();
        if (t >= x_.back()) return y_.back();
        std::size_t j = static_cast<std::size_t>(
            std::upper_bound(x_.begin(), x_.end(), t) - x_.begin() - 1);
        double h = x_[j + 1] - x_[j];
        double a = (x_[j + 1] - t) / h, b = (t - x_[j]) / h;
        return a * y_[j] + b * y_[j + 1] +
               ((a * a * a - a) * m_[j] + (b * b * b - b) * m_[j + 1]) * h * h / 6.0;
    }

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& second_derivatives() const { return m_; }

  private:
    std::vector<double> x_, y_, m_;
};

}  // namespace ciuupi
