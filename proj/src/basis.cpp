#include "skan/basis.hpp"

#include "skan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace skan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kMinScale = 1e-3;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// ---------------------------------------------------------------------------
// Family interfaces

class Family {
public:
    virtual ~Family() = default;
    virtual std::size_t param_count() const = 0;
    virtual void init(std::span<double> p, std::mt19937_64& rng) const = 0;
};

// phi(x) = sum_k eff_k(params) * B_k(x): linear in effective coefficients, so
// a whole block evaluates as one matrix product.
class ExpansionFamily : public Family {
public:
    virtual std::size_t basis_size() const = 0;
    // dB may be null.
    virtual void basis(double x, double* B, double* dB) const = 0;
    virtual void effective(const double* p, double* eff) const {
        std::copy(p, p + basis_size(), eff);
    }
    virtual void effective_backward(const double*, const double* d_eff, double* d_p) const {
        for (std::size_t k = 0; k < basis_size(); ++k) d_p[k] += d_eff[k];
    }
};

// Per-edge nonlinear parameterisation, evaluated element by element.
class PointwiseFamily : public Family {
public:
    // Returns phi(x); writes d phi/dx and d phi/dparams when non-null.
    virtual double value(double x, const double* p, double* dx, double* dp) const = 0;

    // Batched form over n contiguous inputs. dp is laid out [P x n]. Null
    // outputs are skipped.
    virtual void eval_batch(const double* x, std::size_t n, const double* p, double* v, double* dx,
                            double* dp) const {
        const std::size_t P = param_count();
        std::vector<double> g(P);
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            const double y = value(x[i], p, dx ? &d : nullptr, dp ? g.data() : nullptr);
            if (v) v[i] = y;
            if (dx) dx[i] = d;
            if (dp)
                for (std::size_t k = 0; k < P; ++k) dp[k * n + i] = g[k];
        }
    }
};

using Arr = Eigen::ArrayXd;
using ArrMap = Eigen::Map<Arr>;
using ConstArrMap = Eigen::Map<const Arr>;

// tanh through the vectorised exponential; absolute error around 1e-16.
Arr fast_tanh(const Arr& z) {
    const Arr e = (-2.0 * z.abs()).exp();
    return z.sign() * (1.0 - e) / (1.0 + e);
}

void draw_normal(std::span<double> out, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, sigma);
    for (auto& v : out) v = nd(rng);
}

double init_sigma(const BasisDescriptor& d) { return 0.1 / std::sqrt(static_cast<double>(d.degree_or_grid)); }

// ---------------------------------------------------------------------------
// B-spline with SiLU residual: w_b * silu(x) + w_s * sum c_i B_{i,3}(x)

class BSplineFamily final : public ExpansionFamily {
public:
    explicit BSplineFamily(const BasisDescriptor& d)
        : grid_(static_cast<std::size_t>(d.degree_or_grid)),
          order_(static_cast<std::size_t>(d.hyper("order", 3))),
          sigma_(init_sigma(d)) {
        const double h = (d.hi - d.lo) / static_cast<double>(grid_);
        const std::size_t nk = grid_ + 2 * order_ + 1;
        knots_.resize(nk);
        for (std::size_t j = 0; j < nk; ++j)
            knots_[j] = d.lo + (static_cast<double>(j) - static_cast<double>(order_)) * h;
    }
    std::size_t coeffs() const { return grid_ + order_; }
    std::size_t param_count() const override { return coeffs() + 2; }
    std::size_t basis_size() const override { return coeffs() + 1; }

    void init(std::span<double> p, std::mt19937_64& rng) const override {
        draw_normal(p.subspan(0, coeffs()), sigma_, rng);
        p[coeffs()] = 1.0;      // w_b
        p[coeffs() + 1] = 1.0;  // w_s
    }

    void basis(double x, double* B, double* dB) const override {
        const double s = sigmoid(x);
        B[0] = x * s;
        if (dB) dB[0] = s * (1.0 + x * (1.0 - s));
        // Cox-de Boor, order 0 up to order_, keeping the previous level for
        // the derivative.
        const std::size_t nk = knots_.size();
        std::vector<double>& cur = scratch_cur();
        std::vector<double>& prev = scratch_prev();
        cur.assign(nk - 1, 0.0);
        for (std::size_t j = 0; j + 1 < nk; ++j)
            cur[j] = (x >= knots_[j] && x < knots_[j + 1]) ? 1.0 : 0.0;
        for (std::size_t k = 1; k <= order_; ++k) {
            prev = cur;
            const std::size_t count = nk - 1 - k;
            for (std::size_t j = 0; j < count; ++j) {
                const double left = (x - knots_[j]) / (knots_[j + k] - knots_[j]);
                const double right = (knots_[j + k + 1] - x) / (knots_[j + k + 1] - knots_[j + 1]);
                cur[j] = left * prev[j] + right * prev[j + 1];
            }
            cur.resize(count);
        }
        for (std::size_t j = 0; j < coeffs(); ++j) B[1 + j] = cur[j];
        if (dB) {
            const double k = static_cast<double>(order_);
            for (std::size_t j = 0; j < coeffs(); ++j) {
                dB[1 + j] = k * prev[j] / (knots_[j + order_] - knots_[j]) -
                            k * prev[j + 1] / (knots_[j + order_ + 1] - knots_[j + 1]);
            }
        }
    }

    void effective(const double* p, double* eff) const override {
        eff[0] = p[coeffs()];
        const double ws = p[coeffs() + 1];
        for (std::size_t j = 0; j < coeffs(); ++j) eff[1 + j] = ws * p[j];
    }

    void effective_backward(const double* p, const double* d_eff, double* d_p) const override {
        const double ws = p[coeffs() + 1];
        d_p[coeffs()] += d_eff[0];
        double acc = 0.0;
        for (std::size_t j = 0; j < coeffs(); ++j) {
            d_p[j] += ws * d_eff[1 + j];
            acc += p[j] * d_eff[1 + j];
        }
        d_p[coeffs() + 1] += acc;
    }

private:
    static std::vector<double>& scratch_cur() {
        thread_local std::vector<double> v;
        return v;
    }
    static std::vector<double>& scratch_prev() {
        thread_local std::vector<double> v;
        return v;
    }

    std::size_t grid_;
    std::size_t order_;
    double sigma_;
    std::vector<double> knots_;
};

// ---------------------------------------------------------------------------
// Radial families: sum c_i g((x - mu_i) / h)

class RadialFamily final : public ExpansionFamily {
public:
    enum class Shape { Gaussian, SechSquared };

    RadialFamily(const BasisDescriptor& d, Shape shape)
        : shape_(shape), count_(static_cast<std::size_t>(d.degree_or_grid)), sigma_(init_sigma(d)) {
        const double span = d.hi - d.lo;
        h_ = count_ > 1 ? span / static_cast<double>(count_ - 1) : span;
        for (std::size_t i = 0; i < count_; ++i) {
            centers_.push_back(count_ > 1 ? d.lo + static_cast<double>(i) * h_ : 0.5 * (d.lo + d.hi));
        }
    }
    std::size_t param_count() const override { return count_; }
    std::size_t basis_size() const override { return count_; }
    void init(std::span<double> p, std::mt19937_64& rng) const override { draw_normal(p, sigma_, rng); }

    void basis(double x, double* B, double* dB) const override {
        for (std::size_t i = 0; i < count_; ++i) {
            const double u = (x - centers_[i]) / h_;
            if (shape_ == Shape::Gaussian) {
                const double e = std::exp(-u * u);
                B[i] = e;
                if (dB) dB[i] = -2.0 * u * e / h_;
            } else {
                const double t = std::tanh(u);
                B[i] = 1.0 - t * t;
                if (dB) dB[i] = -2.0 * t * (1.0 - t * t) / h_;
            }
        }
    }

private:
    Shape shape_;
    std::size_t count_;
    double sigma_;
    double h_ = 1.0;
    std::vector<double> centers_;
};

// ---------------------------------------------------------------------------
// Orthogonal polynomial families evaluated on tanh(x).

class PolynomialFamily : public ExpansionFamily {
public:
    explicit PolynomialFamily(const BasisDescriptor& d)
        : degree_(static_cast<std::size_t>(d.degree_or_grid)), sigma_(init_sigma(d)) {}
    std::size_t param_count() const override { return degree_ + 1; }
    std::size_t basis_size() const override { return degree_ + 1; }
    void init(std::span<double> p, std::mt19937_64& rng) const override { draw_normal(p, sigma_, rng); }

    void basis(double x, double* B, double* dB) const override {
        const double u = std::tanh(x);
        poly(u, B, dB);
        if (dB) {
            const double du = 1.0 - u * u;
            for (std::size_t n = 0; n <= degree_; ++n) dB[n] *= du;
        }
    }

    // Values and d/du at u in [-1, 1]; dP may be null.
    virtual void poly(double u, double* P, double* dP) const = 0;
    std::size_t degree() const { return degree_; }

protected:
    std::size_t degree_;
    double sigma_;
};

class ChebyshevFamily final : public PolynomialFamily {
public:
    using PolynomialFamily::PolynomialFamily;
    void poly(double u, double* P, double* dP) const override {
        P[0] = 1.0;
        if (dP) dP[0] = 0.0;
        if (degree_ >= 1) {
            P[1] = u;
            if (dP) dP[1] = 1.0;
        }
        for (std::size_t n = 1; n < degree_; ++n) {
            P[n + 1] = 2.0 * u * P[n] - P[n - 1];
            if (dP) dP[n + 1] = 2.0 * P[n] + 2.0 * u * dP[n] - dP[n - 1];
        }
    }
};

// Monic discrete Gram polynomials for `points` equispaced nodes on [-1, 1].
class GramFamily : public PolynomialFamily {
public:
    explicit GramFamily(const BasisDescriptor& d)
        : PolynomialFamily(d), points_(d.hyper("points", 2.0 * (d.degree_or_grid + 1))) {}

    void poly(double u, double* P, double* dP) const override { gram(degree_, points_, u, P, dP); }

    static void gram(std::size_t degree, double M, double u, double* P, double* dP) {
        P[0] = 1.0;
        if (dP) dP[0] = 0.0;
        if (degree >= 1) {
            P[1] = u;
            if (dP) dP[1] = 1.0;
        }
        for (std::size_t n = 1; n < degree; ++n) {
            const double nn = static_cast<double>(n * n);
            const double beta = nn * (M * M - nn) / ((4.0 * nn - 1.0) * (M - 1.0) * (M - 1.0));
            P[n + 1] = u * P[n] - beta * P[n - 1];
            if (dP) dP[n + 1] = P[n] + u * dP[n] - beta * dP[n - 1];
        }
    }

private:
    double points_;
};

class JacobiFamily final : public PolynomialFamily {
public:
    explicit JacobiFamily(const BasisDescriptor& d)
        : PolynomialFamily(d), a_(d.hyper("alpha", 1.0)), b_(d.hyper("beta", 1.0)) {}

    void poly(double u, double* P, double* dP) const override {
        P[0] = 1.0;
        if (dP) dP[0] = 0.0;
        if (degree_ >= 1) {
            P[1] = (a_ + 1.0) + (a_ + b_ + 2.0) * (u - 1.0) / 2.0;
            if (dP) dP[1] = (a_ + b_ + 2.0) / 2.0;
        }
        for (std::size_t k = 2; k <= degree_; ++k) {
            const double n = static_cast<double>(k);
            const double s = 2.0 * n + a_ + b_;
            const double an = 2.0 * n * (n + a_ + b_) * (s - 2.0);
            const double bn = (s - 1.0) * s * (s - 2.0);
            const double cn = (s - 1.0) * (a_ * a_ - b_ * b_);
            const double dn = 2.0 * (n + a_ - 1.0) * (n + b_ - 1.0) * s;
            P[k] = ((bn * u + cn) * P[k - 1] - dn * P[k - 2]) / an;
            if (dP) dP[k] = ((bn * u + cn) * dP[k - 1] + bn * P[k - 1] - dn * dP[k - 2]) / an;
        }
    }

private:
    double a_, b_;
};

// Bernstein basis on t = (tanh(x) + 1) / 2.
class BernsteinFamily final : public PolynomialFamily {
public:
    using PolynomialFamily::PolynomialFamily;
    void poly(double u, double* P, double* dP) const override {
        const double t = 0.5 * (u + 1.0);
        const std::size_t n = degree_;
        // Degree n-1 basis first (for the derivative), then elevate.
        std::vector<double> lower(n, 0.0);
        bernstein(n - 1, t, lower.data());
        bernstein(n, t, P);
        if (dP) {
            for (std::size_t k = 0; k <= n; ++k) {
                const double left = k >= 1 ? lower[k - 1] : 0.0;
                const double right = k < n ? lower[k] : 0.0;
                dP[k] = static_cast<double>(n) * (left - right) * 0.5;  // dt/du = 1/2
            }
        }
    }

private:
    static void bernstein(std::size_t n, double t, double* out) {
        // de Casteljau-style build-up keeps everything in [0, 1].
        out[0] = 1.0;
        for (std::size_t j = 1; j <= n; ++j) {
            out[j] = t * out[j - 1];
            for (std::size_t k = j - 1; k >= 1; --k) out[k] = (1.0 - t) * out[k] + t * out[k - 1];
            out[0] *= (1.0 - t);
        }
    }
};

class LinearFamily final : public ExpansionFamily {
public:
    explicit LinearFamily(const BasisDescriptor& d) : sigma_(init_sigma(d)) {}
    std::size_t param_count() const override { return 1; }
    std::size_t basis_size() const override { return 1; }
    void init(std::span<double> p, std::mt19937_64& rng) const override { draw_normal(p, sigma_, rng); }
    void basis(double x, double* B, double* dB) const override {
        B[0] = x;
        if (dB) dB[0] = 1.0;
    }

private:
    double sigma_;
};

// ---------------------------------------------------------------------------
// Squared ReLU gates on overlapping intervals.

class ReLUKANFamily final : public ExpansionFamily {
public:
    explicit ReLUKANFamily(const BasisDescriptor& d)
        : count_(static_cast<std::size_t>(d.degree_or_grid)), sigma_(init_sigma(d)) {
        const double h = (d.hi - d.lo) / static_cast<double>(count_ + 1);
        for (std::size_t i = 0; i < count_; ++i) {
            starts_.push_back(d.lo + static_cast<double>(i) * h);
            ends_.push_back(d.lo + static_cast<double>(i + 2) * h);
        }
    }
    std::size_t param_count() const override { return count_; }
    std::size_t basis_size() const override { return count_; }
    void init(std::span<double> p, std::mt19937_64& rng) const override { draw_normal(p, sigma_, rng); }

    void basis(double x, double* B, double* dB) const override {
        for (std::size_t i = 0; i < count_; ++i) {
            const double a = ends_[i] - x;
            const double b = x - starts_[i];
            const double w = ends_[i] - starts_[i];
            const double norm = 16.0 / (w * w * w * w);
            if (a > 0.0 && b > 0.0) {
                B[i] = a * a * b * b * norm;
                if (dB) dB[i] = 2.0 * a * b * (a - b) * norm;
            } else {
                B[i] = 0.0;
                if (dB) dB[i] = 0.0;
            }
        }
    }

private:
    std::size_t count_;
    double sigma_;
    std::vector<double> starts_, ends_;
};

// ---------------------------------------------------------------------------
// Wavelets: w * psi((x - t) / s), s = 1e-3 + softplus(raw)

class WaveletFamily final : public PointwiseFamily {
public:
    enum class Mother { MexicanHat, DoG, Shannon };

    WaveletFamily(const BasisDescriptor& d, Mother mother)
        : mother_(mother), sigma_(init_sigma(d)), window_(d.hyper("window", 6.0)) {}

    std::size_t param_count() const override { return 3; }
    void init(std::span<double> p, std::mt19937_64& rng) const override {
        draw_normal(p.subspan(0, 1), sigma_, rng);
        p[1] = 0.0;
        p[2] = wavelet_raw_for_scale(1.0);
    }

    double value(double x, const double* p, double* dx, double* dp) const override {
        const double w = p[0], t = p[1], raw = p[2];
        const double s = kMinScale + softplus(raw);
        const double u = (x - t) / s;
        double dpsi = 0.0;
        const double psi = mother(u, (dx || dp) ? &dpsi : nullptr);
        if (dx) *dx = w * dpsi / s;
        if (dp) {
            dp[0] = psi;
            dp[1] = -w * dpsi / s;
            dp[2] = -w * dpsi * u / s * sigmoid(raw);
        }
        return w * psi;
    }

    void eval_batch(const double* x, std::size_t n, const double* p, double* v, double* dx,
                    double* dp) const override {
        const auto N = static_cast<Eigen::Index>(n);
        const double w = p[0], t = p[1], raw = p[2];
        const double s = kMinScale + softplus(raw);
        const Arr u = (ConstArrMap(x, N) - t) / s;
        const bool need_d = dx || dp;
        Arr psi(N), dpsi(need_d ? N : 0);
        switch (mother_) {
            case Mother::MexicanHat: {
                const double c = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
                const Arr u2 = u.square();
                const Arr e = (-0.5 * u2).exp();
                psi = c * (1.0 - u2) * e;
                if (need_d) dpsi = c * e * u * (u2 - 3.0);
                break;
            }
            case Mother::DoG: {
                const Arr u2 = u.square();
                const Arr e = (-0.5 * u2).exp();
                psi = -u * e;
                if (need_d) dpsi = (u2 - 1.0) * e;
                break;
            }
            case Mother::Shannon:
                for (Eigen::Index i = 0; i < N; ++i) psi[i] = mother(u[i], need_d ? &dpsi[i] : nullptr);
                break;
        }
        if (v) ArrMap(v, N) = w * psi;
        if (dx) ArrMap(dx, N) = (w / s) * dpsi;
        if (dp) {
            ArrMap(dp, N) = psi;
            ArrMap(dp + n, N) = (-w / s) * dpsi;
            ArrMap(dp + 2 * n, N) = (-w * sigmoid(raw) / s) * dpsi * u;
        }
    }

    double mother(double u, double* d) const {
        switch (mother_) {
            case Mother::MexicanHat: {
                const double c = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
                const double e = std::exp(-0.5 * u * u);
                if (d) *d = c * e * u * (u * u - 3.0);
                return c * (1.0 - u * u) * e;
            }
            case Mother::DoG: {
                const double e = std::exp(-0.5 * u * u);
                if (d) *d = (u * u - 1.0) * e;
                return -u * e;
            }
            case Mother::Shannon: {
                if (std::abs(u) >= window_) {
                    if (d) *d = 0.0;
                    return 0.0;
                }
                // sinc(u/2) * cos(1.5 pi u) * window, with cos(1.5 pi u) = cos(3 th).
                const double half_pi = 0.5 * std::numbers::pi;
                const double th = half_pi * u;
                const double sn = std::sin(th), cs = std::cos(th);
                double sv, dsv;
                if (std::abs(th) < 1e-4) {
                    const double t2 = th * th;
                    sv = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
                    dsv = -half_pi * th / 3.0 * (1.0 - t2 / 10.0);
                } else {
                    sv = sn / th;
                    dsv = half_pi * (cs - sv) / th;
                }
                const double c3 = cs * (4.0 * cs * cs - 3.0);
                const double dc3 = -3.0 * half_pi * sn * (3.0 - 4.0 * sn * sn);
                const double wk = std::numbers::pi / window_;
                const double win = 0.54 + 0.46 * std::cos(wk * u);
                if (d) *d = (dsv * c3 + sv * dc3) * win - sv * c3 * 0.46 * wk * std::sin(wk * u);
                return sv * c3 * win;
            }
        }
        return 0.0;
    }

private:
    Mother mother_;
    double sigma_;
    double window_;
};

// ---------------------------------------------------------------------------
// Gram polynomial between a learnable input gain and output gain.

class BottleneckGramFamily final : public PointwiseFamily {
public:
    explicit BottleneckGramFamily(const BasisDescriptor& d)
        : degree_(static_cast<std::size_t>(d.degree_or_grid)),
          points_(d.hyper("points", 2.0 * (d.degree_or_grid + 1))),
          sigma_(init_sigma(d)) {}

    std::size_t param_count() const override { return degree_ + 3; }
    void init(std::span<double> p, std::mt19937_64& rng) const override {
        draw_normal(p.subspan(0, degree_ + 1), sigma_, rng);
        p[degree_ + 1] = 1.0;  // input gain
        p[degree_ + 2] = 1.0;  // output gain
    }

    double value(double x, const double* p, double* dx, double* dp) const override {
        const double a = p[degree_ + 1], g = p[degree_ + 2];
        const double v = std::tanh(a * x);
        double P[32], dP[32];
        GramFamily::gram(degree_, points_, v, P, dP);
        double inner = 0.0, dinner = 0.0;
        for (std::size_t n = 0; n <= degree_; ++n) {
            inner += p[n] * P[n];
            dinner += p[n] * dP[n];
        }
        const double dv = 1.0 - v * v;
        if (dx) *dx = g * dinner * dv * a;
        if (dp) {
            for (std::size_t n = 0; n <= degree_; ++n) dp[n] = g * P[n];
            dp[degree_ + 1] = g * dinner * dv * x;
            dp[degree_ + 2] = inner;
        }
        return g * inner;
    }

    void eval_batch(const double* x, std::size_t n, const double* p, double* v, double* dx,
                    double* dp) const override {
        const auto N = static_cast<Eigen::Index>(n);
        const double a = p[degree_ + 1], g = p[degree_ + 2];
        const ConstArrMap xs(x, N);
        const Arr u = fast_tanh(a * xs);
        // Gram recurrence on whole columns, keeping the last two terms.
        Arr prev = Arr::Ones(N), cur = u, dprev = Arr::Zero(N), dcur = Arr::Ones(N);
        Arr inner = p[0] * prev, dinner = Arr::Zero(N);
        if (dp) ArrMap(dp, N) = g * prev;
        if (degree_ >= 1) {
            inner += p[1] * cur;
            dinner += p[1] * dcur;
            if (dp) ArrMap(dp + n, N) = g * cur;
        }
        const double M = points_;
        for (std::size_t k = 1; k < degree_; ++k) {
            const double kk = static_cast<double>(k * k);
            const double beta = kk * (M * M - kk) / ((4.0 * kk - 1.0) * (M - 1.0) * (M - 1.0));
            Arr next = u * cur - beta * prev;
            Arr dnext = cur + u * dcur - beta * dprev;
            prev.swap(cur);
            cur.swap(next);
            dprev.swap(dcur);
            dcur.swap(dnext);
            inner += p[k + 1] * cur;
            dinner += p[k + 1] * dcur;
            if (dp) ArrMap(dp + (k + 1) * n, N) = g * cur;
        }
        const Arr du = 1.0 - u.square();
        if (v) ArrMap(v, N) = g * inner;
        if (dx) ArrMap(dx, N) = (g * a) * dinner * du;
        if (dp) {
            ArrMap(dp + (degree_ + 1) * n, N) = g * dinner * du * xs;
            ArrMap(dp + (degree_ + 2) * n, N) = inner;
        }
    }

private:
    std::size_t degree_;
    double points_;
    double sigma_;
};

// ---------------------------------------------------------------------------

std::shared_ptr<const Family> build_family(const BasisDescriptor& d) {
    switch (d.kind) {
        case BasisKind::BSpline: return std::make_shared<BSplineFamily>(d);
        case BasisKind::RBF:
        case BasisKind::FastKAN:
            return std::make_shared<RadialFamily>(d, RadialFamily::Shape::Gaussian);
        case BasisKind::FasterKAN:
            return std::make_shared<RadialFamily>(d, RadialFamily::Shape::SechSquared);
        case BasisKind::Chebyshev: return std::make_shared<ChebyshevFamily>(d);
        case BasisKind::Gram: return std::make_shared<GramFamily>(d);
        case BasisKind::Jacobi: return std::make_shared<JacobiFamily>(d);
        case BasisKind::Bernstein: return std::make_shared<BernsteinFamily>(d);
        case BasisKind::WaveletMexicanHat:
            return std::make_shared<WaveletFamily>(d, WaveletFamily::Mother::MexicanHat);
        case BasisKind::WaveletDoG: return std::make_shared<WaveletFamily>(d, WaveletFamily::Mother::DoG);
        case BasisKind::WaveletShannon:
            return std::make_shared<WaveletFamily>(d, WaveletFamily::Mother::Shannon);
        case BasisKind::ReLUKAN: return std::make_shared<ReLUKANFamily>(d);
        case BasisKind::BottleneckGram: return std::make_shared<BottleneckGramFamily>(d);
        case BasisKind::Linear: return std::make_shared<LinearFamily>(d);
    }
    throw ContractError("basis: unknown kind");
}

std::string cache_key(const BasisDescriptor& d) {
    std::ostringstream os;
    os.precision(17);
    os << static_cast<int>(d.kind) << '|' << d.degree_or_grid << '|' << d.lo << '|' << d.hi;
    for (const auto& [k, v] : d.hyperparams) os << '|' << k << '=' << v;
    return os.str();
}

std::shared_ptr<const Family> family_for(const BasisDescriptor& d) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const Family>> cache;
    validate(d);
    const auto key = cache_key(d);
    std::lock_guard lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto fam = build_family(d);
    cache.emplace(key, fam);
    return fam;
}

struct KindInfo {
    BasisKind kind;
    std::string_view name;
};

constexpr KindInfo kKinds[] = {
    {BasisKind::BSpline, "BSpline"},
    {BasisKind::RBF, "RBF"},
    {BasisKind::FastKAN, "FastKAN"},
    {BasisKind::FasterKAN, "FasterKAN"},
    {BasisKind::Chebyshev, "Chebyshev"},
    {BasisKind::Gram, "Gram"},
    {BasisKind::Jacobi, "Jacobi"},
    {BasisKind::Bernstein, "Bernstein"},
    {BasisKind::WaveletMexicanHat, "WaveletMexicanHat"},
    {BasisKind::WaveletDoG, "WaveletDoG"},
    {BasisKind::WaveletShannon, "WaveletShannon"},
    {BasisKind::ReLUKAN, "ReLUKAN"},
    {BasisKind::BottleneckGram, "BottleneckGram"},
    {BasisKind::Linear, "Linear"},
};

std::string normalise(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block kernels

void check_taps(const Tensor& x, std::span<const TapRef> taps, std::size_t out_dim, std::size_t P) {
    if (x.ndim() != 2) throw ContractError("edge_block_sum: input must be rank 2, got " + shape_str(x.shape()));
    for (const auto& t : taps) {
        if (t.column >= x.dim(1)) {
            throw ContractError("edge_block_sum: column " + std::to_string(t.column) +
                                " outside input of width " + std::to_string(x.dim(1)));
        }
        if (t.params.numel() != out_dim * P) {
            throw ContractError("edge_block_sum: parameter block of " + std::to_string(t.params.numel()) +
                                " values, expected " + std::to_string(out_dim * P));
        }
        if (t.weights.defined() && t.weight_index >= t.weights.numel()) {
            throw ContractError("edge_block_sum: weight index out of range");
        }
    }
}

double tap_scale(const TapRef& t) { return t.weights.defined() ? t.weights[t.weight_index] : 1.0; }

std::vector<Tensor> tap_parents(const Tensor& x, std::span<const TapRef> taps) {
    std::vector<Tensor> parents{x};
    for (const auto& t : taps) {
        parents.push_back(t.params);
        if (t.weights.defined()) parents.push_back(t.weights);
    }
    return parents;
}

Tensor expansion_block(const Tensor& x, std::shared_ptr<const ExpansionFamily> fam,
                       std::vector<TapRef> taps, std::size_t out_dim) {
    const std::size_t N = x.dim(0), D = x.dim(1), T = taps.size(), K = fam->basis_size(),
                      P = fam->param_count(), O = out_dim;
    // Effective coefficients, scaled by the tap weight: [(T*K) x O].
    RowMat ceff(T * K, O);
    std::vector<double> eff(K);
    for (std::size_t t = 0; t < T; ++t) {
        const double s = tap_scale(taps[t]);
        const double* p = taps[t].params.data().data();
        for (std::size_t o = 0; o < O; ++o) {
            fam->effective(p + o * P, eff.data());
            for (std::size_t k = 0; k < K; ++k) ceff(t * K + k, o) = s * eff[k];
        }
    }
    auto fill_basis = [fam, N, D, T, K](const Tensor& xin, const std::vector<TapRef>& tps, RowMat& B,
                                        RowMat* dB) {
        B.resize(N, T * K);
        if (dB) dB->resize(N, T * K);
        auto xd = xin.data();
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t)
                fam->basis(xd[n * D + tps[t].column], &B(n, t * K), dB ? &(*dB)(n, t * K) : nullptr);
    };
    std::vector<double> out(N * O);
    {
        RowMat B;
        fill_basis(x, taps, B, nullptr);
        Eigen::Map<RowMat>(out.data(), N, O).noalias() = B * ceff;
    }
    auto parents = tap_parents(x, taps);
    return make_result(
        {N, O}, std::move(out), std::move(parents),
        [x, fam, taps = std::move(taps), ceff = std::move(ceff), fill_basis, N, D, T, K, P, O](TensorImpl& self) {
            const bool need_x = x.requires_grad();
            bool need_coef = false;
            for (const auto& t : taps)
                need_coef = need_coef || t.params.requires_grad() || (t.weights.defined() && t.weights.requires_grad());
            if (!need_x && !need_coef) return;
            RowMat B, dB;
            fill_basis(x, taps, B, need_x ? &dB : nullptr);
            Eigen::Map<const RowMat> G(self.grad.data(), N, O);
            if (need_coef) {
                RowMat dceff = B.transpose() * G;  // [(T*K) x O]
                std::vector<double> eff(K), deff(K);
                for (std::size_t t = 0; t < T; ++t) {
                    const auto& tap = taps[t];
                    const double s = tap_scale(tap);
                    const bool pg = tap.params.requires_grad();
                    const bool wg = tap.weights.defined() && tap.weights.requires_grad();
                    const double* p = tap.params.data().data();
                    double* gp = pg ? tap.params.impl()->grad_buffer().data() : nullptr;
                    double ds = 0.0;
                    for (std::size_t o = 0; o < O; ++o) {
                        if (wg) {
                            fam->effective(p + o * P, eff.data());
                            for (std::size_t k = 0; k < K; ++k) ds += eff[k] * dceff(t * K + k, o);
                        }
                        if (pg) {
                            for (std::size_t k = 0; k < K; ++k) deff[k] = s * dceff(t * K + k, o);
                            fam->effective_backward(p + o * P, deff.data(), gp + o * P);
                        }
                    }
                    if (wg) tap.weights.impl()->grad_buffer()[tap.weight_index] += ds;
                }
            }
            if (need_x) {
                RowMat H = G * ceff.transpose();  // [N x (T*K)]
                auto gx = x.impl()->grad_buffer();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t t = 0; t < T; ++t) {
                        double acc = 0.0;
                        for (std::size_t k = 0; k < K; ++k) acc += dB(n, t * K + k) * H(n, t * K + k);
                        gx[n * D + taps[t].column] += acc;
                    }
            }
        });
}

Tensor pointwise_block(const Tensor& x, std::shared_ptr<const PointwiseFamily> fam,
                       std::vector<TapRef> taps, std::size_t out_dim) {
    const std::size_t N = x.dim(0), D = x.dim(1), T = taps.size(), P = fam->param_count(), O = out_dim;
    const auto n = static_cast<Eigen::Index>(N);
    auto gather = [N, D](std::span<const double> xd, std::size_t column, Arr& col) {
        for (std::size_t i = 0; i < N; ++i) col[static_cast<Eigen::Index>(i)] = xd[i * D + column];
    };
    // Accumulated transposed: [O x N].
    RowMat outT = RowMat::Zero(static_cast<Eigen::Index>(O), n);
    {
        Arr col(n), v(n);
        auto xd = x.data();
        for (std::size_t t = 0; t < T; ++t) {
            const double s = tap_scale(taps[t]);
            const double* p = taps[t].params.data().data();
            gather(xd, taps[t].column, col);
            for (std::size_t o = 0; o < O; ++o) {
                fam->eval_batch(col.data(), N, p + o * P, v.data(), nullptr, nullptr);
                outT.row(static_cast<Eigen::Index>(o)).array() += s * v.transpose();
            }
        }
    }
    std::vector<double> out(N * O);
    Eigen::Map<RowMat>(out.data(), n, static_cast<Eigen::Index>(O)) = outT.transpose();
    auto parents = tap_parents(x, taps);
    return make_result(
        {N, O}, std::move(out), std::move(parents),
        [x, fam, taps = std::move(taps), gather, N, D, T, P, O, n](TensorImpl& self) {
            const bool need_x = x.requires_grad();
            const RowMat GT = Eigen::Map<const RowMat>(self.grad.data(), n, static_cast<Eigen::Index>(O)).transpose();
            auto xd = x.data();
            double* gx = need_x ? x.impl()->grad_buffer().data() : nullptr;
            Arr col(n), v(n), dx(need_x ? n : 0), dp;
            for (std::size_t t = 0; t < T; ++t) {
                const auto& tap = taps[t];
                const bool pg = tap.params.requires_grad();
                const bool wg = tap.weights.defined() && tap.weights.requires_grad();
                if (!pg && !wg && !need_x) continue;
                if (pg) dp.resize(static_cast<Eigen::Index>(P) * n);
                const double s = tap_scale(tap);
                const double* p = tap.params.data().data();
                double* gp = pg ? tap.params.impl()->grad_buffer().data() : nullptr;
                gather(xd, tap.column, col);
                Arr gxa = Arr::Zero(need_x ? n : 0);
                double ds = 0.0;
                for (std::size_t o = 0; o < O; ++o) {
                    const auto g = GT.row(static_cast<Eigen::Index>(o)).transpose().array();
                    fam->eval_batch(col.data(), N, p + o * P, wg ? v.data() : nullptr, need_x ? dx.data() : nullptr,
                                    pg ? dp.data() : nullptr);
                    if (wg) ds += (g * v).sum();
                    if (need_x) gxa += g * dx;
                    if (pg) {
                        double* gpo = gp + o * P;
                        for (std::size_t k = 0; k < P; ++k)
                            gpo[k] += s * (g * dp.segment(static_cast<Eigen::Index>(k) * n, n)).sum();
                    }
                }
                if (need_x)
                    for (std::size_t i = 0; i < N; ++i) gx[i * D + tap.column] += s * gxa[static_cast<Eigen::Index>(i)];
                if (wg) tap.weights.impl()->grad_buffer()[tap.weight_index] += ds;
            }
        });
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view kind_name(BasisKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k.name;
    return "unknown";
}

BasisKind parse_kind(std::string_view name) {
    const std::string n = normalise(name);
    for (const auto& k : kKinds)
        if (normalise(k.name) == n) return k.kind;
    static const std::map<std::string, BasisKind> aliases = {
        {"kan", BasisKind::BSpline},
        {"bsplinekan", BasisKind::BSpline},
        {"rbfkan", BasisKind::RBF},
        {"chebykan", BasisKind::Chebyshev},
        {"chebyshevkan", BasisKind::Chebyshev},
        {"gramkan", BasisKind::Gram},
        {"jacobikan", BasisKind::Jacobi},
        {"bernsteinkan", BasisKind::Bernstein},
        {"wavkanmexicanhat", BasisKind::WaveletMexicanHat},
        {"mexicanhat", BasisKind::WaveletMexicanHat},
        {"wavkandog", BasisKind::WaveletDoG},
        {"dog", BasisKind::WaveletDoG},
        {"wavkanshannon", BasisKind::WaveletShannon},
        {"shannon", BasisKind::WaveletShannon},
        {"relu", BasisKind::ReLUKAN},
        {"bottleneckgramkan", BasisKind::BottleneckGram},
    };
    auto it = aliases.find(n);
    if (it == aliases.end()) throw ContractError("unknown basis family '" + std::string(name) + "'");
    return it->second;
}

double BasisDescriptor::hyper(std::string_view key, double fallback) const {
    for (const auto& [k, v] : hyperparams)
        if (k == key) return v;
    return fallback;
}

std::string BasisDescriptor::label() const {
    std::string out(kind_name(kind));
    if (*this == default_descriptor(kind)) return out;
    std::ostringstream os;
    os << out << '(' << degree_or_grid;
    for (const auto& [k, v] : hyperparams) os << ',' << k << '=' << v;
    os << ')';
    return os.str();
}

void validate(const BasisDescriptor& d) {
    if (d.degree_or_grid < 1) {
        throw ContractError("basis " + std::string(kind_name(d.kind)) + ": degree_or_grid must be >= 1, got " +
                            std::to_string(d.degree_or_grid));
    }
    if (!(d.lo < d.hi)) throw ContractError("basis " + std::string(kind_name(d.kind)) + ": empty input range");
    if (d.degree_or_grid > 28 && d.kind == BasisKind::BottleneckGram) {
        throw ContractError("basis BottleneckGram: degree too large");
    }
}

BasisDescriptor default_descriptor(BasisKind kind) {
    BasisDescriptor d;
    d.kind = kind;
    switch (kind) {
        case BasisKind::BSpline: d.degree_or_grid = 5; break;
        case BasisKind::RBF: d.degree_or_grid = 8; break;
        case BasisKind::FastKAN:
        case BasisKind::FasterKAN:
            d.degree_or_grid = 8;
            d.lo = -2.0;
            d.hi = 2.0;
            break;
        case BasisKind::Chebyshev:
        case BasisKind::Gram:
        case BasisKind::Bernstein:
        case BasisKind::BottleneckGram: d.degree_or_grid = 4; break;
        case BasisKind::Jacobi:
            d.degree_or_grid = 4;
            d.hyperparams = {{"alpha", 1.0}, {"beta", 1.0}};
            break;
        case BasisKind::WaveletMexicanHat:
        case BasisKind::WaveletDoG:
        case BasisKind::WaveletShannon: d.degree_or_grid = 1; break;
        case BasisKind::ReLUKAN: d.degree_or_grid = 5; break;
        case BasisKind::Linear: d.degree_or_grid = 1; break;
    }
    return d;
}

std::vector<BasisDescriptor> base_pool() {
    std::vector<BasisDescriptor> pool;
    for (const auto& k : kKinds)
        if (k.kind != BasisKind::Linear) pool.push_back(default_descriptor(k.kind));
    return pool;
}

std::vector<BasisDescriptor> default_pool() {
    auto pool = base_pool();
    BasisDescriptor cheb8 = default_descriptor(BasisKind::Chebyshev);
    cheb8.degree_or_grid = 8;
    BasisDescriptor spline10 = default_descriptor(BasisKind::BSpline);
    spline10.degree_or_grid = 10;
    BasisDescriptor legendre = default_descriptor(BasisKind::Jacobi);
    legendre.hyperparams = {{"alpha", 0.0}, {"beta", 0.0}};
    pool.push_back(cheb8);
    pool.push_back(spline10);
    pool.push_back(legendre);
    return pool;
}

std::size_t param_count(const BasisDescriptor& d) { return family_for(d)->param_count(); }

void init_params(const BasisDescriptor& d, std::span<double> out, std::mt19937_64& rng) {
    auto fam = family_for(d);
    if (out.size() != fam->param_count()) {
        throw ContractError("init_params: buffer of " + std::to_string(out.size()) + " for " + d.label());
    }
    fam->init(out, rng);
}

EdgeFunction init_edge(const BasisDescriptor& d, std::mt19937_64& rng) {
    std::vector<double> p(param_count(d));
    init_params(d, p, rng);
    const std::size_t n = p.size();
    return {d, Tensor::parameter({n}, std::move(p), d.label())};
}

double wavelet_scale(double raw) { return kMinScale + softplus(raw); }

double wavelet_raw_for_scale(double scale) {
    if (scale <= kMinScale) throw ContractError("wavelet scale must exceed 1e-3");
    return std::log(std::expm1(scale - kMinScale));
}

Tensor edge_block_sum(const Tensor& x, const BasisDescriptor& d, std::span<const TapRef> taps,
                      std::size_t out_dim) {
    auto fam = family_for(d);
    check_taps(x, taps, out_dim, fam->param_count());
    std::vector<TapRef> owned(taps.begin(), taps.end());
    if (auto e = std::dynamic_pointer_cast<const ExpansionFamily>(fam)) {
        return expansion_block(x, std::move(e), std::move(owned), out_dim);
    }
    return pointwise_block(x, std::dynamic_pointer_cast<const PointwiseFamily>(fam), std::move(owned), out_dim);
}

Tensor eval_edge(const EdgeFunction& f, const Tensor& x) {
    if (x.ndim() != 1) throw ContractError("eval_edge: expected rank-1 batch, got " + shape_str(x.shape()));
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (std::isnan(x[i])) throw ContractError("eval_edge: NaN input at index " + std::to_string(i));
    }
    const std::size_t n = x.numel();
    TapRef tap{0, f.params, Tensor{}, 0};
    Tensor col = ops::reshape(x, {n, 1});
    return ops::reshape(edge_block_sum(col, f.descriptor, {&tap, 1}, 1), {n});
}

}  // namespace skan
