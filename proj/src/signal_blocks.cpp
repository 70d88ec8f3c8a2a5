#include "mmgsim/signal_blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace mmgsim {

namespace {

void require_finite(double x, const char* who) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument(std::string(who) + ": non-finite input");
    }
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

LowPassFilter::LowPassFilter(double cutoff_rad_s, double dt) {
    if (!(cutoff_rad_s > 0) || !(dt > 0)) {
        throw std::invalid_argument("LowPassFilter: cutoff and dt must be positive");
    }
    const double wdt = cutoff_rad_s * dt;
    alpha_ = wdt / (1.0 + wdt);
}

double LowPassFilter::step(double x) {
    require_finite(x, "LowPassFilter::step");
    y_ += alpha_ * (x - y_);
    return y_;
}

Sogi::Sogi(double k, double w0, double dt) {
    if (!(k > 0) || !(w0 > 0) || !(dt > 0)) {
        throw std::invalid_argument("Sogi: k, w0 and dt must be positive");
    }
    // Continuous state matrix A_c = [[-k w0, -w0], [w0, 0]], input B_c = [k w0, 0].
    const double h = dt / 2.0;
    const double m11 = 1.0 + k * w0 * h;  // I - A_c h
    const double m12 = w0 * h;
    const double m21 = -w0 * h;
    const double m22 = 1.0;
    const double det = m11 * m22 - m12 * m21;
    const double i11 = m22 / det, i12 = -m12 / det;
    const double i21 = -m21 / det, i22 = m11 / det;
    const double p11 = 1.0 - k * w0 * h;  // I + A_c h
    const double p12 = -w0 * h;
    const double p21 = w0 * h;
    const double p22 = 1.0;
    a11_ = i11 * p11 + i12 * p21;
    a12_ = i11 * p12 + i12 * p22;
    a21_ = i21 * p11 + i22 * p21;
    a22_ = i21 * p12 + i22 * p22;
    b1_ = i11 * k * w0 * dt;
    b2_ = i21 * k * w0 * dt;
}

Sogi::Output Sogi::step(double v) {
    require_finite(v, "Sogi::step");
    const double x1 = a11_ * x1_ + a12_ * x2_ + b1_ * v;
    const double x2 = a21_ * x1_ + a22_ * x2_ + b2_ * v;
    x1_ = x1;
    x2_ = x2;
    return {x1_, x2_};
}

double Sogi::amplitude() const {
    return std::sqrt(x1_ * x1_ + x2_ * x2_);
}

void Sogi::reset() {
    x1_ = 0;
    x2_ = 0;
}

DqSample single_phase_dq(double in_phase, double quadrature, double theta) {
    require_finite(in_phase, "single_phase_dq");
    require_finite(quadrature, "single_phase_dq");
    require_finite(theta, "single_phase_dq");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c * in_phase + s * quadrature, -s * in_phase + c * quadrature};
}

double single_phase_inverse_dq(const DqSample& dq, double theta) {
    return dq.d * std::cos(theta) - dq.q * std::sin(theta);
}

Dq0Sample abc_to_dq(double a, double b, double c, double theta) {
    require_finite(a, "abc_to_dq");
    require_finite(b, "abc_to_dq");
    require_finite(c, "abc_to_dq");
    require_finite(theta, "abc_to_dq");
    const double tb = theta - 2.0 * kPi / 3.0;
    const double tc = theta + 2.0 * kPi / 3.0;
    Dq0Sample out;
    out.d = (2.0 / 3.0) * (a * std::cos(theta) + b * std::cos(tb) + c * std::cos(tc));
    out.q = -(2.0 / 3.0) * (a * std::sin(theta) + b * std::sin(tb) + c * std::sin(tc));
    out.zero = (a + b + c) / 3.0;
    return out;
}

std::array<double, 3> dq_to_abc(const Dq0Sample& dq0, double theta) {
    const double tb = theta - 2.0 * kPi / 3.0;
    const double tc = theta + 2.0 * kPi / 3.0;
    return {
        dq0.d * std::cos(theta) - dq0.q * std::sin(theta) + dq0.zero,
        dq0.d * std::cos(tb) - dq0.q * std::sin(tb) + dq0.zero,
        dq0.d * std::cos(tc) - dq0.q * std::sin(tc) + dq0.zero,
    };
}

SinglePhasePll::SinglePhasePll(const Settings& s, double dt)
    : cfg_(s), dt_(dt), sogi_(s.sogi_k, s.w0, dt), mag_lpf_(s.mag_cutoff_rad_s, dt) {
    if (!(dt > 0)) {
        throw std::invalid_argument("SinglePhasePll: dt must be positive");
    }
}

SinglePhasePll::Output SinglePhasePll::step(double v) {
    require_finite(v, "SinglePhasePll::step");
    const Sogi::Output s = sogi_.step(v);
    const DqSample dq = single_phase_dq(s.in_phase, s.quadrature, theta_);
    // Normalizing by the instantaneous amplitude bounds the error signal to
    // sin(phase error) regardless of signal level.
    const double amp = std::max(sogi_.amplitude(), 1e-12);
    const double eps = dq.q / amp;
    integ_ += cfg_.ki * eps * dt_;
    const double omega = cfg_.w0 + integ_ + cfg_.kp * eps;
    theta_ += omega * dt_;
    theta_ = std::remainder(theta_, 2.0 * kPi);
    last_.theta = theta_;
    last_.omega = omega;
    last_.v_mag = mag_lpf_.step(sogi_.amplitude());
    last_.v_dq = dq;
    return last_;
}

SequenceComponents fortescue(Complex va, Complex vb, Complex vc) {
    const Complex a = std::polar(1.0, 2.0 * kPi / 3.0);
    const Complex a2 = a * a;
    SequenceComponents s;
    s.positive = (va + a * vb + a2 * vc) / 3.0;
    s.negative = (va + a2 * vb + a * vc) / 3.0;
    s.zero = (va + vb + vc) / 3.0;
    return s;
}

std::array<Complex, 3> inverse_fortescue(const SequenceComponents& s) {
    const Complex a = std::polar(1.0, 2.0 * kPi / 3.0);
    const Complex a2 = a * a;
    return {
        s.positive + s.negative + s.zero,
        a2 * s.positive + a * s.negative + s.zero,
        a * s.positive + a2 * s.negative + s.zero,
    };
}

double PrController::Biquad::step(double x) {
    const double y = b0 * x + z1;
    z1 = -a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
}

PrController::PrController(const Settings& s, double dt) : kp_(s.kp) {
    if (!(dt > 0) || !(s.wc > 0) || !(s.w0 > 0)) {
        throw std::invalid_argument("PrController: dt, wc and w0 must be positive");
    }
    n_stages_ = 0;
    for (const auto& [order, kr] : s.resonators) {
        if (order <= 0 || kr == 0.0) {
            continue;
        }
        const double wr = order * s.w0;
        // Bilinear transform s -> K (z-1)/(z+1), prewarped so the discrete
        // resonance lands exactly at wr.
        const double K = wr / std::tan(wr * dt / 2.0);
        const double a0 = K * K + 2.0 * s.wc * K + wr * wr;
        Biquad& bq = stages_[n_stages_++];
        bq.b0 = 2.0 * kr * s.wc * K / a0;
        bq.b2 = -bq.b0;
        bq.a1 = (2.0 * wr * wr - 2.0 * K * K) / a0;
        bq.a2 = (K * K - 2.0 * s.wc * K + wr * wr) / a0;
    }
}

double PrController::step(double error) {
    require_finite(error, "PrController::step");
    double y = kp_ * error;
    for (int i = 0; i < n_stages_; ++i) {
        y += stages_[i].step(error);
    }
    return y;
}

void PrController::reset() {
    for (auto& s : stages_) {
        s.z1 = 0;
        s.z2 = 0;
    }
}

double PrController::analytic_gain(const Settings& s, double w) {
    const Complex jw(0.0, w);
    Complex g(s.kp, 0.0);
    for (const auto& [order, kr] : s.resonators) {
        if (order <= 0 || kr == 0.0) {
            continue;
        }
        const double wr = order * s.w0;
        g += 2.0 * kr * s.wc * jw / (jw * jw + 2.0 * s.wc * jw + wr * wr);
    }
    return std::abs(g);
}

}  // namespace mmgsim
