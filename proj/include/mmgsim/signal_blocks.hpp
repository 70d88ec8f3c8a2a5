#ifndef MMGSIM_SIGNAL_BLOCKS_HPP
#define MMGSIM_SIGNAL_BLOCKS_HPP

#include <array>
#include <complex>
#include <utility>

// Measurement and control primitives shared by the converter controllers.
//
// Conventions used throughout:
//  - waveforms are x(t) = Re{X e^{jw t}} with X a complex peak-amplitude phasor
//  - dq quantities are amplitude-invariant; the d axis is aligned with the
//    tracked voltage, so a locked PLL yields (v_d, v_q) = (V_peak, 0)
//  - the quadrature signal produced by the SOGI lags its input by 90 degrees

namespace mmgsim {

using Complex = std::complex<double>;

/// One-pole low-pass filter, backward-Euler discretization.
/// y[k] = y[k-1] + a (x[k] - y[k-1]), a = w*dt / (1 + w*dt); DC gain is
/// exactly 1 for any w*dt > 0.
class LowPassFilter {
public:
    LowPassFilter() = default;
    LowPassFilter(double cutoff_rad_s, double dt);

    double step(double x);
    double value() const { return y_; }
    void reset(double y0 = 0.0) { y_ = y0; }

private:
    double alpha_ = 1.0;
    double y_ = 0.0;
};

/// Second-order generalized integrator tuned to w0.
///
/// State equations (continuous form):
///   x1' = w0 (k (v - x1) - x2)
///   x2' = w0 x1
/// x1 converges to the fundamental component of v, x2 to its 90-degree
/// lagged quadrature. Discretized with the trapezoidal rule (input held over
/// the step); the update matrices are precomputed in the constructor.
class Sogi {
public:
    struct Output {
        double in_phase;    // x1
        double quadrature;  // x2, lags x1 by 90 degrees
    };

    Sogi() = default;
    Sogi(double k, double w0, double dt);

    Output step(double v);
    Output output() const { return {x1_, x2_}; }
    /// Instantaneous amplitude estimate sqrt(x1^2 + x2^2).
    double amplitude() const;
    void reset();

private:
    // x[k+1] = A x[k] + B v[k], A = (I - A_c dt/2)^-1 (I + A_c dt/2)
    double a11_ = 0, a12_ = 0, a21_ = 0, a22_ = 0;
    double b1_ = 0, b2_ = 0;
    double x1_ = 0, x2_ = 0;
};

struct DqSample {
    double d = 0;
    double q = 0;
};

/// Park rotation of a single-phase signal and its lagged quadrature.
/// For v = V cos(phi) and quad = V sin(phi): d = V cos(phi - theta),
/// q = V sin(phi - theta). A current lagging the reference voltage by 90
/// degrees maps to (0, -I).
DqSample single_phase_dq(double in_phase, double quadrature, double theta);

/// Inverse rotation; returns the instantaneous in-phase signal
/// d cos(theta) - q sin(theta) (used as the reference waveform generator).
double single_phase_inverse_dq(const DqSample& dq, double theta);

struct Dq0Sample {
    double d = 0;
    double q = 0;
    double zero = 0;
};

/// Amplitude-invariant abc -> dq0 transform (d axis at angle theta).
Dq0Sample abc_to_dq(double a, double b, double c, double theta);

/// Inverse of abc_to_dq.
std::array<double, 3> dq_to_abc(const Dq0Sample& dq0, double theta);

/// Single-phase phase-locked loop: SOGI quadrature generation followed by a
/// Park rotation and a PI loop driving the q component to zero. Tracks the
/// phase, angular frequency and amplitude of the input fundamental.
class SinglePhasePll {
public:
    struct Settings {
        double w0 = 2.0 * 3.14159265358979323846 * 60.0;  // nominal rad/s
        double sogi_k = 1.4142135623730951;               // sqrt(2)
        double kp = 178.0;      // loop proportional gain (on normalized q)
        double ki = 15800.0;    // loop integral gain
        double mag_cutoff_rad_s = 2.0 * 3.14159265358979323846 * 30.0;
    };

    struct Output {
        double theta;   // locked angle of the input fundamental
        double omega;   // estimated angular frequency, rad/s
        double v_mag;   // filtered amplitude estimate, >= 0
        DqSample v_dq;  // input in its own locked frame
    };

    SinglePhasePll() = default;
    SinglePhasePll(const Settings& s, double dt);

    Output step(double v);
    Output output() const { return last_; }
    double theta() const { return last_.theta; }

private:
    Settings cfg_;
    double dt_ = 0;
    Sogi sogi_;
    LowPassFilter mag_lpf_;
    double theta_ = 0;
    double integ_ = 0;
    Output last_{};
};

struct SequenceComponents {
    Complex positive;
    Complex negative;
    Complex zero;
};

/// Fortescue decomposition with operator a = e^{j 2 pi / 3}:
///   V+ = (Va + a Vb + a^2 Vc) / 3
///   V- = (Va + a^2 Vb + a Vc) / 3
///   V0 = (Va + Vb + Vc) / 3
SequenceComponents fortescue(Complex va, Complex vb, Complex vc);

/// Reconstructs (Va, Vb, Vc) from sequence components (exact inverse).
std::array<Complex, 3> inverse_fortescue(const SequenceComponents& s);

/// Quasi-proportional-resonant controller
///   G(s) = kp + sum_h 2 kr_h wc s / (s^2 + 2 wc s + (h w0)^2)
/// with one resonator per configured harmonic order. Each resonator is
/// discretized by the bilinear transform prewarped at its own center
/// frequency h*w0, so the discrete peaks sit exactly on the harmonics.
class PrController {
public:
    struct Settings {
        double kp = 10.0;
        double wc = 1.0;  // resonator damping bandwidth, rad/s
        double w0 = 2.0 * 3.14159265358979323846 * 60.0;
        // {harmonic order, resonant gain}
        std::array<std::pair<int, double>, 4> resonators{{{1, 100.0}, {3, 50.0}, {5, 20.0}, {7, 20.0}}};
    };

    PrController() = default;
    PrController(const Settings& s, double dt);

    double step(double error);
    void reset();

    /// Continuous-frequency magnitude response |G(jw)| of the configured
    /// controller (used by tests; independent of the discrete realization).
    static double analytic_gain(const Settings& s, double w);

private:
    struct Biquad {
        double b0 = 0, b2 = 0, a1 = 0, a2 = 0;
        double z1 = 0, z2 = 0;  // transposed direct form II state
        double step(double x);
    };

    double kp_ = 0;
    std::array<Biquad, 4> stages_{};
    int n_stages_ = 0;
};

}  // namespace mmgsim

#endif
