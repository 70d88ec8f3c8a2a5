#ifndef MMGSIM_IA_CONTROLLER_HPP
#define MMGSIM_IA_CONTROLLER_HPP

#include <optional>

namespace mmgsim {

/// Gains of the incremental controller.
///
/// ki is the per-step integral gain and kd weights the one-step difference of
/// the accumulator. scale is the error-to-output unit conversion of a
/// particular loop instantiation (volts per volt, watts per var, ...); the
/// effective per-step increment is ki * scale * error. Output limits, when
/// set, clamp the accumulator itself.
struct IaGains {
    double ki = 0.0;
    double kd = 0.0;
    double scale = 1.0;
    std::optional<double> out_min;
    std::optional<double> out_max;
};

/// Incremental control law:
///
///   e_k = sp - pv
///   u_k = clamp(u_{k-1} + ki * scale * e_k)
///   U_k = u_k + kd * (u_k - u_{k-1})
///
/// The controller integrates increments rather than summing errors, so the
/// accumulator can never wind up beyond its clamp: one step after the error
/// changes sign the accumulator moves off the limit, and the derivative term
/// (applied to u_k, not to the error) pulls the output back inside the range
/// within a few steps.
class IaController {
public:
    IaController() = default;
    explicit IaController(const IaGains& g);

    /// Advances one step and returns the output U_k.
    double step(double setpoint, double measured);

    /// Clears the accumulator and the output.
    void reset();

    double accumulator() const { return u_; }
    double output() const { return out_; }
    const IaGains& gains() const { return gains_; }

private:
    IaGains gains_{};
    double u_ = 0.0;
    double out_ = 0.0;
};

}  // namespace mmgsim

#endif
