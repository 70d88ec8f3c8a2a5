#include "mmgsim/ia_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmgsim {

IaController::IaController(const IaGains& g) : gains_(g) {
    if (!std::isfinite(g.ki) || !std::isfinite(g.kd) || !std::isfinite(g.scale)) {
        throw std::invalid_argument("IaController: non-finite gains");
    }
    if (g.out_min && g.out_max && *g.out_min > *g.out_max) {
        throw std::invalid_argument("IaController: out_min exceeds out_max");
    }
}

double IaController::step(double setpoint, double measured) {
    if (!std::isfinite(setpoint) || !std::isfinite(measured)) {
        throw std::invalid_argument("IaController::step: non-finite input");
    }
    const double e = setpoint - measured;
    double u = u_ + gains_.ki * gains_.scale * e;
    if (gains_.out_min) {
        u = std::max(u, *gains_.out_min);
    }
    if (gains_.out_max) {
        u = std::min(u, *gains_.out_max);
    }
    out_ = u + gains_.kd * (u - u_);
    u_ = u;
    return out_;
}

void IaController::reset() {
    u_ = 0.0;
    out_ = 0.0;
}

}  // namespace mmgsim
