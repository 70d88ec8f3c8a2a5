#include "mmgsim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mmgsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double waveform_sample(Complex x, double w0, double t) {
    return x.real() * std::cos(w0 * t) - x.imag() * std::sin(w0 * t);
}

Complex admittance_for_power(Complex s, double v_peak) {
    if (!(v_peak > 0)) {
        throw std::invalid_argument("admittance_for_power: v_peak must be positive");
    }
    return 2.0 * std::conj(s) / (v_peak * v_peak);
}

int Network::add_node() {
    finalized_ = false;
    return n_nodes_++;
}

int Network::add_branch(int n1, int n2, Complex z) {
    if (z == Complex(0, 0)) {
        throw std::invalid_argument("Network: zero branch impedance");
    }
    finalized_ = false;
    branches_.push_back({n1, n2, z});
    return static_cast<int>(branches_.size()) - 1;
}

void Network::add_shunt(int node, Complex y) {
    finalized_ = false;
    shunts_.emplace_back(node, y);
}

int Network::add_thevenin(int node, Complex emf, Complex z) {
    if (z == Complex(0, 0)) {
        throw std::invalid_argument("Network: zero source impedance");
    }
    finalized_ = false;
    Source s;
    s.node = node;
    s.emf = emf;
    s.z = z;
    sources_.push_back(s);
    return static_cast<int>(sources_.size()) - 1;
}

void Network::set_emf(int source, Complex emf) {
    sources_.at(source).emf = emf;
}

int Network::add_p_regulated(int node, double emf_mag, double p_set, Complex z) {
    const int id = add_thevenin(node, Complex(emf_mag, 0), z);
    Source& s = sources_[id];
    s.p_regulated = true;
    s.p_set = p_set;
    s.emf_mag = emf_mag;
    s.angle = 0.0;
    return id;
}

void Network::set_p_regulated(int source, double emf_mag, double p_set) {
    Source& s = sources_.at(source);
    if (!s.p_regulated) {
        throw std::invalid_argument("Network: source is not p-regulated");
    }
    s.emf_mag = emf_mag;
    s.p_set = p_set;
}

int Network::add_injection(int node) {
    injections_.push_back({node, Complex(0, 0)});
    return static_cast<int>(injections_.size()) - 1;
}

void Network::set_injection(int inj, Complex i) {
    injections_.at(inj).i = i;
}

int Network::add_power_load(int node, Complex s) {
    loads_.push_back({node, s});
    return static_cast<int>(loads_.size()) - 1;
}

void Network::set_power_load(int load, Complex s) {
    loads_.at(load).s = s;
}

void Network::finalize() {
    y_ = Eigen::MatrixXcd::Zero(n_nodes_, n_nodes_);
    for (const auto& b : branches_) {
        const Complex y = 1.0 / b.z;
        y_(b.n1, b.n1) += y;
        if (b.n2 != kGround) {
            y_(b.n2, b.n2) += y;
            y_(b.n1, b.n2) -= y;
            y_(b.n2, b.n1) -= y;
        }
    }
    for (const auto& [node, y] : shunts_) {
        y_(node, node) += y;
    }
    for (const auto& s : sources_) {
        y_(s.node, s.node) += 1.0 / s.z;
    }
    lu_.compute(y_);
    if (v_.size() != n_nodes_) {
        v_ = Eigen::VectorXcd::Zero(n_nodes_);
    }
    rhs_.resize(n_nodes_);
    finalized_ = true;
}

void Network::build_rhs(Eigen::VectorXcd& rhs) const {
    rhs.setZero();
    for (const auto& s : sources_) {
        rhs(s.node) += s.emf / s.z;
    }
    for (const auto& inj : injections_) {
        rhs(inj.node) += inj.i;
    }
    for (const auto& l : loads_) {
        const Complex v = v_(l.node);
        if (std::abs(v) > 1e-3) {
            // S = 0.5 V conj(I)  =>  I drawn = 2 conj(S) / conj(V)
            rhs(l.node) -= 2.0 * std::conj(l.s) / std::conj(v);
        }
    }
}

bool Network::update_nonlinear() {
    bool moved = false;
    for (auto& s : sources_) {
        if (!s.p_regulated) {
            continue;
        }
        const Complex v = v_(s.node);
        const Complex e = std::polar(s.emf_mag, s.angle);
        const Complex i = (e - v) / s.z;
        const double p = 0.5 * (v * std::conj(i)).real();
        const double f = p - s.p_set;
        // d/d(angle) of Re{0.5 v conj((e - v)/z)}
        const Complex c = 0.5 * v * s.emf_mag * std::exp(Complex(0, -s.angle)) / std::conj(s.z);
        const double dfda = c.imag();
        if (std::abs(f) <= kTolerance * std::max(1.0, std::abs(s.p_set))) {
            continue;
        }
        double da;
        if (std::abs(dfda) > 1e-9) {
            da = f / dfda;
        } else {
            da = (f > 0) ? 0.05 : -0.05;
        }
        da = std::clamp(da, -0.2, 0.2);
        s.angle -= da;
        s.emf = std::polar(s.emf_mag, s.angle);
        moved = true;
    }
    return moved;
}

Network::SolveStats Network::solve() {
    if (!finalized_) {
        throw std::logic_error("Network::solve: finalize() not called");
    }
    SolveStats stats;
    const bool iterative = !loads_.empty() ||
        std::any_of(sources_.begin(), sources_.end(), [](const Source& s) { return s.p_regulated; });
    for (int it = 0; it < kMaxIterations; ++it) {
        build_rhs(rhs_);
        Eigen::VectorXcd v_new = lu_.solve(rhs_);
        double dv = 0.0;
        for (int n = 0; n < n_nodes_; ++n) {
            dv = std::max(dv, std::abs(v_new(n) - v_(n)) / std::max(1.0, std::abs(v_new(n))));
        }
        v_ = v_new;
        stats.iterations = it + 1;
        const bool constraints_moved = update_nonlinear();
        if (!iterative || (dv <= kTolerance && !constraints_moved)) {
            stats.kcl_residual = (y_ * v_ - rhs_).lpNorm<Eigen::Infinity>();
            return stats;
        }
    }
    std::ostringstream msg;
    msg << "Network::solve: no convergence after " << kMaxIterations << " iterations;";
    for (int n = 0; n < n_nodes_; ++n) {
        msg << " |V" << n << "|=" << std::abs(v_(n));
    }
    throw std::runtime_error(msg.str());
}

Complex Network::branch_current(int branch) const {
    const Branch& b = branches_.at(branch);
    const Complex v2 = (b.n2 == kGround) ? Complex(0, 0) : v_(b.n2);
    return (v_(b.n1) - v2) / b.z;
}

Complex Network::source_current(int source) const {
    const Source& s = sources_.at(source);
    return (s.emf - v_(s.node)) / s.z;
}

Complex Network::source_emf(int source) const {
    return sources_.at(source).emf;
}

EssConverterBranch::EssConverterBranch(double l, double r, double w0, double dt)
    : l_(l), r_(r), w0_(w0), dt_(dt),
      sogi_(1.4142135623730951, w0, dt),
      re_(2.0 * kPi * 30.0, dt),
      im_(2.0 * kPi * 30.0, dt) {
    if (!(l > 0)) {
        throw std::invalid_argument("EssConverterBranch: inductance must be positive");
    }
}

double EssConverterBranch::step(double v_inv, double v_bus, double t) {
    // Semi-implicit on the resistive term keeps the update contractive.
    i_ = (i_ + dt_ * (v_inv - v_bus) / l_) / (1.0 + dt_ * r_ / l_);
    const Sogi::Output s = sogi_.step(i_);
    // (x1 + j x2) rotates at +w0; demodulating with the simulation clock
    // yields the stationary phasor.
    const Complex analytic(s.in_phase, s.quadrature);
    const Complex ph = analytic * std::exp(Complex(0, -w0_ * t));
    re_.step(ph.real());
    im_.step(ph.imag());
    return i_;
}

MicrogridPlant::MicrogridPlant(const PlantParams& p)
    : params_(p),
      pv_v_cmd_(p.v_nominal_peak),
      ess_branch_(p.ess_filter_l, p.ess_filter_r, p.w0, p.dt) {
    rebuild();
}

void MicrogridPlant::rebuild() {
    net_ = Network();
    for (int ph = 0; ph < 3; ++ph) {
        pcc_node_[ph] = net_.add_node();
    }
    s_node_ = net_.add_node();

    const double v_nom = params_.v_nominal_peak;
    for (int ph = 0; ph < 3; ++ph) {
        const Complex emf = std::polar(params_.source_emf_peak, -2.0 * kPi / 3.0 * ph);
        src_[ph] = net_.add_thevenin(pcc_node_[ph], emf, params_.line_z);
        net_.add_shunt(pcc_node_[ph], admittance_for_power(params_.pcc_load[ph], v_nom));
    }

    tie_branch_ = net_.add_branch(pcc_node_[0], s_node_, params_.tie_z);
    net_.add_shunt(s_node_, Complex(0, params_.w0 * params_.pv_filter_c));
    if (params_.pv_p_regulated) {
        pv_src_ = net_.add_p_regulated(s_node_, pv_v_cmd_, params_.pv_p_mppt, params_.pv_filter_z);
    } else {
        pv_src_ = net_.add_thevenin(s_node_, Complex(pv_v_cmd_, 0), params_.pv_filter_z);
    }
    if (params_.sp_load_const_power) {
        pv_load_id_ = net_.add_power_load(s_node_, params_.sp_load);
    } else {
        pv_load_id_ = -1;
        net_.add_shunt(s_node_, admittance_for_power(params_.sp_load, v_nom));
    }
    ess_inj_ = net_.add_injection(s_node_);
    net_.set_injection(ess_inj_, ess_i_cmd_);
    net_.finalize();
}

void MicrogridPlant::set_pv_voltage_command(double v_peak) {
    if (!std::isfinite(v_peak) || v_peak <= 0) {
        throw std::invalid_argument("MicrogridPlant: invalid PV voltage command");
    }
    pv_v_cmd_ = v_peak;
    if (params_.pv_p_regulated) {
        net_.set_p_regulated(pv_src_, pv_v_cmd_, params_.pv_p_mppt);
    } else {
        net_.set_emf(pv_src_, Complex(pv_v_cmd_, 0));
    }
}

bool MicrogridPlant::apply_ess_injection(Complex i_inject) {
    bool clamped = false;
    const double mag = std::abs(i_inject);
    if (mag > params_.ess_i_ceiling) {
        i_inject *= params_.ess_i_ceiling / mag;
        clamped = true;
    }
    ess_i_cmd_ = i_inject;
    net_.set_injection(ess_inj_, ess_i_cmd_);
    state_.ess_clamped = clamped;
    return clamped;
}

void MicrogridPlant::set_sp_load(Complex s) {
    params_.sp_load = s;
    if (pv_load_id_ >= 0) {
        net_.set_power_load(pv_load_id_, s);
    } else {
        rebuild();
    }
}

void MicrogridPlant::set_pv_mppt(double p_w) {
    params_.pv_p_mppt = p_w;
    if (params_.pv_p_regulated) {
        net_.set_p_regulated(pv_src_, pv_v_cmd_, p_w);
    }
}

const PlantState& MicrogridPlant::solve_step() {
    const bool clamped = state_.ess_clamped;
    const Network::SolveStats stats = net_.solve();
    for (int ph = 0; ph < 3; ++ph) {
        state_.v_pcc[ph] = net_.voltage(pcc_node_[ph]);
        state_.i_line[ph] = net_.source_current(src_[ph]);
        state_.s_terminal[ph] = 0.5 * net_.source_emf(src_[ph]) * std::conj(state_.i_line[ph]);
        state_.s_pcc[ph] = 0.5 * state_.v_pcc[ph] * std::conj(state_.i_line[ph]);
    }
    state_.v_s = net_.voltage(s_node_);
    state_.i_pv = net_.source_current(pv_src_);
    state_.s_pv = 0.5 * state_.v_s * std::conj(state_.i_pv);
    state_.i_tie = net_.branch_current(tie_branch_);
    state_.s_tie = 0.5 * state_.v_pcc[0] * std::conj(state_.i_tie);
    if (pv_load_id_ >= 0) {
        state_.s_sp_load = params_.sp_load;
        const Complex v = state_.v_s;
        state_.i_sp_load = (std::abs(v) > 1e-3) ? 2.0 * std::conj(params_.sp_load) / std::conj(v)
                                                : Complex(0, 0);
    } else {
        const Complex y = admittance_for_power(params_.sp_load, params_.v_nominal_peak);
        state_.i_sp_load = state_.v_s * y;
        state_.s_sp_load = 0.5 * state_.v_s * std::conj(state_.i_sp_load);
    }
    state_.i_ess = ess_i_cmd_;
    state_.s_ess = 0.5 * state_.v_s * std::conj(state_.i_ess);
    state_.kcl_residual = stats.kcl_residual;
    state_.iterations = stats.iterations;
    state_.ess_clamped = clamped;
    return state_;
}

double MicrogridPlant::q_three_phase() const {
    double q = 0.0;
    for (const auto& s : state_.s_pcc) {
        q += s.imag();
    }
    return q;
}

}  // namespace mmgsim
