#ifndef MMGSIM_PLANT_HPP
#define MMGSIM_PLANT_HPP

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmgsim/signal_blocks.hpp"

// Phasor-domain network model. All phases are carried as complex
// peak-amplitude phasors at the system frequency; instantaneous values are
// reconstructed with waveform_sample. Complex power follows
// S = 0.5 * V * conj(I) with the current measured in the direction noted at
// each probe.

namespace mmgsim {

/// Instantaneous value of a phasor at time t: Re{X e^{jwt}}.
double waveform_sample(Complex x, double w0, double t);

/// Admittance that draws S (= P + jQ) at the given peak voltage.
Complex admittance_for_power(Complex s, double v_peak);

/// Sparse-free complex nodal solver for small per-phase networks.
///
/// Linear elements (impedance branches, shunts, Thevenin sources) are
/// stamped into the admittance matrix once; constant-power loads and
/// power-regulated sources are resolved by fixed-point iteration on the
/// right-hand side, warm-started from the previous solve.
class Network {
public:
    struct SolveStats {
        int iterations = 0;
        double kcl_residual = 0.0;  // max |Y V - I| over nodes
    };

    int add_node();

    /// Impedance branch from n1 to n2 (n2 = kGround for a shunt path).
    /// Returns a branch id usable with branch_current.
    int add_branch(int n1, int n2, Complex z);
    void add_shunt(int node, Complex y);

    /// Ideal EMF behind an internal impedance (Norton-stamped). The EMF may
    /// be updated between solves without refactorization.
    int add_thevenin(int node, Complex emf, Complex z);
    void set_emf(int source, Complex emf);

    /// EMF of fixed magnitude whose angle is iterated until the source
    /// delivers p_set into its node (measured at the node side).
    int add_p_regulated(int node, double emf_mag, double p_set, Complex z);
    void set_p_regulated(int source, double emf_mag, double p_set);

    /// Current injection into a node, set per step.
    int add_injection(int node);
    void set_injection(int inj, Complex i);

    /// Constant-power wye load (S drawn from the node).
    int add_power_load(int node, Complex s);
    void set_power_load(int load, Complex s);

    /// Assembles and factors the admittance matrix. Must be called once
    /// after topology is complete (and again after re_stamp()).
    void finalize();

    SolveStats solve();

    Complex voltage(int node) const { return v_(node); }
    /// Current out of branch node n1 towards n2.
    Complex branch_current(int branch) const;
    /// Current delivered by a Thevenin or p-regulated source into its node.
    Complex source_current(int source) const;
    Complex source_emf(int source) const;

    int node_count() const { return n_nodes_; }

    static constexpr int kGround = -1;
    static constexpr int kMaxIterations = 50;
    static constexpr double kTolerance = 1e-8;

private:
    struct Branch {
        int n1, n2;
        Complex z;
    };
    struct Source {
        int node;
        Complex emf;
        Complex z;
        bool p_regulated = false;
        double p_set = 0.0;
        double emf_mag = 0.0;
        double angle = 0.0;
    };
    struct Injection {
        int node;
        Complex i;
    };
    struct PowerLoad {
        int node;
        Complex s;
    };

    void build_rhs(Eigen::VectorXcd& rhs) const;
    bool update_nonlinear();  // returns true when any constraint moved

    int n_nodes_ = 0;
    std::vector<Branch> branches_;
    std::vector<std::pair<int, Complex>> shunts_;
    std::vector<Source> sources_;
    std::vector<Injection> injections_;
    std::vector<PowerLoad> loads_;

    Eigen::MatrixXcd y_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    Eigen::VectorXcd v_;
    Eigen::VectorXcd rhs_;
    bool finalized_ = false;
};

/// Averaged model of the storage converter output stage: bridge voltage
/// v_inv drives the filter inductor against the bus voltage,
///   L di/dt = v_inv - v_bus - R i
/// with i the instantaneous current injected into the bus. A SOGI pair on i
/// demodulated against the simulation clock provides the fundamental phasor
/// handed to the network solve.
class EssConverterBranch {
public:
    EssConverterBranch() = default;
    EssConverterBranch(double l, double r, double w0, double dt);

    /// Advances one plant step; returns the new inductor current.
    double step(double v_inv, double v_bus, double t);

    double current() const { return i_; }
    /// Fundamental phasor of the injected current (inject convention).
    Complex phasor() const { return Complex(re_.value(), im_.value()); }

private:
    double l_ = 1.0, r_ = 0.0, w0_ = 0.0, dt_ = 0.0;
    double i_ = 0.0;
    Sogi sogi_;
    LowPassFilter re_, im_;
};

/// Parameters of the two-microgrid fixture: a three-phase inverter feeding
/// the point of common coupling through a line, an unbalanced wye load at
/// the PCC, and a single-phase microgrid (PV inverter, local load, storage
/// converter) tied to phase A.
struct PlantParams {
    double w0 = 2.0 * 3.14159265358979323846 * 60.0;
    double v_nominal_peak = 169.70562748477141;
    double dt = 1e-4;

    double source_emf_peak = 181.0;  // three-phase inverter internal EMF
    Complex line_z{0.2, 0.1};        // per phase, inverter to PCC

    // PCC wye loads, specified as P + jQ drawn at nominal voltage and
    // stamped as constant impedances.
    std::array<Complex, 3> pcc_load{Complex(4500, 600), Complex(4500, 600), Complex(4500, 600)};

    Complex tie_z{0.1, 0.5};      // PCC phase A to single-phase bus
    Complex pv_filter_z{0.05, 0.565};
    double pv_filter_c = 100e-6;  // shunt at the single-phase bus
    double pv_p_mppt = 3000.0;
    bool pv_p_regulated = true;

    Complex sp_load{800.0, 500.0};  // single-phase load at nominal voltage
    bool sp_load_const_power = false;

    double ess_filter_l = 1.5e-3;
    double ess_filter_r = 0.05;
    double ess_i_ceiling = 150.0;  // peak A on the applied injection phasor
};

enum class PccPhase { A = 0, B = 1, C = 2 };

/// Phasor-level view of one solved plant step.
struct PlantState {
    std::array<Complex, 3> v_pcc{};
    Complex v_s{};
    std::array<Complex, 3> i_line{};       // inverter -> PCC, per phase
    std::array<Complex, 3> s_terminal{};   // at the inverter EMF
    std::array<Complex, 3> s_pcc{};        // same current, PCC-side voltage
    Complex i_pv{};                        // PV inverter branch into the bus
    Complex s_pv{};                        // 0.5 v_s conj(i_pv)
    Complex i_tie{};                       // PCC phase A -> single-phase bus
    Complex s_tie{};                       // at the PCC end
    Complex i_sp_load{};                   // into the single-phase load
    Complex s_sp_load{};
    Complex i_ess{};                       // applied injection (into the bus)
    Complex s_ess{};                       // delivered by the storage unit
    double kcl_residual = 0.0;
    int iterations = 0;
    bool ess_clamped = false;
};

/// The assembled fixture. Owns the nodal network and the storage converter
/// branch; the scenario driver alternates measurement, control and solve.
class MicrogridPlant {
public:
    explicit MicrogridPlant(const PlantParams& p);

    /// Updates the PV inverter voltage command (peak volts).
    void set_pv_voltage_command(double v_peak);
    /// Applies the storage current injection (inject convention). The
    /// magnitude is clamped at the converter ceiling; returns true if the
    /// clamp acted.
    bool apply_ess_injection(Complex i_inject);
    /// Replaces the single-phase load (takes effect at the next solve).
    void set_sp_load(Complex s);
    void set_pv_mppt(double p_w);

    /// Solves the network and refreshes the probe set.
    const PlantState& solve_step();
    const PlantState& state() const { return state_; }

    EssConverterBranch& ess_branch() { return ess_branch_; }
    const PlantParams& params() const { return params_; }

    /// Total reactive power delivered by the three-phase inverter (PCC
    /// side), the quantity shared against the single-phase PV inverter.
    double q_three_phase() const;

private:
    void rebuild();

    PlantParams params_;
    Network net_;
    std::array<int, 3> pcc_node_{};
    int s_node_ = 0;
    std::array<int, 3> src_{};
    int pv_src_ = 0;
    int tie_branch_ = 0;
    int pv_load_id_ = -1;  // constant-power variant only
    int ess_inj_ = 0;
    double pv_v_cmd_ = 0.0;
    Complex ess_i_cmd_{};
    EssConverterBranch ess_branch_;
    PlantState state_{};
};

}  // namespace mmgsim

#endif
