#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mmgsim/metrics.hpp"
#include "mmgsim/plant.hpp"

using namespace mmgsim;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kW0 = 2.0 * kPi * 60.0;

struct SineFit {
    double amplitude;
    double phase;
    Complex phasor() const { return std::polar(amplitude, phase); }
};

// Least-squares fit of y ~ a cos(w t) + b sin(w t); the phasor convention
// x = Re{X e^{jwt}} maps to X = a - j b.
SineFit fit_sine(const std::vector<double>& y, const std::vector<double>& t, double w) {
    Eigen::MatrixXd m(y.size(), 2);
    Eigen::VectorXd rhs(y.size());
    for (size_t k = 0; k < y.size(); ++k) {
        m(k, 0) = std::cos(w * t[k]);
        m(k, 1) = std::sin(w * t[k]);
        rhs(k) = y[k];
    }
    const Eigen::Vector2d ab = m.colPivHouseholderQr().solve(rhs);
    const Complex x(ab(0), -ab(1));
    return {std::abs(x), std::arg(x)};
}

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a < -kPi) a += 2.0 * kPi;
    return a;
}

}  // namespace

TEST_CASE("waveform sample projects the rotating phasor") {
    CHECK(waveform_sample(Complex(170.0, 0.0), kW0, 0.0) == doctest::Approx(170.0).epsilon(1e-14));
    // 170 at -90 deg starts at zero and rises.
    const Complex lag(0.0, -170.0);
    CHECK(waveform_sample(lag, kW0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(waveform_sample(lag, kW0, 1e-5) > 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-200.0, 200.0);
    for (int k = 0; k < 50; ++k) {
        const Complex x(dist(rng), dist(rng));
        const double t = std::abs(dist(rng)) * 1e-3;
        const double expect = (x * std::exp(Complex(0.0, kW0 * t))).real();
        CHECK(waveform_sample(x, kW0, t) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("waveform sample has rms magnitude over one cycle") {
    const Complex x = std::polar(141.42, 0.7);
    const double period = 2.0 * kPi / kW0;
    const int n = 4096;
    double sum_sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = (k + 0.5) * period / n;
        const double v = waveform_sample(x, kW0, t);
        sum_sq += v * v;
    }
    const double rms = std::sqrt(sum_sq / n);
    CHECK(rms == doctest::Approx(std::abs(x) / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("admittance for power draws the requested complex power") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> dist(-5000.0, 5000.0);
    for (int k = 0; k < 20; ++k) {
        const Complex s(dist(rng), dist(rng));
        const double v = 100.0 + std::abs(dist(rng)) / 50.0;
        const Complex y = admittance_for_power(s, v);
        // Absorbed power at voltage magnitude v: 0.5 |V|^2 conj(Y).
        const Complex absorbed = 0.5 * v * v * std::conj(y);
        CHECK(std::abs(absorbed - s) < 1e-9 * std::max(1.0, std::abs(s)));
    }
    CHECK_THROWS_AS(admittance_for_power(Complex(100, 0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(admittance_for_power(Complex(100, 0), -5.0), std::invalid_argument);
}

TEST_CASE("single node divider matches the closed form") {
    const Complex e(170.0, 0.0);
    const Complex z(0.4, 0.8);
    const Complex y = 1.0 / Complex(6.0, 1.5);

    Network net;
    const int node = net.add_node();
    const int src = net.add_thevenin(node, e, z);
    net.add_shunt(node, y);
    net.finalize();
    const auto stats = net.solve();

    // Nodal equation (1/z + y) V = E/z  =>  V = E / (1 + z y).
    const Complex expect = e / (1.0 + z * y);
    CHECK(std::abs(net.voltage(node) - expect) < 1e-12);
    CHECK(std::abs(net.source_current(src) - net.voltage(node) * y) < 1e-12);
    CHECK(stats.iterations == 1);
    CHECK(stats.kcl_residual < 1e-10);

    // EMF updates scale linearly without refactorization.
    net.set_emf(src, 2.0 * e);
    net.solve();
    CHECK(std::abs(net.voltage(node) - 2.0 * expect) < 1e-12);
}

TEST_CASE("unenergized network settles at zero") {
    Network net;
    const int a = net.add_node();
    const int b = net.add_node();
    net.add_thevenin(a, Complex(0, 0), Complex(0.3, 0.2));
    net.add_branch(a, b, Complex(0.5, 0.9));
    net.add_shunt(b, 1.0 / Complex(4.0, 1.0));
    net.finalize();
    net.solve();
    CHECK(std::abs(net.voltage(a)) < 1e-12);
    CHECK(std::abs(net.voltage(b)) < 1e-12);
}

TEST_CASE("guards reject degenerate topology and premature solves") {
    Network net;
    const int a = net.add_node();
    CHECK_THROWS_AS(net.add_branch(a, Network::kGround, Complex(0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(net.add_thevenin(a, Complex(1, 0), Complex(0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(net.solve(), std::logic_error);
}

TEST_CASE("three bus chain agrees with mesh analysis") {
    // Two sources feed a three-bus ladder; every bus carries a shunt load.
    //   E1 -z1- bus1 -z12- bus2 -z23- bus3 -z2- E2, loads zl1..zl3 to ground.
    const Complex e1 = std::polar(170.0, 0.0);
    const Complex e2 = std::polar(165.0, -0.1);
    const Complex z1(0.2, 0.4), z2(0.15, 0.3);
    const Complex z12(0.3, 0.6), z23(0.25, 0.5);
    const Complex zl1(8.0, 2.0), zl2(12.0, -3.0), zl3(10.0, 1.0);

    Network net;
    const int n1 = net.add_node();
    const int n2 = net.add_node();
    const int n3 = net.add_node();
    const int s1 = net.add_thevenin(n1, e1, z1);
    net.add_thevenin(n3, e2, z2);
    const int b12 = net.add_branch(n1, n2, z12);
    const int b23 = net.add_branch(n2, n3, z23);
    net.add_shunt(n1, 1.0 / zl1);
    net.add_shunt(n2, 1.0 / zl2);
    net.add_shunt(n3, 1.0 / zl3);
    net.finalize();
    const auto stats = net.solve();

    // Independent mesh-analysis solution, four clockwise loop currents:
    //   A: e1-z1-zl1, B: zl1-z12-zl2, C: zl2-z23-zl3, D: zl3-z2-e2.
    Eigen::Matrix4cd zm = Eigen::Matrix4cd::Zero();
    zm(0, 0) = z1 + zl1;
    zm(0, 1) = -zl1;
    zm(1, 0) = -zl1;
    zm(1, 1) = zl1 + z12 + zl2;
    zm(1, 2) = -zl2;
    zm(2, 1) = -zl2;
    zm(2, 2) = zl2 + z23 + zl3;
    zm(2, 3) = -zl3;
    zm(3, 2) = -zl3;
    zm(3, 3) = zl3 + z2;
    Eigen::Vector4cd emf;
    emf << e1, Complex(0, 0), Complex(0, 0), -e2;
    const Eigen::Vector4cd im = zm.lu().solve(emf);

    const Complex v1 = (im(0) - im(1)) * zl1;
    const Complex v2 = (im(1) - im(2)) * zl2;
    const Complex v3 = (im(2) - im(3)) * zl3;
    CHECK(std::abs(net.voltage(n1) - v1) < 1e-9);
    CHECK(std::abs(net.voltage(n2) - v2) < 1e-9);
    CHECK(std::abs(net.voltage(n3) - v3) < 1e-9);

    // Branch and source currents map onto the loop currents directly.
    CHECK(std::abs(net.branch_current(b12) - im(1)) < 1e-9);
    CHECK(std::abs(net.branch_current(b23) - im(2)) < 1e-9);
    CHECK(std::abs(net.source_current(s1) - im(0)) < 1e-9);
    CHECK(stats.kcl_residual < 1e-9);
}

TEST_CASE("constant power load converges to the closed form") {
    // Single node, Thevenin source plus power load:
    //   (E - V)/z = 2 conj(S)/conj(V)  =>  E conj(V) = |V|^2 + 2 z conj(S).
    // With u = |V|^2 this is a real quadratic; the high-voltage root is the
    // physical operating point.
    const Complex e(170.0, 0.0);
    const Complex z(0.5, 1.0);
    const Complex s(2000.0, 800.0);

    const Complex c = 2.0 * z * std::conj(s);
    const double e2 = std::norm(e);
    const double disc = (e2 - 2.0 * c.real()) * (e2 - 2.0 * c.real()) - 4.0 * std::norm(c);
    REQUIRE(disc > 0.0);
    const double u = 0.5 * (e2 - 2.0 * c.real() + std::sqrt(disc));
    const Complex v_expect = (u + std::conj(c)) / std::conj(e);

    Network net;
    const int node = net.add_node();
    net.add_thevenin(node, e, z);
    const int load = net.add_power_load(node, s);
    net.finalize();
    const auto stats = net.solve();

    CHECK(std::abs(net.voltage(node) - v_expect) < 1e-6);
    CHECK(stats.iterations > 1);
    CHECK(stats.kcl_residual < 1e-5);

    // Infeasible draw (discriminant < 0) must be reported, not silently held.
    net.set_power_load(load, Complex(1e7, 0.0));
    CHECK_THROWS_AS(net.solve(), std::runtime_error);
}

TEST_CASE("power regulated source holds its setpoint") {
    // Regulated source of fixed EMF magnitude and free angle, working
    // against a fixed-phase grid source across a shared bus; the oracle
    // bisects the angle on the analytic power-angle expression.
    const double emf_mag = 172.0;
    const double p_set = 3000.0;
    const Complex z(0.05, 0.565);
    const Complex e_grid(170.0, 0.0);
    const Complex z_grid(0.2, 0.4);
    const Complex y = 1.0 / Complex(9.0, 3.0);

    const Complex y_total = 1.0 / z + 1.0 / z_grid + y;
    const auto v_of_angle = [&](double a) {
        return (std::polar(emf_mag, a) / z + e_grid / z_grid) / y_total;
    };
    const auto p_of_angle = [&](double a) {
        const Complex v = v_of_angle(a);
        const Complex i = (std::polar(emf_mag, a) - v) / z;
        return (0.5 * v * std::conj(i)).real();
    };
    double lo = 0.0, hi = 0.6;
    REQUIRE(p_of_angle(lo) < p_set);
    REQUIRE(p_of_angle(hi) > p_set);
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (p_of_angle(mid) < p_set ? lo : hi) = mid;
    }
    const Complex v_expect = v_of_angle(0.5 * (lo + hi));

    Network net;
    const int node = net.add_node();
    const int src = net.add_p_regulated(node, emf_mag, p_set, z);
    net.add_thevenin(node, e_grid, z_grid);
    net.add_shunt(node, y);
    net.finalize();
    net.solve();

    const Complex v = net.voltage(node);
    const Complex i = net.source_current(src);
    const double p = (0.5 * v * std::conj(i)).real();
    CHECK(p == doctest::Approx(p_set).epsilon(1e-6));
    CHECK(std::abs(v - v_expect) < 1e-3);
    CHECK(std::abs(std::abs(net.source_emf(src)) - emf_mag) < 1e-12);
}

TEST_CASE("balanced fixture shows no unbalance") {
    PlantParams p;
    p.tie_z = Complex(1e30, 0.0);  // isolate the single-phase side
    p.pv_p_regulated = false;
    MicrogridPlant plant(p);
    const PlantState& st = plant.solve_step();

    const VufResult vuf = vuf_percent(st.v_pcc);
    CHECK(!vuf.degenerate);
    CHECK(vuf.percent < 1e-10);
    CHECK(std::abs(std::abs(st.v_pcc[0]) - std::abs(st.v_pcc[1])) < 1e-9);
    CHECK(std::abs(std::abs(st.v_pcc[0]) - std::abs(st.v_pcc[2])) < 1e-9);
    CHECK(std::abs(st.s_terminal[0] - st.s_terminal[1]) < 1e-9);
    CHECK(std::abs(st.s_terminal[0] - st.s_terminal[2]) < 1e-9);
    CHECK(std::abs(st.s_pcc[0] - st.s_pcc[1]) < 1e-9);
}

TEST_CASE("unbalanced fixture accounts for every watt") {
    PlantParams p;
    p.pcc_load[0] = Complex(12899.225016431 + 4500.0, -2530.561927073 + 600.0);
    p.source_emf_peak = 181.061108469;
    MicrogridPlant plant(p);
    const PlantState& st = plant.solve_step();

    // The loaded phase dominates the feeder draw.
    const double dev = max_deviation_from_mean_pct(
        st.s_pcc[0].real(), st.s_pcc[1].real(), st.s_pcc[2].real());
    CHECK(dev > 10.0);
    CHECK(vuf_percent(st.v_pcc).percent > 3.0);

    // Reported three-phase reactive output is the sum over the PCC probes.
    double q_sum = 0.0;
    for (const auto& s : st.s_pcc) q_sum += s.imag();
    CHECK(plant.q_three_phase() == doctest::Approx(q_sum).epsilon(1e-12));

    // Phase A bus balance: feeder inflow = shunt load draw + tie outflow.
    const Complex y_a = admittance_for_power(p.pcc_load[0], p.v_nominal_peak);
    const Complex load_a = 0.5 * std::norm(st.v_pcc[0]) * std::conj(y_a);
    CHECK(std::abs(st.s_pcc[0] - load_a - st.s_tie) < 1e-3);

    // Single-phase bus balance: PV + tie inflow + storage = load + capacitor.
    const Complex tie_in = 0.5 * st.v_s * std::conj(st.i_tie);
    const Complex cap = 0.5 * std::norm(st.v_s) * std::conj(Complex(0.0, p.w0 * p.pv_filter_c));
    const Complex residual = st.s_pv + tie_in + st.s_ess - st.s_sp_load - cap;
    CHECK(std::abs(residual) < 1e-3);

    // The PV inverter regulates its active power to the tracking setpoint.
    CHECK(st.s_pv.real() == doctest::Approx(p.pv_p_mppt).epsilon(1e-6));
    CHECK(st.kcl_residual < 1e-9);
}

TEST_CASE("storage injection superposes on the linear fixture") {
    PlantParams p;
    p.pv_p_regulated = false;
    p.sp_load_const_power = false;

    MicrogridPlant base(p);
    const Complex v0 = base.solve_step().v_s;

    // Zero command is indistinguishable from no storage at all.
    MicrogridPlant zeroed(p);
    zeroed.apply_ess_injection(Complex(0, 0));
    CHECK(std::abs(zeroed.solve_step().v_s - v0) < 1e-12);

    const Complex i1 = std::polar(8.0, 0.3);
    const Complex i2 = std::polar(5.0, -1.1);
    MicrogridPlant pa(p), pb(p), pc(p);
    pa.apply_ess_injection(i1);
    pb.apply_ess_injection(i2);
    pc.apply_ess_injection(i1 + i2);
    const Complex va = pa.solve_step().v_s;
    const Complex vb = pb.solve_step().v_s;
    const Complex vc = pc.solve_step().v_s;
    CHECK(std::abs((va - v0) + (vb - v0) - (vc - v0)) < 1e-9);

    // A current in phase with the bus voltage delivers ~0.5 |V| |I| watts;
    // the small Thevenin voltage rise keeps it within a few percent.
    MicrogridPlant pd(p);
    const Complex unit = v0 / std::abs(v0);
    pd.apply_ess_injection(10.0 * unit);
    const PlantState& st = pd.solve_step();
    const double expect = 0.5 * std::abs(v0) * 10.0;
    CHECK(st.s_ess.real() == doctest::Approx(expect).epsilon(0.05));
    CHECK(std::abs(st.s_ess - 0.5 * st.v_s * std::conj(st.i_ess)) < 1e-12);
}

TEST_CASE("storage injection is clamped at the converter ceiling") {
    PlantParams p;
    MicrogridPlant plant(p);

    const Complex over = std::polar(200.0, 0.5);
    CHECK(plant.apply_ess_injection(over));
    const PlantState& st = plant.solve_step();
    CHECK(st.ess_clamped);
    CHECK(std::abs(st.i_ess) == doctest::Approx(p.ess_i_ceiling).epsilon(1e-12));
    CHECK(wrap_angle(std::arg(st.i_ess) - 0.5) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK(!plant.apply_ess_injection(std::polar(10.0, 0.2)));
    CHECK(!plant.solve_step().ess_clamped);
}

TEST_CASE("runtime setpoint changes take effect at the next solve") {
    PlantParams p;
    p.sp_load_const_power = true;
    MicrogridPlant plant(p);
    plant.solve_step();

    plant.set_sp_load(Complex(1200.0, 300.0));
    plant.set_pv_mppt(2500.0);
    const PlantState& st = plant.solve_step();
    CHECK(st.s_sp_load == Complex(1200.0, 300.0));
    // Load current consistent with the drawn power at the solved voltage.
    CHECK(std::abs(0.5 * st.v_s * std::conj(st.i_sp_load) - st.s_sp_load) < 1e-6);
    CHECK(st.s_pv.real() == doctest::Approx(2500.0).epsilon(1e-6));
    CHECK(st.iterations > 1);
}

TEST_CASE("converter branch tracks the filter impedance") {
    const double l = 1.5e-3, r = 0.05, dt = 1e-4;
    EssConverterBranch branch(l, r, kW0, dt);
    CHECK_THROWS_AS(EssConverterBranch(0.0, r, kW0, dt), std::invalid_argument);

    const Complex v_bus = std::polar(150.0, 0.0);
    const Complex v_inv = v_bus + std::polar(28.0, 0.9);
    const Complex i_expect = (v_inv - v_bus) / Complex(r, kW0 * l);

    std::vector<double> t_fit, i_fit;
    const int n = static_cast<int>(0.6 / dt);
    for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        const double i_new = branch.step(waveform_sample(v_inv, kW0, t),
                                         waveform_sample(v_bus, kW0, t), t);
        CHECK(branch.current() == i_new);
        if (t > 0.5) {
            // The update leaves i as the state at the end of the interval.
            t_fit.push_back(t + dt);
            i_fit.push_back(i_new);
        }
    }

    const SineFit fit = fit_sine(i_fit, t_fit, kW0);
    CHECK(fit.amplitude == doctest::Approx(std::abs(i_expect)).epsilon(0.015));
    CHECK(std::abs(wrap_angle(fit.phase - std::arg(i_expect))) < 0.04);

    // The demodulated phasor agrees with the waveform up to one sample.
    const Complex ph = branch.phasor();
    CHECK(std::abs(ph) == doctest::Approx(fit.amplitude).epsilon(0.01));
    CHECK(std::abs(wrap_angle(std::arg(ph) - fit.phase)) < 0.06);
}

TEST_CASE("identical stimulus reproduces the state exactly") {
    PlantParams p;
    p.pcc_load[0] = Complex(17000.0, -1900.0);
    MicrogridPlant a(p), b(p);
    for (int k = 0; k < 200; ++k) {
        const Complex inj = std::polar(5.0, 0.01 * k);
        a.apply_ess_injection(inj);
        b.apply_ess_injection(inj);
        a.solve_step();
        b.solve_step();
    }
    const PlantState& sa = a.state();
    const PlantState& sb = b.state();
    for (int ph = 0; ph < 3; ++ph) {
        CHECK(sa.v_pcc[ph] == sb.v_pcc[ph]);
        CHECK(sa.s_pcc[ph] == sb.s_pcc[ph]);
    }
    CHECK(sa.v_s == sb.v_s);
    CHECK(sa.s_pv == sb.s_pv);
}
