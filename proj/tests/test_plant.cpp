#include <catch_amalgamated.hpp>

#include "mgsim/errors.hpp"
#include "mgsim/plant.hpp"

#include <random>

using namespace mgsim;
using Catch::Approx;

namespace {

PlantConfig config(Connection c, bool gt) {
    PlantConfig cfg;
    cfg.transformer.connection = c;
    cfg.transformer.grounding_transformer = gt;
    return cfg;
}

std::vector<PlantConfig> all_configs() {
    return {config(Connection::y_yg, false), config(Connection::delta_yg, false), config(Connection::y_yg, true)};
}

Complex parallel(Complex a, Complex b) { return a * b / (a + b); }

// Load-step study pre-step loading, watts per phase.
LoadSpec pre_step_load() {
    const double p = 2.0e6 / 3.0;
    return {{0.1 * p, 0.6 * p, 0.3 * p}};
}

ThreePhase balanced(double theta, double mag = 1.0) {
    return {mag * std::cos(theta), mag * std::cos(theta - kTwoPi / 3.0), mag * std::cos(theta + kTwoPi / 3.0)};
}

// Runs with a held balanced source whose staircase has an exact unit
// fundamental, and returns the PCC phasors over the last cycle.
struct Settled {
    PhasorSet v_pcc;
    PhasorSet i_pcc;
};

Settled run_balanced(const PlantModel& m, int cycles) {
    const double dt = m.config().dt;
    const double w = m.config().bases.omega();
    const double comp = (w * dt / 2.0) / std::sin(w * dt / 2.0);
    PlantState s = m.zero_state();
    std::vector<ThreePhase> v, i;
    const int n = 200;
    for (int k = 0; k < cycles * n; ++k) {
        const double th = w * (k * dt + dt / 2.0);
        auto r = plant_step(m, s, balanced(th, comp), {w * k * dt, w}, dt);
        s = std::move(r.state);
        if (k >= (cycles - 1) * n) {
            v.push_back(r.measurements.v_pcc);
            i.push_back(r.measurements.i_pcc);
        }
    }
    // window samples sit at t = (k+1) dt; rotate back to the t = 0 reference
    const double t0 = ((cycles - 1) * n + 1) * dt;
    const Complex rot = std::polar(1.0, -w * t0);
    PhasorSet pv = extract_phasors(v, 60.0, dt);
    PhasorSet pi = extract_phasors(i, 60.0, dt);
    pv = {pv.a * rot, pv.b * rot, pv.c * rot};
    pi = {pi.a * rot, pi.b * rot, pi.c * rot};
    return {pv, pi};
}

// Phase-domain nodal solve (capacitor and PCC nodes) built directly from the
// element impedances, independent of the state-space assembly.
PhasorSet nodal_pcc_voltage(const PlantModel& m, const PhasorSet& v_inv) {
    const auto& e = m.elements();
    const Eigen::Matrix3cd i3 = Eigen::Matrix3cd::Identity();
    const Eigen::Matrix3cd y_f = i3 / e.filter_z;
    const Eigen::Matrix3cd y_s = seq_to_phase_complex(e.series).inverse();
    Eigen::Matrix3cd y_pcc = seq_to_phase_complex(e.zero_path).inverse();
    if (e.grounding) {
        y_pcc += seq_to_phase_complex(*e.grounding).inverse();
    }
    Eigen::Vector3cd inj = Eigen::Vector3cd::Zero();
    for (int k = 0; k < 3; ++k) {
        y_pcc(k, k) += m.conductance()[k] + m.config().pcc_bleed_pu;
        inj(k) = m.injection()[k] * std::polar(1.0, -kTwoPi / 3.0 * k);
    }
    Eigen::Matrix<Complex, 6, 6> y = Eigen::Matrix<Complex, 6, 6>::Zero();
    y.block<3, 3>(0, 0) = y_f + e.filter_b * i3 + y_s;
    y.block<3, 3>(0, 3) = -y_s;
    y.block<3, 3>(3, 0) = -y_s;
    y.block<3, 3>(3, 3) = y_s + y_pcc;
    Eigen::Matrix<Complex, 6, 1> rhs;
    rhs << y_f * Eigen::Vector3cd(v_inv.a, v_inv.b, v_inv.c), inj;
    const Eigen::Matrix<Complex, 6, 1> v = y.fullPivLu().solve(rhs);
    return {v(3), v(4), v(5)};
}

const PhasorSet kBalanced{1.0, std::polar(1.0, -kTwoPi / 3.0), std::polar(1.0, kTwoPi / 3.0)};

}  // namespace

TEST_CASE("seq_to_phase examples") {
    const double w = kTwoPi * 60.0;
    const Complex z{0.3, 0.7};

    const Eigen::Matrix3cd same = seq_to_phase_complex({z, z, z});
    CHECK((same - z * Eigen::Matrix3cd::Identity()).norm() < 1e-14);

    const Complex zg{0.05, 0.2};
    const Eigen::Matrix3cd grounded = seq_to_phase_complex({z + 3.0 * zg, z, z});
    CHECK(std::abs(grounded(0, 1) - zg) < 1e-14);
    CHECK(std::abs(grounded(0, 0) - (z + zg)) < 1e-14);

    const PhaseMatrix pm = seq_to_phase({3.0 * z, z, z}, w);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            const Complex expect = r == c ? 5.0 / 3.0 * z : 2.0 / 3.0 * z;
            CHECK(pm.r(r, c) == Approx(expect.real()).epsilon(1e-14));
            CHECK(pm.l(r, c) * w == Approx(expect.imag()).epsilon(1e-14));
        }
    }
}

TEST_CASE("seq_to_phase is symmetric and diagonalized by Fortescue") {
    const double w = kTwoPi * 60.0;
    const Complex a = kFortescueA;
    Eigen::Matrix3cd f;
    f << 1.0, 1.0, 1.0, 1.0, a * a, a, 1.0, a, a * a;
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.001, 100.0);
    for (int k = 0; k < 200; ++k) {
        const Complex z0{u(rng), u(rng)}, z1{u(rng), u(rng)};
        const PhaseMatrix pm = seq_to_phase({z0, z1, z1}, w);
        CHECK((pm.r - pm.r.transpose()).norm() <= 1e-12 * pm.r.norm());
        CHECK((pm.l - pm.l.transpose()).norm() <= 1e-12 * pm.l.norm());
        const Eigen::Matrix3cd zabc = pm.r.cast<Complex>() + Complex(0.0, w) * pm.l.cast<Complex>();
        const Eigen::Matrix3cd d = f.inverse() * zabc * f;
        const double scale = std::max(std::abs(z0), std::abs(z1));
        CHECK(std::abs(d(0, 0) - z0) <= 1e-12 * scale);
        CHECK(std::abs(d(1, 1) - z1) <= 1e-12 * scale);
        CHECK(std::abs(d(2, 2) - z1) <= 1e-12 * scale);
        CHECK(std::abs(d(0, 1)) + std::abs(d(1, 2)) + std::abs(d(2, 0)) <= 1e-12 * scale);
    }
}

TEST_CASE("network elements on the system base") {
    SECTION("Y-Yg magnetizing zero path, 5 MVA to 2 MVA") {
        const auto e = network_elements(config(Connection::y_yg, false));
        CHECK(e.zero_path.z0.real() == Approx(80.0).epsilon(1e-12));
        CHECK(e.zero_path.z0.imag() == Approx(80.0).epsilon(1e-12));
        CHECK_FALSE(e.grounding.has_value());
    }
    SECTION("grounding transformer, 3.772 MVA to 2 MVA") {
        const auto e = network_elements(config(Connection::y_yg, true));
        REQUIRE(e.grounding.has_value());
        CHECK(std::abs(e.grounding->z0) == Approx(0.6185 * 2.0 / 3.772).epsilon(1e-12));
        CHECK(std::abs(e.grounding->z0) == Approx(0.3280).margin(1e-4));
        CHECK(e.grounding->z0.imag() / e.grounding->z0.real() == Approx(10.0));
    }
    SECTION("delta-Yg winding zero path") {
        const auto e = network_elements(config(Connection::delta_yg, false));
        CHECK(e.zero_path.z0.real() == Approx(0.0024 * 0.4).epsilon(1e-12));
        CHECK(e.zero_path.z0.imag() == Approx(0.06 * 0.4).epsilon(1e-12));
    }
    SECTION("filter on the 480 V base") {
        const auto e = network_elements(PlantConfig{});
        const double z = 480.0 * 480.0 / 2.0e6;
        CHECK(e.filter_z.imag() == Approx(kTwoPi * 60.0 * 350e-6 / z).epsilon(1e-12));
        CHECK(e.filter_b.imag() == Approx(kTwoPi * 60.0 * 5000e-6 * z).epsilon(1e-12));
    }
    SECTION("non-positive elements are rejected") {
        PlantConfig bad;
        bad.filter.lf_henry = -1e-4;
        CHECK_THROWS_AS(network_elements(bad), ConfigError);
        bad = PlantConfig{};
        bad.transformer.zm_pu = {-1.0, 200.0};
        CHECK_THROWS_AS(network_elements(bad), ConfigError);
        bad = PlantConfig{};
        bad.transformer.gt_z0_pu = 0.0;
        CHECK_THROWS_AS(network_elements(bad), ConfigError);
    }
}

TEST_CASE("Thevenin zero-sequence impedance matches the analytic forms") {
    // Analytic values on the 2 MVA base from the transformer data alone.
    const double to_sys = 2.0 / 5.0;
    const Complex zm0 = Complex(200.0, 200.0) * to_sys;
    const Complex windings = Complex(0.0024, 0.06) * to_sys;
    const double gt_mag = 0.6185 * 2.0 / 3.772;
    const Complex z_gt = std::polar(gt_mag, std::atan(10.0));

    const Complex y_yg = thevenin_z0_at_pcc(build_plant(config(Connection::y_yg, false), {}));
    const Complex d_yg = thevenin_z0_at_pcc(build_plant(config(Connection::delta_yg, false), {}));
    const Complex gt = thevenin_z0_at_pcc(build_plant(config(Connection::y_yg, true), {}));

    CHECK(std::abs(y_yg - zm0) <= 0.05 * std::abs(zm0));
    CHECK(std::abs(d_yg - windings) <= 0.05 * std::abs(windings));
    CHECK(std::abs(gt - parallel(zm0, z_gt)) <= 0.05 * std::abs(z_gt));
    CHECK(std::abs(gt - z_gt) <= 0.05 * std::abs(z_gt));

    // Frozen from the phasor solve; the bleed conductance is in parallel.
    CHECK(y_yg.real() == Approx(79.98).margin(0.01));
    CHECK(y_yg.imag() == Approx(78.73).margin(0.01));

    // the load is ignored
    CHECK(std::abs(thevenin_z0_at_pcc(build_plant(config(Connection::y_yg, true), pre_step_load())) - gt) < 1e-12);
}

TEST_CASE("plant_step basics") {
    const PlantModel m = build_plant(config(Connection::y_yg, true), {});
    const double dt = m.config().dt;
    SECTION("zero input from zero state stays at zero") {
        PlantState s = m.zero_state();
        for (int k = 0; k < 1000; ++k) {
            s = plant_step(m, s, {}, {0.0, kTwoPi * 60.0}, dt).state;
        }
        CHECK(s.x.norm() == 0.0);
        CHECK(s.step == 1000);
    }
    SECTION("wrong step size is rejected") {
        CHECK_THROWS_AS(plant_step(m, m.zero_state(), {}, {}, 1e-4), ConfigError);
    }
    SECTION("non-finite input reports the step") {
        PlantState s = m.zero_state();
        for (int k = 0; k < 5; ++k) {
            s = plant_step(m, s, {}, {}, dt).state;
        }
        try {
            (void)plant_step(m, s, {std::nan(""), 0.0, 0.0}, {}, dt);
            FAIL("no divergence reported");
        } catch (const DivergenceError& e) {
            CHECK(e.step() == 6);
            CHECK(e.time_s() == Approx(6 * dt));
        }
    }
}

TEST_CASE("zero-input energy decays cycle by cycle") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> g;
    for (const PlantConfig& cfg : all_configs()) {
        for (const LoadSpec& load : {LoadSpec{}, pre_step_load()}) {
            const PlantModel m = build_plant(cfg, load);
            PlantState s = m.zero_state();
            for (int k = 0; k < m.state_size(); ++k) {
                s.x(k) = g(rng);
            }
            double prev = m.stored_energy(s);
            for (int cycle = 0; cycle < 20; ++cycle) {
                double acc = 0.0;
                for (int k = 0; k < 200; ++k) {
                    s = plant_step(m, s, {}, {}, m.config().dt).state;
                    acc += m.stored_energy(s);
                }
                REQUIRE(acc / 200.0 < prev);
                prev = acc / 200.0;
            }
        }
    }
}

TEST_CASE("balanced source and load settle to the positive-sequence circuit") {
    for (const PlantConfig& cfg : all_configs()) {
        const double p = 2.0e6 / 3.0 * 0.3;
        const PlantModel m = build_plant(cfg, {{p, p, p}});
        const auto& e = m.elements();

        // Independent per-phase positive-sequence solution.
        const Complex y_load = 0.3 + cfg.pcc_bleed_pu;
        Complex y_pcc = y_load + 1.0 / e.zero_path.z1;
        if (e.grounding) {
            y_pcc += 1.0 / e.grounding->z1;
        }
        const Complex z_down = e.series.z1 + 1.0 / y_pcc;
        const Complex z_cap = 1.0 / (e.filter_b + 1.0 / z_down);
        const Complex v_cap = z_cap / (e.filter_z + z_cap);
        const Complex v_pcc = v_cap * (1.0 / y_pcc) / z_down;
        const Complex i_series = v_cap / z_down;

        const Settled s = run_balanced(m, 300);
        const auto vs = fortescue(s.v_pcc);
        CHECK(std::abs(vs.pos - v_pcc) < 1e-4);
        CHECK(std::abs(vs.neg) < 1e-6);
        CHECK(std::abs(vs.zero) < 1e-6);
        CHECK(std::abs(fortescue(s.i_pcc).pos - i_series) < 1e-4);

        const auto ph = steady_state_phasors(m, kBalanced);
        // the open zero-sequence path makes the series inductance matrix
        // ill-conditioned, which costs a few digits
        CHECK(std::abs(fortescue(ph.v_pcc).pos - v_pcc) < 1e-4);
    }
}

TEST_CASE("time-domain and phasor solutions agree under unbalanced load") {
    for (const PlantConfig& cfg : all_configs()) {
        const PlantModel m = build_plant(cfg, {{0.2e6, -0.1e6, 0.3e6}});
        const Settled s = run_balanced(m, 300);
        const auto ph = steady_state_phasors(m, kBalanced);
        const auto a = fortescue(s.v_pcc);
        const auto b = fortescue(ph.v_pcc);
        CHECK(std::abs(a.pos - b.pos) < 1e-4);
        CHECK(std::abs(a.neg - b.neg) < 1e-4);
        CHECK(std::abs(a.zero - b.zero) < 1e-4);
    }
}

TEST_CASE("no zero-sequence current through the three-wire side") {
    for (const PlantConfig& cfg : all_configs()) {
        const PlantModel m = build_plant(cfg, pre_step_load());
        const Settled s = run_balanced(m, 300);
        CHECK(std::abs(fortescue(s.i_pcc).zero) < 1e-4);
        const auto ph = steady_state_phasors(m, kBalanced);
        CHECK(std::abs(fortescue(ph.i_pcc).zero) < 1e-4);
    }
}

TEST_CASE("phasor solution matches the nodal oracle") {
    for (const PlantConfig& cfg : all_configs()) {
        for (const LoadSpec& load : {pre_step_load(), LoadSpec{{-0.4e6, 0.2e6, -0.1e6}}}) {
            const PlantModel m = build_plant(cfg, load);
            const PhasorSet ref = nodal_pcc_voltage(m, kBalanced);
            const PhasorSet got = steady_state_phasors(m, kBalanced).v_pcc;
            CHECK(std::abs(got.a - ref.a) < 1e-4);
            CHECK(std::abs(got.b - ref.b) < 1e-4);
            CHECK(std::abs(got.c - ref.c) < 1e-4);
        }
    }
}

TEST_CASE("grounding transformer reduces the PCC zero sequence") {
    const PlantModel without = build_plant(config(Connection::y_yg, false), pre_step_load());
    const PlantModel with = build_plant(config(Connection::y_yg, true), pre_step_load());
    const double v0_without = std::abs(fortescue(nodal_pcc_voltage(without, kBalanced)).zero);
    const double v0_with = std::abs(fortescue(nodal_pcc_voltage(with, kBalanced)).zero);
    CHECK(std::abs(fortescue(steady_state_phasors(without, kBalanced).v_pcc).zero) == Approx(v0_without).epsilon(1e-4));
    CHECK(std::abs(fortescue(steady_state_phasors(with, kBalanced).v_pcc).zero) == Approx(v0_with).epsilon(1e-4));
    // Without a GT the grounded loads bound the neutral shift, so the
    // reduction is about 10x rather than the 0.328/113 impedance ratio.
    CHECK(v0_without / v0_with == Approx(10.02).margin(0.05));
    CHECK(v0_without == Approx(0.593).margin(1e-3));
}

TEST_CASE("steady-state solution is linear in the source") {
    std::mt19937_64 rng(47);
    std::normal_distribution<double> g;
    auto rnd = [&] { return PhasorSet{{g(rng), g(rng)}, {g(rng), g(rng)}, {g(rng), g(rng)}}; };
    for (const PlantConfig& cfg : all_configs()) {
        const PlantModel m = build_plant(cfg, pre_step_load());
        for (int k = 0; k < 10; ++k) {
            const PhasorSet a = rnd(), b = rnd();
            const auto sa = steady_state_phasors(m, a);
            const auto sb = steady_state_phasors(m, b);
            const auto sab = steady_state_phasors(m, {a.a + b.a, a.b + b.b, a.c + b.c});
            CHECK(std::abs(sab.i_pcc.a - (sa.i_pcc.a + sb.i_pcc.a)) < 1e-9);
            CHECK(std::abs(sab.v_pcc.b - (sa.v_pcc.b + sb.v_pcc.b)) < 1e-9);
            // halving the source halves every current
            const auto half = steady_state_phasors(m, {0.5 * a.a, 0.5 * a.b, 0.5 * a.c});
            CHECK(std::abs(half.i_pcc.c - 0.5 * sa.i_pcc.c) < 1e-9);
        }
    }
}

TEST_CASE("load models") {
    const PlantConfig cfg;
    const double p = 2.0e6 / 3.0;
    const PlantModel m = build_plant(cfg, {{-0.4 * p, 0.2 * p, -0.1 * p}});
    CHECK(m.conductance()[0] == 0.0);
    CHECK(m.conductance()[1] == Approx(0.2));
    CHECK(m.injection()[0] == Approx(0.4));
    CHECK(m.injection()[2] == Approx(0.1));
    const ThreePhase i = m.injection_current(0.0);
    CHECK(i.a == Approx(0.4));
    CHECK(i.c == Approx(0.1 * std::cos(kTwoPi / 3.0)));

    // at a unit voltage in phase with the reference the phase exports its set-point
    const Complex i_load_a = -m.injection()[0];
    CHECK((Complex(1.0, 0.0) * std::conj(i_load_a)).real() == Approx(-0.4));

    CHECK_THROWS_AS(build_plant(cfg, {{std::nan(""), 0.0, 0.0}}), ConfigError);
}

TEST_CASE("apply_load_step") {
    const PlantConfig cfg;
    const PlantModel m = build_plant(cfg, pre_step_load());
    SECTION("identical load leaves the model unchanged") {
        const PlantModel same = apply_load_step(m, pre_step_load());
        CHECK(same.phi() == m.phi());
        CHECK(same.gamma() == m.gamma());
    }
    SECTION("state is carried across the step") {
        PlantState s = m.zero_state();
        const double dt = cfg.dt, w = cfg.bases.omega();
        for (int k = 0; k < 2400; ++k) {
            s = plant_step(m, s, balanced(w * k * dt), {w * k * dt, w}, dt).state;
        }
        const PlantModel next = apply_load_step(m, {});
        CHECK(next.load() == LoadSpec{});
        const auto a = m.measure(s);
        const auto b = next.measure(s);
        CHECK(a.i_filter == b.i_filter);
        CHECK(a.v_cap == b.v_cap);
        CHECK(a.i_pcc == b.i_pcc);
        CHECK_FALSE(a.v_pcc == b.v_pcc);
    }
    SECTION("stepping to no load returns to the balanced no-load value") {
        const PlantModel none = apply_load_step(m, {});
        const Settled s = run_balanced(none, 300);
        const auto seq = fortescue(s.v_pcc);
        const auto ref = fortescue(
            steady_state_phasors(build_plant(cfg, {}), {1.0, std::polar(1.0, -kTwoPi / 3.0), std::polar(1.0, kTwoPi / 3.0)})
                .v_pcc);
        CHECK(std::abs(seq.pos - ref.pos) < 1e-4);
        CHECK(std::abs(seq.neg) < 1e-6);
        CHECK(std::abs(seq.zero) < 1e-6);
    }
}

TEST_CASE("blended load lies between its end points") {
    const PlantConfig cfg;
    const PlantModel a = build_plant(cfg, pre_step_load());
    const PlantModel b = build_plant(cfg, {{-0.4e6, 0.2e6, 0.0}});
    const PlantModel mid = PlantModel::blend(a, b, 0.5);
    for (int k = 0; k < 3; ++k) {
        CHECK(mid.conductance()[k] == Approx(0.5 * (a.conductance()[k] + b.conductance()[k])));
        CHECK(mid.injection()[k] == Approx(0.5 * (a.injection()[k] + b.injection()[k])));
    }
    CHECK(PlantModel::blend(a, b, 1.0).phi() == b.phi());
    CHECK_THROWS_AS(PlantModel::blend(a, b, 1.5), ConfigError);
}
