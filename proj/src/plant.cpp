#include "mgsim/plant.hpp"

#include "mgsim/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

namespace mgsim {

namespace {

Eigen::Matrix3cd fortescue_matrix() {
    const Complex a = kFortescueA;
    Eigen::Matrix3cd m;
    m << 1.0, 1.0, 1.0,
         1.0, a * a, a,
         1.0, a, a * a;
    return m;
}

void require_positive(double v, const std::string& what) {
    if (!std::isfinite(v) || !(v > 0.0)) {
        throw ConfigError(what + " must be positive and finite (got " + std::to_string(v) + ")");
    }
}

void require_passive(const Complex& z, const std::string& what) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || z.real() < 0.0 || !(z.imag() > 0.0)) {
        throw ConfigError(what + " needs a non-negative resistance and a positive reactance");
    }
}

Eigen::Matrix3d diag3(const std::array<double, 3>& d) {
    return Eigen::Vector3d(d[0], d[1], d[2]).asDiagonal();
}

ThreePhase to_three(const Eigen::Vector3d& v) {
    return {v(0), v(1), v(2)};
}

}  // namespace

Eigen::Matrix3cd seq_to_phase_complex(const SequenceImpedance& z) {
    const Eigen::Matrix3cd a = fortescue_matrix();
    Eigen::Matrix3cd d = Eigen::Matrix3cd::Zero();
    d(0, 0) = z.z0;
    d(1, 1) = z.z1;
    d(2, 2) = z.z2;
    return a * d * a.inverse();
}

PhaseMatrix seq_to_phase(const SequenceImpedance& z, double omega) {
    if (std::abs(z.z1 - z.z2) > 1e-12 * std::max(1.0, std::abs(z.z1))) {
        throw ConfigError("phase realization needs equal positive and negative sequence impedances");
    }
    // Symmetric circulant: self = (z0 + 2 z1)/3, mutual = (z0 - z1)/3.
    const Complex self = (z.z0 + 2.0 * z.z1) / 3.0;
    const Complex mutual = (z.z0 - z.z1) / 3.0;
    PhaseMatrix out;
    out.r.setConstant(mutual.real());
    out.r.diagonal().setConstant(self.real());
    out.l.setConstant(mutual.imag() / omega);
    out.l.diagonal().setConstant(self.imag() / omega);
    return out;
}

NetworkElements network_elements(const PlantConfig& cfg) {
    const Bases& b = cfg.bases;
    const TransformerConfig& t = cfg.transformer;
    require_positive(b.frequency_hz, "frequency_hz");
    require_positive(b.s_base_va, "s_base_va");
    require_positive(b.v_ll_pcc_v, "v_pcc_ll_v");
    require_positive(b.v_ll_inverter_v, "v_inverter_ll_v");
    require_positive(cfg.filter.lf_henry, "lf_henry");
    require_positive(cfg.filter.cf_farad, "cf_farad");
    require_positive(cfg.filter.rf_ohm, "rf_ohm");
    require_positive(t.s_rated_va, "s_rated_va");
    require_positive(t.zm0_scale, "zm0_scale");
    require_positive(t.z_open_pu, "z_open_pu");
    require_positive(cfg.pcc_bleed_pu, "pcc_bleed_pu");
    if (!std::isfinite(cfg.load_ramp_s) || cfg.load_ramp_s < 0.0) {
        throw ConfigError("load_ramp_s must be non-negative and finite");
    }
    require_passive(t.z1_pu, "primary winding impedance");
    require_passive(t.z2_pu, "secondary winding impedance");
    require_passive(t.zm_pu, "magnetizing impedance");
    if (t.zn_ohm.real() < 0.0 || t.zn_ohm.imag() < 0.0) {
        throw ConfigError("neutral grounding impedance must be passive");
    }

    const double w = b.omega();
    const double z_inv = b.z_inverter_ohm();
    const double to_sys = b.s_base_va / t.s_rated_va;

    NetworkElements e;
    e.filter_z = Complex(cfg.filter.rf_ohm, w * cfg.filter.lf_henry) / z_inv;
    e.filter_b = Complex(0.0, w * cfg.filter.cf_farad * z_inv);

    const Complex windings = (t.z1_pu + t.z2_pu) * to_sys;
    const Complex zm = t.zm_pu * to_sys;
    const Complex zn = t.zn_ohm / b.z_pcc_ohm();

    // A three-wire inverter side carries no zero-sequence current.
    e.series = {Complex(windings.real(), t.z_open_pu), windings, windings};

    const Complex z0_shunt = t.connection == Connection::y_yg ? zm * t.zm0_scale + 3.0 * zn
                                                               : windings + 3.0 * zn;
    e.zero_path = {z0_shunt, zm, zm};

    if (t.grounding_transformer) {
        require_positive(t.gt_s_rated_va, "gt_s_rated_va");
        require_positive(t.gt_z0_pu, "gt_z0_pu");
        require_positive(t.gt_x_over_r, "gt_x_over_r");
        require_passive(t.gt_zm_pu, "GT magnetizing impedance");
        const double gt_to_sys = b.s_base_va / t.gt_s_rated_va;
        const double mag = t.gt_z0_pu * gt_to_sys;
        const double r = mag / std::sqrt(1.0 + t.gt_x_over_r * t.gt_x_over_r);
        const Complex gt_zm = t.gt_zm_pu * gt_to_sys;
        e.grounding = SequenceImpedance{Complex(r, r * t.gt_x_over_r), gt_zm, gt_zm};
    }
    return e;
}

PlantModel::PlantModel(const PlantConfig& cfg, const LoadSpec& load)
    : cfg_(cfg), load_(load), elements_(network_elements(cfg)) {
    const double p_rated = cfg.bases.p_phase_rated_w();
    for (int k = 0; k < 3; ++k) {
        const double p = load.p_w[k];
        if (!std::isfinite(p)) {
            throw ConfigError("load power must be finite");
        }
        g_[k] = p > 0.0 ? p / p_rated : 0.0;
        inj_[k] = p < 0.0 ? -p / p_rated : 0.0;
    }
    assemble();
}

PlantModel::PlantModel(const PlantConfig& cfg, const LoadSpec& load, const std::array<double, 3>& g,
                       const std::array<double, 3>& inj)
    : cfg_(cfg), load_(load), elements_(network_elements(cfg)), g_(g), inj_(inj) {
    assemble();
}

PlantModel PlantModel::blend(const PlantModel& from, const PlantModel& to, double f) {
    if (!(f >= 0.0 && f <= 1.0)) {
        throw ConfigError("load blend weight must lie in [0, 1]");
    }
    std::array<double, 3> g{};
    std::array<double, 3> inj{};
    for (int k = 0; k < 3; ++k) {
        g[k] = from.g_[k] + f * (to.g_[k] - from.g_[k]);
        inj[k] = from.inj_[k] + f * (to.inj_[k] - from.inj_[k]);
    }
    return PlantModel(to.cfg_, to.load_, g, inj);
}

void PlantModel::assemble() {
    const PlantConfig& cfg = cfg_;
    require_positive(cfg.dt, "dt_s");
    const double w = cfg.bases.omega();

    const bool gt = elements_.grounding.has_value();
    const int n = gt ? 15 : 12;
    const double lf = elements_.filter_z.imag() / w;
    const double rf = elements_.filter_z.real();
    const double cf = elements_.filter_b.imag() / w;
    const PhaseMatrix series = seq_to_phase(elements_.series, w);
    const PhaseMatrix shunt = seq_to_phase(elements_.zero_path, w);
    const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();

    pcc_m_ = diag3({1.0 / (g_[0] + cfg.pcc_bleed_pu), 1.0 / (g_[1] + cfg.pcc_bleed_pu),
                    1.0 / (g_[2] + cfg.pcc_bleed_pu)});

    a_ = Eigen::MatrixXd::Zero(n, n);
    b_ = Eigen::MatrixXd::Zero(n, 6);
    w_ = Eigen::MatrixXd::Zero(n, n);

    // Filter inductor: Lf di/dt = v_inv - v_c - rf i
    a_.block<3, 3>(kFilterCurrent, kFilterCurrent) = -(rf / lf) * i3;
    a_.block<3, 3>(kFilterCurrent, kCapVoltage) = -(1.0 / lf) * i3;
    b_.block<3, 3>(kFilterCurrent, 0) = (1.0 / lf) * i3;
    // Capacitor: Cf dv/dt = i_f - i_t
    a_.block<3, 3>(kCapVoltage, kFilterCurrent) = (1.0 / cf) * i3;
    a_.block<3, 3>(kCapVoltage, kSeriesCurrent) = -(1.0 / cf) * i3;

    // PCC node voltage = M (i_t - i_m - i_g + i_inj)
    const Eigen::Matrix3d lt_inv = series.l.inverse();
    const Eigen::Matrix3d lm_inv = shunt.l.inverse();
    a_.block<3, 3>(kSeriesCurrent, kCapVoltage) = lt_inv;
    a_.block<3, 3>(kSeriesCurrent, kSeriesCurrent) = -lt_inv * (series.r + pcc_m_);
    a_.block<3, 3>(kSeriesCurrent, kZeroPathCurrent) = lt_inv * pcc_m_;
    b_.block<3, 3>(kSeriesCurrent, 3) = -lt_inv * pcc_m_;

    a_.block<3, 3>(kZeroPathCurrent, kSeriesCurrent) = lm_inv * pcc_m_;
    a_.block<3, 3>(kZeroPathCurrent, kZeroPathCurrent) = -lm_inv * (shunt.r + pcc_m_);
    b_.block<3, 3>(kZeroPathCurrent, 3) = lm_inv * pcc_m_;

    w_.block<3, 3>(kFilterCurrent, kFilterCurrent) = lf * i3;
    w_.block<3, 3>(kCapVoltage, kCapVoltage) = cf * i3;
    w_.block<3, 3>(kSeriesCurrent, kSeriesCurrent) = series.l;
    w_.block<3, 3>(kZeroPathCurrent, kZeroPathCurrent) = shunt.l;

    if (gt) {
        const PhaseMatrix grounding = seq_to_phase(*elements_.grounding, w);
        const Eigen::Matrix3d lg_inv = grounding.l.inverse();
        a_.block<3, 3>(kSeriesCurrent, kGroundingCurrent) = lt_inv * pcc_m_;
        a_.block<3, 3>(kZeroPathCurrent, kGroundingCurrent) = -lm_inv * pcc_m_;
        a_.block<3, 3>(kGroundingCurrent, kSeriesCurrent) = lg_inv * pcc_m_;
        a_.block<3, 3>(kGroundingCurrent, kZeroPathCurrent) = -lg_inv * pcc_m_;
        a_.block<3, 3>(kGroundingCurrent, kGroundingCurrent) = -lg_inv * (grounding.r + pcc_m_);
        b_.block<3, 3>(kGroundingCurrent, 3) = lg_inv * pcc_m_;
        w_.block<3, 3>(kGroundingCurrent, kGroundingCurrent) = grounding.l;
    }

    // Exact discretization through the augmented exponential: the inverter
    // voltage is held, the injections ramp at a constant rate r over the step.
    // The PCC node is nearly algebraic when a phase carries only an
    // injection, so a held injection would leave a large step-end mismatch.
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 9, n + 9);
    aug.block(0, 0, n, n) = a_ * cfg.dt;
    aug.block(0, n, n, 6) = b_ * cfg.dt;
    aug.block(n + 3, n + 6, 3, 3) = Eigen::Matrix3d::Identity() * cfg.dt;
    const Eigen::MatrixXd e = aug.exp();
    phi_ = e.block(0, 0, n, n);
    gamma_ = e.block(0, n, n, 6);
    gamma_ramp_ = e.block(0, n + 6, n, 3);
    if (!phi_.allFinite() || !gamma_.allFinite() || !gamma_ramp_.allFinite()) {
        throw ConfigError("plant discretization produced non-finite matrices");
    }
}

ThreePhase PlantModel::injection_current(double theta) const noexcept {
    return {inj_[0] * std::cos(theta), inj_[1] * std::cos(theta - kTwoPi / 3.0),
            inj_[2] * std::cos(theta + kTwoPi / 3.0)};
}

PlantMeasurements PlantModel::measure(const PlantState& s) const {
    const auto& x = s.x;
    const ThreePhase& inj = s.injection;
    const Eigen::Vector3d i_inj(inj.a, inj.b, inj.c);
    Eigen::Vector3d net = x.segment<3>(kSeriesCurrent) - x.segment<3>(kZeroPathCurrent) + i_inj;
    if (has_grounding_transformer()) {
        net -= x.segment<3>(kGroundingCurrent);
    }
    const Eigen::Vector3d v_pcc = pcc_m_ * net;
    const Eigen::Vector3d i_load = diag3(g_) * v_pcc - i_inj;
    return {to_three(x.segment<3>(kFilterCurrent)), to_three(x.segment<3>(kCapVoltage)), to_three(v_pcc),
            to_three(x.segment<3>(kSeriesCurrent)), to_three(i_load)};
}

PlantState PlantModel::zero_state() const {
    return {Eigen::VectorXd::Zero(state_size()), injection_current(0.0), 0};
}

double PlantModel::stored_energy(const PlantState& s) const {
    return 0.5 * s.x.dot(w_ * s.x);
}

PlantModel build_plant(const PlantConfig& cfg, const LoadSpec& load) {
    return PlantModel(cfg, load);
}

PlantModel apply_load_step(const PlantModel& model, const LoadSpec& new_load) {
    if (new_load == model.load()) {
        return model;
    }
    return PlantModel(model.config(), new_load);
}

PlantStepResult plant_step(const PlantModel& model, const PlantState& state, const ThreePhase& v_inv,
                           const InjectionPhase& inj, double dt) {
    if (std::abs(dt - model.config().dt) > 1e-15 * std::max(1.0, dt)) {
        throw ConfigError("plant step size differs from the discretized model step");
    }
    const ThreePhase& i0 = state.injection;
    const ThreePhase i1 = model.injection_current(inj.theta + inj.omega * dt);
    Eigen::Matrix<double, 6, 1> u;
    u << v_inv.a, v_inv.b, v_inv.c, i0.a, i0.b, i0.c;
    const Eigen::Vector3d rate((i1.a - i0.a) / dt, (i1.b - i0.b) / dt, (i1.c - i0.c) / dt);

    PlantStepResult out;
    out.state.x = model.phi() * state.x + model.gamma() * u + model.gamma_ramp() * rate;
    out.state.injection = i1;
    out.state.step = state.step + 1;
    if (!out.state.x.allFinite()) {
        throw DivergenceError("plant state became non-finite at step " + std::to_string(out.state.step),
                              out.state.step, static_cast<double>(out.state.step) * dt);
    }
    out.measurements = model.measure(out.state);
    return out;
}

namespace {

Eigen::VectorXcd solve_phasor(const PlantModel& model, const Eigen::Matrix<Complex, 6, 1>& u) {
    const double w = model.config().bases.omega();
    const int n = model.state_size();
    Eigen::MatrixXcd m = Complex(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - model.a().cast<Complex>();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(m);
    if (!lu.isInvertible()) {
        throw DegenerateInputError("network is singular at the fundamental frequency");
    }
    return lu.solve(model.b().cast<Complex>() * u);
}

PhasorSet phasor_segment(const Eigen::VectorXcd& x, int offset) {
    return {x(offset), x(offset + 1), x(offset + 2)};
}

}  // namespace

Complex thevenin_z0_at_pcc(const PlantModel& model) {
    const PlantModel unloaded(model.config(), LoadSpec{});
    // A zero-sequence injection current phasor I0 into every phase of the PCC.
    const Complex i0{1.0e-3, 0.0};
    Eigen::Matrix<Complex, 6, 1> u;
    u << 0.0, 0.0, 0.0, i0, i0, i0;
    const Eigen::VectorXcd x = solve_phasor(unloaded, u);

    Eigen::Vector3cd net = x.segment<3>(PlantModel::kSeriesCurrent) - x.segment<3>(PlantModel::kZeroPathCurrent);
    if (unloaded.has_grounding_transformer()) {
        net -= x.segment<3>(PlantModel::kGroundingCurrent);
    }
    net.array() += i0;
    const double g = unloaded.config().pcc_bleed_pu;
    const Complex v0 = net.sum() / (3.0 * g);
    return v0 / i0;
}

PhasorSolution steady_state_phasors(const PlantModel& model, const PhasorSet& v_inv) {
    const std::array<Complex, 3> rot{Complex(1.0, 0.0), std::polar(1.0, -kTwoPi / 3.0),
                                     std::polar(1.0, kTwoPi / 3.0)};
    Eigen::Matrix<Complex, 6, 1> u;
    u << v_inv.a, v_inv.b, v_inv.c, model.injection()[0] * rot[0], model.injection()[1] * rot[1],
        model.injection()[2] * rot[2];
    const Eigen::VectorXcd x = solve_phasor(model, u);

    Eigen::Vector3cd net = x.segment<3>(PlantModel::kSeriesCurrent) - x.segment<3>(PlantModel::kZeroPathCurrent);
    if (model.has_grounding_transformer()) {
        net -= x.segment<3>(PlantModel::kGroundingCurrent);
    }
    for (int k = 0; k < 3; ++k) {
        net(k) += u(3 + k);
        net(k) /= model.conductance()[k] + model.config().pcc_bleed_pu;
    }
    return {{net(0), net(1), net(2)}, phasor_segment(x, PlantModel::kSeriesCurrent),
            phasor_segment(x, PlantModel::kCapVoltage)};
}

}  // namespace mgsim
