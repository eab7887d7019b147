#include "mgsim/controllers.hpp"

#include "mgsim/errors.hpp"

#include <cmath>

namespace mgsim {

namespace {

double prewarp(double omega, double dt) {
    return omega / std::tan(0.5 * omega * dt);
}

double wrap_angle(double theta) {
    theta = std::fmod(theta, kTwoPi);
    return theta < 0.0 ? theta + kTwoPi : theta;
}

}  // namespace

Complex Biquad::response(double omega, double dt) const noexcept {
    const Complex zi = std::polar(1.0, -omega * dt);
    const Complex zi2 = zi * zi;
    return (b0 + b1 * zi + b2 * zi2) / (1.0 + a1 * zi + a2 * zi2);
}

PrController::PrController(double kp, double kr, double omega0, double dt) : kp_(kp), dt_(dt) {
    if (!(omega0 > 0.0) || !(dt > 0.0) || omega0 * dt >= std::numbers::pi) {
        throw ConfigError("resonant frequency must be positive and below Nyquist");
    }
    const double k = prewarp(omega0, dt);
    const double w2 = omega0 * omega0;
    const double a0 = k * k + w2;
    resonator_.b0 = kr * k / a0;
    resonator_.b1 = 0.0;
    resonator_.b2 = -kr * k / a0;
    resonator_.a1 = 2.0 * (w2 - k * k) / a0;
    resonator_.a2 = 1.0;
}

Complex PrController::response(double omega) const noexcept {
    return kp_ + resonator_.response(omega, dt_);
}

PiController::PiController(double kp, double ki, double dt, std::optional<double> clamp)
    : kp_(kp), ki_(ki), dt_(dt), clamp_(clamp) {
    if (clamp_ && !(*clamp_ > 0.0)) {
        throw ConfigError("PI clamp must be positive");
    }
}

double PiController::step(double error) noexcept {
    const double candidate = integral_ + ki_ * error * dt_;
    double out = kp_ * error + candidate;
    if (clamp_) {
        const double c = *clamp_;
        if (out > c) {
            if (error <= 0.0) {
                integral_ = candidate;
            }
            return c;
        }
        if (out < -c) {
            if (error >= 0.0) {
                integral_ = candidate;
            }
            return -c;
        }
    }
    integral_ = candidate;
    return out;
}

NotchFilter::NotchFilter(double omega_n, double q, double dt) : dt_(dt) {
    if (!(omega_n > 0.0) || !(q > 0.0) || !(dt > 0.0) || omega_n * dt >= std::numbers::pi) {
        throw ConfigError("notch frequency must be positive and below Nyquist, Q positive");
    }
    const double k = prewarp(omega_n, dt);
    const double w2 = omega_n * omega_n;
    const double k2 = k * k;
    const double d0 = k2 + omega_n * k / q + w2;
    section_.b0 = (k2 + w2) / d0;
    section_.b1 = 2.0 * (w2 - k2) / d0;
    section_.b2 = (k2 + w2) / d0;
    section_.a1 = 2.0 * (w2 - k2) / d0;
    section_.a2 = (k2 - omega_n * k / q + w2) / d0;
}

OuterLoop::OuterLoop(const OuterLoopParams& p)
    : p_(p),
      lpf_alpha_(1.0 - std::exp(-kTwoPi * p.power_filter_hz * p.dt)),
      freq_pi_(p.k2pf, p.k2if, p.dt),
      volt_pi_(p.k2pv, p.k2iv, p.dt),
      omega_prev_(p.omega_nom),
      v_pk_base_(p.v_ll_base_v * std::sqrt(2.0 / 3.0)),
      i_pk_base_(2.0 * p.s_base_va / (3.0 * p.v_ll_base_v * std::sqrt(2.0 / 3.0))) {
    if (!(p.omega_nom > 0.0) || !(p.v_nom > 0.0) || !(p.dt > 0.0) || !(p.power_filter_hz > 0.0)) {
        throw ConfigError("outer loop needs positive nominal frequency, voltage, step and filter cutoff");
    }
}

std::pair<double, double> OuterLoop::instantaneous_power(const ThreePhase& v_pcc,
                                                         const ThreePhase& i_out) const {
    const AlphaBetaZero v = clarke(v_pcc);
    const AlphaBetaZero i = clarke(i_out);
    const double scale = 1.5 * v_pk_base_ * i_pk_base_;
    return {scale * (v.alpha * i.alpha + v.beta * i.beta), scale * (v.beta * i.alpha - v.alpha * i.beta)};
}

OuterLoopOutput OuterLoop::step(const ThreePhase& v_pcc, const ThreePhase& i_out,
                                std::optional<double> v_pos_measured) {
    const auto [p, q] = instantaneous_power(v_pcc, i_out);
    p_filt_ += lpf_alpha_ * (p - p_filt_);
    q_filt_ += lpf_alpha_ * (q - q_filt_);

    // The unit sets the frequency itself, so the measured frequency is the
    // one applied on the previous step.
    const double freq_correction = freq_pi_.step(p_.omega_nom - omega_prev_);
    const double omega = droop_omega(p_filt_) + freq_correction;

    const double volt_correction =
        volt_pi_.step(v_pos_measured ? p_.v_nom - *v_pos_measured : 0.0);
    const double droop_v = p_.nq * q_filt_ / p_.v_ll_base_v;
    const double v_mag = std::max(p_.v_nom - droop_v + volt_correction, 1e-3);

    OuterLoopOutput out{theta_, omega, v_mag};
    theta_ = wrap_angle(theta_ + omega * p_.dt);
    omega_prev_ = omega;
    return out;
}

AlphaBeta limit_magnitude(const AlphaBeta& v, double limit) noexcept {
    const double mag = std::hypot(v.alpha, v.beta);
    if (mag <= limit || mag == 0.0) {
        return v;
    }
    const double s = limit / mag;
    return {v.alpha * s, v.beta * s};
}

namespace {

AlphaBeta to_ab(const ThreePhase& x) {
    const AlphaBetaZero v = clarke(x);
    return {v.alpha, v.beta};
}

}  // namespace

SrfInnerLoop::SrfInnerLoop(const InnerLoopParams& p)
    : p_(p),
      v_alpha_(p.kpv, p.krv, p.omega0, p.dt),
      v_beta_(p.kpv, p.krv, p.omega0, p.dt),
      i_alpha_(p.kpi, p.kri, p.omega0, p.dt),
      i_beta_(p.kpi, p.kri, p.omega0, p.dt) {}

AlphaBeta SrfInnerLoop::step(const AlphaBeta& v_ref, const InnerMeasurements& m) {
    const AlphaBeta v = to_ab(m.v_reg);
    const AlphaBeta il = to_ab(m.i_filter);

    AlphaBeta i_ref{v_alpha_.step(v_ref.alpha - v.alpha), v_beta_.step(v_ref.beta - v.beta)};
    if (p_.feedforward) {
        const AlphaBeta io = to_ab(m.i_out);
        const double wc = p_.omega0 * p_.c_filter;
        i_ref.alpha += io.alpha - wc * v.beta;
        i_ref.beta += io.beta + wc * v.alpha;
    }
    i_ref_ = limit_magnitude(i_ref, p_.current_limit);

    AlphaBeta cmd{i_alpha_.step(i_ref_.alpha - il.alpha), i_beta_.step(i_ref_.beta - il.beta)};
    if (p_.feedforward) {
        const AlphaBeta vc = to_ab(m.v_cap);
        cmd.alpha += vc.alpha;
        cmd.beta += vc.beta;
    }
    return limit_magnitude(cmd, p_.v_ceiling);
}

RrfInnerLoop::RrfInnerLoop(const InnerLoopParams& p) : p_(p) {
    for (Frame* f : {&pos_, &neg_}) {
        for (auto& n : f->notch) {
            n = NotchFilter(2.0 * p.omega0, p.notch_q, p.dt);
        }
        f->v_d = PiController(p.rrf_kpv, p.rrf_kiv, p.dt);
        f->v_q = PiController(p.rrf_kpv, p.rrf_kiv, p.dt);
        f->i_d = PiController(p.rrf_kpi, p.rrf_kii, p.dt);
        f->i_q = PiController(p.rrf_kpi, p.rrf_kii, p.dt);
    }
    pos_.sigma = 1.0;
    neg_.sigma = -1.0;
}

AlphaBeta RrfInnerLoop::Frame::step(const InnerLoopParams& p, const DqPair& v_ref, double theta,
                                    const std::array<AlphaBeta, 2>& meas) {
    const double angle = sigma * theta;
    std::array<DqPair, 2> f{};
    for (std::size_t k = 0; k < meas.size(); ++k) {
        const DqPair raw = park(meas[k], angle);
        f[k] = {notch[2 * k].step(raw.d), notch[2 * k + 1].step(raw.q)};
        if (k == 0) {
            last.v_raw = raw;
        }
    }
    const DqPair& v = f[0];
    const DqPair& il = f[1];
    last.v_filtered = v;

    DqPair i_ref{v_d.step(v_ref.d - v.d), v_q.step(v_ref.q - v.q)};
    const AlphaBeta limited = limit_magnitude({i_ref.d, i_ref.q}, p.current_limit);

    DqPair cmd{i_d.step(limited.alpha - il.d), i_q.step(limited.beta - il.q)};
    if (p.feedforward) {
        // Only the inductor cross-coupling is decoupled. Feeding forward the
        // notch-filtered load current or capacitor voltage destabilizes the
        // cascade with a Q = 1 notch.
        const double wl = sigma * p.omega0 * p.l_filter;
        cmd.d -= wl * il.q;
        cmd.q += wl * il.d;
    }
    return inverse_park(cmd, angle);
}

AlphaBeta RrfInnerLoop::step(double v_ref_d, double theta, const InnerMeasurements& m) {
    const std::array<AlphaBeta, 2> meas{to_ab(m.v_reg), to_ab(m.i_filter)};
    const AlphaBeta p = pos_.step(p_, DqPair{v_ref_d, 0.0}, theta, meas);
    const AlphaBeta n = neg_.step(p_, DqPair{0.0, 0.0}, theta, meas);
    return limit_magnitude({p.alpha + n.alpha, p.beta + n.beta}, p_.v_ceiling);
}

}  // namespace mgsim
