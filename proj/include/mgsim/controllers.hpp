#pragma once

// Discrete control blocks and the two inner-loop schemes.
//
// Resonators and notch filters are Tustin-discretized with prewarping at
// their centre frequency, so the resonant peak and the notch zero sit
// exactly on the design frequency at any step size.

#include "mgsim/sequence.hpp"

#include <array>
#include <optional>

namespace mgsim {

/// Second-order IIR section, direct form II transposed, a0 normalised to 1.
struct Biquad {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
    double s1 = 0.0, s2 = 0.0;

    double step(double x) noexcept {
        const double y = b0 * x + s1;
        s1 = b1 * x - a1 * y + s2;
        s2 = b2 * x - a2 * y;
        return y;
    }

    void reset() noexcept { s1 = s2 = 0.0; }

    /// H(e^{j omega dt}).
    [[nodiscard]] Complex response(double omega, double dt) const noexcept;
};

/// kp + kr*s/(s^2 + w0^2).
class PrController {
public:
    PrController() = default;
    PrController(double kp, double kr, double omega0, double dt);

    double step(double error) noexcept { return kp_ * error + resonator_.step(error); }
    void reset() noexcept { resonator_.reset(); }

    [[nodiscard]] Complex response(double omega) const noexcept;
    [[nodiscard]] const Biquad& resonator() const noexcept { return resonator_; }
    [[nodiscard]] double kp() const noexcept { return kp_; }

private:
    double kp_ = 0.0;
    double dt_ = 1.0;
    Biquad resonator_;
};

/// kp + ki/s with a rectangular (backward Euler) integrator. With a clamp the
/// output is saturated and the integrator holds while the error pushes
/// further into saturation.
class PiController {
public:
    PiController() = default;
    PiController(double kp, double ki, double dt, std::optional<double> clamp = std::nullopt);

    double step(double error) noexcept;
    void reset() noexcept { integral_ = 0.0; }
    [[nodiscard]] double integral() const noexcept { return integral_; }

private:
    double kp_ = 0.0;
    double ki_ = 0.0;
    double dt_ = 1.0;
    std::optional<double> clamp_;
    double integral_ = 0.0;
};

/// (s^2 + wn^2)/(s^2 + (wn/Q)s + wn^2).
class NotchFilter {
public:
    NotchFilter() = default;
    NotchFilter(double omega_n, double q, double dt);

    double step(double x) noexcept { return section_.step(x); }
    void reset() noexcept { section_.reset(); }
    [[nodiscard]] Complex response(double omega) const noexcept { return section_.response(omega, dt_); }

private:
    double dt_ = 1.0;
    Biquad section_;
};

/// Droop and secondary restoration. Powers are in watts and vars, angles in
/// radians; the voltage magnitude reference is per-unit.
struct OuterLoopParams {
    double omega_nom = kTwoPi * 60.0;
    double v_nom = 1.0;
    double np = 1.0e-7;  ///< rad/s per W
    double nq = 1.0e-7;  ///< V (line-line rms at the PCC) per var
    double power_filter_hz = 10.0;
    double k2pf = 0.3;
    double k2if = 10.0;
    double k2pv = 0.001;
    double k2iv = 0.5;
    double s_base_va = 2.0e6;
    double v_ll_base_v = 4160.0;
    double dt = 1.0 / 12000.0;
};

struct OuterLoopOutput {
    double theta = 0.0;  ///< reference angle for this step, in [0, 2pi)
    double omega = 0.0;  ///< rad/s
    double v_mag = 1.0;  ///< per-unit
};

class OuterLoop {
public:
    explicit OuterLoop(const OuterLoopParams& p);

    /// Advances one step. v_pos_measured is the PCC positive-sequence
    /// magnitude; pass nullopt until a full measurement cycle exists.
    OuterLoopOutput step(const ThreePhase& v_pcc, const ThreePhase& i_out,
                         std::optional<double> v_pos_measured);

    /// P and Q from alpha-beta quantities, P = 3/2 (va ia + vb ib) in SI.
    [[nodiscard]] std::pair<double, double> instantaneous_power(const ThreePhase& v_pcc,
                                                                const ThreePhase& i_out) const;

    [[nodiscard]] double droop_omega(double p_w) const noexcept { return p_.omega_nom - p_.np * p_w; }
    [[nodiscard]] double theta() const noexcept { return theta_; }
    [[nodiscard]] double filtered_p() const noexcept { return p_filt_; }
    [[nodiscard]] double filtered_q() const noexcept { return q_filt_; }

private:
    OuterLoopParams p_;
    double lpf_alpha_;
    double p_filt_ = 0.0;
    double q_filt_ = 0.0;
    PiController freq_pi_;
    PiController volt_pi_;
    double theta_ = 0.0;
    double omega_prev_;
    double v_pk_base_;
    double i_pk_base_;
};

/// Inner-loop parameters on the per-unit system. Gains follow the SI
/// convention of the inverter side (A/V for voltage loops, V/A for current
/// loops) and are converted with the inverter impedance base.
struct InnerLoopParams {
    double omega0 = kTwoPi * 60.0;
    double dt = 1.0 / 12000.0;
    double kpv = 0.0, krv = 0.0;   ///< voltage PR, per-unit
    double kpi = 0.0, kri = 0.0;   ///< current PR, per-unit
    double rrf_kpv = 0.0, rrf_kiv = 0.0;
    double rrf_kpi = 0.0, rrf_kii = 0.0;
    double notch_q = 1.0;
    double c_filter = 0.0;  ///< per-unit capacitance, seconds
    double l_filter = 0.0;  ///< per-unit inductance, seconds
    double current_limit = 1.2;
    double v_ceiling = 1.15;
    bool feedforward = true;
};

/// Measurements consumed by either inner loop, per-unit phase quantities.
struct InnerMeasurements {
    ThreePhase v_reg;     ///< regulated voltage (PCC or filter capacitor)
    ThreePhase v_cap;     ///< filter capacitor voltage
    ThreePhase i_filter;  ///< filter inductor current
    ThreePhase i_out;     ///< current leaving the filter towards the PCC
};

[[nodiscard]] AlphaBeta limit_magnitude(const AlphaBeta& v, double limit) noexcept;

/// Stationary-frame scheme: voltage PR pair cascaded with a current PR pair.
class SrfInnerLoop {
public:
    explicit SrfInnerLoop(const InnerLoopParams& p);

    AlphaBeta step(const AlphaBeta& v_ref, const InnerMeasurements& m);

    [[nodiscard]] const AlphaBeta& last_current_reference() const noexcept { return i_ref_; }

private:
    InnerLoopParams p_;
    PrController v_alpha_, v_beta_, i_alpha_, i_beta_;
    AlphaBeta i_ref_{};
};

/// Dual rotating-frame scheme: positive frame at +theta and negative frame at
/// -theta, each with notch-filtered measurements and PI voltage/current loops.
/// With feedforward enabled only the inductor cross-coupling is compensated.
class RrfInnerLoop {
public:
    explicit RrfInnerLoop(const InnerLoopParams& p);

    AlphaBeta step(double v_ref_d, double theta, const InnerMeasurements& m);

    struct FrameSignals {
        DqPair v_raw, v_filtered;
    };
    [[nodiscard]] const FrameSignals& last_positive() const noexcept { return pos_.last; }
    [[nodiscard]] const FrameSignals& last_negative() const noexcept { return neg_.last; }

private:
    struct Frame {
        double sigma = 1.0;
        std::array<NotchFilter, 4> notch;  ///< d/q of regulated voltage and filter current
        PiController v_d, v_q, i_d, i_q;
        FrameSignals last;

        AlphaBeta step(const InnerLoopParams& p, const DqPair& v_ref, double theta,
                       const std::array<AlphaBeta, 2>& meas);
    };

    InnerLoopParams p_;
    Frame pos_;
    Frame neg_;
};

}  // namespace mgsim
