#pragma once

#include "mgsim/sequence.hpp"

#include <cmath>

namespace mgsim {

/// Per-unit bases of the simulated system. Voltages and currents are peak
/// phase quantities, so a balanced set of unit amplitude at unit current
/// carries S_base. The inverter side is referred through the ideal
/// transformer ratio and shares the per-unit system.
struct Bases {
    double frequency_hz = 60.0;
    double s_base_va = 2.0e6;
    double v_ll_pcc_v = 4160.0;
    double v_ll_inverter_v = 480.0;

    [[nodiscard]] double omega() const noexcept { return kTwoPi * frequency_hz; }

    [[nodiscard]] double v_peak_pcc() const noexcept { return v_ll_pcc_v * std::sqrt(2.0 / 3.0); }
    [[nodiscard]] double v_peak_inverter() const noexcept {
        return v_ll_inverter_v * std::sqrt(2.0 / 3.0);
    }
    [[nodiscard]] double i_peak_pcc() const noexcept {
        return 2.0 * s_base_va / (3.0 * v_peak_pcc());
    }
    [[nodiscard]] double i_peak_inverter() const noexcept {
        return 2.0 * s_base_va / (3.0 * v_peak_inverter());
    }
    [[nodiscard]] double z_pcc_ohm() const noexcept { return v_ll_pcc_v * v_ll_pcc_v / s_base_va; }
    [[nodiscard]] double z_inverter_ohm() const noexcept {
        return v_ll_inverter_v * v_ll_inverter_v / s_base_va;
    }
    /// Rated active power of one phase.
    [[nodiscard]] double p_phase_rated_w() const noexcept { return s_base_va / 3.0; }

    friend bool operator==(const Bases&, const Bases&) = default;
};

}  // namespace mgsim
