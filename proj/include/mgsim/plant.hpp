#pragma once

// Phase-coordinate linear network of the battery inverter installation:
// averaged inverter source, LC filter, output transformer whose zero-sequence
// behaviour depends on the winding connection, optional grounding
// transformer, and the per-phase loads at the PCC.
//
// Everything is per-unit on the system bases (see Bases). Inductances and
// capacitances are stored as per-unit seconds, L = X/omega and C = B/omega.

#include "mgsim/sequence.hpp"
#include "mgsim/units.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>

namespace mgsim {

struct SequenceImpedance {
    Complex z0;
    Complex z1;
    Complex z2;
};

/// Real 3x3 resistance and inductance matrices of a coupled three-phase branch.
struct PhaseMatrix {
    Eigen::Matrix3d r;
    Eigen::Matrix3d l;  ///< per-unit seconds
};

/// Z_abc = A diag(z0, z1, z2) A^-1 with A the Fortescue matrix.
[[nodiscard]] Eigen::Matrix3cd seq_to_phase_complex(const SequenceImpedance& z);

/// Phase-domain realization split into R and L = X/omega. Requires z1 == z2
/// so the result is real.
[[nodiscard]] PhaseMatrix seq_to_phase(const SequenceImpedance& z, double omega);

enum class Connection { y_yg, delta_yg };

struct TransformerConfig {
    Connection connection = Connection::y_yg;
    bool grounding_transformer = true;
    double s_rated_va = 5.0e6;
    Complex z1_pu{0.0012, 0.03};  ///< primary winding, own base
    Complex z2_pu{0.0012, 0.03};  ///< secondary winding, own base
    Complex zm_pu{200.0, 200.0};  ///< magnetizing, own base
    double zm0_scale = 1.0;       ///< zero-sequence magnetizing = zm0_scale * zm
    Complex zn_ohm{0.0, 0.0};     ///< neutral grounding impedance, PCC side
    double z_open_pu = 1.0e6;     ///< zero-sequence reactance of the three-wire series path
    double gt_s_rated_va = 3.772e6;
    double gt_z0_pu = 0.6185;     ///< GT zero-sequence impedance magnitude, own base
    double gt_x_over_r = 10.0;
    Complex gt_zm_pu{200.0, 200.0};

    friend bool operator==(const TransformerConfig&, const TransformerConfig&) = default;
};

struct FilterConfig {
    double lf_henry = 350.0e-6;
    double cf_farad = 5000.0e-6;
    double rf_ohm = 0.002;

    friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

/// Per-phase active power set-points in watts at nominal voltage. Positive
/// values are wye-grounded conductances, negative values are current
/// injections in phase with the PCC reference angle.
struct LoadSpec {
    std::array<double, 3> p_w{0.0, 0.0, 0.0};

    friend bool operator==(const LoadSpec&, const LoadSpec&) = default;
};

struct PlantConfig {
    Bases bases;
    FilterConfig filter;
    TransformerConfig transformer;
    double pcc_bleed_pu = 1.0e-4;  ///< shunt conductance keeping the PCC node determined at no load
    double load_ramp_s = 1.0e-3;   ///< duration over which a scheduled load change is blended in
    double dt = 1.0 / 12000.0;

    friend bool operator==(const PlantConfig&, const PlantConfig&) = default;
};

/// Branch impedances of the assembled network on the system base.
struct NetworkElements {
    Complex filter_z;  ///< r_f + j X_f
    Complex filter_b;  ///< j B_f
    SequenceImpedance series;
    SequenceImpedance zero_path;
    std::optional<SequenceImpedance> grounding;
};

/// Evaluates network elements for a configuration. Throws ConfigError on
/// non-positive or non-finite element values.
[[nodiscard]] NetworkElements network_elements(const PlantConfig& cfg);

struct PlantMeasurements {
    ThreePhase i_filter;
    ThreePhase v_cap;
    ThreePhase v_pcc;
    ThreePhase i_pcc;   ///< transformer series-branch current at the PCC
    ThreePhase i_load;  ///< current drawn by the loads
};

struct PlantState {
    Eigen::VectorXd x;
    ThreePhase injection{};  ///< injected currents at the state's time instant
    long long step = 0;
};

/// Angle of the current injections: phase a is at theta, b and c lag by
/// 120 and 240 degrees.
struct InjectionPhase {
    double theta = 0.0;
    double omega = kTwoPi * 60.0;
};

/// Immutable linear model with its zero-order-hold discretization.
class PlantModel {
public:
    PlantModel(const PlantConfig& cfg, const LoadSpec& load);
    /// Network carrying the conductances and injections of `from` and `to`
    /// mixed linearly with weight f in [0, 1] on `to`. Used to spread a load
    /// change over a short transition. The load() of the result is `to`'s.
    [[nodiscard]] static PlantModel blend(const PlantModel& from, const PlantModel& to, double f);

    [[nodiscard]] const PlantConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const LoadSpec& load() const noexcept { return load_; }
    [[nodiscard]] const NetworkElements& elements() const noexcept { return elements_; }
    [[nodiscard]] int state_size() const noexcept { return static_cast<int>(a_.rows()); }
    [[nodiscard]] bool has_grounding_transformer() const noexcept { return elements_.grounding.has_value(); }

    [[nodiscard]] const Eigen::MatrixXd& a() const noexcept { return a_; }
    [[nodiscard]] const Eigen::MatrixXd& b() const noexcept { return b_; }
    [[nodiscard]] const Eigen::MatrixXd& phi() const noexcept { return phi_; }
    [[nodiscard]] const Eigen::MatrixXd& gamma() const noexcept { return gamma_; }
    /// Response to a unit ramp rate of the injected currents over one step.
    [[nodiscard]] const Eigen::MatrixXd& gamma_ramp() const noexcept { return gamma_ramp_; }
    /// Energy weighting: stored energy is 0.5 x' W x.
    [[nodiscard]] const Eigen::MatrixXd& energy_weight() const noexcept { return w_; }

    /// Per-phase load conductances and injection amplitudes, per-unit.
    [[nodiscard]] const std::array<double, 3>& conductance() const noexcept { return g_; }
    [[nodiscard]] const std::array<double, 3>& injection() const noexcept { return inj_; }

    [[nodiscard]] ThreePhase injection_current(double theta) const noexcept;
    [[nodiscard]] PlantMeasurements measure(const PlantState& s) const;
    /// All branches de-energized, injections at their theta = 0 values.
    [[nodiscard]] PlantState zero_state() const;
    [[nodiscard]] double stored_energy(const PlantState& s) const;

    // State layout.
    static constexpr int kFilterCurrent = 0;
    static constexpr int kCapVoltage = 3;
    static constexpr int kSeriesCurrent = 6;
    static constexpr int kZeroPathCurrent = 9;
    static constexpr int kGroundingCurrent = 12;

private:
    PlantModel(const PlantConfig& cfg, const LoadSpec& load, const std::array<double, 3>& g,
               const std::array<double, 3>& inj);
    void assemble();

    PlantConfig cfg_;
    LoadSpec load_;
    NetworkElements elements_;
    std::array<double, 3> g_{};
    std::array<double, 3> inj_{};
    Eigen::Matrix3d pcc_m_;  ///< v_pcc = pcc_m_ * (net current into the node)
    Eigen::MatrixXd a_, b_, phi_, gamma_, gamma_ramp_, w_;
};

[[nodiscard]] PlantModel build_plant(const PlantConfig& cfg, const LoadSpec& load);

/// Returns a model carrying the new load; the state vector is unaffected, so
/// swapping models between steps keeps all branch currents continuous.
[[nodiscard]] PlantModel apply_load_step(const PlantModel& model, const LoadSpec& new_load);

struct PlantStepResult {
    PlantState state;
    PlantMeasurements measurements;  ///< at the end of the step
};

/// Advances one step with the inverter voltage held over the step and the
/// injected currents ramping linearly from state.injection to their value at
/// inj.theta + inj.omega*dt. Throws DivergenceError on a non-finite state;
/// dt must equal the model step.
[[nodiscard]] PlantStepResult plant_step(const PlantModel& model, const PlantState& state,
                                         const ThreePhase& v_inv, const InjectionPhase& inj, double dt);

/// Zero-sequence Thevenin impedance seen from the PCC with the inverter
/// source shorted and the loads disconnected, by steady-state phasor solve.
[[nodiscard]] Complex thevenin_z0_at_pcc(const PlantModel& model);

/// Steady-state phasor response (per-unit peak phasors) of the network driven
/// by a balanced or unbalanced inverter voltage phasor set; injection
/// phasors follow the same reference angle.
struct PhasorSolution {
    PhasorSet v_pcc;
    PhasorSet i_pcc;
    PhasorSet v_cap;
};
[[nodiscard]] PhasorSolution steady_state_phasors(const PlantModel& model, const PhasorSet& v_inv);

}  // namespace mgsim
