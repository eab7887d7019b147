#pragma once

// Closed-loop co-simulation of outer loop, inner loop and plant, plus the
// three studies built on it: the load-step comparison between the two
// inner-loop schemes, the power/voltage unbalance sweep and the schedule
// playback.

#include "mgsim/controllers.hpp"
#include "mgsim/plant.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mgsim {

enum class Scheme { srf, rrf };
enum class RegulatedNode { pcc, capacitor };

/// Controller settings as entered by the user. Inner-loop gains are SI
/// quantities of the inverter side (A/V for voltage loops, V/A for current
/// loops); resonant and integral gains carry an extra 1/s.
struct ControllerConfig {
    Scheme scheme = Scheme::srf;
    double kpi = 4.0;
    double kri = 200.0;
    double kpv = 2.0;
    double krv = 1000.0;
    std::optional<double> rrf_kpi, rrf_kii, rrf_kpv, rrf_kiv;  ///< default to the PR values
    double notch_q = 1.0;
    double np = 1.0e-7;
    double nq = 1.0e-7;
    double k2pf = 0.3;
    double k2if = 10.0;
    double k2pv = 0.001;
    double k2iv = 0.5;
    double power_filter_hz = 10.0;
    double current_limit_pu = 1.2;
    std::optional<double> v_ceiling_pu;  ///< default: SVPWM limit of the DC bus
    double v_dc_v = 1200.0;
    RegulatedNode regulated_node = RegulatedNode::pcc;
    bool feedforward = true;

    friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

struct SystemConfig {
    PlantConfig plant;
    ControllerConfig control;

    friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

[[nodiscard]] InnerLoopParams make_inner_params(const SystemConfig& cfg);
[[nodiscard]] OuterLoopParams make_outer_params(const SystemConfig& cfg);
[[nodiscard]] double voltage_ceiling_pu(const SystemConfig& cfg);

/// Uniformly sampled named channels. Sample k is at t0 + k*dt.
struct TimeSeries {
    double dt = 0.0;
    double t0 = 0.0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::size_t size() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
    [[nodiscard]] double time(std::size_t k) const noexcept { return t0 + static_cast<double>(k) * dt; }
    [[nodiscard]] const std::vector<double>& channel(const std::string& name) const;
    [[nodiscard]] bool has(const std::string& name) const;
};

/// Channels every simulation can produce.
[[nodiscard]] const std::vector<std::string>& available_channels();
/// Default recording set.
[[nodiscard]] const std::vector<std::string>& default_channels();

/// One-cycle sliding-window quantities at the PCC.
struct DerivedSignals {
    bool valid = false;
    std::array<double, 3> v_rms_pu{};  ///< per-unit rms, 1.0 = nominal
    std::array<double, 3> i_rms_pu{};
    std::array<double, 3> p_phase_pu{};  ///< load power per phase, per-unit of rated phase power
    SequencePhasors v_seq{};
    SequencePhasors i_seq{};
    double vuf = 0.0;
    double puf = 0.0;
};

/// One closed-loop instance. Not thread-safe; independent instances are.
class Simulation {
public:
    Simulation(const SystemConfig& cfg, const LoadSpec& initial_load);
    ~Simulation();
    Simulation(Simulation&&) noexcept;
    Simulation& operator=(Simulation&&) noexcept;

    void set_load(const LoadSpec& load);
    /// Records the current sample into the sliding windows, then advances one step.
    void step();

    [[nodiscard]] double time() const noexcept;
    [[nodiscard]] long long step_count() const noexcept;
    [[nodiscard]] std::size_t samples_per_cycle() const noexcept;
    [[nodiscard]] const PlantMeasurements& measurements() const noexcept;
    [[nodiscard]] const DerivedSignals& derived() const noexcept;
    [[nodiscard]] const OuterLoopOutput& reference() const noexcept;
    [[nodiscard]] const ThreePhase& inverter_voltage() const noexcept;
    [[nodiscard]] const PlantModel& model() const noexcept;
    /// Value of a channel for the sample most recently pushed into the windows.
    [[nodiscard]] double channel_value(const std::string& name) const;
    /// Index-based access for hot loops; see channel_index().
    [[nodiscard]] double channel_value(int index) const;
    /// Position of a channel in available_channels(). Throws ConfigError.
    [[nodiscard]] static int channel_index(const std::string& name);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ScheduledLoad {
    double time_s = 0.0;
    LoadSpec load;
};

struct ScenarioSpec {
    SystemConfig system;
    std::vector<ScheduledLoad> schedule;  ///< first entry must be at t = 0
    double duration_s = 2.0;
    std::vector<std::string> record = default_channels();

    /// Throws ConfigError when the schedule or record list is invalid.
    void validate() const;
};

[[nodiscard]] TimeSeries run_scenario(const ScenarioSpec& spec);

/// Time after t_event from which the trace stays within the band around its
/// final-window mean. The band is band_frac * |final mean|, but never less
/// than abs_floor. nullopt means the trace never settles before the final
/// window.
[[nodiscard]] std::optional<double> settling_time(std::span<const double> trace, double dt, double t_event,
                                                  double band_frac = 0.02, double abs_floor = 0.0,
                                                  std::size_t final_window = 0);

struct StepMetrics {
    std::optional<double> ns_settling_s;
    double peak_rms_pu = 0.0;
    double peak_ns_pu = 0.0;
    double residual_ns_pu = 0.0;
    double residual_zs_pu = 0.0;
    SequencePhasors final_v_seq{};  ///< rotated so the positive sequence is real
    SequencePhasors final_i_seq{};
};

struct StepCompareConfig {
    LoadSpec pre_step;
    LoadSpec post_step;
    double step_time_s = 1.0;
    double duration_s = 2.0;
    double settling_band = 0.02;
    double settling_floor_pu = 0.002;  ///< absolute band floor for the near-zero NS trace
    double final_window_s = 0.1;       ///< averaging window for the settled value
};

/// Loads expressed as per-phase currents at unity voltage, per-unit.
[[nodiscard]] LoadSpec load_from_pu(const Bases& bases, double pa, double pb, double pc);
[[nodiscard]] StepCompareConfig default_step_compare(const Bases& bases);

[[nodiscard]] StepMetrics step_metrics(const TimeSeries& ts, const StepCompareConfig& cfg);

struct StepCompareResult {
    TimeSeries srf;
    TimeSeries rrf;
    StepMetrics srf_metrics;
    StepMetrics rrf_metrics;
};

[[nodiscard]] StepCompareResult step_compare(const SystemConfig& cfg, const StepCompareConfig& sc);

struct SweepPoint {
    double puf = 0.0;
    double vuf = 0.0;
    bool converged = true;
    std::string error;  ///< non-empty when the point failed
};

struct SweepCurve {
    std::string label;  ///< y-yg, delta-yg, y-yg+gt
    std::vector<SweepPoint> points;
};

struct SweepResult {
    std::vector<SweepCurve> curves;
};

struct SweepConfig {
    std::vector<double> puf_points{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65};
    double p_avg_pu = 0.3;
    double settle_s = 2.0;
    double max_s = 4.0;
    double steady_tol = 1e-4;
    unsigned threads = 0;  ///< 0: hardware concurrency

    friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Canonical transformer variants, in output order.
struct TransformerVariant {
    std::string label;
    Connection connection;
    bool grounding_transformer;
};
[[nodiscard]] const std::vector<TransformerVariant>& transformer_variants();

/// Per-phase loading whose power unbalance factor equals puf_target:
/// one phase at p_avg + d, the other two at p_avg - d/2.
[[nodiscard]] LoadSpec sweep_load(const Bases& bases, double p_avg_pu, double puf_target);

[[nodiscard]] SweepResult puf_sweep(const SystemConfig& cfg, const SweepConfig& sweep);

struct ProfileInterval {
    std::string label;
    std::array<double, 3> load_w{};
    std::array<double, 3> pv_w{};
};

struct IntervalResult {
    std::string label;
    std::array<double, 3> net_w{};
    double puf = 0.0;           ///< from the scheduled net powers
    double puf_measured = 0.0;  ///< from the simulated load powers, final cycle
    double vuf = 0.0;
    bool flagged = false;       ///< a phase exceeded its rating
};

struct ProfileResult {
    std::vector<IntervalResult> intervals;
};

[[nodiscard]] ProfileResult profile_playback(const SystemConfig& cfg, const std::vector<ProfileInterval>& profile,
                                             double dwell_s = 1.0);

/// Spearman rank correlation with average ranks for ties.
[[nodiscard]] double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mgsim
