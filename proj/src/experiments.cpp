#include "mgsim/experiments.hpp"

#include "mgsim/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>
#include <variant>

namespace mgsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Ch {
    v_pcc_a, v_pcc_b, v_pcc_c,
    i_pcc_a, i_pcc_b, i_pcc_c,
    i_load_a, i_load_b, i_load_c,
    v_cap_a, v_cap_b, v_cap_c,
    i_filter_a, i_filter_b, i_filter_c,
    v_inv_a, v_inv_b, v_inv_c,
    v_rms_a, v_rms_b, v_rms_c,
    i_rms_a, i_rms_b, i_rms_c,
    p_a, p_b, p_c,
    v_pos, v_neg, v_zero,
    i_pos, i_neg, i_zero,
    vuf, puf, freq_hz, v_ref,
    // Sequence phasors rotated so that the voltage positive sequence is real.
    v_neg_re, v_neg_im, v_zero_re, v_zero_im,
    i_pos_re, i_pos_im, i_neg_re, i_neg_im, i_zero_re, i_zero_im,
    count
};

const std::vector<std::string>& channel_names() {
    static const std::vector<std::string> names{
        "v_pcc_a", "v_pcc_b", "v_pcc_c",
        "i_pcc_a", "i_pcc_b", "i_pcc_c",
        "i_load_a", "i_load_b", "i_load_c",
        "v_cap_a", "v_cap_b", "v_cap_c",
        "i_filter_a", "i_filter_b", "i_filter_c",
        "v_inv_a", "v_inv_b", "v_inv_c",
        "v_rms_a", "v_rms_b", "v_rms_c",
        "i_rms_a", "i_rms_b", "i_rms_c",
        "p_a", "p_b", "p_c",
        "v_pos", "v_neg", "v_zero",
        "i_pos", "i_neg", "i_zero",
        "vuf", "puf", "freq_hz", "v_ref",
        "v_neg_re", "v_neg_im", "v_zero_re", "v_zero_im",
        "i_pos_re", "i_pos_im", "i_neg_re", "i_neg_im", "i_zero_re", "i_zero_im",
    };
    return names;
}

int channel_id(const std::string& name) {
    const auto& names = channel_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw ConfigError("unknown channel '" + name + "'");
    }
    return static_cast<int>(it - names.begin());
}

double pick(const ThreePhase& x, int phase) {
    return phase == 0 ? x.a : (phase == 1 ? x.b : x.c);
}

Complex unit_rotation(const Complex& ref) {
    const double mag = std::abs(ref);
    return mag == 0.0 ? Complex(1.0, 0.0) : std::conj(ref) / mag;
}

template <typename Job>
void run_parallel(std::size_t jobs, unsigned threads, Job&& job) {
    unsigned n = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    n = static_cast<unsigned>(std::min<std::size_t>(n, jobs));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs; k = next++) {
            job(k);
        }
    };
    if (n <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
}

}  // namespace

double voltage_ceiling_pu(const SystemConfig& cfg) {
    if (cfg.control.v_ceiling_pu) {
        return *cfg.control.v_ceiling_pu;
    }
    return cfg.control.v_dc_v / kSqrt3 / cfg.plant.bases.v_peak_inverter();
}

InnerLoopParams make_inner_params(const SystemConfig& cfg) {
    const Bases& b = cfg.plant.bases;
    const ControllerConfig& c = cfg.control;
    const double z = b.z_inverter_ohm();
    InnerLoopParams p;
    p.omega0 = b.omega();
    p.dt = cfg.plant.dt;
    p.kpv = c.kpv * z;
    p.krv = c.krv * z;
    p.kpi = c.kpi / z;
    p.kri = c.kri / z;
    p.rrf_kpv = c.rrf_kpv.value_or(c.kpv) * z;
    p.rrf_kiv = c.rrf_kiv.value_or(c.krv) * z;
    p.rrf_kpi = c.rrf_kpi.value_or(c.kpi) / z;
    p.rrf_kii = c.rrf_kii.value_or(c.kri) / z;
    p.notch_q = c.notch_q;
    p.c_filter = cfg.plant.filter.cf_farad * z;
    p.l_filter = cfg.plant.filter.lf_henry / z;
    p.current_limit = c.current_limit_pu;
    p.v_ceiling = voltage_ceiling_pu(cfg);
    p.feedforward = c.feedforward;
    return p;
}

OuterLoopParams make_outer_params(const SystemConfig& cfg) {
    const Bases& b = cfg.plant.bases;
    const ControllerConfig& c = cfg.control;
    OuterLoopParams p;
    p.omega_nom = b.omega();
    p.np = c.np;
    p.nq = c.nq;
    p.power_filter_hz = c.power_filter_hz;
    p.k2pf = c.k2pf;
    p.k2if = c.k2if;
    p.k2pv = c.k2pv;
    p.k2iv = c.k2iv;
    p.s_base_va = b.s_base_va;
    p.v_ll_base_v = b.v_ll_pcc_v;
    p.dt = cfg.plant.dt;
    return p;
}

const std::vector<double>& TimeSeries::channel(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw ConfigError("time series has no channel '" + name + "'");
    }
    return columns[static_cast<std::size_t>(it - names.begin())];
}

bool TimeSeries::has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<std::string>& available_channels() {
    return channel_names();
}

const std::vector<std::string>& default_channels() {
    static const std::vector<std::string> names{
        "v_pcc_a", "v_pcc_b", "v_pcc_c", "i_pcc_a", "i_pcc_b", "i_pcc_c",
        "v_rms_a", "v_rms_b", "v_rms_c", "i_rms_a", "i_rms_b", "i_rms_c",
        "v_pos", "v_neg", "v_zero", "vuf", "puf", "freq_hz",
    };
    return names;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct Simulation::Impl {
    SystemConfig cfg;
    PlantModel model;
    PlantState state;
    PlantMeasurements meas;      // at the current (not yet recorded) time
    PlantMeasurements recorded;  // last sample pushed into the windows
    OuterLoop outer;
    std::variant<SrfInnerLoop, RrfInnerLoop> inner;
    std::size_t n;
    std::array<SlidingPhasor, 3> v_win;
    std::array<SlidingPhasor, 3> i_win;
    std::array<SlidingMean, 3> p_win;
    DerivedSignals derived;
    OuterLoopOutput ref;
    ThreePhase v_inv{};
    double dt;
    // Load change in progress: blend from ramp_from to ramp_to.
    std::optional<PlantModel> ramp_from;
    std::optional<PlantModel> ramp_to;
    long long ramp_steps = 0;
    long long ramp_done = 0;

    static std::variant<SrfInnerLoop, RrfInnerLoop> make_inner(const SystemConfig& c) {
        const InnerLoopParams p = make_inner_params(c);
        if (c.control.scheme == Scheme::srf) {
            return SrfInnerLoop(p);
        }
        return RrfInnerLoop(p);
    }

    Impl(const SystemConfig& c, const LoadSpec& load)
        : cfg(c),
          model(c.plant, load),
          state(model.zero_state()),
          meas(model.measure(state)),
          recorded(meas),
          outer(make_outer_params(c)),
          inner(make_inner(c)),
          n(mgsim::samples_per_cycle(c.plant.bases.frequency_hz, c.plant.dt)),
          v_win{SlidingPhasor(n), SlidingPhasor(n), SlidingPhasor(n)},
          i_win{SlidingPhasor(n), SlidingPhasor(n), SlidingPhasor(n)},
          p_win{SlidingMean(n), SlidingMean(n), SlidingMean(n)},
          ref{0.0, c.plant.bases.omega(), 1.0},
          dt(c.plant.dt) {}

    void push_windows() {
        recorded = meas;
        for (int k = 0; k < 3; ++k) {
            const double v = pick(meas.v_pcc, k);
            v_win[k].push(v);
            i_win[k].push(pick(meas.i_pcc, k));
            p_win[k].push(2.0 * v * pick(meas.i_load, k));
        }
        if (!v_win[0].full()) {
            return;
        }
        derived.valid = true;
        for (int k = 0; k < 3; ++k) {
            derived.v_rms_pu[k] = std::sqrt(2.0) * v_win[k].rms();
            derived.i_rms_pu[k] = std::sqrt(2.0) * i_win[k].rms();
            derived.p_phase_pu[k] = p_win[k].mean();
        }
        derived.v_seq = fortescue({v_win[0].phasor(), v_win[1].phasor(), v_win[2].phasor()});
        derived.i_seq = fortescue({i_win[0].phasor(), i_win[1].phasor(), i_win[2].phasor()});
        derived.vuf = std::abs(derived.v_seq.pos) > 0.0 ? vuf(derived.v_seq) : kNaN;
        derived.puf = puf(derived.p_phase_pu[0], derived.p_phase_pu[1], derived.p_phase_pu[2], 1.0);
    }

    void set_load(const LoadSpec& load) {
        const PlantModel& current = ramp_to ? *ramp_to : model;
        if (load == current.load()) {
            return;
        }
        PlantModel target = apply_load_step(current, load);
        ramp_steps = std::llround(cfg.plant.load_ramp_s / dt);
        if (ramp_steps <= 1) {
            model = std::move(target);
            ramp_from.reset();
            ramp_to.reset();
        } else {
            ramp_from = model;
            ramp_to = std::move(target);
            ramp_done = 0;
        }
    }

    void advance_ramp() {
        if (!ramp_to) {
            return;
        }
        ++ramp_done;
        if (ramp_done >= ramp_steps) {
            model = std::move(*ramp_to);
            ramp_from.reset();
            ramp_to.reset();
            return;
        }
        model = PlantModel::blend(*ramp_from, *ramp_to,
                                  static_cast<double>(ramp_done) / static_cast<double>(ramp_steps));
    }

    void step() {
        advance_ramp();
        push_windows();
        const std::optional<double> v_pos =
            derived.valid ? std::optional<double>(std::abs(derived.v_seq.pos)) : std::nullopt;
        ref = outer.step(meas.v_pcc, meas.i_pcc, v_pos);

        const InnerMeasurements im{
            cfg.control.regulated_node == RegulatedNode::pcc ? meas.v_pcc : meas.v_cap,
            meas.v_cap, meas.i_filter, meas.i_pcc};
        AlphaBeta cmd;
        if (auto* srf = std::get_if<SrfInnerLoop>(&inner)) {
            cmd = srf->step({ref.v_mag * std::cos(ref.theta), ref.v_mag * std::sin(ref.theta)}, im);
        } else {
            cmd = std::get<RrfInnerLoop>(inner).step(ref.v_mag, ref.theta, im);
        }
        v_inv = inverse_clarke({cmd.alpha, cmd.beta, 0.0});

        PlantStepResult r = plant_step(model, state, v_inv, {ref.theta, ref.omega}, dt);
        state = std::move(r.state);
        meas = r.measurements;
    }

    double value(int id) const {
        const auto ch = static_cast<Ch>(id);
        const int base = static_cast<int>(ch);
        auto phase = [&](Ch first) { return base - static_cast<int>(first); };
        switch (ch) {
        case Ch::v_pcc_a: case Ch::v_pcc_b: case Ch::v_pcc_c:
            return pick(recorded.v_pcc, phase(Ch::v_pcc_a));
        case Ch::i_pcc_a: case Ch::i_pcc_b: case Ch::i_pcc_c:
            return pick(recorded.i_pcc, phase(Ch::i_pcc_a));
        case Ch::i_load_a: case Ch::i_load_b: case Ch::i_load_c:
            return pick(recorded.i_load, phase(Ch::i_load_a));
        case Ch::v_cap_a: case Ch::v_cap_b: case Ch::v_cap_c:
            return pick(recorded.v_cap, phase(Ch::v_cap_a));
        case Ch::i_filter_a: case Ch::i_filter_b: case Ch::i_filter_c:
            return pick(recorded.i_filter, phase(Ch::i_filter_a));
        case Ch::v_inv_a: case Ch::v_inv_b: case Ch::v_inv_c:
            return pick(v_inv, phase(Ch::v_inv_a));
        case Ch::freq_hz:
            return ref.omega / kTwoPi;
        case Ch::v_ref:
            return ref.v_mag;
        default:
            break;
        }
        if (!derived.valid) {
            return kNaN;
        }
        switch (ch) {
        case Ch::v_rms_a: case Ch::v_rms_b: case Ch::v_rms_c:
            return derived.v_rms_pu[phase(Ch::v_rms_a)];
        case Ch::i_rms_a: case Ch::i_rms_b: case Ch::i_rms_c:
            return derived.i_rms_pu[phase(Ch::i_rms_a)];
        case Ch::p_a: case Ch::p_b: case Ch::p_c:
            return derived.p_phase_pu[phase(Ch::p_a)];
        case Ch::v_pos: return std::abs(derived.v_seq.pos);
        case Ch::v_neg: return std::abs(derived.v_seq.neg);
        case Ch::v_zero: return std::abs(derived.v_seq.zero);
        case Ch::i_pos: return std::abs(derived.i_seq.pos);
        case Ch::i_neg: return std::abs(derived.i_seq.neg);
        case Ch::i_zero: return std::abs(derived.i_seq.zero);
        case Ch::vuf: return derived.vuf;
        case Ch::puf: return derived.puf;
        default: break;
        }
        const Complex r = unit_rotation(derived.v_seq.pos);
        switch (ch) {
        case Ch::v_neg_re: return (derived.v_seq.neg * r).real();
        case Ch::v_neg_im: return (derived.v_seq.neg * r).imag();
        case Ch::v_zero_re: return (derived.v_seq.zero * r).real();
        case Ch::v_zero_im: return (derived.v_seq.zero * r).imag();
        case Ch::i_pos_re: return (derived.i_seq.pos * r).real();
        case Ch::i_pos_im: return (derived.i_seq.pos * r).imag();
        case Ch::i_neg_re: return (derived.i_seq.neg * r).real();
        case Ch::i_neg_im: return (derived.i_seq.neg * r).imag();
        case Ch::i_zero_re: return (derived.i_seq.zero * r).real();
        case Ch::i_zero_im: return (derived.i_seq.zero * r).imag();
        default: return kNaN;
        }
    }
};

Simulation::Simulation(const SystemConfig& cfg, const LoadSpec& initial_load)
    : impl_(std::make_unique<Impl>(cfg, initial_load)) {}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

void Simulation::set_load(const LoadSpec& load) {
    // Branch currents carry over; the load parameters move to the new values
    // over load_ramp_s so the nearly algebraic PCC node sees no current jump.
    impl_->set_load(load);
}

void Simulation::step() { impl_->step(); }
double Simulation::time() const noexcept { return static_cast<double>(impl_->state.step) * impl_->dt; }
long long Simulation::step_count() const noexcept { return impl_->state.step; }
std::size_t Simulation::samples_per_cycle() const noexcept { return impl_->n; }
const PlantMeasurements& Simulation::measurements() const noexcept { return impl_->recorded; }
const DerivedSignals& Simulation::derived() const noexcept { return impl_->derived; }
const OuterLoopOutput& Simulation::reference() const noexcept { return impl_->ref; }
const ThreePhase& Simulation::inverter_voltage() const noexcept { return impl_->v_inv; }
const PlantModel& Simulation::model() const noexcept { return impl_->model; }
double Simulation::channel_value(const std::string& name) const { return impl_->value(channel_id(name)); }
double Simulation::channel_value(int index) const {
    if (index < 0 || index >= static_cast<int>(Ch::count)) {
        throw ConfigError("channel index out of range");
    }
    return impl_->value(index);
}
int Simulation::channel_index(const std::string& name) { return channel_id(name); }

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

void ScenarioSpec::validate() const {
    if (schedule.empty() || schedule.front().time_s != 0.0) {
        throw ConfigError("load schedule must start at t = 0");
    }
    for (std::size_t k = 1; k < schedule.size(); ++k) {
        if (!(schedule[k].time_s > schedule[k - 1].time_s)) {
            throw ConfigError("load schedule times must be strictly increasing");
        }
    }
    if (!(duration_s >= schedule.back().time_s) || !(duration_s > 0.0)) {
        throw ConfigError("scenario duration must cover the last scheduled load change");
    }
    for (const auto& name : record) {
        (void)channel_id(name);
    }
}

TimeSeries run_scenario(const ScenarioSpec& spec) {
    spec.validate();
    const double dt = spec.system.plant.dt;
    const auto steps = static_cast<std::size_t>(std::llround(spec.duration_s / dt));

    std::vector<int> ids;
    ids.reserve(spec.record.size());
    for (const auto& name : spec.record) {
        ids.push_back(channel_id(name));
    }

    TimeSeries ts;
    ts.dt = dt;
    ts.names = spec.record;
    ts.columns.assign(ids.size(), std::vector<double>());
    for (auto& c : ts.columns) {
        c.reserve(steps);
    }

    Simulation sim(spec.system, spec.schedule.front().load);
    std::size_t next_event = 1;
    for (std::size_t k = 0; k < steps; ++k) {
        if (next_event < spec.schedule.size() &&
            static_cast<long long>(k) >= std::llround(spec.schedule[next_event].time_s / dt)) {
            sim.set_load(spec.schedule[next_event].load);
            ++next_event;
        }
        sim.step();
        for (std::size_t c = 0; c < ids.size(); ++c) {
            ts.columns[c].push_back(sim.channel_value(ids[c]));
        }
    }
    return ts;
}

}  // namespace mgsim

namespace mgsim {

// ---------------------------------------------------------------------------
// Analytics
// ---------------------------------------------------------------------------

std::optional<double> settling_time(std::span<const double> trace, double dt, double t_event, double band_frac,
                                    double abs_floor, std::size_t final_window) {
    if (trace.empty() || !(dt > 0.0)) {
        throw ConfigError("settling_time needs a non-empty trace and positive dt");
    }
    const auto k_event = static_cast<std::size_t>(std::max(0LL, std::llround(t_event / dt)));
    if (k_event >= trace.size()) {
        throw ConfigError("settling_time event lies outside the trace");
    }
    const std::size_t post = trace.size() - k_event;
    const std::size_t win = final_window == 0 ? std::max<std::size_t>(1, post / 10) : std::min(final_window, post);
    const std::size_t k_final = trace.size() - win;

    double final_mean = 0.0;
    for (std::size_t k = k_final; k < trace.size(); ++k) {
        final_mean += trace[k];
    }
    final_mean /= static_cast<double>(win);
    const double band = std::max(band_frac * std::abs(final_mean), abs_floor);

    // Last sample outside the band, scanning backwards.
    std::size_t k = trace.size();
    while (k > k_event) {
        const double x = trace[k - 1];
        if (!(std::abs(x - final_mean) <= band)) {
            break;
        }
        --k;
    }
    if (k >= k_final && k > k_event) {
        return std::nullopt;
    }
    return static_cast<double>(k - k_event) * dt;
}

LoadSpec load_from_pu(const Bases& bases, double pa, double pb, double pc) {
    const double s = bases.p_phase_rated_w();
    return LoadSpec{{pa * s, pb * s, pc * s}};
}

StepCompareConfig default_step_compare(const Bases& bases) {
    StepCompareConfig sc;
    sc.pre_step = load_from_pu(bases, 0.1, 0.6, 0.3);
    sc.post_step = load_from_pu(bases, -0.4, 0.2, -0.1);
    return sc;
}

StepMetrics step_metrics(const TimeSeries& ts, const StepCompareConfig& cfg) {
    const auto k_event = static_cast<std::size_t>(std::llround((cfg.step_time_s - ts.t0) / ts.dt));
    if (k_event >= ts.size()) {
        throw ConfigError("step time lies outside the recorded series");
    }
    const std::vector<double>& ns = ts.channel("v_neg");
    const std::vector<double>& zs = ts.channel("v_zero");

    StepMetrics m;
    const auto final_window = static_cast<std::size_t>(std::llround(cfg.final_window_s / ts.dt));
    m.ns_settling_s = settling_time(ns, ts.dt, cfg.step_time_s - ts.t0, cfg.settling_band, cfg.settling_floor_pu,
                                    final_window);
    for (const char* name : {"v_rms_a", "v_rms_b", "v_rms_c"}) {
        const std::vector<double>& r = ts.channel(name);
        for (std::size_t k = k_event; k < r.size(); ++k) {
            m.peak_rms_pu = std::max(m.peak_rms_pu, r[k]);
        }
    }
    for (std::size_t k = k_event; k < ns.size(); ++k) {
        m.peak_ns_pu = std::max(m.peak_ns_pu, ns[k]);
    }
    m.residual_ns_pu = ns.back();
    m.residual_zs_pu = zs.back();

    auto last = [&](const char* name) { return ts.has(name) ? ts.channel(name).back() : 0.0; };
    m.final_v_seq = {Complex(ts.channel("v_pos").back(), 0.0), Complex(last("v_neg_re"), last("v_neg_im")),
                     Complex(last("v_zero_re"), last("v_zero_im"))};
    m.final_i_seq = {Complex(last("i_pos_re"), last("i_pos_im")), Complex(last("i_neg_re"), last("i_neg_im")),
                     Complex(last("i_zero_re"), last("i_zero_im"))};
    return m;
}

StepCompareResult step_compare(const SystemConfig& cfg, const StepCompareConfig& sc) {
    std::array<SystemConfig, 2> systems{cfg, cfg};
    systems[0].control.scheme = Scheme::srf;
    systems[1].control.scheme = Scheme::rrf;

    std::vector<std::string> record = default_channels();
    for (const char* extra : {"i_load_a", "i_load_b", "i_load_c", "p_a", "p_b", "p_c", "i_pos", "i_neg", "i_zero",
                              "v_neg_re", "v_neg_im", "v_zero_re", "v_zero_im", "i_pos_re", "i_pos_im", "i_neg_re",
                              "i_neg_im", "i_zero_re", "i_zero_im"}) {
        record.emplace_back(extra);
    }

    std::array<TimeSeries, 2> series;
    std::array<StepMetrics, 2> metrics;
    std::array<std::exception_ptr, 2> errors;
    run_parallel(2, 2, [&](std::size_t k) {
        try {
            ScenarioSpec spec;
            spec.system = systems[k];
            spec.schedule = {{0.0, sc.pre_step}, {sc.step_time_s, sc.post_step}};
            spec.duration_s = sc.duration_s;
            spec.record = record;
            series[k] = run_scenario(spec);
            metrics[k] = step_metrics(series[k], sc);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    });
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return {std::move(series[0]), std::move(series[1]), metrics[0], metrics[1]};
}

// ---------------------------------------------------------------------------
// Unbalance sweep
// ---------------------------------------------------------------------------

const std::vector<TransformerVariant>& transformer_variants() {
    static const std::vector<TransformerVariant> v{
        {"y-yg", Connection::y_yg, false},
        {"delta-yg", Connection::delta_yg, false},
        {"y-yg+gt", Connection::y_yg, true},
    };
    return v;
}

LoadSpec sweep_load(const Bases& bases, double p_avg_pu, double puf_target) {
    if (!(puf_target >= 0.0) || !(p_avg_pu >= 0.0)) {
        throw ConfigError("sweep load needs non-negative average power and PUF");
    }
    return load_from_pu(bases, p_avg_pu + puf_target, p_avg_pu - 0.5 * puf_target, p_avg_pu - 0.5 * puf_target);
}

namespace {

struct SteadyRun {
    DerivedSignals derived;
    bool converged = false;
};

/// Runs at least min_s, then until consecutive cycle-end VUF values differ
/// by less than tol, or max_s.
SteadyRun run_to_steady(Simulation& sim, double min_s, double max_s, double tol) {
    const std::size_t n = sim.samples_per_cycle();
    const double t_start = sim.time();
    double prev = std::numeric_limits<double>::quiet_NaN();
    while (true) {
        for (std::size_t k = 0; k < n; ++k) {
            sim.step();
        }
        const double elapsed = sim.time() - t_start;
        const double now = sim.derived().vuf;
        if (elapsed >= min_s - 1e-12 && std::abs(now - prev) < tol) {
            return {sim.derived(), true};
        }
        if (elapsed >= max_s - 1e-12) {
            return {sim.derived(), false};
        }
        prev = now;
    }
}

}  // namespace

SweepResult puf_sweep(const SystemConfig& cfg, const SweepConfig& sweep) {
    for (std::size_t k = 0; k < sweep.puf_points.size(); ++k) {
        const double p = sweep.puf_points[k];
        if (!(p >= 0.0 && p <= 0.7)) {
            throw ConfigError("sweep PUF points must lie in [0, 0.7]");
        }
        if (k > 0 && !(p > sweep.puf_points[k - 1])) {
            throw ConfigError("sweep PUF points must be strictly increasing");
        }
    }
    if (!(sweep.settle_s > 0.0) || !(sweep.max_s >= sweep.settle_s)) {
        throw ConfigError("sweep needs 0 < settle_s <= max_s");
    }

    const auto& variants = transformer_variants();
    SweepResult result;
    for (const auto& v : variants) {
        result.curves.push_back({v.label, std::vector<SweepPoint>(sweep.puf_points.size())});
    }

    const std::size_t np = sweep.puf_points.size();
    run_parallel(variants.size() * np, sweep.threads, [&](std::size_t job) {
        const std::size_t vi = job / np;
        const std::size_t pi = job % np;
        SweepPoint& out = result.curves[vi].points[pi];
        out.puf = sweep.puf_points[pi];
        try {
            SystemConfig sys = cfg;
            sys.plant.transformer.connection = variants[vi].connection;
            sys.plant.transformer.grounding_transformer = variants[vi].grounding_transformer;
            Simulation sim(sys, sweep_load(sys.plant.bases, sweep.p_avg_pu, out.puf));
            const SteadyRun r = run_to_steady(sim, sweep.settle_s, sweep.max_s, sweep.steady_tol);
            out.vuf = r.derived.vuf;
            out.converged = r.converged;
        } catch (const std::exception& e) {
            out.vuf = std::numeric_limits<double>::quiet_NaN();
            out.converged = false;
            out.error = e.what();
        }
    });
    return result;
}

// ---------------------------------------------------------------------------
// Profile playback
// ---------------------------------------------------------------------------

ProfileResult profile_playback(const SystemConfig& cfg, const std::vector<ProfileInterval>& profile, double dwell_s) {
    if (profile.empty()) {
        throw ConfigError("profile has no intervals");
    }
    if (!(dwell_s > 0.0)) {
        throw ConfigError("profile dwell must be positive");
    }
    const double rated = cfg.plant.bases.p_phase_rated_w();
    const auto dwell_steps = static_cast<long long>(std::llround(dwell_s / cfg.plant.dt));
    if (dwell_steps < static_cast<long long>(2 * samples_per_cycle(cfg.plant.bases.frequency_hz, cfg.plant.dt))) {
        throw ConfigError("profile dwell must cover at least two fundamental cycles");
    }

    auto net_of = [](const ProfileInterval& iv) {
        return LoadSpec{{iv.load_w[0] - iv.pv_w[0], iv.load_w[1] - iv.pv_w[1], iv.load_w[2] - iv.pv_w[2]}};
    };

    ProfileResult result;
    Simulation sim(cfg, net_of(profile.front()));
    // Start-up transient is not part of the first interval.
    for (long long k = 0; k < dwell_steps; ++k) {
        sim.step();
    }
    for (const auto& iv : profile) {
        const LoadSpec net = net_of(iv);
        sim.set_load(net);
        for (long long k = 0; k < dwell_steps; ++k) {
            sim.step();
        }
        IntervalResult r;
        r.label = iv.label;
        r.net_w = net.p_w;
        r.puf = puf(net.p_w[0], net.p_w[1], net.p_w[2], rated);
        const DerivedSignals& d = sim.derived();
        r.puf_measured = puf(d.p_phase_pu[0], d.p_phase_pu[1], d.p_phase_pu[2], 1.0);
        r.vuf = d.vuf;
        r.flagged = std::any_of(net.p_w.begin(), net.p_w.end(), [&](double p) { return std::abs(p) > rated; });
        result.intervals.push_back(std::move(r));
    }
    return result;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            rank[order[k]] = r;
        }
        i = j + 1;
    }
    return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw DegenerateInputError("spearman needs two equally long samples of size >= 2");
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k]) || !std::isfinite(y[k])) {
            throw DegenerateInputError("spearman input is not finite");
        }
    }
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < rx.size(); ++k) {
        sxy += (rx[k] - mx) * (ry[k] - my);
        sxx += (rx[k] - mx) * (rx[k] - mx);
        syy += (ry[k] - my) * (ry[k] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateInputError("spearman of a constant sample is undefined");
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace mgsim
