#include <catch_amalgamated.hpp>

#include "mgsim/errors.hpp"
#include "mgsim/experiments.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

using namespace mgsim;
using Catch::Approx;

namespace {

ScenarioSpec scenario(Scheme scheme, const LoadSpec& load, double duration) {
    ScenarioSpec s;
    s.system.control.scheme = scheme;
    s.schedule = {{0.0, load}};
    s.duration_s = duration;
    return s;
}

double tail_mean(const std::vector<double>& x, std::size_t n) {
    return std::accumulate(x.end() - static_cast<long>(n), x.end(), 0.0) / static_cast<double>(n);
}

const Bases kBases{};

}  // namespace

TEST_CASE("settling_time") {
    const double dt = 1e-3;
    SECTION("constant trace settles immediately") {
        const std::vector<double> c(1000, 0.7);
        CHECK(settling_time(c, dt, 0.2).value() == 0.0);
    }
    SECTION("exponential approach takes about 3.9 time constants") {
        const double tau = 0.05;
        std::vector<double> x(3000);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double t = k * dt;
            x[k] = t < 0.5 ? 2.0 : 1.0 + std::exp(-(t - 0.5) / tau);
        }
        const auto s = settling_time(x, dt, 0.5);
        REQUIRE(s.has_value());
        CHECK(*s == Approx(-std::log(0.02) * tau).margin(2 * dt));
    }
    SECTION("persistent oscillation never settles") {
        std::vector<double> x(3000);
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] = 1.0 + 0.1 * std::sin(kTwoPi * 7.0 * k * dt);
        }
        CHECK_FALSE(settling_time(x, dt, 0.5).has_value());
    }
    SECTION("absolute floor widens the band around zero") {
        std::vector<double> x(2000, 0.0);
        x[600] = 0.001;
        CHECK(settling_time(x, dt, 0.5, 0.02, 0.0).value() == Approx(0.101));
        CHECK(settling_time(x, dt, 0.5, 0.02, 0.002).value() == 0.0);
    }
    SECTION("bad arguments") {
        CHECK_THROWS_AS(settling_time(std::vector<double>{}, dt, 0.0), ConfigError);
        CHECK_THROWS_AS(settling_time(std::vector<double>(10, 1.0), dt, 1.0), ConfigError);
    }
}

TEST_CASE("spearman rank correlation") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(spearman(x, std::vector<double>{2, 4, 6, 8, 10}) == Approx(1.0));
    CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == Approx(-1.0));
    CHECK(spearman(x, std::vector<double>{1, 3, 2, 5, 4}) == Approx(0.8));  // 1 - 6*4/(5*24)
    // ties take the average rank: y ranks 1.5 1.5 3 4 5
    CHECK(spearman(x, std::vector<double>{1, 1, 2, 3, 4}) == Approx(0.9746794344808963).epsilon(1e-12));
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 1, 1, 1, 1}), DegenerateInputError);
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), DegenerateInputError);
}

TEST_CASE("sweep_load reaches the requested PUF") {
    for (double target : {0.0, 0.05, 0.3, 0.55, 0.7}) {
        const LoadSpec l = sweep_load(kBases, 0.3, target);
        const double rated = kBases.p_phase_rated_w();
        CHECK(puf(l.p_w[0], l.p_w[1], l.p_w[2], rated) == Approx(target).margin(1e-12));
        CHECK((l.p_w[0] + l.p_w[1] + l.p_w[2]) / 3.0 == Approx(0.3 * rated));
        CHECK(l.p_w[1] == l.p_w[2]);
        CHECK(l.p_w[0] <= 1.2 * rated);
    }
}

TEST_CASE("scenario validation") {
    ScenarioSpec s = scenario(Scheme::srf, {}, 0.1);
    s.schedule.front().time_s = 0.01;
    CHECK_THROWS_AS(run_scenario(s), ConfigError);
    s = scenario(Scheme::srf, {}, 0.1);
    s.schedule.push_back({0.2, {}});
    CHECK_THROWS_AS(run_scenario(s), ConfigError);
    s = scenario(Scheme::srf, {}, 0.1);
    s.record = {"v_pcc_a", "no_such_channel"};
    CHECK_THROWS_AS(run_scenario(s), ConfigError);
}

TEST_CASE("no-load SRF run holds nominal balanced voltage") {
    const TimeSeries ts = run_scenario(scenario(Scheme::srf, {}, 2.0));
    REQUIRE(ts.size() == 24000);
    for (const char* ch : {"v_rms_a", "v_rms_b", "v_rms_c"}) {
        CHECK(std::abs(ts.channel(ch).back() - 1.0) <= 1e-3);
    }
    CHECK(ts.channel("vuf").back() < 1e-3);
    CHECK(ts.channel("freq_hz").back() == Approx(60.0).margin(1e-6));
}

TEST_CASE("SRF tracks a balanced load and rejects load unbalance") {
    SECTION("balanced 0.3 pu per phase") {
        const TimeSeries ts = run_scenario(scenario(Scheme::srf, load_from_pu(kBases, 0.3, 0.3, 0.3), 2.0));
        for (const char* ch : {"v_rms_a", "v_rms_b", "v_rms_c"}) {
            CHECK(std::abs(ts.channel(ch).back() - 1.0) < 1e-3);
        }
    }
    SECTION("unbalanced load leaves no negative sequence") {
        const TimeSeries ts = run_scenario(scenario(Scheme::srf, load_from_pu(kBases, 0.1, 0.6, 0.3), 2.0));
        CHECK(ts.channel("v_neg").back() < 0.005);
        CHECK(ts.channel("v_pos").back() == Approx(1.0).margin(1e-3));
    }
}

TEST_CASE("derived channels agree with an offline recomputation") {
    ScenarioSpec s = scenario(Scheme::srf, load_from_pu(kBases, 0.1, 0.6, 0.3), 0.5);
    s.schedule.push_back({0.3, load_from_pu(kBases, -0.4, 0.2, -0.1)});
    s.record = {"v_pcc_a", "v_pcc_b", "v_pcc_c", "i_load_a", "i_load_b", "i_load_c", "v_rms_a", "v_rms_b",
                "v_rms_c", "p_a", "p_b", "p_c", "v_pos", "v_neg", "v_zero", "vuf", "puf"};
    const TimeSeries ts = run_scenario(s);
    const std::size_t n = 200;
    for (std::size_t k : {std::size_t{400}, std::size_t{3650}, std::size_t{3700}, ts.size() - 1}) {
        std::vector<ThreePhase> win;
        std::array<std::vector<double>, 3> v, p;
        for (std::size_t j = k + 1 - n; j <= k; ++j) {
            const ThreePhase x{ts.channel("v_pcc_a")[j], ts.channel("v_pcc_b")[j], ts.channel("v_pcc_c")[j]};
            win.push_back(x);
            v[0].push_back(x.a);
            v[1].push_back(x.b);
            v[2].push_back(x.c);
            p[0].push_back(2.0 * x.a * ts.channel("i_load_a")[j]);
            p[1].push_back(2.0 * x.b * ts.channel("i_load_b")[j]);
            p[2].push_back(2.0 * x.c * ts.channel("i_load_c")[j]);
        }
        // rms in per-unit of the nominal rms, 1/sqrt(2) of the peak base
        CHECK(ts.channel("v_rms_a")[k] == Approx(rms_window(v[0]) * std::sqrt(2.0)).margin(1e-9));
        CHECK(ts.channel("v_rms_c")[k] == Approx(rms_window(v[2]) * std::sqrt(2.0)).margin(1e-9));
        const auto seq = fortescue(extract_phasors(win, 60.0, ts.dt));
        CHECK(ts.channel("v_pos")[k] == Approx(std::abs(seq.pos)).margin(1e-9));
        CHECK(ts.channel("v_neg")[k] == Approx(std::abs(seq.neg)).margin(1e-9));
        CHECK(ts.channel("v_zero")[k] == Approx(std::abs(seq.zero)).margin(1e-9));
        CHECK(ts.channel("vuf")[k] == Approx(vuf(seq)).margin(1e-9));
        std::array<double, 3> pm{};
        for (int ph = 0; ph < 3; ++ph) {
            pm[ph] = std::accumulate(p[ph].begin(), p[ph].end(), 0.0) / n;
        }
        CHECK(ts.channel("p_a")[k] == Approx(pm[0]).margin(1e-9));
        CHECK(ts.channel("p_b")[k] == Approx(pm[1]).margin(1e-9));
        CHECK(ts.channel("puf")[k] == Approx(puf(pm[0], pm[1], pm[2], 1.0)).margin(1e-9));
    }
}

TEST_CASE("post-step phase powers follow the load model") {
    ScenarioSpec s = scenario(Scheme::srf, load_from_pu(kBases, 0.1, 0.6, 0.3), 2.0);
    s.schedule.push_back({1.0, load_from_pu(kBases, -0.4, 0.2, -0.1)});
    s.record = {"p_a", "p_b", "p_c", "v_rms_a", "v_rms_b", "v_rms_c"};
    const TimeSeries ts = run_scenario(s);
    const double vb = ts.channel("v_rms_b").back();
    // the conductance draws its set-point scaled by the squared voltage
    CHECK(ts.channel("p_b").back() == Approx(0.2 * vb * vb).epsilon(1e-3));
    // injections deliver their set-point scaled by the in-phase voltage
    CHECK(ts.channel("p_a").back() == Approx(-0.4).epsilon(0.05));
    CHECK(ts.channel("p_c").back() == Approx(-0.1).epsilon(0.1));
    // Frozen: the grounding transformer's zero-sequence drop lowers phase b
    CHECK(vb == Approx(0.9677).margin(2e-3));
}

TEST_CASE("runs are bit-identical") {
    ScenarioSpec s = scenario(Scheme::rrf, load_from_pu(kBases, 0.1, 0.6, 0.3), 0.4);
    s.schedule.push_back({0.2, load_from_pu(kBases, -0.4, 0.2, -0.1)});
    const TimeSeries a = run_scenario(s);
    const TimeSeries b = run_scenario(s);
    REQUIRE(a.names == b.names);
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
        REQUIRE(std::memcmp(a.columns[c].data(), b.columns[c].data(), a.columns[c].size() * sizeof(double)) == 0);
    }
}

TEST_CASE("simulation channel access") {
    Simulation sim(SystemConfig{}, {});
    for (int k = 0; k < 300; ++k) {
        sim.step();
    }
    CHECK(sim.step_count() == 300);
    CHECK(sim.time() == Approx(300.0 / 12000.0));
    CHECK(sim.samples_per_cycle() == 200);
    CHECK(sim.channel_value("v_pcc_a") == sim.measurements().v_pcc.a);
    CHECK(sim.channel_value(Simulation::channel_index("v_rms_b")) == sim.channel_value("v_rms_b"));
    CHECK_THROWS_AS(Simulation::channel_index("bogus"), ConfigError);
    for (const auto& name : default_channels()) {
        CHECK(std::find(available_channels().begin(), available_channels().end(), name) != available_channels().end());
    }
}

TEST_CASE("PUF sweep") {
    SweepConfig sc;
    sc.puf_points = {0.0, 0.1, 0.3};
    sc.settle_s = 1.0;
    sc.max_s = 2.0;
    const SweepResult r = puf_sweep(SystemConfig{}, sc);
    REQUIRE(r.curves.size() == 3);
    CHECK(r.curves[0].label == "y-yg");
    CHECK(r.curves[1].label == "delta-yg");
    CHECK(r.curves[2].label == "y-yg+gt");
    for (const auto& c : r.curves) {
        REQUIRE(c.points.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(c.points[k].puf == sc.puf_points[k]);
            CHECK(c.points[k].error.empty());
            CHECK(c.points[k].vuf >= 0.0);
        }
        CHECK(c.points[0].vuf < 1e-3);
        CHECK(c.points[1].vuf <= c.points[2].vuf);
    }
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(r.curves[1].points[k].vuf <= r.curves[2].points[k].vuf + 1e-6);
        CHECK(r.curves[2].points[k].vuf <= r.curves[0].points[k].vuf + 1e-6);
    }

    SECTION("bad points are rejected") {
        SweepConfig bad = sc;
        bad.puf_points = {0.0, 0.8};
        CHECK_THROWS_AS(puf_sweep(SystemConfig{}, bad), ConfigError);
        bad.puf_points = {0.2, 0.1};
        CHECK_THROWS_AS(puf_sweep(SystemConfig{}, bad), ConfigError);
        bad = sc;
        bad.max_s = 0.5;
        CHECK_THROWS_AS(puf_sweep(SystemConfig{}, bad), ConfigError);
    }
    SECTION("thread count does not change results") {
        SweepConfig one = sc;
        one.threads = 1;
        const SweepResult r1 = puf_sweep(SystemConfig{}, one);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(r1.curves[c].points[k].vuf == r.curves[c].points[k].vuf);
            }
        }
    }
}

TEST_CASE("profile playback") {
    const double rated = kBases.p_phase_rated_w();
    SECTION("balanced profile stays balanced") {
        std::vector<ProfileInterval> prof;
        for (int k = 0; k < 4; ++k) {
            const double p = (0.2 + 0.1 * k) * rated;
            prof.push_back({"t" + std::to_string(k), {p, p, p}, {0.05 * rated, 0.05 * rated, 0.05 * rated}});
        }
        const ProfileResult r = profile_playback(SystemConfig{}, prof, 0.3);
        REQUIRE(r.intervals.size() == 4);
        for (const auto& iv : r.intervals) {
            CHECK(iv.vuf < 1e-3);
            CHECK(iv.puf == Approx(0.0).margin(1e-12));
            CHECK_FALSE(iv.flagged);
        }
        CHECK(r.intervals[2].net_w[0] == Approx(0.35 * rated));
    }
    SECTION("over-rating intervals are flagged and playback continues") {
        std::vector<ProfileInterval> prof{{"a", {0.3 * rated, 0.2 * rated, 0.2 * rated}, {0, 0, 0}},
                                          {"b", {1.3 * rated, 0.2 * rated, 0.2 * rated}, {0, 0, 0}},
                                          {"c", {0.3 * rated, 0.2 * rated, 0.2 * rated}, {0, 0, 0}}};
        const ProfileResult r = profile_playback(SystemConfig{}, prof, 0.3);
        REQUIRE(r.intervals.size() == 3);
        CHECK_FALSE(r.intervals[0].flagged);
        CHECK(r.intervals[1].flagged);
        CHECK(r.intervals[1].puf == Approx(puf(1.3, 0.2, 0.2, 1.0)));
        CHECK(r.intervals[2].vuf == Approx(r.intervals[0].vuf).epsilon(1e-3));
    }
    SECTION("invalid input") {
        CHECK_THROWS_AS(profile_playback(SystemConfig{}, {}, 1.0), ConfigError);
        std::vector<ProfileInterval> one{{"a", {0, 0, 0}, {0, 0, 0}}};
        CHECK_THROWS_AS(profile_playback(SystemConfig{}, one, 0.01), ConfigError);
    }
}
