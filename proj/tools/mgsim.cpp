// Command-line front end: step-compare, puf-sweep, profile, validate-config.

#include "mgsim/chart.hpp"
#include "mgsim/errors.hpp"
#include "mgsim/experiments.hpp"
#include "mgsim/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <iterator>
#include <sstream>

namespace {

using namespace mgsim;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kDiverged = 2;

struct Options {
    std::string config;
    std::string out;
    bool svg = false;
    bool quiet = false;
};

Config load_config(const Options& o) {
    if (o.config.empty()) {
        throw ConfigError("--config is required");
    }
    return parse_config(o.config);
}

std::filesystem::path prepare_out(const Options& o) {
    std::filesystem::path dir = o.out;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    return dir;
}

// Every `stride`-th sample of a channel, for charts.
Trace decimated(const TimeSeries& ts, const std::string& channel, const std::string& name, double t_from,
                std::size_t stride) {
    Trace tr{name, {}, {}};
    const auto& c = ts.channel(channel);
    for (std::size_t k = 0; k < ts.size(); k += stride) {
        if (ts.time(k) >= t_from && std::isfinite(c[k])) {
            tr.x.push_back(ts.time(k));
            tr.y.push_back(c[k]);
        }
    }
    return tr;
}

std::string fmt_settling(const std::optional<double>& s) {
    if (!s) {
        return "not settled";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f ms", *s * 1e3);
    return buf;
}

int run_step_compare(const Options& o) {
    const Config cfg = load_config(o);
    const StepCompareConfig sc = step_compare_config(cfg);
    const StepCompareResult r = step_compare(cfg.system, sc);

    const auto dir = prepare_out(o);
    write_timeseries(r.srf, dir / "srf.csv");
    write_timeseries(r.rrf, dir / "rrf.csv");
    write_step_metrics(r, dir / "metrics.csv");
    if (o.svg) {
        const double t0 = std::max(0.0, sc.step_time_s - 0.1);
        ChartStyle ns{"Negative-sequence PCC voltage", "time (s)", "|V-| (pu)", 800, 480, {}};
        render_chart({decimated(r.srf, "v_neg", "SRF (PR)", t0, 4), decimated(r.rrf, "v_neg", "RRF (PI)", t0, 4)}, ns,
                     dir / "step_ns.svg");
        ChartStyle rms{"PCC phase RMS voltage", "time (s)", "V rms (pu)", 800, 480, {1.05}};
        std::vector<Trace> traces;
        for (const char* ph : {"a", "b", "c"}) {
            traces.push_back(decimated(r.srf, std::string("v_rms_") + ph, std::string("SRF ") + ph, t0, 4));
        }
        for (const char* ph : {"a", "b", "c"}) {
            traces.push_back(decimated(r.rrf, std::string("v_rms_") + ph, std::string("RRF ") + ph, t0, 4));
        }
        render_chart(traces, rms, dir / "step_rms.svg");
    }
    if (!o.quiet) {
        for (const auto& [name, m] : {std::pair{"srf", r.srf_metrics}, std::pair{"rrf", r.rrf_metrics}}) {
            std::printf("%s: NS settling %s, peak phase rms %.4f pu, peak |V-| %.4f pu, final |V-| %.5f |V0| %.5f pu\n",
                        name, fmt_settling(m.ns_settling_s).c_str(), m.peak_rms_pu, m.peak_ns_pu, m.residual_ns_pu,
                        m.residual_zs_pu);
        }
        std::printf("wrote %s\n", dir.string().c_str());
    }
    return kOk;
}

int run_puf_sweep(const Options& o) {
    const Config cfg = load_config(o);
    const SweepResult sr = puf_sweep(cfg.system, cfg.experiment.sweep);

    const auto dir = prepare_out(o);
    write_sweep(sr, dir / "sweep.csv");
    if (o.svg) {
        std::vector<Trace> traces;
        for (const auto& c : sr.curves) {
            Trace t{c.label, {}, {}};
            for (const auto& p : c.points) {
                if (p.error.empty()) {
                    t.x.push_back(100.0 * p.puf);
                    t.y.push_back(100.0 * p.vuf);
                }
            }
            if (!t.x.empty()) {
                traces.push_back(std::move(t));
            }
        }
        render_chart(traces, {"VUF against PUF", "PUF (%)", "VUF (%)", 800, 480, {3.0}}, dir / "sweep.svg");
    }
    int failed = 0;
    for (const auto& c : sr.curves) {
        for (const auto& p : c.points) {
            if (!p.error.empty()) {
                ++failed;
                std::fprintf(stderr, "%s at PUF %.2f failed: %s\n", c.label.c_str(), p.puf, p.error.c_str());
            }
        }
    }
    if (!o.quiet) {
        std::printf("%-10s", "PUF %");
        for (const auto& c : sr.curves) {
            std::printf("%12s", c.label.c_str());
        }
        std::printf("\n");
        const std::size_t n = sr.curves.empty() ? 0 : sr.curves.front().points.size();
        for (std::size_t k = 0; k < n; ++k) {
            std::printf("%-10.1f", 100.0 * sr.curves.front().points[k].puf);
            for (const auto& c : sr.curves) {
                std::printf("%12.3f", 100.0 * c.points[k].vuf);
            }
            std::printf("\n");
        }
        std::printf("wrote %s\n", dir.string().c_str());
    }
    return failed ? kDiverged : kOk;
}

int run_profile(const Options& o) {
    const Config cfg = load_config(o);
    if (cfg.experiment.profile.empty()) {
        throw ConfigError("key 'profile' in [experiment] must name the profile CSV");
    }
    const auto profile = read_profile(cfg.experiment.profile);
    const ProfileResult r = profile_playback(cfg.system, profile, cfg.experiment.dwell_s);

    const auto dir = prepare_out(o);
    write_profile_result(r, dir / "profile.csv");
    if (o.svg) {
        Trace puf{"PUF", {}, {}}, vuf{"VUF", {}, {}};
        for (std::size_t k = 0; k < r.intervals.size(); ++k) {
            puf.x.push_back(static_cast<double>(k));
            puf.y.push_back(100.0 * r.intervals[k].puf);
            vuf.x.push_back(static_cast<double>(k));
            vuf.y.push_back(100.0 * r.intervals[k].vuf);
        }
        render_chart({puf, vuf}, {"Interval PUF and VUF", "interval", "percent", 800, 480, {3.0}}, dir / "profile.svg");
    }
    if (!o.quiet) {
        std::vector<double> p, v;
        int flagged = 0;
        for (const auto& iv : r.intervals) {
            p.push_back(iv.puf);
            v.push_back(iv.vuf);
            flagged += iv.flagged ? 1 : 0;
        }
        double rho = std::nan("");
        try {
            rho = spearman(p, v);
        } catch (const DegenerateInputError&) {
        }
        std::printf("%zu intervals, %d over rating, max PUF %.1f%%, max VUF %.2f%%, Spearman %.3f\n",
                    r.intervals.size(), flagged, 100.0 * *std::max_element(p.begin(), p.end()),
                    100.0 * *std::max_element(v.begin(), v.end()), rho);
        std::printf("wrote %s\n", dir.string().c_str());
    }
    return kOk;
}

int run_validate(const Options& o) {
    Config cfg;
    if (o.config.empty()) {
        const std::string text{std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
        cfg = parse_config_text(text, "<stdin>");
    } else {
        cfg = parse_config(o.config);
    }
    if (!cfg.experiment.profile.empty()) {
        (void)read_profile(cfg.experiment.profile);
    }
    if (!o.quiet) {
        std::cout << format_config(cfg);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-forming inverter unbalance studies"};
    app.require_subcommand(1);
    Options o;
    if (const char* env = std::getenv("MGSIM_OUT"); env && *env) {
        o.out = env;
    } else {
        o.out = "out";
    }

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("--config", o.config, "configuration file (INI)");
        if (need_config) {
            c->required()->check(CLI::ExistingFile);
        }
        sub->add_option("--out", o.out, "output directory (default ./out or $MGSIM_OUT)");
        sub->add_flag("--svg", o.svg, "also write SVG charts");
        sub->add_flag("--quiet", o.quiet, "suppress console summary");
    };
    auto* step = app.add_subcommand("step-compare", "load step under both control schemes");
    auto* sweep = app.add_subcommand("puf-sweep", "VUF against PUF for the three transformer setups");
    auto* prof = app.add_subcommand("profile", "play back a load/PV profile");
    auto* val = app.add_subcommand("validate-config", "check a configuration (stdin if no --config)");
    add_common(step, true);
    add_common(sweep, true);
    add_common(prof, true);
    add_common(val, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kInvalid;
    }

    try {
        if (step->parsed()) {
            return run_step_compare(o);
        }
        if (sweep->parsed()) {
            return run_puf_sweep(o);
        }
        if (prof->parsed()) {
            return run_profile(o);
        }
        return run_validate(o);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << " (step " << e.step() << ", t = " << e.time_s() << " s)\n";
        return kDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
}
