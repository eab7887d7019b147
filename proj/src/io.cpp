#include "mgsim/io.hpp"

#include "mgsim/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace mgsim {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string fmt(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.empty() || ec != std::errc() || ptr != last) {
        throw ConfigError("'" + t + "' is not a number");
    }
    if (!std::isfinite(v)) {
        throw ConfigError("value must be finite");
    }
    return v;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_double(item));
    }
    if (out.empty()) {
        throw ConfigError("expected a comma-separated list of numbers");
    }
    return out;
}

std::string format_list(std::span<const double> v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        out += (k ? ", " : "") + fmt(v[k]);
    }
    return out;
}

bool parse_bool(const std::string& text) {
    const std::string t = lower(trim(text));
    if (t == "true" || t == "yes" || t == "on" || t == "1") {
        return true;
    }
    if (t == "false" || t == "no" || t == "off" || t == "0") {
        return false;
    }
    throw ConfigError("'" + t + "' is not a boolean");
}

enum class Range { any, positive, non_negative };

double checked(double v, Range r) {
    if (r == Range::positive && !(v > 0.0)) {
        throw ConfigError("must be positive");
    }
    if (r == Range::non_negative && v < 0.0) {
        throw ConfigError("must not be negative");
    }
    return v;
}

struct Key {
    std::string section;
    std::string name;
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

template <typename Field>
Key number(std::string section, std::string name, Field field, Range r) {
    return {std::move(section), std::move(name),
            [field, r](Config& c, const std::string& v) { field(c) = checked(parse_double(v), r); },
            [field](const Config& c) { return fmt(field(const_cast<Config&>(c))); }};
}

template <typename Field>
Key optional_number(std::string section, std::string name, Field field, Range r) {
    return {std::move(section), std::move(name),
            [field, r](Config& c, const std::string& v) {
                if (lower(trim(v)) == "auto") {
                    field(c).reset();
                } else {
                    field(c) = checked(parse_double(v), r);
                }
            },
            [field](const Config& c) {
                const auto& f = field(const_cast<Config&>(c));
                return f ? fmt(*f) : std::string("auto");
            }};
}

template <typename Field>
Key triple(std::string section, std::string name, Field field) {
    return {std::move(section), std::move(name),
            [field](Config& c, const std::string& v) {
                const std::vector<double> l = parse_list(v);
                if (l.size() != 3) {
                    throw ConfigError("expected three comma-separated values");
                }
                field(c) = {l[0], l[1], l[2]};
            },
            [field](const Config& c) { return format_list(field(const_cast<Config&>(c))); }};
}

template <typename Field>
Key flag(std::string section, std::string name, Field field) {
    return {std::move(section), std::move(name),
            [field](Config& c, const std::string& v) { field(c) = parse_bool(v); },
            [field](const Config& c) { return std::string(field(const_cast<Config&>(c)) ? "true" : "false"); }};
}

// Real and imaginary parts of a complex field as two keys.
template <typename Field>
std::array<Key, 2> complex_parts(const std::string& section, const std::string& re, const std::string& im,
                                 Field field, Range r) {
    return {number(section, re, [field](Config& c) -> double& { return reinterpret_cast<double(&)[2]>(field(c))[0]; }, r),
            number(section, im, [field](Config& c) -> double& { return reinterpret_cast<double(&)[2]>(field(c))[1]; }, r)};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        auto add2 = [&k](std::array<Key, 2> p) {
            k.push_back(std::move(p[0]));
            k.push_back(std::move(p[1]));
        };
        auto pl = [](Config& c) -> PlantConfig& { return c.system.plant; };
        auto tr = [](Config& c) -> TransformerConfig& { return c.system.plant.transformer; };
        auto ct = [](Config& c) -> ControllerConfig& { return c.system.control; };
        auto ex = [](Config& c) -> ExperimentConfig& { return c.experiment; };

        k.push_back(number("system", "frequency_hz", [=](Config& c) -> double& { return pl(c).bases.frequency_hz; }, Range::positive));
        k.push_back(number("system", "s_base_va", [=](Config& c) -> double& { return pl(c).bases.s_base_va; }, Range::positive));
        k.push_back(number("system", "v_pcc_ll_v", [=](Config& c) -> double& { return pl(c).bases.v_ll_pcc_v; }, Range::positive));
        k.push_back(number("system", "v_inverter_ll_v", [=](Config& c) -> double& { return pl(c).bases.v_ll_inverter_v; }, Range::positive));
        k.push_back(number("system", "dt_s", [=](Config& c) -> double& { return pl(c).dt; }, Range::positive));
        k.push_back(number("system", "pcc_bleed_pu", [=](Config& c) -> double& { return pl(c).pcc_bleed_pu; }, Range::positive));
        k.push_back(number("system", "load_ramp_s", [=](Config& c) -> double& { return pl(c).load_ramp_s; }, Range::non_negative));

        k.push_back(number("filter", "lf_henry", [=](Config& c) -> double& { return pl(c).filter.lf_henry; }, Range::positive));
        k.push_back(number("filter", "cf_farad", [=](Config& c) -> double& { return pl(c).filter.cf_farad; }, Range::positive));
        k.push_back(number("filter", "rf_ohm", [=](Config& c) -> double& { return pl(c).filter.rf_ohm; }, Range::positive));

        k.push_back({"transformer", "connection",
                     [=](Config& c, const std::string& v) {
                         const std::string t = lower(trim(v));
                         if (t == "y-yg") {
                             tr(c).connection = Connection::y_yg;
                         } else if (t == "delta-yg") {
                             tr(c).connection = Connection::delta_yg;
                         } else {
                             throw ConfigError("expected y-yg or delta-yg");
                         }
                     },
                     [=](const Config& c) {
                         return std::string(tr(const_cast<Config&>(c)).connection == Connection::y_yg ? "y-yg" : "delta-yg");
                     }});
        k.push_back(flag("transformer", "grounding_transformer", [=](Config& c) -> bool& { return tr(c).grounding_transformer; }));
        k.push_back(number("transformer", "s_rated_va", [=](Config& c) -> double& { return tr(c).s_rated_va; }, Range::positive));
        add2(complex_parts("transformer", "r1_pu", "x1_pu", [=](Config& c) -> Complex& { return tr(c).z1_pu; }, Range::non_negative));
        add2(complex_parts("transformer", "r2_pu", "x2_pu", [=](Config& c) -> Complex& { return tr(c).z2_pu; }, Range::non_negative));
        add2(complex_parts("transformer", "rm_pu", "xm_pu", [=](Config& c) -> Complex& { return tr(c).zm_pu; }, Range::non_negative));
        k.push_back(number("transformer", "zm0_scale", [=](Config& c) -> double& { return tr(c).zm0_scale; }, Range::positive));
        add2(complex_parts("transformer", "rn_ohm", "xn_ohm", [=](Config& c) -> Complex& { return tr(c).zn_ohm; }, Range::non_negative));
        k.push_back(number("transformer", "z_open_pu", [=](Config& c) -> double& { return tr(c).z_open_pu; }, Range::positive));
        k.push_back(number("transformer", "gt_s_rated_va", [=](Config& c) -> double& { return tr(c).gt_s_rated_va; }, Range::positive));
        k.push_back(number("transformer", "gt_z0_pu", [=](Config& c) -> double& { return tr(c).gt_z0_pu; }, Range::positive));
        k.push_back(number("transformer", "gt_x_over_r", [=](Config& c) -> double& { return tr(c).gt_x_over_r; }, Range::positive));
        add2(complex_parts("transformer", "gt_rm_pu", "gt_xm_pu", [=](Config& c) -> Complex& { return tr(c).gt_zm_pu; }, Range::non_negative));

        k.push_back({"controller", "scheme",
                     [=](Config& c, const std::string& v) {
                         const std::string t = lower(trim(v));
                         if (t == "srf") {
                             ct(c).scheme = Scheme::srf;
                         } else if (t == "rrf") {
                             ct(c).scheme = Scheme::rrf;
                         } else {
                             throw ConfigError("expected srf or rrf");
                         }
                     },
                     [=](const Config& c) { return std::string(ct(const_cast<Config&>(c)).scheme == Scheme::srf ? "srf" : "rrf"); }});
        k.push_back(number("controller", "kpi", [=](Config& c) -> double& { return ct(c).kpi; }, Range::non_negative));
        k.push_back(number("controller", "kri", [=](Config& c) -> double& { return ct(c).kri; }, Range::non_negative));
        k.push_back(number("controller", "kpv", [=](Config& c) -> double& { return ct(c).kpv; }, Range::non_negative));
        k.push_back(number("controller", "krv", [=](Config& c) -> double& { return ct(c).krv; }, Range::non_negative));
        k.push_back(optional_number("controller", "rrf_kpi", [=](Config& c) -> std::optional<double>& { return ct(c).rrf_kpi; }, Range::non_negative));
        k.push_back(optional_number("controller", "rrf_kii", [=](Config& c) -> std::optional<double>& { return ct(c).rrf_kii; }, Range::non_negative));
        k.push_back(optional_number("controller", "rrf_kpv", [=](Config& c) -> std::optional<double>& { return ct(c).rrf_kpv; }, Range::non_negative));
        k.push_back(optional_number("controller", "rrf_kiv", [=](Config& c) -> std::optional<double>& { return ct(c).rrf_kiv; }, Range::non_negative));
        k.push_back(number("controller", "notch_q", [=](Config& c) -> double& { return ct(c).notch_q; }, Range::positive));
        k.push_back(number("controller", "np", [=](Config& c) -> double& { return ct(c).np; }, Range::non_negative));
        k.push_back(number("controller", "nq", [=](Config& c) -> double& { return ct(c).nq; }, Range::non_negative));
        k.push_back(number("controller", "k2pf", [=](Config& c) -> double& { return ct(c).k2pf; }, Range::non_negative));
        k.push_back(number("controller", "k2if", [=](Config& c) -> double& { return ct(c).k2if; }, Range::non_negative));
        k.push_back(number("controller", "k2pv", [=](Config& c) -> double& { return ct(c).k2pv; }, Range::non_negative));
        k.push_back(number("controller", "k2iv", [=](Config& c) -> double& { return ct(c).k2iv; }, Range::non_negative));
        k.push_back(number("controller", "power_filter_hz", [=](Config& c) -> double& { return ct(c).power_filter_hz; }, Range::positive));
        k.push_back(number("controller", "current_limit_pu", [=](Config& c) -> double& { return ct(c).current_limit_pu; }, Range::positive));
        k.push_back(optional_number("controller", "v_ceiling_pu", [=](Config& c) -> std::optional<double>& { return ct(c).v_ceiling_pu; }, Range::positive));
        k.push_back(number("controller", "v_dc_v", [=](Config& c) -> double& { return ct(c).v_dc_v; }, Range::positive));
        k.push_back({"controller", "regulated_node",
                     [=](Config& c, const std::string& v) {
                         const std::string t = lower(trim(v));
                         if (t == "pcc") {
                             ct(c).regulated_node = RegulatedNode::pcc;
                         } else if (t == "capacitor") {
                             ct(c).regulated_node = RegulatedNode::capacitor;
                         } else {
                             throw ConfigError("expected pcc or capacitor");
                         }
                     },
                     [=](const Config& c) {
                         return std::string(ct(const_cast<Config&>(c)).regulated_node == RegulatedNode::pcc ? "pcc" : "capacitor");
                     }});
        k.push_back(flag("controller", "feedforward", [=](Config& c) -> bool& { return ct(c).feedforward; }));

        k.push_back(triple("experiment", "pre_step_pu", [=](Config& c) -> std::array<double, 3>& { return ex(c).pre_step_pu; }));
        k.push_back(triple("experiment", "post_step_pu", [=](Config& c) -> std::array<double, 3>& { return ex(c).post_step_pu; }));
        k.push_back(number("experiment", "step_time_s", [=](Config& c) -> double& { return ex(c).step_time_s; }, Range::positive));
        k.push_back(number("experiment", "duration_s", [=](Config& c) -> double& { return ex(c).duration_s; }, Range::positive));
        k.push_back(number("experiment", "settling_band", [=](Config& c) -> double& { return ex(c).settling_band; }, Range::positive));
        k.push_back(number("experiment", "settling_floor_pu", [=](Config& c) -> double& { return ex(c).settling_floor_pu; }, Range::non_negative));
        k.push_back({"experiment", "puf_points",
                     [=](Config& c, const std::string& v) { ex(c).sweep.puf_points = parse_list(v); },
                     [=](const Config& c) { return format_list(ex(const_cast<Config&>(c)).sweep.puf_points); }});
        k.push_back(number("experiment", "p_avg_pu", [=](Config& c) -> double& { return ex(c).sweep.p_avg_pu; }, Range::non_negative));
        k.push_back(number("experiment", "settle_s", [=](Config& c) -> double& { return ex(c).sweep.settle_s; }, Range::positive));
        k.push_back(number("experiment", "max_s", [=](Config& c) -> double& { return ex(c).sweep.max_s; }, Range::positive));
        k.push_back(number("experiment", "steady_tol", [=](Config& c) -> double& { return ex(c).sweep.steady_tol; }, Range::positive));
        k.push_back({"experiment", "threads",
                     [=](Config& c, const std::string& v) {
                         const double d = parse_double(v);
                         if (d < 0.0 || d != std::floor(d) || d > 1024.0) {
                             throw ConfigError("expected a whole number between 0 and 1024");
                         }
                         ex(c).sweep.threads = static_cast<unsigned>(d);
                     },
                     [=](const Config& c) { return std::to_string(ex(const_cast<Config&>(c)).sweep.threads); }});
        k.push_back({"experiment", "profile", [=](Config& c, const std::string& v) { ex(c).profile = trim(v); },
                     [=](const Config& c) { return ex(const_cast<Config&>(c)).profile.string(); }});
        k.push_back(number("experiment", "dwell_s", [=](Config& c) -> double& { return ex(c).dwell_s; }, Range::positive));
        return k;
    }();
    return table;
}

std::string where(const std::filesystem::path& origin, int line) {
    const std::string name = origin.empty() ? std::string("<config>") : origin.string();
    return line > 0 ? name + ":" + std::to_string(line) : name;
}

// Cross-field checks that no single key can make.
void validate(const Config& cfg, const std::filesystem::path& origin) {
    auto fail = [&](const std::string& key, const std::string& what) {
        throw ConfigError(where(origin, 0) + ": key '" + key + "': " + what);
    };
    try {
        (void)samples_per_cycle(cfg.system.plant.bases.frequency_hz, cfg.system.plant.dt);
    } catch (const ConfigError& e) {
        fail("dt_s", e.what());
    }
    try {
        (void)network_elements(cfg.system.plant);
    } catch (const ConfigError& e) {
        throw ConfigError(where(origin, 0) + ": " + e.what());
    }
    const double nyquist = 0.5 / cfg.system.plant.dt;
    if (2.0 * cfg.system.plant.bases.frequency_hz >= nyquist) {
        fail("dt_s", "step too coarse for the 2f notch");
    }
    if (!(cfg.experiment.duration_s > cfg.experiment.step_time_s)) {
        fail("duration_s", "must exceed step_time_s");
    }
    const auto& pts = cfg.experiment.sweep.puf_points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (pts[k] < 0.0 || pts[k] > 0.7) {
            fail("puf_points", "values must lie in [0, 0.7]");
        }
        if (k > 0 && !(pts[k] > pts[k - 1])) {
            fail("puf_points", "values must be strictly increasing");
        }
    }
    if (cfg.experiment.sweep.max_s < cfg.experiment.sweep.settle_s) {
        fail("max_s", "must be at least settle_s");
    }
}

}  // namespace

Config parse_config_text(const std::string& text, const std::filesystem::path& origin) {
    Config cfg;
    std::set<std::string> sections;
    for (const Key& k : keys()) {
        sections.insert(k.section);
    }
    std::set<std::pair<std::string, std::string>> seen;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (line == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) {
            raw.erase(0, 3);
        }
        std::string s = trim(raw);
        if (s.empty() || s[0] == '#' || s[0] == ';') {
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw ConfigError(where(origin, line) + ": malformed section header");
            }
            section = lower(trim(s.substr(1, s.size() - 2)));
            if (!sections.count(section)) {
                throw ConfigError(where(origin, line) + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where(origin, line) + ": expected key = value");
        }
        const std::string key = lower(trim(s.substr(0, eq)));
        std::string value = s.substr(eq + 1);
        const auto hash = value.find_first_of("#;");
        if (hash != std::string::npos) {
            value.erase(hash);
        }
        value = trim(value);
        if (section.empty()) {
            throw ConfigError(where(origin, line) + ": key '" + key + "' outside any section");
        }
        const auto it = std::find_if(keys().begin(), keys().end(),
                                     [&](const Key& k) { return k.section == section && k.name == key; });
        if (it == keys().end()) {
            throw ConfigError(where(origin, line) + ": unknown key '" + key + "' in [" + section + "]");
        }
        if (!seen.insert({section, key}).second) {
            throw ConfigError(where(origin, line) + ": key '" + key + "' given twice");
        }
        try {
            it->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where(origin, line) + ": key '" + key + "': " + e.what());
        }
    }

    auto& profile = cfg.experiment.profile;
    if (!profile.empty() && profile.is_relative() && !origin.empty()) {
        profile = origin.parent_path() / profile;
    }
    validate(cfg, origin);
    return cfg;
}

Config parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string format_config(const Config& cfg) {
    std::string out;
    std::string section;
    for (const Key& k : keys()) {
        if (k.section != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + k.section + "]\n";
            section = k.section;
        }
        out += k.name + " = " + k.get(cfg) + "\n";
    }
    return out;
}

StepCompareConfig step_compare_config(const Config& cfg) {
    const Bases& b = cfg.system.plant.bases;
    const auto& e = cfg.experiment;
    StepCompareConfig sc;
    sc.pre_step = load_from_pu(b, e.pre_step_pu[0], e.pre_step_pu[1], e.pre_step_pu[2]);
    sc.post_step = load_from_pu(b, e.post_step_pu[0], e.post_step_pu[1], e.post_step_pu[2]);
    sc.step_time_s = e.step_time_s;
    sc.duration_s = e.duration_s;
    sc.settling_band = e.settling_band;
    sc.settling_floor_pu = e.settling_floor_pu;
    return sc;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place at '" + path.string() + "'");
    }
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double parse_cell(const std::string& s) {
    if (s == "nan" || s.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("'" + s + "' is not a number");
    }
    return v;
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    char c = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) {
            rows.push_back(std::move(row));
        }
        row.clear();
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            if (in.peek() == '\n') {
                in.get(c);
            }
            end_row();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) {
        throw ConfigError("CSV ends inside a quoted field");
    }
    if (field_started || !row.empty()) {
        end_row();
    }
    return rows;
}

void write_timeseries(const TimeSeries& ts, const std::filesystem::path& path) {
    for (const auto& c : ts.columns) {
        if (c.size() != ts.size()) {
            throw ConfigError("time series channels differ in length");
        }
    }
    std::string out = "t_s";
    for (const auto& n : ts.names) {
        out += "," + csv_field(n);
    }
    out += "\n";
    for (std::size_t k = 0; k < ts.size(); ++k) {
        out += fmt(ts.time(k));
        for (const auto& c : ts.columns) {
            out += "," + fmt(c[k]);
        }
        out += "\n";
    }
    write_file(path, out);
}

TimeSeries read_timeseries(const std::filesystem::path& path) {
    std::istringstream in(read_all(path));
    const auto rows = parse_csv(in);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "t_s") {
        throw ConfigError("'" + path.string() + "' is not a time series (first column must be t_s)");
    }
    TimeSeries ts;
    ts.names.assign(rows[0].begin() + 1, rows[0].end());
    ts.columns.assign(ts.names.size(), {});
    std::vector<double> t;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) {
            throw ConfigError("'" + path.string() + "' row " + std::to_string(r + 1) + " has the wrong width");
        }
        t.push_back(parse_cell(rows[r][0]));
        for (std::size_t c = 0; c < ts.names.size(); ++c) {
            ts.columns[c].push_back(parse_cell(rows[r][c + 1]));
        }
    }
    if (!t.empty()) {
        ts.t0 = t.front();
    }
    if (t.size() > 1) {
        ts.dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    }
    return ts;
}

void write_sweep(const SweepResult& sr, const std::filesystem::path& path) {
    std::string out = "config,puf,vuf\n";
    for (const auto& v : transformer_variants()) {
        const auto it = std::find_if(sr.curves.begin(), sr.curves.end(),
                                     [&](const SweepCurve& c) { return c.label == v.label; });
        if (it == sr.curves.end()) {
            continue;
        }
        for (const auto& p : it->points) {
            out += v.label + "," + fmt(p.puf) + "," + (p.error.empty() ? fmt(p.vuf) : std::string()) + "\n";
        }
    }
    write_file(path, out);
}

void write_step_metrics(const StepCompareResult& r, const std::filesystem::path& path) {
    std::string out =
        "scheme,ns_settling_s,peak_rms_pu,peak_ns_pu,residual_ns_pu,residual_zs_pu,"
        "v_pos_pu,v_neg_re_pu,v_neg_im_pu,v_zero_re_pu,v_zero_im_pu\n";
    auto row = [&](const char* name, const StepMetrics& m) {
        out += std::string(name) + "," + (m.ns_settling_s ? fmt(*m.ns_settling_s) : std::string("not_settled")) + "," +
               fmt(m.peak_rms_pu) + "," + fmt(m.peak_ns_pu) + "," + fmt(m.residual_ns_pu) + "," +
               fmt(m.residual_zs_pu) + "," + fmt(m.final_v_seq.pos.real()) + "," + fmt(m.final_v_seq.neg.real()) +
               "," + fmt(m.final_v_seq.neg.imag()) + "," + fmt(m.final_v_seq.zero.real()) + "," +
               fmt(m.final_v_seq.zero.imag()) + "\n";
    };
    row("srf", r.srf_metrics);
    row("rrf", r.rrf_metrics);
    write_file(path, out);
}

void write_profile_result(const ProfileResult& r, const std::filesystem::path& path) {
    std::string out = "interval,net_p_a_w,net_p_b_w,net_p_c_w,puf,puf_measured,vuf,flagged\n";
    for (const auto& iv : r.intervals) {
        out += csv_field(iv.label) + "," + fmt(iv.net_w[0]) + "," + fmt(iv.net_w[1]) + "," + fmt(iv.net_w[2]) + "," +
               fmt(iv.puf) + "," + fmt(iv.puf_measured) + "," + fmt(iv.vuf) + "," + (iv.flagged ? "1" : "0") + "\n";
    }
    write_file(path, out);
}

std::vector<ProfileInterval> parse_profile(std::istream& in, const std::string& origin) {
    static const std::vector<std::string> header{"interval", "load_p_a_w", "load_p_b_w", "load_p_c_w",
                                                 "pv_p_a_w", "pv_p_b_w", "pv_p_c_w"};
    const auto rows = parse_csv(in);
    if (rows.empty()) {
        throw ConfigError(origin + ": profile is empty");
    }
    std::vector<std::string> got;
    for (const auto& h : rows[0]) {
        got.push_back(lower(trim(h)));
    }
    if (got != header) {
        throw ConfigError(origin + ": profile header must be interval,load_p_a_w,load_p_b_w,load_p_c_w,"
                                   "pv_p_a_w,pv_p_b_w,pv_p_c_w");
    }
    std::vector<ProfileInterval> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw ConfigError(origin + ": line " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                              " fields, expected 7");
        }
        ProfileInterval iv;
        iv.label = trim(rows[r][0]);
        try {
            for (int k = 0; k < 3; ++k) {
                iv.load_w[k] = parse_double(rows[r][1 + k]);
                iv.pv_w[k] = parse_double(rows[r][4 + k]);
                if (iv.load_w[k] < 0.0 || iv.pv_w[k] < 0.0) {
                    throw ConfigError("load and PV powers must not be negative");
                }
            }
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ": line " + std::to_string(r + 1) + ": " + e.what());
        }
        out.push_back(std::move(iv));
    }
    if (out.empty()) {
        throw ConfigError(origin + ": profile has no intervals");
    }
    return out;
}

std::vector<ProfileInterval> read_profile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read profile '" + path.string() + "'");
    }
    return parse_profile(in, path.string());
}

}  // namespace mgsim
