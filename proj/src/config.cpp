#include "fracsteer/config.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "fracsteer/scenario.hpp"

namespace fracsteer::cfg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Entry {
    std::string value;
    int line;
};

double parse_double(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": expected a number for '" + key +
                              "', got '" + v + "'",
                          line);
    }
}

long long parse_int(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": expected an integer for '" + key +
                              "', got '" + v + "'",
                          line);
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": expected an unsigned integer for '" +
                              key + "', got '" + v + "'",
                          line);
    }
}

bool parse_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(
        "line " + std::to_string(line) + ": expected true/false for '" + key + "', got '" + v + "'",
        line);
}

std::vector<double> parse_list(const std::string& v, const std::string& key, int line) {
    std::vector<double> out;
    std::istringstream is(v);
    std::string tok;
    while (is >> tok) out.push_back(parse_double(tok, key, line));
    if (out.empty())
        throw ConfigError("line " + std::to_string(line) + ": empty list for '" + key + "'", line);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    std::map<std::string, Entry> entries;
    std::string section;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    int scenario_line = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header",
                                  line_no);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'",
                              line_no);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key", line_no);
        std::string full = section.empty() ? key : section + "." + key;
        auto it = entries.find(full);
        if (it != entries.end())
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + full +
                                  "' (first set at line " + std::to_string(it->second.line) + ")",
                              line_no);
        entries[full] = {value, line_no};
        if (full == "run.scenario") scenario_line = line_no;
    }

    RunConfig c;
    c.scenario.clear();

    auto take = [&](const char* key) -> const Entry* {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        return &it->second;
    };
    auto mark_done = [&](const char* key) { entries.erase(key); };

    auto set_d = [&](const char* key, double* dst, auto validate) {
        if (const Entry* e = take(key)) {
            double v = parse_double(e->value, key, e->line);
            validate(v, e->line);
            *dst = v;
            mark_done(key);
        }
    };
    auto set_i = [&](const char* key, int* dst, auto validate) {
        if (const Entry* e = take(key)) {
            long long v = parse_int(e->value, key, e->line);
            validate(v, e->line);
            *dst = static_cast<int>(v);
            mark_done(key);
        }
    };
    auto no_check_d = [](double, int) {};
    auto positive_d = [&](const char* key) {
        return [key](double v, int line) {
            if (!(v > 0.0))
                throw ConfigError(
                    "line " + std::to_string(line) + ": '" + key + "' must be positive", line);
        };
    };
    auto positive_i = [&](const char* key) {
        return [key](long long v, int line) {
            if (v < 1)
                throw ConfigError(
                    "line " + std::to_string(line) + ": '" + key + "' must be at least 1", line);
        };
    };

    if (const Entry* e = take("run.scenario")) {
        if (!scenario::known_scenario(e->value))
            throw ConfigError("line " + std::to_string(e->line) + ": unknown scenario '" +
                                  e->value + "' (heat5, heat5-linear, zero)",
                              e->line);
        c.scenario = e->value;
        mark_done("run.scenario");
    } else {
        throw ConfigError("missing required key 'run.scenario'", 0);
    }
    if (const Entry* e = take("run.seed")) {
        c.seed = parse_u64(e->value, "run.seed", e->line);
        mark_done("run.seed");
    }
    if (const Entry* e = take("run.out")) {
        c.out_dir = e->value;
        mark_done("run.out");
    }
    set_i("run.replicates", &c.replicates, positive_i("run.replicates"));

    set_d("model.q", &c.q, [](double v, int line) {
        if (!(v > 0.5) || !(v < 1.0))
            throw ConfigError("line " + std::to_string(line) + ": q must lie in (1/2,1)", line);
    });
    set_d("model.hurst", &c.hurst, [](double v, int line) {
        if (!(v > 0.5) || !(v < 1.0))
            throw ConfigError("line " + std::to_string(line) + ": hurst must lie in (1/2,1)", line);
    });
    set_i("model.modes", &c.modes, positive_i("model.modes"));
    if (const Entry* e = take("model.partition")) {
        c.partition = parse_list(e->value, "model.partition", e->line);
        if (c.partition.size() % 2 == 0)
            throw ConfigError("line " + std::to_string(e->line) +
                                  ": partition needs t_1 s_1 ... t_m s_m T (odd count)",
                              e->line);
        double prev = 0.0;
        for (double x : c.partition) {
            if (!(x > prev))
                throw ConfigError("line " + std::to_string(e->line) +
                                      ": partition points must interleave strictly increasing",
                                  e->line);
            prev = x;
        }
        mark_done("model.partition");
    }
    set_d("model.dt", &c.dt, positive_d("model.dt"));
    set_d("model.tau_max", &c.tau_max, positive_d("model.tau_max"));
    set_d("model.offset_step", &c.offset_step, positive_d("model.offset_step"));
    set_d("model.radius", &c.radius, positive_d("model.radius"));

    set_d("scenario.f_scale", &c.f_scale, no_check_d);
    set_d("scenario.g_scale", &c.g_scale, no_check_d);
    set_d("scenario.k_scale", &c.k_scale, no_check_d);
    set_d("scenario.sigma_scale", &c.sigma_scale, no_check_d);
    set_d("scenario.history_scale", &c.history_scale, no_check_d);
    set_d("scenario.target_scale", &c.target_scale, no_check_d);
    set_d("scenario.actuator_scale", &c.actuator_scale, no_check_d);
    if (const Entry* e = take("scenario.final_only")) {
        c.final_only = parse_bool(e->value, "scenario.final_only", e->line);
        mark_done("scenario.final_only");
    }

    if (const Entry* e = take("noise.fbm_generator")) {
        if (e->value != "cholesky" && e->value != "volterra")
            throw ConfigError("line " + std::to_string(e->line) +
                                  ": fbm_generator must be cholesky or volterra",
                              e->line);
        c.fbm_generator = e->value;
        mark_done("noise.fbm_generator");
    }

    if (const Entry* e = take("sweep.lambdas")) {
        c.lambdas = parse_list(e->value, "sweep.lambdas", e->line);
        for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
            if (!(c.lambdas[i] > 0.0))
                throw ConfigError(
                    "line " + std::to_string(e->line) + ": lambdas must be positive", e->line);
            if (i > 0 && !(c.lambdas[i] < c.lambdas[i - 1]))
                throw ConfigError("line " + std::to_string(e->line) +
                                      ": lambdas must be strictly decreasing",
                                  e->line);
        }
        mark_done("sweep.lambdas");
    }

    set_d("tolerances.picard_tol", &c.picard_tol, positive_d("tolerances.picard_tol"));
    set_i("tolerances.picard_max_iter", &c.picard_max_iter,
          positive_i("tolerances.picard_max_iter"));
    set_d("tolerances.outer_tol", &c.outer_tol, positive_d("tolerances.outer_tol"));
    set_i("tolerances.outer_max_iter", &c.outer_max_iter,
          positive_i("tolerances.outer_max_iter"));
    set_d("tolerances.tail_tol", &c.tail_tol, positive_d("tolerances.tail_tol"));

    if (!entries.empty()) {
        const auto& [key, entry] = *entries.begin();
        throw ConfigError(
            "line " + std::to_string(entry.line) + ": unknown key '" + key + "'", entry.line);
    }
    (void)scenario_line;
    return c;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "[run]\n";
    os << "scenario = " << c.scenario << "\n";
    os << "seed = " << c.seed << "\n";
    os << "out = " << c.out_dir << "\n";
    os << "replicates = " << c.replicates << "\n";
    os << "[model]\n";
    os << "q = " << fmt(c.q) << "\n";
    os << "hurst = " << fmt(c.hurst) << "\n";
    os << "modes = " << c.modes << "\n";
    os << "partition =";
    for (double x : c.partition) os << " " << fmt(x);
    os << "\n";
    os << "dt = " << fmt(c.dt) << "\n";
    os << "tau_max = " << fmt(c.tau_max) << "\n";
    os << "offset_step = " << fmt(c.offset_step) << "\n";
    os << "radius = " << fmt(c.radius) << "\n";
    os << "[scenario]\n";
    os << "f_scale = " << fmt(c.f_scale) << "\n";
    os << "g_scale = " << fmt(c.g_scale) << "\n";
    os << "k_scale = " << fmt(c.k_scale) << "\n";
    os << "sigma_scale = " << fmt(c.sigma_scale) << "\n";
    os << "history_scale = " << fmt(c.history_scale) << "\n";
    os << "target_scale = " << fmt(c.target_scale) << "\n";
    os << "actuator_scale = " << fmt(c.actuator_scale) << "\n";
    os << "final_only = " << (c.final_only ? "true" : "false") << "\n";
    os << "[noise]\n";
    os << "fbm_generator = " << c.fbm_generator << "\n";
    os << "[sweep]\n";
    os << "lambdas =";
    for (double x : c.lambdas) os << " " << fmt(x);
    os << "\n";
    os << "[tolerances]\n";
    os << "picard_tol = " << fmt(c.picard_tol) << "\n";
    os << "picard_max_iter = " << c.picard_max_iter << "\n";
    os << "outer_tol = " << fmt(c.outer_tol) << "\n";
    os << "outer_max_iter = " << c.outer_max_iter << "\n";
    os << "tail_tol = " << fmt(c.tail_tol) << "\n";
    return os.str();
}

}  // namespace fracsteer::cfg
