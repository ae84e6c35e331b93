#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hamlevy/errors.hpp"
#include "hamlevy/field.hpp"
#include "hamlevy/levy.hpp"
#include "hamlevy/solver.hpp"
#include "hamlevy/stats.hpp"
#include "hamlevy/theory.hpp"

#ifndef HAMLEVY_BUILD_ID
#define HAMLEVY_BUILD_ID "unversioned"
#endif

namespace hamlevy {

using ordered_json = nlohmann::ordered_json;

struct HelpRequested {};

struct RunConfig {
    std::string command;
    JumpLawSpec law = JumpLawSpec::symmetric_two_point(1.0, 1.0);
    std::vector<double> times{1.0};
    std::vector<double> radii{5.0};
    std::vector<PointTarget> probes;
    double alpha = 1.0;
    double m2 = 0.0; // 0 = derive from the law
    std::uint64_t seed = 42;
    std::size_t paths = 1000;
    unsigned threads = 0;
    std::size_t fuzz_cases = 1000;
    std::size_t chaos_samples = 200000;
    bool gate = false;
    std::string out_dir = "out";
    std::vector<std::string> formats{"csv", "json"};
};

namespace cli_detail {

inline const std::set<std::string>& command_names() {
    static const std::set<std::string> names{"moments",     "simulate", "variance",
                                            "clt",         "derivatives", "chaos",
                                            "bounds",      "covariance"};
    return names;
}

struct LawStage {
    std::string family = "symmetric-two-point";
    double a = 1.0;
    double lambda = 1.0;
    double a_plus = 1.0;
    double a_minus = 1.0;
    double p_up = 0.0; // <= 0 means derive from the centering constraint
    std::vector<std::pair<double, double>> atoms;
    double c1 = 1.0;
    double exp_a = 0.5;
    double c2 = 1.0;
    double exp_b = 3.0;
    double eps = 0.05;
    std::set<std::string> provided;
};

inline JumpLawSpec build_law(const LawStage& st) {
    static const std::map<std::string, std::set<std::string>> family_keys = {
        {"symmetric-two-point", {"a", "lambda"}},
        {"centered-two-point", {"a_plus", "a_minus", "p_up", "lambda"}},
        {"discrete", {"atoms"}},
        {"power-density", {"c1", "exp_a", "c2", "exp_b", "eps"}},
    };
    const auto it = family_keys.find(st.family);
    if (it == family_keys.end())
        throw SchemaError("law.family: unknown family '" + st.family + "'");
    for (const std::string& k : st.provided)
        if (k != "family" && it->second.count(k) == 0)
            throw ConflictError("law." + k + ": does not apply to family " + st.family);
    if (st.family == "symmetric-two-point")
        return JumpLawSpec::symmetric_two_point(st.a, st.lambda);
    if (st.family == "centered-two-point")
        return JumpLawSpec::centered_two_point(st.a_plus, st.a_minus, st.p_up, st.lambda);
    if (st.family == "discrete") return JumpLawSpec::discrete(st.atoms);
    return JumpLawSpec::power_density(st.c1, st.exp_a, st.c2, st.exp_b, st.eps);
}

inline double as_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path + ": expected a number");
    return j.get<double>();
}

inline std::uint64_t as_count(const ordered_json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0)
        return static_cast<std::uint64_t>(j.get<long long>());
    throw SchemaError(path + ": expected a nonnegative integer");
}

inline bool as_bool(const ordered_json& j, const std::string& path) {
    if (!j.is_boolean()) throw SchemaError(path + ": expected a boolean");
    return j.get<bool>();
}

inline std::string as_string(const ordered_json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError(path + ": expected a string");
    return j.get<std::string>();
}

inline std::vector<double> as_number_array(const ordered_json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline void reject_unknown(const ordered_json& obj, const std::string& path,
                           const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (allowed.count(it.key()) == 0)
            throw SchemaError(path + it.key() + ": unknown key");
}

inline void apply_file(const ordered_json& root, RunConfig& cfg, LawStage& law) {
    if (!root.is_object()) throw SchemaError("config: expected a JSON object");
    reject_unknown(root, "", {"command", "law", "targets", "mc", "output", "gate", "m2"});
    if (root.contains("command")) {
        cfg.command = as_string(root["command"], "command");
        if (command_names().count(cfg.command) == 0)
            throw SchemaError("command: unknown '" + cfg.command + "'");
    }
    if (root.contains("m2")) cfg.m2 = as_number(root["m2"], "m2");
    if (root.contains("gate")) cfg.gate = as_bool(root["gate"], "gate");
    if (root.contains("law")) {
        const auto& l = root["law"];
        if (!l.is_object()) throw SchemaError("law: expected an object");
        reject_unknown(l, "law.",
                       {"family", "a", "lambda", "a_plus", "a_minus", "p_up", "atoms", "c1",
                        "exp_a", "c2", "exp_b", "eps"});
        auto grab = [&](const char* key, double& slot) {
            if (l.contains(key)) {
                slot = as_number(l[key], std::string("law.") + key);
                law.provided.insert(key);
            }
        };
        if (l.contains("family")) {
            law.family = as_string(l["family"], "law.family");
            law.provided.insert("family");
        }
        grab("a", law.a);
        grab("lambda", law.lambda);
        grab("a_plus", law.a_plus);
        grab("a_minus", law.a_minus);
        grab("p_up", law.p_up);
        grab("c1", law.c1);
        grab("exp_a", law.exp_a);
        grab("c2", law.c2);
        grab("exp_b", law.exp_b);
        grab("eps", law.eps);
        if (l.contains("atoms")) {
            const auto& arr = l["atoms"];
            if (!arr.is_array()) throw SchemaError("law.atoms: expected an array of [z, rate] pairs");
            law.atoms.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string p = "law.atoms[" + std::to_string(i) + "]";
                if (!arr[i].is_array() || arr[i].size() != 2)
                    throw SchemaError(p + ": expected a [z, rate] pair");
                law.atoms.emplace_back(as_number(arr[i][0], p + "[0]"),
                                       as_number(arr[i][1], p + "[1]"));
            }
            law.provided.insert("atoms");
        }
    }
    if (root.contains("targets")) {
        const auto& t = root["targets"];
        if (!t.is_object()) throw SchemaError("targets: expected an object");
        reject_unknown(t, "targets.", {"times", "radii", "probes", "alpha"});
        if (t.contains("times")) cfg.times = as_number_array(t["times"], "targets.times");
        if (t.contains("radii")) cfg.radii = as_number_array(t["radii"], "targets.radii");
        if (t.contains("alpha")) cfg.alpha = as_number(t["alpha"], "targets.alpha");
        if (t.contains("probes")) {
            const auto& arr = t["probes"];
            if (!arr.is_array()) throw SchemaError("targets.probes: expected an array of [t, x] pairs");
            cfg.probes.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string p = "targets.probes[" + std::to_string(i) + "]";
                if (!arr[i].is_array() || arr[i].size() != 2)
                    throw SchemaError(p + ": expected a [t, x] pair");
                cfg.probes.push_back(
                    {as_number(arr[i][0], p + "[0]"), as_number(arr[i][1], p + "[1]")});
            }
        }
    }
    if (root.contains("mc")) {
        const auto& m = root["mc"];
        if (!m.is_object()) throw SchemaError("mc: expected an object");
        reject_unknown(m, "mc.", {"seed", "paths", "threads", "chaos_samples", "fuzz_cases"});
        if (m.contains("seed")) cfg.seed = as_count(m["seed"], "mc.seed");
        if (m.contains("paths"))
            cfg.paths = static_cast<std::size_t>(as_count(m["paths"], "mc.paths"));
        if (m.contains("threads"))
            cfg.threads = static_cast<unsigned>(as_count(m["threads"], "mc.threads"));
        if (m.contains("chaos_samples"))
            cfg.chaos_samples =
                static_cast<std::size_t>(as_count(m["chaos_samples"], "mc.chaos_samples"));
        if (m.contains("fuzz_cases"))
            cfg.fuzz_cases = static_cast<std::size_t>(as_count(m["fuzz_cases"], "mc.fuzz_cases"));
    }
    if (root.contains("output")) {
        const auto& o = root["output"];
        if (!o.is_object()) throw SchemaError("output: expected an object");
        reject_unknown(o, "output.", {"directory", "formats"});
        if (o.contains("directory")) cfg.out_dir = as_string(o["directory"], "output.directory");
        if (o.contains("formats")) {
            const auto& arr = o["formats"];
            if (!arr.is_array()) throw SchemaError("output.formats: expected an array of strings");
            cfg.formats.clear();
            for (std::size_t i = 0; i < arr.size(); ++i)
                cfg.formats.push_back(
                    as_string(arr[i], "output.formats[" + std::to_string(i) + "]"));
        }
    }
}

inline ordered_json law_json(const JumpLawSpec& law) {
    ordered_json j;
    j["family"] = law.family_name();
    struct V {
        ordered_json& j;
        void operator()(const SymmetricTwoPoint& f) const {
            j["a"] = f.magnitude;
            j["lambda"] = f.rate;
        }
        void operator()(const CenteredTwoPoint& f) const {
            j["a_plus"] = f.up;
            j["a_minus"] = f.down;
            j["p_up"] = f.p_up;
            j["lambda"] = f.rate;
        }
        void operator()(const DiscreteAtoms& f) const {
            ordered_json arr = ordered_json::array();
            for (const auto& [z, r] : f.atoms) arr.push_back({z, r});
            j["atoms"] = arr;
        }
        void operator()(const PowerDensity& f) const {
            j["c1"] = f.c1;
            j["exp_a"] = f.a;
            j["c2"] = f.c2;
            j["exp_b"] = f.b;
            j["eps"] = f.eps;
        }
    };
    std::visit(V{j}, law.family());
    return j;
}

inline ordered_json json_real(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0.0 ? "inf" : "-inf";
}

inline CovarianceModel resolve_model(const RunConfig& cfg) {
    double m2 = cfg.m2;
    if (!(m2 > 0.0)) m2 = cfg.law.moment_m(2.0);
    if (!std::isfinite(m2) || !(m2 > 0.0))
        throw InvalidLaw("variance intensity m2 is not finite and positive for this law");
    return CovarianceModel(m2);
}

// small CSV builder matching the sample serialization: CRLF, 17 digits
class Csv {
public:
    void header(const std::vector<std::string>& cols) { line(cols); }
    void row(const std::vector<std::string>& cells) { line(cells); }
    static std::string num(double v) { return detail::format_double(v); }
    static std::string count(std::uint64_t v) { return std::to_string(v); }
    const std::string& str() const { return buf_; }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) buf_ += ',';
            buf_ += cells[i];
        }
        buf_ += "\r\n";
    }
    std::string buf_;
};

} // namespace cli_detail

inline ordered_json config_echo(const RunConfig& cfg) {
    ordered_json j;
    j["command"] = cfg.command;
    j["law"] = cli_detail::law_json(cfg.law);
    ordered_json probes = ordered_json::array();
    for (const auto& p : cfg.probes) probes.push_back({p.t, p.x});
    j["targets"] = {{"times", cfg.times},
                    {"radii", cfg.radii},
                    {"probes", probes},
                    {"alpha", cfg.alpha}};
    j["mc"] = {{"seed", cfg.seed},
               {"paths", cfg.paths},
               {"threads", cfg.threads},
               {"chaos_samples", cfg.chaos_samples},
               {"fuzz_cases", cfg.fuzz_cases}};
    j["m2"] = cfg.m2;
    j["output"] = {{"directory", cfg.out_dir}, {"formats", cfg.formats}};
    j["gate"] = cfg.gate;
    j["build"] = HAMLEVY_BUILD_ID;
    return j;
}

inline RunConfig parse_config(int argc, const char* const* argv) {
    namespace cd = cli_detail;
    CLI::App app{"simulation and verification laboratory for a wave equation driven by jump noise",
                 "hamlevy"};
    app.require_subcommand(0, 1);
    for (const std::string& name : cd::command_names())
        app.add_subcommand(name, "run the " + name + " pipeline")->fallthrough();

    std::string config_path;
    cd::LawStage law;
    RunConfig cfg;
    double t_flag = 0.0, s_flag = 0.0, R_flag = 0.0;
    std::vector<double> times_flag, radii_flag;
    std::vector<std::string> formats_flag;

    auto* opt_config = app.add_option("--config", config_path, "JSON run configuration file");
    auto* opt_seed = app.add_option("--seed,--mc.seed", cfg.seed, "master seed");
    auto* opt_paths = app.add_option("--paths,--mc.paths", cfg.paths, "number of paths");
    auto* opt_threads = app.add_option("--threads,--mc.threads", cfg.threads,
                                       "worker threads (0 = hardware)");
    auto* opt_gate = app.add_flag("--gate", cfg.gate, "turn statistical gates on (exit 2 on failure)");
    auto* opt_out = app.add_option("--out,--output.directory", cfg.out_dir, "output directory");
    auto* opt_t = app.add_option("--t", t_flag, "first target time");
    auto* opt_s = app.add_option("--s", s_flag, "second target time");
    auto* opt_R = app.add_option("--R", R_flag, "averaging radius");
    auto* opt_alpha = app.add_option("--alpha,--targets.alpha", cfg.alpha, "moment index in (0,1]");
    auto* opt_m2 = app.add_option("--m2", cfg.m2, "variance intensity override");
    auto* opt_times = app.add_option("--targets.times", times_flag, "target times")->delimiter(',');
    auto* opt_radii = app.add_option("--targets.radii", radii_flag, "radius ladder")->delimiter(',');
    auto* opt_formats =
        app.add_option("--output.formats", formats_flag, "artifact formats")->delimiter(',');
    auto* opt_cases =
        app.add_option("--cases,--mc.fuzz_cases", cfg.fuzz_cases, "fuzz case count");
    auto* opt_chaos = app.add_option("--chaos-samples,--mc.chaos_samples", cfg.chaos_samples,
                                     "simplex samples per chaos order");
    auto* opt_family = app.add_option("--law.family", law.family, "jump law family");
    auto* opt_law_a = app.add_option("--law.a", law.a, "two-point magnitude");
    auto* opt_law_lambda = app.add_option("--law.lambda", law.lambda, "total rate");
    auto* opt_law_ap = app.add_option("--law.a_plus", law.a_plus, "upward jump size");
    auto* opt_law_am = app.add_option("--law.a_minus", law.a_minus, "downward jump size");
    auto* opt_law_pu = app.add_option("--law.p_up", law.p_up, "upward probability");
    auto* opt_law_c1 = app.add_option("--law.c1", law.c1, "small-jump density constant");
    auto* opt_law_ea = app.add_option("--law.exp_a", law.exp_a, "small-jump exponent");
    auto* opt_law_c2 = app.add_option("--law.c2", law.c2, "tail density constant");
    auto* opt_law_eb = app.add_option("--law.exp_b", law.exp_b, "tail exponent");
    auto* opt_law_eps = app.add_option("--law.eps", law.eps, "small-jump cutoff");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        throw HelpRequested{};
    } catch (const CLI::ParseError& e) {
        throw SchemaError(std::string("flags: ") + e.what());
    }

    // precedence: defaults, then file, then flags.  CLI11 already stored flag
    // values, so stash them, apply the file, and re-apply what was provided.
    const RunConfig flag_snapshot = cfg;
    const cd::LawStage law_flag_snapshot = law;
    {
        RunConfig defaults;
        cfg.seed = defaults.seed;
        cfg.paths = defaults.paths;
        cfg.threads = defaults.threads;
        cfg.gate = defaults.gate;
        cfg.out_dir = defaults.out_dir;
        cfg.alpha = defaults.alpha;
        cfg.m2 = defaults.m2;
        cfg.fuzz_cases = defaults.fuzz_cases;
        cfg.chaos_samples = defaults.chaos_samples;
        law = cd::LawStage{};
    }
    if (opt_config->count()) {
        std::ifstream in(config_path);
        if (!in) throw SchemaError("config: cannot open '" + config_path + "'");
        ordered_json root;
        try {
            in >> root;
        } catch (const std::exception& e) {
            throw SchemaError(std::string("config: invalid JSON: ") + e.what());
        }
        cd::apply_file(root, cfg, law);
    }
    if (opt_seed->count()) cfg.seed = flag_snapshot.seed;
    if (opt_paths->count()) cfg.paths = flag_snapshot.paths;
    if (opt_threads->count()) cfg.threads = flag_snapshot.threads;
    if (opt_gate->count()) cfg.gate = flag_snapshot.gate;
    if (opt_out->count()) cfg.out_dir = flag_snapshot.out_dir;
    if (opt_alpha->count()) cfg.alpha = flag_snapshot.alpha;
    if (opt_m2->count()) cfg.m2 = flag_snapshot.m2;
    if (opt_cases->count()) cfg.fuzz_cases = flag_snapshot.fuzz_cases;
    if (opt_chaos->count()) cfg.chaos_samples = flag_snapshot.chaos_samples;
    if (opt_formats->count()) cfg.formats = formats_flag;
    auto law_flag = [&](CLI::Option* opt, const char* key, auto member) {
        if (opt->count()) {
            law.*member = law_flag_snapshot.*member;
            law.provided.insert(key);
        }
    };
    if (opt_family->count()) {
        law.family = law_flag_snapshot.family;
        law.provided.insert("family");
    }
    law_flag(opt_law_a, "a", &cd::LawStage::a);
    law_flag(opt_law_lambda, "lambda", &cd::LawStage::lambda);
    law_flag(opt_law_ap, "a_plus", &cd::LawStage::a_plus);
    law_flag(opt_law_am, "a_minus", &cd::LawStage::a_minus);
    law_flag(opt_law_pu, "p_up", &cd::LawStage::p_up);
    law_flag(opt_law_c1, "c1", &cd::LawStage::c1);
    law_flag(opt_law_ea, "exp_a", &cd::LawStage::exp_a);
    law_flag(opt_law_c2, "c2", &cd::LawStage::c2);
    law_flag(opt_law_eb, "exp_b", &cd::LawStage::exp_b);
    law_flag(opt_law_eps, "eps", &cd::LawStage::eps);

    if ((opt_t->count() || opt_s->count()) && opt_times->count())
        throw ConflictError("targets.times: given both as --t/--s and --targets.times");
    if (opt_R->count() && opt_radii->count())
        throw ConflictError("targets.radii: given both as --R and --targets.radii");
    if (opt_s->count() && !opt_t->count())
        throw SchemaError("--s needs --t for the (t, s) pair");
    if (opt_times->count()) cfg.times = times_flag;
    if (opt_t->count()) {
        cfg.times = {t_flag};
        if (opt_s->count()) cfg.times.push_back(s_flag);
    }
    if (opt_radii->count()) cfg.radii = radii_flag;
    if (opt_R->count()) cfg.radii = {R_flag};

    const auto chosen = app.get_subcommands();
    if (!chosen.empty()) cfg.command = chosen.front()->get_name();
    if (cfg.command.empty())
        throw SchemaError("command: required (subcommand or config file key)");

    if (cfg.paths < 1) throw SchemaError("mc.paths: must be at least 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
        throw SchemaError("targets.alpha: must lie in (0, 1]");
    if (cfg.m2 < 0.0) throw SchemaError("m2: must be positive (or 0 to derive from the law)");
    for (double t : cfg.times)
        if (!(t >= 0.0)) throw SchemaError("targets.times: times must be nonnegative");
    for (double R : cfg.radii)
        if (!(R > 0.0)) throw SchemaError("targets.radii: radii must be positive");
    for (const std::string& f : cfg.formats)
        if (f != "csv" && f != "json")
            throw SchemaError("output.formats: unknown format '" + f + "'");
    if (cfg.threads == 0) {
        if (const char* env = std::getenv("HAM_LEVY_THREADS")) {
            char* end = nullptr;
            const unsigned long v = std::strtoul(env, &end, 10);
            if (end == env || *end != '\0')
                throw SchemaError("HAM_LEVY_THREADS: not a nonnegative integer");
            cfg.threads = static_cast<unsigned>(v);
        }
    }
    cfg.law = cd::build_law(law);
    return cfg;
}

inline RunConfig parse_config(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("hamlevy");
    for (const auto& s : args) argv.push_back(s.c_str());
    return parse_config(static_cast<int>(argv.size()), argv.data());
}

// ---------------------------------------------------------------------------
// command pipelines

namespace cli_detail {

inline McConfig make_mc(const RunConfig& cfg) {
    McConfig mc;
    mc.master_seed = cfg.seed;
    mc.n_paths = cfg.paths;
    mc.law = cfg.law;
    mc.times = cfg.times;
    mc.radii = cfg.radii;
    mc.point_probes = cfg.probes;
    mc.threads = cfg.threads;
    return mc;
}

inline bool cmd_moments(const RunConfig& cfg, ordered_json& summary,
                        std::vector<std::pair<std::string, std::string>>& files) {
    const JumpLawSpec& law = cfg.law;
    const AssumptionReport rep = check_assumptions(law, cfg.alpha);
    summary["total_rate"] = json_real(law.total_rate());
    try {
        summary["mean_jump"] = law.mean_jump();
    } catch (const DivergentFirstMoment&) {
        summary["mean_jump"] = "divergent";
    }
    summary["centered"] = rep.centered;
    summary["m2_finite"] = rep.m2_finite;
    summary["clt_moment_condition"] = rep.clt_ok;
    summary["small_jump_discarded_variance"] = law.small_jump_discarded_variance();
    const std::vector<double> orders{1.0, 2.0, 3.0, 4.0, 1.0 + cfg.alpha, 2.0 + 2.0 * cfg.alpha};
    ordered_json rows = ordered_json::array();
    Csv csv;
    csv.header({"p", "m_p", "M_p"});
    for (double p : orders) {
        const double mp = law.moment_m(p);
        const double Mp = law.tail_moment_M(p);
        rows.push_back({{"p", p}, {"m_p", json_real(mp)}, {"M_p", json_real(Mp)}});
        csv.row({Csv::num(p), std::isfinite(mp) ? Csv::num(mp) : "inf",
                 std::isfinite(Mp) ? Csv::num(Mp) : "inf"});
    }
    summary["moments"] = rows;
    files.emplace_back("moments_table.csv", csv.str());
    return true;
}

inline bool cmd_simulate(const RunConfig& cfg, ordered_json& summary,
                         std::vector<std::pair<std::string, std::string>>& files) {
    McConfig mc = make_mc(cfg);
    if (mc.point_probes.empty()) {
        const double t = cfg.times.empty() ? 1.0 : *std::max_element(cfg.times.begin(), cfg.times.end());
        mc.point_probes.push_back({t, 0.0});
    }
    const SampleSet set = run_mc(mc);
    summary["window"] = {{"t_max", set.window.t_max},
                         {"base_half_width", set.window.base_half_width},
                         {"area", set.window.area()}};
    bool ok = true;
    ordered_json cols = ordered_json::array();
    if (cfg.paths >= 2) {
        auto add_column = [&](const std::string& name, const std::vector<double>& xs,
                              double target_mean) {
            const ColumnSummary s = summarize(name, xs);
            const MeanReport m = sample_mean(xs);
            ordered_json j;
            j["name"] = name;
            j["mean"] = s.mean;
            j["std_error"] = m.std_error;
            j["sd"] = s.sd;
            j["skewness"] = s.skewness;
            j["excess_kurtosis"] = s.excess_kurtosis;
            j["min"] = s.min;
            j["max"] = s.max;
            j["target_mean"] = target_mean;
            const bool within = std::abs(s.mean - target_mean) <= 5.0 * m.std_error;
            j["mean_within_5se"] = within;
            ok = ok && within;
            cols.push_back(j);
        };
        std::size_t col = 0;
        for (double t : mc.times)
            for (double R : mc.radii) add_column(column_name_average(t, R), set.average_columns[col++], 0.0);
        for (std::size_t p = 0; p < mc.point_probes.size(); ++p)
            add_column(column_name_probe(mc.point_probes[p].t, mc.point_probes[p].x),
                       set.probe_columns[p], 1.0);
    }
    summary["columns"] = cols;
    std::ostringstream os;
    write_csv(set, os);
    files.emplace_back("simulate_samples.csv", os.str());
    return ok;
}

inline bool cmd_variance(const RunConfig& cfg, ordered_json& summary,
                         std::vector<std::pair<std::string, std::string>>& files) {
    const CovarianceModel model = resolve_model(cfg);
    const SampleSet set = run_mc(make_mc(cfg));
    const VarianceTable table = variance_diagnostic(set, model);
    ordered_json rows = ordered_json::array();
    Csv csv;
    csv.header({"t", "s", "R", "ratio", "std_error", "target", "lln"});
    for (const auto& r : table.rows) {
        rows.push_back({{"t", r.t},
                        {"s", r.s},
                        {"R", r.R},
                        {"ratio", r.ratio},
                        {"std_error", r.std_error},
                        {"target", r.target},
                        {"lln", r.lln}});
        csv.row({Csv::num(r.t), Csv::num(r.s), Csv::num(r.R), Csv::num(r.ratio),
                 Csv::num(r.std_error), Csv::num(r.target), Csv::num(r.lln)});
    }
    summary["m2"] = model.m2;
    summary["rows"] = rows;
    files.emplace_back("variance_table.csv", csv.str());

    bool ok = true;
    if (cfg.radii.empty()) return ok;
    std::vector<double> sorted_radii = cfg.radii;
    std::sort(sorted_radii.begin(), sorted_radii.end());
    const double r_max = sorted_radii.back();
    auto find_row = [&](double t, double s, double R) -> const VarianceRow* {
        for (const auto& r : table.rows)
            if (r.t == t && r.s == s && r.R == R) return &r;
        return nullptr;
    };
    ordered_json checks = ordered_json::array();
    for (const auto& row : table.rows) {
        if (row.R != r_max) continue;
        const bool within = std::abs(row.ratio - row.target) <= 3.0 * row.std_error;
        checks.push_back({{"t", row.t},
                          {"s", row.s},
                          {"R", row.R},
                          {"deviation", row.ratio - row.target},
                          {"within_3se", within}});
        ok = ok && within;
    }
    // |deviation| shrinks along the radius ladder, with 2 SE slack
    for (double t : cfg.times) {
        for (std::size_t k = 1; k < sorted_radii.size(); ++k) {
            const VarianceRow* a = find_row(t, t, sorted_radii[k - 1]);
            const VarianceRow* b = find_row(t, t, sorted_radii[k]);
            if (!a || !b) continue;
            const double slack = 2.0 * std::sqrt(a->std_error * a->std_error +
                                                 b->std_error * b->std_error);
            const bool shrink =
                std::abs(b->ratio - b->target) <= std::abs(a->ratio - a->target) + slack;
            checks.push_back({{"t", t},
                              {"R_from", a->R},
                              {"R_to", b->R},
                              {"deviation_shrinks", shrink}});
            ok = ok && shrink;
        }
        // law of large numbers: doubling R halves Var(F_R/R); gate the
        // largest doubling pair, where the 1/R bias is smallest
        for (std::size_t k = sorted_radii.size(); k-- > 1;) {
            if (sorted_radii[k] != 2.0 * sorted_radii[k - 1]) continue;
            const VarianceRow* a = find_row(t, t, sorted_radii[k - 1]);
            const VarianceRow* b = find_row(t, t, sorted_radii[k]);
            if (!a || !b) break;
            const double va = a->lln, vb = b->lln;
            const double se_a = a->std_error / a->R, se_b = b->std_error / b->R;
            const double slack = 3.0 * std::sqrt(se_b * se_b + 0.25 * se_a * se_a);
            const bool halves = std::abs(vb - 0.5 * va) <= slack;
            checks.push_back(
                {{"t", t}, {"R_from", a->R}, {"R_to", b->R}, {"lln_halves", halves}});
            ok = ok && halves;
            break;
        }
    }
    summary["checks"] = checks;
    return ok;
}

inline bool cmd_clt(const RunConfig& cfg, ordered_json& summary,
                    std::vector<std::pair<std::string, std::string>>& files) {
    const CovarianceModel model = resolve_model(cfg);
    const SampleSet set = run_mc(make_mc(cfg));
    std::vector<double> sorted_radii = cfg.radii;
    std::sort(sorted_radii.begin(), sorted_radii.end());
    const double n = static_cast<double>(cfg.paths);
    // spread of the Kolmogorov statistic around its mean is about 0.26/sqrt(n)
    const double ks_slack = 2.0 * 0.26 * std::sqrt(2.0) / std::sqrt(n);
    ordered_json rows = ordered_json::array();
    Csv csv;
    csv.header({"t", "R", "d_kol_sample", "d_kol_theory", "w1_sample", "w1_theory", "sd_sample",
                "sd_theory"});
    bool ok = true;
    ordered_json gates = ordered_json::array();
    for (std::size_t it = 0; it < cfg.times.size(); ++it) {
        const double t = cfg.times[it];
        std::vector<double> kols;
        for (double R : sorted_radii) {
            std::size_t ir = cfg.radii.size();
            for (std::size_t k = 0; k < cfg.radii.size(); ++k)
                if (cfg.radii[k] == R) ir = k;
            const auto& col = set.averages(it, ir);
            const double sigma_th = std::sqrt(sigma_limit(model, t, t) * R);
            const NormalDistance ks_s = ks_distance(col, Normalization::sample_sd);
            const NormalDistance ks_t =
                ks_distance(col, Normalization::theoretical_sd, sigma_th);
            const NormalDistance w1_s = w1_distance(col, Normalization::sample_sd);
            const NormalDistance w1_t =
                w1_distance(col, Normalization::theoretical_sd, sigma_th);
            kols.push_back(ks_s.value);
            rows.push_back({{"t", t},
                            {"R", R},
                            {"d_kol_sample", ks_s.value},
                            {"d_kol_theory", ks_t.value},
                            {"w1_sample", w1_s.value},
                            {"w1_theory", w1_t.value},
                            {"sd_sample", ks_s.scale},
                            {"sd_theory", sigma_th}});
            csv.row({Csv::num(t), Csv::num(R), Csv::num(ks_s.value), Csv::num(ks_t.value),
                     Csv::num(w1_s.value), Csv::num(w1_t.value), Csv::num(ks_s.scale),
                     Csv::num(sigma_th)});
        }
        bool monotone = true;
        for (std::size_t k = 1; k < kols.size(); ++k)
            monotone = monotone && kols[k] <= kols[k - 1] + ks_slack;
        const bool small_final = kols.empty() ? true : kols.back() <= 0.02;
        ordered_json g;
        g["t"] = t;
        g["d_kol_non_increasing"] = monotone;
        g["final_d_kol"] = kols.empty() ? 0.0 : kols.back();
        g["final_below_0.02"] = small_final;
        if (kols.size() >= 2) {
            double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
            for (std::size_t k = 0; k < kols.size(); ++k) {
                const double lx = std::log(sorted_radii[k]), ly = std::log(kols[k]);
                sx += lx;
                sy += ly;
                sxx += lx * lx;
                sxy += lx * ly;
            }
            const double m = static_cast<double>(kols.size());
            const double slope = (sxy - sx * sy / m) / (sxx - sx * sx / m);
            g["log_log_slope"] = slope;
            g["predicted_exponent"] = -clt_rate_prediction(cfg.alpha);
        }
        gates.push_back(g);
        ok = ok && monotone && small_final;
    }
    summary["m2"] = model.m2;
    summary["rows"] = rows;
    summary["gates"] = gates;
    files.emplace_back("clt_table.csv", csv.str());
    std::ostringstream os;
    write_csv(set, os);
    files.emplace_back("clt_samples.csv", os.str());
    return ok;
}

inline bool cmd_derivatives(const RunConfig& cfg, ordered_json& summary,
                            std::vector<std::pair<std::string, std::string>>& files) {
    const std::vector<std::pair<std::string, JumpLawSpec>> laws = {
        {"symmetric-two-point", JumpLawSpec::symmetric_two_point(1.0, 1.0)},
        {"centered-two-point", JumpLawSpec::centered_two_point(2.0, 1.0, 0.0, 1.0)},
        {"discrete", JumpLawSpec::discrete({{2.0, 1.0}, {-1.0, 2.0}})},
        {"power-density", JumpLawSpec::power_density(1.0, 0.5, 1.0, 3.0, 0.05)},
    };
    ordered_json rows = ordered_json::array();
    Csv csv;
    csv.header({"law", "cases", "first_order_residual", "second_order_residual", "outside_cone",
                "disjoint_pair", "half_identity", "delta_support", "swap"});
    bool ok = true;
    for (const auto& [name, law] : laws) {
        const DerivativeFuzzReport rep = derivative_fuzz(law, cfg.fuzz_cases, cfg.seed);
        const bool law_ok = rep.max_first_order_residual <= 1e-12 &&
                            rep.max_second_order_residual <= 1e-12 &&
                            rep.max_outside_cone_exact == 0.0 &&
                            rep.max_disjoint_pair_exact == 0.0 &&
                            rep.max_half_identity_exact == 0.0 &&
                            rep.max_delta_support_exact == 0.0 && rep.max_swap_exact == 0.0;
        ok = ok && law_ok;
        rows.push_back({{"law", name},
                        {"cases", rep.cases},
                        {"first_order_residual", rep.max_first_order_residual},
                        {"second_order_residual", rep.max_second_order_residual},
                        {"outside_cone", rep.max_outside_cone_exact},
                        {"disjoint_pair", rep.max_disjoint_pair_exact},
                        {"half_identity", rep.max_half_identity_exact},
                        {"delta_support", rep.max_delta_support_exact},
                        {"swap", rep.max_swap_exact},
                        {"ok", law_ok}});
        csv.row({name, Csv::count(rep.cases), Csv::num(rep.max_first_order_residual),
                 Csv::num(rep.max_second_order_residual), Csv::num(rep.max_outside_cone_exact),
                 Csv::num(rep.max_disjoint_pair_exact), Csv::num(rep.max_half_identity_exact),
                 Csv::num(rep.max_delta_support_exact), Csv::num(rep.max_swap_exact)});
    }
    summary["laws"] = rows;
    files.emplace_back("derivatives_table.csv", csv.str());
    return ok;
}

inline bool cmd_chaos(const RunConfig& cfg, ordered_json& summary,
                      std::vector<std::pair<std::string, std::string>>& files) {
    const CovarianceModel model = resolve_model(cfg);
    const double t = cfg.times.empty() ? 1.0 : cfg.times.front();
    ordered_json rows = ordered_json::array();
    Csv csv;
    csv.header({"n", "estimate", "std_error", "target"});
    bool ok = true;
    double partial_mc = 1.0, partial_exact = 1.0, se_sum = 0.0;
    for (std::size_t n = 1; n <= 3; ++n) {
        CounterRng rng(cfg.seed, n);
        const ChaosTermEstimate est = chaos_term_norm(model, n, t, cfg.chaos_samples, rng);
        // coeff = (m2/2)^n t^{2n} / (2n)!
        double coeff = std::pow(model.m2 / 2.0, static_cast<double>(n));
        for (std::size_t k = 1; k <= 2 * n; ++k) coeff *= t / static_cast<double>(k);
        const bool row_ok = n == 1 ? est.estimate == model.m2 * t * t / 4.0
                                   : std::abs(est.estimate - coeff) <= 3.0 * est.std_error;
        ok = ok && row_ok;
        partial_mc += est.estimate;
        partial_exact += coeff;
        se_sum += est.std_error;
        rows.push_back({{"n", n},
                        {"estimate", est.estimate},
                        {"std_error", est.std_error},
                        {"target", coeff},
                        {"ok", row_ok}});
        csv.row({Csv::count(n), Csv::num(est.estimate), Csv::num(est.std_error), Csv::num(coeff)});
    }
    const double total = second_moment_theory(model, t);
    const double remainder = total - partial_exact;
    const bool partial_ok = std::abs(partial_mc - total) <= remainder + 3.0 * se_sum;
    ok = ok && partial_ok;
    summary["m2"] = model.m2;
    summary["t"] = t;
    summary["terms"] = rows;
    summary["partial_sum"] = partial_mc;
    summary["second_moment"] = total;
    summary["analytic_remainder"] = remainder;
    summary["partial_sum_consistent"] = partial_ok;
    files.emplace_back("chaos_table.csv", csv.str());
    return ok;
}

inline bool cmd_bounds(const RunConfig& cfg, ordered_json& summary,
                       std::vector<std::pair<std::string, std::string>>& files) {
    bool ok = true;
    // kernel identity and bounds over a grid of (t, s, R), with r = s/2
    const std::vector<std::array<double, 3>> grid = {
        {1.0, 0.5, 3.0},  {1.0, 0.5, 5.0},  {2.0, 1.0, 5.0},  {2.0, 1.5, 8.0},
        {0.5, 0.25, 2.0}, {1.0, 0.9, 4.0},  {3.0, 2.0, 10.0}, {1.5, 0.5, 6.0},
        {2.5, 2.0, 7.0},  {1.0, 0.0, 3.0}};
    ordered_json kernel_rows = ordered_json::array();
    Csv csv;
    csv.header({"t", "s", "R", "r", "increment_mass", "increment_mass_exact", "square_integral",
                "square_bound", "quartic_integral", "quartic_bound"});
    for (const auto& [t, s, R] : grid) {
        const double r = s / 2.0;
        const Lemma24Report rep = lemma24_report(t, s, R, r);
        const bool mass_ok = std::abs(rep.increment_mass - rep.increment_mass_exact) <= 1e-10;
        const bool sq_ok = rep.square_integral <= rep.square_bound * (1.0 + 1e-12) + 1e-12;
        const bool q_ok = rep.quartic_integral <= rep.quartic_bound * (1.0 + 1e-12) + 1e-12;
        ok = ok && mass_ok && sq_ok && q_ok;
        kernel_rows.push_back({{"t", t},
                               {"s", s},
                               {"R", R},
                               {"r", r},
                               {"increment_mass", rep.increment_mass},
                               {"increment_mass_exact", rep.increment_mass_exact},
                               {"square_integral", rep.square_integral},
                               {"square_bound", rep.square_bound},
                               {"quartic_integral", rep.quartic_integral},
                               {"quartic_bound", rep.quartic_bound},
                               {"ok", mass_ok && sq_ok && q_ok}});
        csv.row({Csv::num(t), Csv::num(s), Csv::num(R), Csv::num(r),
                 Csv::num(rep.increment_mass), Csv::num(rep.increment_mass_exact),
                 Csv::num(rep.square_integral), Csv::num(rep.square_bound),
                 Csv::num(rep.quartic_integral), Csv::num(rep.quartic_bound)});
    }
    summary["kernel"] = kernel_rows;
    files.emplace_back("bounds_table.csv", csv.str());

    // scaling integrals: linear growth in R and the closed bounds
    const std::vector<std::array<double, 3>> pgrid = {
        {0.5, 10.0, cfg.alpha}, {1.0, 20.0, cfg.alpha}, {1.0, 20.0, 0.5}, {2.0, 40.0, 1.0}};
    ordered_json prows = ordered_json::array();
    for (const auto& [t, R, alpha] : pgrid) {
        const PoincareReport rep = poincare_scaling_integrals(t, R, alpha);
        const double bound1 = 2.0 * std::pow(t, 3.0 + 3.0 * alpha) * R;
        const double bound2 = 2.0 * R * t * t * t;
        const double i3_exact = 2.0 * t * R;
        const bool b1 = rep.I1 <= bound1 * (1.0 + 1e-12);
        const bool b2 = rep.I2 <= bound2 * (1.0 + 1e-12);
        const bool b3 = std::abs(rep.I3 - i3_exact) <= 1e-8;
        const bool ratios = std::abs(rep.ratio_I1 - 2.0) <= 0.1 &&
                            std::abs(rep.ratio_I2 - 2.0) <= 0.1 &&
                            std::abs(rep.ratio_I3 - 2.0) <= 0.1;
        ok = ok && b1 && b2 && b3 && ratios;
        prows.push_back({{"t", t},
                         {"R", R},
                         {"alpha", alpha},
                         {"I1", rep.I1},
                         {"I1_bound", bound1},
                         {"I2", rep.I2},
                         {"I2_bound", bound2},
                         {"I3", rep.I3},
                         {"I3_exact", i3_exact},
                         {"ratio_I1", rep.ratio_I1},
                         {"ratio_I2", rep.ratio_I2},
                         {"ratio_I3", rep.ratio_I3},
                         {"ok", b1 && b2 && b3 && ratios}});
    }
    summary["scaling"] = prows;
    summary["rate_exponent"] = clt_rate_prediction(cfg.alpha);
    return ok;
}

inline bool cmd_covariance(const RunConfig& cfg, ordered_json& summary,
                           std::vector<std::pair<std::string, std::string>>& files) {
    const CovarianceModel model = resolve_model(cfg);
    const std::vector<double>& times = cfg.times;
    ordered_json rows = ordered_json::array();
    Csv csv;
    csv.header({"t", "s", "sigma"});
    bool ok = true;
    for (double t : times) {
        for (double s : times) {
            const double v = sigma_limit(model, t, s);
            rows.push_back({{"t", t}, {"s", s}, {"sigma", v}});
            csv.row({Csv::num(t), Csv::num(s), Csv::num(v)});
            const double sym = sigma_limit(model, s, t);
            ok = ok && std::abs(v - sym) <= 1e-14 * std::max(1.0, std::abs(v));
            const double cs = sigma_limit(model, t, t) * sigma_limit(model, s, s);
            ok = ok && v * v <= cs * (1.0 + 1e-12) + 1e-12;
        }
    }
    ordered_json moments = ordered_json::array();
    for (double t : times)
        moments.push_back({{"t", t}, {"second_moment", second_moment_theory(model, t)}});
    summary["m2"] = model.m2;
    summary["sigma"] = rows;
    summary["second_moments"] = moments;
    if (!times.empty()) {
        summary["sigma_tt"] = sigma_limit(model, times.front(), times.front());
        summary["second_moment"] = second_moment_theory(model, times.front());
    }
    files.emplace_back("covariance_table.csv", csv.str());
    return ok;
}

} // namespace cli_detail

inline int execute(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    namespace cd = cli_detail;
    ordered_json summary;
    summary["command"] = cfg.command;
    summary["config"] = config_echo(cfg);
    std::vector<std::pair<std::string, std::string>> files;
    bool gate_ok = true;
    if (cfg.command == "moments")
        gate_ok = cd::cmd_moments(cfg, summary, files);
    else if (cfg.command == "simulate")
        gate_ok = cd::cmd_simulate(cfg, summary, files);
    else if (cfg.command == "variance")
        gate_ok = cd::cmd_variance(cfg, summary, files);
    else if (cfg.command == "clt")
        gate_ok = cd::cmd_clt(cfg, summary, files);
    else if (cfg.command == "derivatives")
        gate_ok = cd::cmd_derivatives(cfg, summary, files);
    else if (cfg.command == "chaos")
        gate_ok = cd::cmd_chaos(cfg, summary, files);
    else if (cfg.command == "bounds")
        gate_ok = cd::cmd_bounds(cfg, summary, files);
    else if (cfg.command == "covariance")
        gate_ok = cd::cmd_covariance(cfg, summary, files);
    else
        throw SchemaError("command: unknown '" + cfg.command + "'");
    summary["gates_enabled"] = cfg.gate;
    summary["gates_passed"] = gate_ok;

    const bool want_json =
        std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end();
    const bool want_csv =
        std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
    if (want_json || want_csv) fs::create_directories(cfg.out_dir);
    if (want_json) {
        std::ofstream out(fs::path(cfg.out_dir) / (cfg.command + "_summary.json"),
                          std::ios::binary);
        out << summary.dump(2) << "\n";
    }
    if (want_csv) {
        for (const auto& [name, content] : files) {
            std::ofstream out(fs::path(cfg.out_dir) / name, std::ios::binary);
            out << content;
        }
    }
    return cfg.gate && !gate_ok ? 2 : 0;
}

inline int cli_main(int argc, char** argv) {
    try {
        const RunConfig cfg = parse_config(argc, argv);
        return execute(cfg);
    } catch (const HelpRequested&) {
        return 0;
    } catch (const Error& e) {
        std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace hamlevy
