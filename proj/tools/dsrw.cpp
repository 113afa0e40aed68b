// dsrw: command-line front end for the decoupled random walk library.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "dsrw/asymptotics.hpp"
#include "dsrw/experiments.hpp"
#include "dsrw/gaussian_limit.hpp"
#include "dsrw/lattice.hpp"
#include "dsrw/special.hpp"

namespace fs = std::filesystem;
using namespace dsrw;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_atomic(const fs::path& path, const std::string& data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        os << data;
        os.flush();
        if (!os) throw Error("write to " + tmp.string() + " failed");
    }
    fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("--config: cannot read '" + path + "'");
    std::ostringstream s;
    s << is.rdbuf();
    return s.str();
}

std::string num(double x, int digits = 17) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s.precision(digits);
    s << x;
    return s.str();
}

struct Common {
    std::string law;
    std::string hole_case;
    std::uint64_t seed = default_seed;
    unsigned threads = 0;
    std::string out;
    std::string format = "json";
    std::string config;
    std::string write_config;
    long reps = 0;
    double t = 0.0;
    double eps = 0.0;
    std::vector<double> t_grid, u_grid;
    std::vector<long> n_grid;
    std::string mode = "marginal";
};

// Flags override the config file, which overrides the experiment's defaults.
ExperimentConfig build_config(const std::string& tag, const Common& o, const CLI::App& sub) {
    ExperimentConfig c = ExperimentConfig::defaults(tag);
    if (!o.config.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(o.config));
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("--config: ") + e.what());
        }
        if (j.contains("experiment") && j["experiment"] != tag)
            throw UsageError("--config: experiment '" + j["experiment"].dump() + "' does not match subcommand");
        j["experiment"] = tag;
        from_json(j, c);
    }
    auto given = [&](const char* flag) {
        for (const CLI::App* a : {&sub, static_cast<const CLI::App*>(sub.get_parent())}) {
            const auto* opt = a->get_option_no_throw(flag);
            if (opt && opt->count() > 0) return true;
        }
        return false;
    };
    if (given("--law")) c.law = o.law;
    if (given("--case")) c.hole_case = o.hole_case;
    if (given("--seed")) c.seed = o.seed;
    if (given("--threads")) c.threads = o.threads;
    if (given("--reps")) c.reps = o.reps;
    if (given("--t")) c.t = o.t;
    if (given("--eps")) c.eps = o.eps;
    if (given("--t-grid")) c.t_grid = o.t_grid;
    if (given("--u-grid")) c.u_grid = o.u_grid;
    if (given("--n-grid")) c.n_grid = o.n_grid;
    if (given("--out")) c.output = o.out;
    c.validate();
    return c;
}

void emit(const ExperimentReport& r, const Common& o) {
    const auto& tag = r.config.experiment;
    if (o.out.empty()) {
        if (o.format == "json") {
            std::cout << r.to_json().dump(2) << '\n';
        } else {
            for (const auto& s : r.series) {
                std::cout << "# " << s.name << '\n';
                s.write_csv(std::cout);
            }
        }
    } else {
        const fs::path dir(o.out);
        if (o.format == "json") {
            write_atomic(dir / (tag + ".json"), r.to_json().dump(2) + "\n");
        } else {
            for (const auto& s : r.series) {
                std::ostringstream os;
                s.write_csv(os);
                write_atomic(dir / (tag + "_" + s.name + ".csv"), os.str());
            }
        }
    }
    // summary on stderr keeps stdout machine-readable
    for (const auto& t : r.tests)
        std::cerr << (t.pass ? "PASS " : "FAIL ") << t.name << ": " << num(t.statistic, 6) << " in ["
                  << num(t.lo, 6) << ", " << num(t.hi, 6) << "]\n";
    std::cerr << "wall clock " << num(r.wall_clock_seconds, 3) << " s\n";
}

int run_constants(const Common& o, const CLI::App& sub) {
    if (o.hole_case.empty()) throw UsageError("--case: required for constants");
    const auto law = parse_law(o.law.empty() ? "exp:1" : o.law);
    const auto which = parse_hole_case(o.hole_case);
    HoleCurveOptions opt;
    opt.seed = o.seed;
    if (sub.count("--reps")) opt.heavy_a_reps = std::size_t(o.reps);
    std::string source;
    const double v = theoretical_limit(law, which, opt, &source);
    std::cout << num(v, 15) << "\t" << source << '\n';
    return 0;
}

// Fast identity checks; a corrupted constant is multiplied by 1 + 1e-3 before its comparison.
struct Check {
    std::string name;
    double value;
    double expected;
    double tol;
    bool pass() const { return std::fabs(value - expected) <= tol; }
};

int run_validate(const Common& o, const std::string& corrupt) {
    std::vector<Check> checks;
    auto add = [&](std::string name, double value, double expected, double tol) {
        if (name == corrupt) value *= 1.0 + 1e-3;
        checks.push_back({std::move(name), value, expected, tol});
    };
    const double pi = std::numbers::pi;
    const auto nrm = normal_evaluator();
    add("i_integral_normal_0", i_integral(nrm, 0.0), 1.0 / std::sqrt(pi), 1e-7);
    for (double a : {0.5, 1.0, 2.0})
        add("i_integral_normal_" + num(a, 3), i_integral(nrm, a),
            std::exp(-a * a / 4.0) / std::sqrt(pi) + a * normal_cdf(a / std::sqrt(2.0)), 1e-7);
    const auto expo = IncrementLaw::exponential(1.0);
    const RateFunction rf(expo);
    for (double x : {0.2, 0.5, 1.0, 2.0, 5.0}) add("legendre_exp_" + num(x, 3), rf(x), x - 1.0 - std::log(x), 1e-9);
    add("rate_light_exp", rate_light(rf), 0.25, 1e-6);
    add("closed_form_min_b2", closed_form_constant(HoleCase::min_b2, {1.0, 3.0, 0.0}), pi * pi / 6.0, 1e-10);
    const auto par = IncrementLaw::pareto(2.5, 1.0);
    add("closed_form_heavy_b", closed_form_constant(HoleCase::heavy_b, constant_params(par)), 0.9, 1e-15);
    const auto wei = IncrementLaw::weibull(0.5, 1.0);
    add("closed_form_semi", closed_form_constant(HoleCase::semi, constant_params(wei)), 1.0 / (1.5 * wei.mean()), 1e-15);
    const auto sc = scaling(ScalingRegime::a1, {});
    add("scaling_h", sc.h(7.0), 49.0, 0.0);
    add("scaling_b", sc.b(7.0), 7.0, 0.0);
    add("scaling_diff_ratio", 7.0 * sc.dh(7.0) / sc.h(7.0), 2.0, 0.0);
    add("var_const_2", var_const(2.0), 1.0 / std::sqrt(pi), 1e-15);
    // E_{1/2}(s) = exp(s^2) erfc(-s)
    for (double s : {0.1, 0.5, 1.0})
        add("ml_mgf_half_" + num(s, 3), ml_mgf_series(0.5, s), std::exp(s * s) * std::erfc(-s), 1e-12);
    {
        const auto tab = survival_table(expo, 10.0, 0.002);
        double worst = 0.0;
        for (const auto& row : tab.rows) {
            const double e = erlang_survival(row.n, 10.0, 1.0);
            worst = std::max({worst, row.lo - e, e - row.hi});
        }
        add("survival_bracket_exp", std::max(worst, 0.0), 0.0, 0.0);
    }
    {
        const auto b = renewal_V(expo, 5.0);
        add("renewal_V_contains_5", b.contains(5.0) ? 0.0 : 1.0, 0.0, 0.0);
        add("renewal_V_width", std::max(b.width() - 0.01, 0.0), 0.0, 0.0);
    }
    {
        // reports are independent of the worker count
        auto c = ExperimentConfig::defaults("flt-marginal");
        c.t = 200;
        c.reps = 2000;
        c.seed = o.seed;
        c.threads = 1;
        const auto a = run_experiment(c).body().dump();
        c.threads = 4;
        add("determinism_threads", a == run_experiment(c).body().dump() ? 0.0 : 1.0, 0.0, 0.0);
    }
    int failures = 0;
    std::printf("%-28s %-24s %-24s %-8s %s\n", "check", "value", "expected", "tol", "result");
    for (const auto& c : checks) {
        const bool ok = c.pass();
        failures += !ok;
        std::printf("%-28s %-24s %-24s %-8s %s\n", c.name.c_str(), num(c.value).c_str(), num(c.expected).c_str(),
                    num(c.tol, 3).c_str(), ok ? "PASS" : "FAIL");
    }
    std::printf("%zu checks, %d failed\n", checks.size(), failures);
    if (failures) {
        for (const auto& c : checks)
            if (!c.pass()) std::fprintf(stderr, "failed: %s\n", c.name.c_str());
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decoupled random walks: hole probabilities, functional limits, SLLN and inverse-stable checks.\n"
                 "Laws use family:param1[,param2]: exp:RATE, gamma:SHAPE,RATE, pareto:INDEX,CUTOFF, "
                 "weibull:SHAPE,SCALE.\nDefault seed " +
                 std::to_string(default_seed) + "."};
    app.require_subcommand(1);
    app.fallthrough();
    Common o;
    app.add_option("--seed", o.seed, "master seed")->capture_default_str();
    app.add_option("--threads", o.threads, "worker threads, 0 = hardware concurrency")->capture_default_str();
    app.add_option("--out", o.out, "output directory (default: standard output)");
    app.add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_option("--config", o.config, "JSON experiment config; flags override its values");
    app.add_option("--write-config", o.write_config, "write the resolved JSON config to this file and exit");

    auto add_law = [&](CLI::App* s) { s->add_option("--law", o.law, "increment law, e.g. exp:1"); };
    auto add_mc = [&](CLI::App* s) {
        s->add_option("--reps", o.reps, "replications (>= 100)");
        s->add_option("--eps", o.eps, "truncation budget in total variation, (0, 1e-3]");
    };
    auto add_grid = [&](CLI::App* s, const char* flag, auto& v, const char* help) {
        s->add_option(flag, v, help)->delimiter(',');
    };

    auto* constants = app.add_subcommand("constants", "limit constant of a hole-probability case");
    add_law(constants);
    constants->add_option("--case", o.hole_case, "min-a|min-b1|min-b2|heavy-a|heavy-b|semi");
    constants->add_option("--reps", o.reps, "Monte Carlo size for heavy-a");

    auto* hole = app.add_subcommand("hole", "normalized hole-probability curve");
    add_law(hole);
    hole->add_option("--case", o.hole_case, "min-a|min-b1|min-b2|heavy-a|heavy-b|semi");
    add_grid(hole, "--t-grid", o.t_grid, "levels, comma separated");
    hole->add_option("--reps", o.reps, "Monte Carlo size for the heavy-a constant");

    auto* flt = app.add_subcommand("flt", "functional limit: one-dimensional marginal or covariance");
    add_law(flt);
    add_mc(flt);
    flt->add_option("--t", o.t, "level");
    flt->add_option("--mode", o.mode, "marginal|covariance")->check(CLI::IsMember({"marginal", "covariance"}));
    add_grid(flt, "--u-grid", o.u_grid, "shifts u for the covariance, comma separated");

    auto* slln = app.add_subcommand("slln", "maxima and passage times of the decoupled walk");
    add_law(slln);
    add_mc(slln);
    add_grid(slln, "--n-grid", o.n_grid, "path lengths, comma separated");
    add_grid(slln, "--t-grid", o.t_grid, "passage levels, comma separated");

    auto* variance = app.add_subcommand("variance", "Var N_hat(t) against its asymptote");
    add_law(variance);
    add_mc(variance);
    add_grid(variance, "--t-grid", o.t_grid, "levels, comma separated");

    auto* inverse = app.add_subcommand("inverse-stable", "P{xi > t} tau(t) against Mittag-Leffler draws");
    add_law(inverse);
    add_mc(inverse);
    add_grid(inverse, "--t-grid", o.t_grid, "levels, comma separated");

    auto* validate = app.add_subcommand("validate", "fast invariant suite");
    std::string corrupt;
    validate->add_option("--corrupt-constant", corrupt)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (constants->parsed()) return run_constants(o, *constants);
        if (validate->parsed()) return run_validate(o, corrupt);
        const std::map<CLI::App*, std::string> tags{{hole, "hole"},
                                                   {slln, "slln"},
                                                   {variance, "variance"},
                                                   {inverse, "inverse-stable"}};
        std::string tag;
        CLI::App* sub = nullptr;
        if (flt->parsed()) {
            tag = o.mode == "covariance" || flt->count("--u-grid") ? "flt-covariance" : "flt-marginal";
            sub = flt;
        }
        for (const auto& [s, name] : tags)
            if (s->parsed()) {
                tag = name;
                sub = s;
            }
        const auto cfg = build_config(tag, o, *sub);
        if (!o.write_config.empty()) {
            const nlohmann::json j = cfg;
            write_atomic(o.write_config, j.dump(2) + "\n");
            return 0;
        }
        emit(run_experiment(cfg), o);
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const ConfigurationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
