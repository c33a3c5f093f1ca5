#ifndef CARCLUST_CLI_HPP
#define CARCLUST_CLI_HPP

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "diagnostics.hpp"
#include "estimator.hpp"
#include "io.hpp"
#include "report.hpp"
#include "selection.hpp"
#include "synthetic.hpp"

/**
 * @file cli.hpp
 * @brief `carclust` command line: fit, select, simulate, validate.
 *
 * Exit codes: 0 success, 1 runtime error, 2 usage error.
 */

namespace carclust::cli {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClusterRange {
    Index first = 2;
    Index last = 2;

    bool single() const { return first == last; }

    std::vector<Index> values() const {
        std::vector<Index> out;
        for (Index g = first; g <= last; ++g) {
            out.push_back(g);
        }
        return out;
    }
};

/// Parses `G` or `A..B`.
inline ClusterRange parse_clusters(const std::string& text) {
    auto to_index = [&](const std::string& part) {
        Index v = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc() || ptr != part.data() + part.size()) {
            throw UsageError("--clusters: '" + text + "' is not an integer or an A..B range (e.g. --clusters 3 or --clusters 2..6)");
        }
        return v;
    };
    const auto dots = text.find("..");
    ClusterRange r;
    if (dots == std::string::npos) {
        r.first = r.last = to_index(text);
    } else {
        r.first = to_index(text.substr(0, dots));
        r.last = to_index(text.substr(dots + 2));
    }
    if (r.first > r.last) {
        throw UsageError("--clusters: range '" + text + "' is not ordered; write the smaller bound first");
    }
    if (r.first < 1) {
        throw UsageError("--clusters: cluster counts must be positive, got '" + text + "'");
    }
    return r;
}

inline unsigned thread_cap() {
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CARCLUST_THREADS")) {
        unsigned cap = 0;
        const std::string_view s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
        if (ec != std::errc() || ptr != s.data() + s.size() || cap == 0) {
            throw UsageError("CARCLUST_THREADS must be a positive integer, got '" + std::string(env) + "'");
        }
        threads = std::min(threads, cap);
    }
    return threads;
}

struct Options {
    std::string input;
    std::string clusters = "2";
    Index lags = 1;
    Index restarts = 10;
    std::uint64_t seed = 0;
    double tol = 1e-8;
    Index max_iters = 200;
    bool normalize = false;
    std::string init = "mixed";
    std::string output;
    std::string format = "tree";
    bool allow_trivial = false;

    // simulate
    Index units = 90;
    Index vars = 2;
    Index times = 8;
    double noise = 1.0;
    double spread = 20.0;
    double switch_prob = 0.02;
    std::string truth;
};

inline InitStrategy parse_init(const std::string& s) {
    if (s == "random") {
        return InitStrategy::RandomPartition;
    }
    if (s == "slicewise") {
        return InitStrategy::SlicewiseKMeans;
    }
    return InitStrategy::Mixed;
}

inline FitConfig fit_config(const Options& o) {
    FitConfig c;
    c.lag_order = o.lags;
    c.n_restarts = o.restarts;
    c.seed = o.seed;
    c.rel_tol = o.tol;
    c.max_iters = o.max_iters;
    c.init_strategy = parse_init(o.init);
    c.threads = thread_cap();
    if (c.lag_order < 1) {
        throw UsageError("--lags must be at least 1, got " + std::to_string(c.lag_order));
    }
    if (c.n_restarts < 1) {
        throw UsageError("--restarts must be at least 1, got " + std::to_string(c.n_restarts));
    }
    if (c.max_iters < 1) {
        throw UsageError("--max-iters must be at least 1, got " + std::to_string(c.max_iters));
    }
    if (!(c.rel_tol > 0)) {
        throw UsageError("--tol must be positive");
    }
    return c;
}

inline LongitudinalPanel load_input(const Options& o) {
    if (o.input.empty()) {
        throw UsageError("--input is required (path to a unit,time,<vars> CSV file)");
    }
    auto panel = load_panel(o.input);
    return o.normalize ? minmax_normalize(panel) : panel;
}

inline ReportFormat report_format(const Options& o) {
    return o.format == "text" ? ReportFormat::Text : ReportFormat::Tree;
}

inline void emit(const ReportInputs& in, const Options& o, std::ostream& out) {
    if (o.output.empty()) {
        write_report(in, out, report_format(o));
    } else {
        write_report(in, o.output, report_format(o));
    }
}

inline int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
    const auto range = parse_clusters(o.clusters);
    if (!range.single()) {
        throw UsageError("fit takes a single cluster count; use 'select' for a range like " + o.clusters);
    }
    if (range.first == 1 && !o.allow_trivial) {
        throw UsageError("--clusters 1 gives a trivial partition with undefined CH; pass --allow-trivial to fit it anyway");
    }
    auto config = fit_config(o);
    config.n_clusters = range.first;
    const auto panel = load_input(o);
    const auto result = fit_multistart(panel, config);

    ChReport ch;
    ch.lag_order = config.lag_order;
    if (config.n_clusters >= 2) {
        ChCandidate cand;
        cand.n_clusters = config.n_clusters;
        cand.objective = result.objective;
        cand.iterations = result.iterations;
        cand.converged = result.converged;
        cand.restart_index = result.restart_index;
        try {
            const auto v = ch_components(panel, result.partition);
            cand.ch = v.ch;
            cand.trace_w = v.trace_w;
            cand.trace_b = v.trace_b;
        } catch (const Error& e) {
            cand.error = e.what();
        }
        ch.selected_g = config.n_clusters;
        ch.candidates.push_back(std::move(cand));
    }
    if (!result.converged) {
        err << "warning: fit stopped at --max-iters " << config.max_iters << " before converging\n";
    }
    emit(ReportInputs{panel, config, result, ch.candidates.empty() ? nullptr : &ch, {"fit", o.input, o.normalize}}, o, out);
    return 0;
}

inline int cmd_select(const Options& o, std::ostream& out, std::ostream& err) {
    const auto range = parse_clusters(o.clusters);
    if (range.first < 2) {
        throw UsageError("select needs cluster counts of at least 2 (CH is undefined for G=1), e.g. --clusters 2..6");
    }
    auto config = fit_config(o);
    const auto panel = load_input(o);
    const auto report = select_g(panel, range.values(), config.lag_order, config);
    for (const auto& c : report.candidates) {
        if (!c.error.empty()) {
            err << "warning: G=" << c.n_clusters << " failed: " << c.error << '\n';
        }
    }
    config.n_clusters = report.selected_g;
    emit(ReportInputs{panel, config, *report.selected().fit, &report, {"select", o.input, o.normalize}}, o, out);
    return 0;
}

inline nlohmann::ordered_json truth_tree(const GeneratedPanel& gen, const SyntheticSpec& spec) {
    using Tree = nlohmann::ordered_json;
    Tree memberships = Tree::object();
    for (Index i = 0; i < gen.panel.units(); ++i) {
        Tree labels = Tree::array();
        for (Index t = 0; t < gen.panel.times(); ++t) {
            labels.push_back(gen.partition.label(i, t) + 1);
        }
        memberships[gen.panel.unit_ids()[static_cast<std::size_t>(i)]] = labels;
    }
    Tree lags = Tree::array();
    for (const auto& a : gen.coefficients.lags) {
        lags.push_back(detail::matrix_tree(a));
    }
    return Tree{{"seed", spec.seed},
                {"units", spec.units},
                {"variables", spec.vars},
                {"times", spec.times},
                {"clusters", spec.clusters},
                {"noise_scale", spec.noise_scale},
                {"switch_prob", spec.switch_prob},
                {"memberships", memberships},
                {"centroids", detail::centroid_tree(gen.centroids, gen.panel)},
                {"coefficients", Tree{{"intercept", detail::row_tree(gen.coefficients.intercept.transpose())}, {"lags", lags}}}};
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
    const auto range = parse_clusters(o.clusters);
    if (!range.single()) {
        throw UsageError("simulate takes a single cluster count, got '" + o.clusters + "'");
    }
    if (o.lags < 1) {
        throw UsageError("--lags must be at least 1");
    }
    SyntheticSpec spec = separated_spec(o.units, o.vars, o.times, range.first, o.spread, o.noise, o.switch_prob, o.seed, o.lags);
    GeneratedPanel gen = [&] {
        try {
            return generate_panel(spec);
        } catch (const InvalidSpec& e) {
            throw UsageError(std::string("simulate: ") + e.what());
        }
    }();

    if (o.output.empty()) {
        write_panel(gen.panel, out);
    } else {
        write_panel(gen.panel, o.output);
    }
    const std::string truth_path = !o.truth.empty() ? o.truth : (o.output.empty() ? "" : o.output + ".truth.json");
    if (!truth_path.empty()) {
        std::ofstream t(truth_path, std::ios::binary);
        if (!t) {
            throw IoError("cannot open '" + truth_path + "' for writing");
        }
        t << truth_tree(gen, spec).dump(2) << '\n';
    }
    return 0;
}

inline int cmd_validate(const Options& o, std::ostream& out, std::ostream&) {
    const auto panel = load_input(o);
    out << "ok: " << o.input << ": " << panel.units() << " units, " << panel.vars() << " variables, " << panel.times()
        << " times (" << panel.time_labels().front() << " .. " << panel.time_labels().back() << ")\n";
    return 0;
}

/**
 * Entry point shared by the executable and the tests. `args` excludes the program name.
 */
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Clustering of longitudinal panels with VAR(P) centroid dynamics", "carclust"};
    app.require_subcommand(1);
    Options o;

    auto add_fit_flags = [&](CLI::App* sub, bool with_fit) {
        sub->add_option("--input", o.input, "CSV with header unit,time,<vars>");
        sub->add_flag("--normalize", o.normalize, "min-max normalize each variable over the whole panel");
        if (!with_fit) {
            return;
        }
        sub->add_option("--clusters", o.clusters, "G or A..B");
        sub->add_option("--lags", o.lags, "VAR lag order P")->capture_default_str();
        sub->add_option("--restarts", o.restarts, "independent restarts")->capture_default_str();
        sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
        sub->add_option("--tol", o.tol, "relative decrease that stops the descent")->capture_default_str();
        sub->add_option("--max-iters", o.max_iters, "iteration cap per restart")->capture_default_str();
        sub->add_option("--init", o.init, "initial partitions")->check(CLI::IsMember({"random", "slicewise", "mixed"}))->capture_default_str();
        sub->add_option("--output", o.output, "report path (default: stdout)");
        sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"text", "tree"}))->capture_default_str();
    };

    auto* fit_cmd = app.add_subcommand("fit", "fit at a fixed number of clusters");
    add_fit_flags(fit_cmd, true);
    fit_cmd->add_flag("--allow-trivial", o.allow_trivial, "permit --clusters 1");

    auto* select_cmd = app.add_subcommand("select", "fit a range of cluster counts and pick the largest CH");
    add_fit_flags(select_cmd, true);

    auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic panel and its ground truth");
    sim_cmd->add_option("--units", o.units)->capture_default_str();
    sim_cmd->add_option("--vars", o.vars)->capture_default_str();
    sim_cmd->add_option("--times", o.times)->capture_default_str();
    sim_cmd->add_option("--clusters", o.clusters, "G")->capture_default_str();
    sim_cmd->add_option("--lags", o.lags)->capture_default_str();
    sim_cmd->add_option("--noise", o.noise, "noise standard deviation")->capture_default_str();
    sim_cmd->add_option("--spread", o.spread, "spacing of the initial centroids")->capture_default_str();
    sim_cmd->add_option("--switch-prob", o.switch_prob, "per unit-time membership redraw probability")->capture_default_str();
    sim_cmd->add_option("--seed", o.seed)->capture_default_str();
    sim_cmd->add_option("--output", o.output, "panel CSV path (default: stdout)");
    sim_cmd->add_option("--truth", o.truth, "ground-truth JSON path (default: <output>.truth.json)");

    auto* validate_cmd = app.add_subcommand("validate", "check a panel CSV without fitting");
    add_fit_flags(validate_cmd, false);

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("carclust");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) {
        argv.push_back(a.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << " (run 'carclust --help')\n";
        return 2;
    }

    try {
        if (fit_cmd->parsed()) {
            return cmd_fit(o, out, err);
        }
        if (select_cmd->parsed()) {
            return cmd_select(o, out, err);
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(o, out, err);
        }
        return cmd_validate(o, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidConfig& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}

#endif
