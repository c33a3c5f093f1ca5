#ifndef CARCLUST_REPORT_HPP
#define CARCLUST_REPORT_HPP

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diagnostics.hpp"
#include "estimator.hpp"
#include "panel.hpp"
#include "selection.hpp"

/**
 * @file report.hpp
 * @brief Fit reports as a key-value tree (JSON) or as plain-text tables.
 *
 * Top-level keys of the tree are fixed: `config`, `fit`, `centroids_model`, `centroids_empirical`,
 * `coefficients`, `ch_table`, `transitions`, `shares`. Cluster labels are 1-based and every real
 * number is rounded to 6 significant digits.
 */

namespace carclust {

enum class ReportFormat { Text, Tree };

struct ReportContext {
    std::string command = "fit";
    std::string input;
    bool normalized = false;
};

/// Everything a report shows; `ch` may be null when no CH table was computed.
struct ReportInputs {
    const LongitudinalPanel& panel;
    const FitConfig& config;
    const FitResult& fit;
    const ChReport* ch = nullptr;
    ReportContext context{};
};

inline double round_significant(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::strtod(buf, nullptr);
}

inline std::string format_significant(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

namespace detail {

using Tree = nlohmann::ordered_json;

inline Tree row_tree(const Eigen::Ref<const RowVector>& row) {
    Tree out = Tree::array();
    for (Index j = 0; j < row.size(); ++j) {
        out.push_back(round_significant(row(j)));
    }
    return out;
}

inline Tree matrix_tree(const Matrix& m) {
    Tree out = Tree::array();
    for (Index r = 0; r < m.rows(); ++r) {
        out.push_back(row_tree(m.row(r)));
    }
    return out;
}

inline Tree centroid_tree(const CentroidSequence& seq, const LongitudinalPanel& panel) {
    Tree out;
    Tree times = Tree::array();
    for (Index t = 0; t < seq.times(); ++t) {
        times.push_back(panel.time_labels()[static_cast<std::size_t>(t)]);
    }
    out["times"] = times;
    out["variables"] = panel.var_names();
    Tree clusters = Tree::array();
    for (Index g = 0; g < seq.clusters(); ++g) {
        Tree values = Tree::array();
        for (Index t = 0; t < seq.times(); ++t) {
            values.push_back(row_tree(seq.at(t).row(g)));
        }
        clusters.push_back(Tree{{"cluster", g + 1}, {"values", values}});
    }
    out["clusters"] = clusters;
    return out;
}

inline Tree ch_tree(const ChReport& ch) {
    Tree rows = Tree::array();
    for (const auto& c : ch.candidates) {
        Tree row;
        row["clusters"] = c.n_clusters;
        row["ch"] = c.ch ? Tree(round_significant(*c.ch)) : Tree(nullptr);
        row["trace_w"] = round_significant(c.trace_w);
        row["trace_b"] = round_significant(c.trace_b);
        row["objective"] = round_significant(c.objective);
        row["iterations"] = c.iterations;
        row["converged"] = c.converged;
        row["selected"] = c.n_clusters == ch.selected_g;
        if (!c.error.empty()) {
            row["error"] = c.error;
        }
        rows.push_back(row);
    }
    return Tree{{"lag_order", ch.lag_order}, {"selected_g", ch.selected_g}, {"candidates", rows}};
}

}

inline nlohmann::ordered_json report_tree(const ReportInputs& in) {
    using detail::Tree;
    const auto& panel = in.panel;
    const auto& fit = in.fit;
    const auto transitions = transition_matrix(fit.partition);
    const auto shares = membership_shares(fit.partition);

    Tree root;
    root["config"] = Tree{{"command", in.context.command},
                          {"input", in.context.input},
                          {"normalize", in.context.normalized},
                          {"clusters", fit.partition.clusters()},
                          {"lags", in.config.lag_order},
                          {"restarts", in.config.n_restarts},
                          {"max_iters", in.config.max_iters},
                          {"tol", in.config.rel_tol},
                          {"seed", in.config.seed},
                          {"init", to_string(in.config.init_strategy)},
                          {"units", panel.units()},
                          {"variables", panel.vars()},
                          {"times", panel.times()}};

    Tree memberships = Tree::object();
    for (Index i = 0; i < panel.units(); ++i) {
        Tree labels = Tree::array();
        for (Index t = 0; t < panel.times(); ++t) {
            labels.push_back(fit.partition.label(i, t) + 1);
        }
        memberships[panel.unit_ids()[static_cast<std::size_t>(i)]] = labels;
    }
    root["fit"] = Tree{{"objective", round_significant(fit.objective)},
                       {"iterations", fit.iterations},
                       {"converged", fit.converged},
                       {"restart_index", fit.restart_index},
                       {"init", to_string(fit.init_used)},
                       {"reseeds", fit.reseeds},
                       {"static_slices", fit.static_slices},
                       {"time_labels", panel.time_labels()},
                       {"memberships", memberships}};

    root["centroids_model"] = detail::centroid_tree(fit.model_centroids, panel);
    root["centroids_empirical"] = detail::centroid_tree(fit.empirical_centroids, panel);

    Tree lags = Tree::array();
    for (Index p = 0; p < fit.coefficients.lag_order(); ++p) {
        lags.push_back(Tree{{"lag", p + 1}, {"matrix", detail::matrix_tree(fit.coefficients.lags[static_cast<std::size_t>(p)])}});
    }
    root["coefficients"] = Tree{{"intercept", detail::row_tree(fit.coefficients.intercept.transpose())}, {"lags", lags}};

    root["ch_table"] = in.ch != nullptr && !in.ch->candidates.empty() ? detail::ch_tree(*in.ch) : Tree(nullptr);

    Tree counts = Tree::array();
    for (Index a = 0; a < transitions.counts.rows(); ++a) {
        Tree row = Tree::array();
        for (Index b = 0; b < transitions.counts.cols(); ++b) {
            row.push_back(transitions.counts(a, b));
        }
        counts.push_back(row);
    }
    Tree empty_rows = Tree::array();
    for (std::size_t a = 0; a < transitions.empty_rows.size(); ++a) {
        if (transitions.empty_rows[a]) {
            empty_rows.push_back(a + 1);
        }
    }
    root["transitions"] = Tree{{"counts", counts},
                               {"probs", detail::matrix_tree(transitions.probs)},
                               {"n_transitions", transitions.n_transitions},
                               {"empty_rows", empty_rows}};
    root["shares"] = detail::row_tree(shares.transpose());
    return root;
}

namespace detail {

inline void text_centroids(std::ostream& out, const char* title, const CentroidSequence& seq, const LongitudinalPanel& panel) {
    out << title << '\n';
    for (Index j = 0; j < panel.vars(); ++j) {
        out << "  [" << panel.var_names()[static_cast<std::size_t>(j)] << "]\n";
        out << "  " << std::setw(12) << "time";
        for (Index g = 0; g < seq.clusters(); ++g) {
            out << std::setw(14) << ("cluster " + std::to_string(g + 1));
        }
        out << '\n';
        for (Index t = 0; t < seq.times(); ++t) {
            out << "  " << std::setw(12) << panel.time_labels()[static_cast<std::size_t>(t)];
            for (Index g = 0; g < seq.clusters(); ++g) {
                out << std::setw(14) << format_significant(seq.at(t)(g, j));
            }
            out << '\n';
        }
    }
    out << '\n';
}

}

inline void write_text_report(const ReportInputs& in, std::ostream& out) {
    const auto& panel = in.panel;
    const auto& fit = in.fit;
    const Index G = fit.partition.clusters();
    const auto transitions = transition_matrix(fit.partition);
    const auto shares = membership_shares(fit.partition);

    out << "Clustered VAR fit report\n========================\n\n";
    out << "Configuration\n";
    out << "  command     " << in.context.command << '\n';
    out << "  input       " << (in.context.input.empty() ? "-" : in.context.input) << '\n';
    out << "  normalize   " << (in.context.normalized ? "yes" : "no") << '\n';
    out << "  panel       " << panel.units() << " units x " << panel.vars() << " variables x " << panel.times() << " times\n";
    out << "  clusters    " << G << "\n  lags        " << in.config.lag_order << "\n  restarts    " << in.config.n_restarts
        << "\n  max iters   " << in.config.max_iters << "\n  tol         " << format_significant(in.config.rel_tol)
        << "\n  seed        " << in.config.seed << "\n  init        " << to_string(in.config.init_strategy) << "\n\n";

    out << "Fit\n";
    out << "  objective   " << format_significant(fit.objective) << '\n';
    out << "  iterations  " << fit.iterations << (fit.converged ? " (converged)" : " (not converged)") << '\n';
    out << "  restart     " << fit.restart_index + 1 << " (" << to_string(fit.init_used) << " start)\n";
    out << "  reseeds     " << fit.reseeds << '\n';
    out << "  static slices (labelled from the following slice): " << fit.static_slices << "\n\n";

    if (in.ch != nullptr && !in.ch->candidates.empty()) {
        out << "Model selection (Calinski-Harabasz)\n";
        out << "  " << std::setw(6) << "G" << std::setw(14) << "CH" << std::setw(14) << "trace(W)" << std::setw(14) << "trace(B)"
            << std::setw(14) << "objective" << '\n';
        for (const auto& c : in.ch->candidates) {
            out << "  " << std::setw(6) << c.n_clusters;
            if (c.ch) {
                out << std::setw(14) << format_significant(*c.ch) << std::setw(14) << format_significant(c.trace_w) << std::setw(14)
                    << format_significant(c.trace_b) << std::setw(14) << format_significant(c.objective);
            } else {
                out << "  failed: " << c.error;
            }
            out << (c.n_clusters == in.ch->selected_g ? "  <- selected" : "") << '\n';
        }
        out << '\n';
    } else {
        out << "Model selection (Calinski-Harabasz)\n  (not computed)\n\n";
    }

    detail::text_centroids(out, "Empirical centroids (per-time class means)", fit.empirical_centroids, panel);
    detail::text_centroids(out, "Model centroids (lagged regression parameters)", fit.model_centroids, panel);

    out << "VAR coefficients\n  intercept  ";
    for (Index j = 0; j < fit.coefficients.vars(); ++j) {
        out << std::setw(14) << format_significant(fit.coefficients.intercept(j));
    }
    out << '\n';
    for (Index p = 0; p < fit.coefficients.lag_order(); ++p) {
        const auto& a = fit.coefficients.lags[static_cast<std::size_t>(p)];
        for (Index r = 0; r < a.rows(); ++r) {
            out << "  " << std::left << std::setw(11) << (r == 0 ? "A" + std::to_string(p + 1) : "") << std::right;
            for (Index c = 0; c < a.cols(); ++c) {
                out << std::setw(14) << format_significant(a(r, c));
            }
            out << '\n';
        }
    }
    out << '\n';

    out << "Transition matrix (t-1 on rows, t on columns), " << transitions.n_transitions << " switches\n";
    out << "  " << std::setw(10) << "";
    for (Index b = 0; b < G; ++b) {
        out << std::setw(12) << ("to " + std::to_string(b + 1));
    }
    out << '\n';
    for (Index a = 0; a < G; ++a) {
        out << "  " << std::setw(10) << ("from " + std::to_string(a + 1));
        for (Index b = 0; b < G; ++b) {
            out << std::setw(12) << format_significant(transitions.probs(a, b));
        }
        out << (transitions.empty_rows[static_cast<std::size_t>(a)] ? "  (never occupied)" : "") << '\n';
    }
    out << '\n';

    out << "Membership shares\n";
    for (Index g = 0; g < G; ++g) {
        out << "  cluster " << g + 1 << "  " << format_significant(100.0 * shares(g), 4) << "%\n";
    }
    out << '\n';

    out << "Memberships\n  " << std::setw(16) << "unit";
    for (const auto& t : panel.time_labels()) {
        out << std::setw(8) << t;
    }
    out << std::setw(10) << "switches" << '\n';
    for (Index i = 0; i < panel.units(); ++i) {
        const auto traj = unit_trajectory(fit.partition, i);
        out << "  " << std::setw(16) << panel.unit_ids()[static_cast<std::size_t>(i)];
        for (auto l : traj.labels) {
            out << std::setw(8) << l + 1;
        }
        out << std::setw(10) << traj.switches << '\n';
    }
}

inline void write_report(const ReportInputs& in, std::ostream& out, ReportFormat format) {
    if (format == ReportFormat::Tree) {
        out << report_tree(in).dump(2) << '\n';
    } else {
        write_text_report(in, out);
    }
}

inline void write_report(const ReportInputs& in, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    write_report(in, out, format);
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

}

#endif
