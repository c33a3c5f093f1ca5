#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "carclust/carclust.hpp"
#include "oracles.hpp"

using namespace carclust;

namespace {

LongitudinalPanel parse(const std::string& text) {
    std::istringstream in(text);
    return parse_panel(in, "mem.csv");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}

TEST(Csv, MinimalPanel) {
    const auto p = parse("unit,time,gdp,life\nA,2001,1,2\nB,2001,3,4\nA,2000,5,6\nB,2000,7,8\n");
    EXPECT_EQ(p.units(), 2);
    EXPECT_EQ(p.vars(), 2);
    EXPECT_EQ(p.times(), 2);
    EXPECT_EQ(p.time_labels(), (std::vector<std::string>{"2000", "2001"}));
    EXPECT_EQ(p.unit_ids(), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(p.var_names()[1], "life");
    EXPECT_DOUBLE_EQ(p.value(0, 0, 0), 5.0);
    EXPECT_DOUBLE_EQ(p.value(1, 1, 1), 4.0);
}

TEST(Csv, NumericTimeOrdering) {
    const auto p = parse("unit,time,x\na,10,1\na,9,2\nb,10,3\nb,9,4\n");
    EXPECT_EQ(p.time_labels().front(), "9");
}

TEST(Csv, QuotedFieldsAndBlankLines) {
    const auto p = parse("\nunit,time,x\n\"Korea, Rep.\",1,1.5\nB,1,2\n\n\"Korea, Rep.\",2,3\nB,2,4\n");
    EXPECT_EQ(p.unit_ids()[0], "Korea, Rep.");
    EXPECT_DOUBLE_EQ(p.value(0, 0, 1), 3.0);
}

TEST(Csv, IncompletePanelNamesCell) {
    const std::string text = "unit,time,x\nA,1,1\nA,2,1\nB,1,2\n";
    try {
        parse(text);
        FAIL();
    } catch (const IncompletePanel& e) {
        EXPECT_EQ(e.unit, "B");
        EXPECT_EQ(e.time, "2");
        EXPECT_NE(std::string(e.what()).find("(B, 2)"), std::string::npos);
    }
}

TEST(Csv, DuplicateRowNamesLine) {
    try {
        parse("unit,time,x\nA,1,1\nA,2,1\nB,1,2\nB,2,2\nA,1,9\n");
        FAIL();
    } catch (const DuplicateRow& e) {
        EXPECT_EQ(e.line, 6u);
        EXPECT_NE(std::string(e.what()).find("A"), std::string::npos);
    }
}

TEST(Csv, ParseErrorsCarryLine) {
    EXPECT_NE(error_of("").find("missing header"), std::string::npos);
    EXPECT_NE(error_of("id,time,x\n").find("header"), std::string::npos);
    EXPECT_NE(error_of("unit,time,x\nA,1,abc\n").find("abc"), std::string::npos);
    EXPECT_NE(error_of("unit,time,x\nA,1,abc\n").find(":2"), std::string::npos);
    EXPECT_NE(error_of("unit,time,x\nA,1\n").find("expected 3 fields"), std::string::npos);
    EXPECT_NE(error_of("unit,time,x\nA,1,nan\nA,2,1\nB,1,1\nB,2,1\n").find("nan"), std::string::npos);
    EXPECT_NE(error_of("unit,time,x\nA,1,\n").find("missing value"), std::string::npos);
    EXPECT_NE(error_of("unit,time,x\nA,1,1\nA,2,2\n").find("two units"), std::string::npos);
    EXPECT_THROW(load_panel("/nonexistent/panel.csv"), IoError);
}

TEST(Csv, RoundTripIsBitExact) {
    auto panel = oracle::random_panel(7, 3, 4, 99, 1e3);
    std::ostringstream out;
    write_panel(panel, out);
    const auto back = parse(out.str());
    for (Index t = 0; t < 4; ++t) EXPECT_EQ(back.slice(t), panel.slice(t));
    EXPECT_EQ(back.unit_ids(), panel.unit_ids());
    EXPECT_EQ(back.time_labels(), panel.time_labels());

    std::ostringstream again;
    write_panel(back, again);
    EXPECT_EQ(again.str(), out.str());
}

TEST(Csv, FileRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "carclust_io_test.csv").string();
    auto panel = oracle::random_panel(3, 1, 3, 1);
    write_panel(panel, path);
    const auto back = load_panel(path);
    EXPECT_EQ(back.slice(2), panel.slice(2));
    std::remove(path.c_str());
}

TEST(Normalize, MinMax) {
    const auto p = parse("unit,time,x,y\nA,1,2,5\nB,1,4,1\nA,2,6,3\nB,2,4,2\n");
    const auto n = minmax_normalize(p);
    EXPECT_DOUBLE_EQ(n.value(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(n.value(1, 0, 0), 0.5);
    EXPECT_DOUBLE_EQ(n.value(0, 0, 1), 1.0);
    EXPECT_DOUBLE_EQ(n.value(0, 1, 0), 1.0);
    EXPECT_DOUBLE_EQ(n.value(1, 1, 0), 0.0);
    EXPECT_DOUBLE_EQ(n.value(0, 1, 1), 0.5);
}

TEST(Normalize, ConstantVariableRejected) {
    const auto p = parse("unit,time,x,flat\nA,1,2,5\nB,1,4,5\nA,2,6,5\nB,2,4,5\n");
    try {
        minmax_normalize(p);
        FAIL();
    } catch (const ConstantVariable& e) {
        EXPECT_EQ(e.variable, 1u);
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(Synthetic, DeterministicForSeed) {
    const auto spec = separated_spec(20, 2, 5, 3, 5.0, 1.0, 0.1, 42);
    const auto a = generate_panel(spec);
    const auto b = generate_panel(spec);
    for (Index t = 0; t < 5; ++t) EXPECT_EQ(a.panel.slice(t), b.panel.slice(t));
    EXPECT_EQ(a.partition, b.partition);
    auto other = spec;
    other.seed = 43;
    EXPECT_NE(generate_panel(other).panel.slice(0), a.panel.slice(0));
}

TEST(Synthetic, ZeroNoiseSitsOnCentroids) {
    const auto gen = generate_panel(separated_spec(10, 2, 4, 2, 3.0, 0.0, 0.5, 1));
    for (Index t = 0; t < 4; ++t) {
        for (Index i = 0; i < 10; ++i) EXPECT_EQ(gen.panel.slice(t).row(i), gen.centroids.at(t).row(gen.partition.label(i, t)));
        EXPECT_EQ(gen.centroids.at(t), gen.centroids.at(0));
    }
}

TEST(Synthetic, NoiseHasUnitVariance) {
    const auto gen = generate_panel(separated_spec(1000, 1, 2, 2, 10.0, 1.0, 0.0, 5));
    double sum = 0, sq = 0;
    for (Index t = 0; t < 2; ++t) {
        for (Index i = 0; i < 1000; ++i) {
            const double e = gen.panel.value(i, 0, t) - gen.centroids.at(t)(gen.partition.label(i, t), 0);
            sum += e;
            sq += e * e;
        }
    }
    const double mean = sum / 2000, var = sq / 2000 - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.1);
    EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(Synthetic, SpecValidation) {
    auto spec = separated_spec(10, 2, 4, 3, 1.0, 1.0, 0.0, 1);
    spec.switch_prob = 1.5;
    EXPECT_THROW(generate_panel(spec), InvalidSpec);
    spec = separated_spec(10, 2, 4, 11, 1.0, 1.0, 0.0, 1);
    EXPECT_THROW(generate_panel(spec), InvalidSpec);
    spec = separated_spec(10, 2, 4, 3, 1.0, 1.0, 0.0, 1);
    spec.require_stationary = true;
    EXPECT_THROW(generate_panel(spec), InvalidSpec);
    spec.coefficients.lags[0] *= 0.5;
    EXPECT_NO_THROW(generate_panel(spec));
    EXPECT_NEAR(companion_spectral_radius(spec.coefficients), 0.5, 1e-12);
}

TEST(Report, TreeRoundTrip) {
    auto gen = generate_panel(separated_spec(12, 2, 4, 2, 10.0, 0.5, 0.1, 3));
    FitConfig c;
    c.n_restarts = 2;
    const auto res = fit_multistart(gen.panel, c);
    const auto tree = report_tree(ReportInputs{gen.panel, c, res, nullptr, {}});
    const auto back = nlohmann::ordered_json::parse(tree.dump(2));
    EXPECT_EQ(back, tree);
    EXPECT_TRUE(back["ch_table"].is_null());
    EXPECT_DOUBLE_EQ(back["fit"]["objective"].get<double>(), round_significant(res.objective));
    const auto& first = back["fit"]["memberships"][gen.panel.unit_ids()[0]];
    ASSERT_EQ(first.size(), 4u);
    for (Index t = 0; t < 4; ++t) EXPECT_EQ(first[static_cast<std::size_t>(t)].get<Index>(), res.partition.label(0, t) + 1);
    EXPECT_EQ(back["transitions"]["counts"].size(), 2u);
    EXPECT_EQ(back["transitions"]["counts"][0].size(), 2u);
    EXPECT_EQ(back["centroids_model"]["times"].size(), 3u);
    EXPECT_EQ(back["coefficients"]["lags"].size(), 1u);
}

TEST(Report, TextMentionsSections) {
    auto panel = oracle::random_panel(8, 2, 4, 2);
    FitConfig c;
    c.n_restarts = 1;
    const auto res = fit_multistart(panel, c);
    std::ostringstream out;
    write_report(ReportInputs{panel, c, res, nullptr, {}}, out, ReportFormat::Text);
    const auto s = out.str();
    EXPECT_NE(s.find("objective"), std::string::npos);
    EXPECT_NE(s.find("u8"), std::string::npos);
}
