#include "xmargin/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

using namespace xmargin;

namespace {

Dataset parse(const std::string& text, const std::string& def = "A", bool header = false) {
    std::istringstream in(text);
    CsvSchema s;
    s.default_class_raw_label = def;
    s.header = header;
    return parse_csv(in, s, "mem");
}

Dataset toy(std::size_t n_pos, std::size_t n_neg) {
    Dataset d;
    d.cols = 1;
    for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
        d.features.push_back(static_cast<double>(i));
        d.labels.push_back(i < n_pos ? 1 : 0);
    }
    d.rows = n_pos + n_neg;
    return d;
}

std::string data_file(const char* name) { return std::string(XMARGIN_DATA_DIR) + "/" + name; }

} // namespace

TEST(Csv, ParsesFeaturesAndMapsDefaultClass) {
    const Dataset d = parse("1.5, 2,A\n-3,4e-1,B\n");
    EXPECT_EQ(d.rows, 2u);
    EXPECT_EQ(d.cols, 2u);
    EXPECT_EQ(d.features, (std::vector<double>{1.5, 2.0, -3.0, 0.4}));
    EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
    EXPECT_EQ(d.other_class_raw_label, "B");
}

TEST(Csv, HeaderNamesFeatures) {
    const Dataset d = parse("x,y,label\n1,2,A\n3,4,B\n", "B", true);
    EXPECT_EQ(d.feature_names, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1}));
}

TEST(Csv, LabelColumnAndAuxiliaryColumn) {
    std::istringstream in("A,0.9,1,2\nB,0.1,3,4\n");
    CsvSchema s;
    s.default_class_raw_label = "A";
    s.label_column = 0;
    s.auxiliary_column = 1;
    const Dataset d = parse_csv(in, s);
    EXPECT_EQ(d.cols, 2u);
    EXPECT_EQ(d.features, (std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(d.auxiliary, (std::vector<double>{0.9, 0.1}));
}

TEST(Csv, SkipsBlankLines) { EXPECT_EQ(parse("1,A\n\n2,B\n  \n").rows, 2u); }

TEST(Csv, ErrorsNameRowAndColumn) {
    try {
        parse("1,2,A\n3,x,B\n");
        FAIL();
    } catch (const IngestionError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2, column 1"), std::string::npos) << e.what();
    }
}

TEST(Csv, RejectsMalformedInput) {
    EXPECT_THROW(parse(""), IngestionError);
    EXPECT_THROW(parse("1,A\n2,A\n"), IngestionError);
    EXPECT_THROW(parse("1,A\n2,B\n3,C\n"), IngestionError);
    EXPECT_THROW(parse("1,A\n2,3,B\n"), IngestionError);
    EXPECT_THROW(parse("1,A\n2,B\n", "Z"), IngestionError);
    EXPECT_THROW(parse("nan,A\n2,B\n"), IngestionError);
    EXPECT_THROW(parse("inf,A\n2,B\n"), IngestionError);
    EXPECT_THROW(parse("1,A\n2,\n"), IngestionError);
}

TEST(Csv, ShippedSonar) {
    CsvSchema s;
    s.default_class_raw_label = "M";
    const Dataset d = load_csv(data_file("sonar.csv"), s);
    EXPECT_EQ(d.rows, 208u);
    EXPECT_EQ(d.cols, 60u);
    EXPECT_EQ(d.count(1), 111u);
    EXPECT_EQ(d.count(0), 97u);
}

TEST(Csv, ShippedIonosphere) {
    CsvSchema s;
    s.default_class_raw_label = "g";
    const Dataset d = load_csv(data_file("ionosphere.csv"), s);
    EXPECT_EQ(d.rows, 351u);
    EXPECT_EQ(d.cols, 34u);
    EXPECT_EQ(d.count(1), 225u);
    for (std::size_t i = 0; i < d.rows; ++i) ASSERT_EQ(d.at(i, 1), 0.0);
}

TEST(Csv, MissingFile) {
    CsvSchema s;
    s.default_class_raw_label = "A";
    EXPECT_THROW(load_csv("/nonexistent/file.csv", s), IngestionError);
}

TEST(Scaling, MinMaxFittedOnGivenRowsOnly) {
    Dataset d = toy(2, 2); // features 0..3
    const std::vector<std::size_t> fit = {0, 1};
    const Dataset s = scale_features(d, ScalingMethod::MinMax, fit);
    EXPECT_EQ(s.features, (std::vector<double>{0.0, 1.0, 2.0, 3.0}));
    EXPECT_EQ(s.scaling.offset[0], 0.0);
    EXPECT_EQ(s.scaling.scale[0], 1.0);
}

TEST(Scaling, ZScoreUsesPopulationStd) {
    Dataset d = toy(2, 2);
    const std::vector<std::size_t> all = {0, 1, 2, 3};
    const Dataset s = scale_features(d, ScalingMethod::ZScore, all);
    EXPECT_NEAR(s.scaling.offset[0], 1.5, 1e-15);
    EXPECT_NEAR(s.scaling.scale[0], std::sqrt(1.25), 1e-15);
    double sum = 0, sq = 0;
    for (double v : s.features) {
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
    EXPECT_NEAR(sq / 4.0, 1.0, 1e-12);
}

TEST(Scaling, ConstantFeatureMapsToZero) {
    Dataset d = toy(2, 2);
    for (double& v : d.features) v = 7.0;
    const std::vector<std::size_t> all = {0, 1, 2, 3};
    for (auto m : {ScalingMethod::MinMax, ScalingMethod::ZScore}) {
        const Dataset s = scale_features(d, m, all);
        for (double v : s.features) EXPECT_EQ(v, 0.0);
    }
}

TEST(Scaling, NoneIsIdentity) {
    const Dataset d = toy(2, 2);
    const std::vector<std::size_t> all = {0, 1};
    EXPECT_EQ(scale_features(d, ScalingMethod::None, all).features, d.features);
}

TEST(KFold, EveryRowOnceAndStratified) {
    const Dataset d = toy(23, 17);
    const FoldPlan p = stratified_kfold(d, 5, 3);
    std::vector<std::size_t> seen;
    for (std::size_t f = 0; f < 5; ++f) {
        const auto rows = p.fold_indices(f);
        std::size_t pos = 0;
        for (std::size_t i : rows) pos += d.labels[i];
        // class counts per fold differ by at most one from the ideal share
        EXPECT_NEAR(static_cast<double>(pos), 23.0 / 5.0, 1.0);
        EXPECT_NEAR(static_cast<double>(rows.size() - pos), 17.0 / 5.0, 1.0);
        seen.insert(seen.end(), rows.begin(), rows.end());
        EXPECT_EQ(p.train_indices(f).size() + rows.size(), d.rows);
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> expect(d.rows);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(seen, expect);
}

TEST(KFold, FoldSizesDifferByAtMostOne) {
    const Dataset d = toy(11, 9);
    const FoldPlan p = stratified_kfold(d, 3, 1);
    std::set<std::size_t> sizes;
    for (std::size_t f = 0; f < 3; ++f) sizes.insert(p.fold_indices(f).size());
    EXPECT_LE(*sizes.rbegin() - *sizes.begin(), 1u);
}

TEST(KFold, DeterministicPerSeed) {
    const Dataset d = toy(30, 30);
    EXPECT_EQ(stratified_kfold(d, 10, 4), stratified_kfold(d, 10, 4));
    EXPECT_NE(stratified_kfold(d, 10, 4).assignments, stratified_kfold(d, 10, 5).assignments);
}

TEST(KFold, RejectsTooFewMembers) {
    EXPECT_THROW(stratified_kfold(toy(20, 3), 4, 0), std::invalid_argument);
    EXPECT_THROW(stratified_kfold(toy(20, 20), 1, 0), std::invalid_argument);
}

TEST(Split, StratifiedCountsAndDisjoint) {
    const Dataset d = toy(70, 30);
    const TrainTestSplit s = stratified_split(d, 0.3, 8);
    EXPECT_EQ(s.test.size(), 21u + 9u);
    EXPECT_EQ(s.train.size(), 70u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (std::size_t i : s.test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), d.rows);
}

TEST(Split, RejectsBadFraction) {
    EXPECT_THROW(stratified_split(toy(5, 5), 0.0, 1), std::invalid_argument);
    EXPECT_THROW(stratified_split(toy(5, 5), 1.0, 1), std::invalid_argument);
}

TEST(PrepareSplit, ScalingSeesOnlyTrainingRows) {
    const Dataset d = toy(5, 5);
    const std::vector<std::size_t> train = {0, 1, 2, 5, 6};
    const std::vector<std::size_t> held = {9};
    const PreparedSplit p = prepare_split(d, train, held, ScalingMethod::MinMax);
    EXPECT_EQ(p.train.scaling.offset[0], 0.0);
    EXPECT_EQ(p.train.scaling.scale[0], 6.0);
    EXPECT_DOUBLE_EQ(p.held_out.features[0], 9.0 / 6.0);
}

TEST(MeanStd, PopulationForm) {
    const std::vector<double> v = {1, 2, 3, 4};
    const MeanStd ms = mean_std(v);
    EXPECT_DOUBLE_EQ(ms.mean, 2.5);
    EXPECT_DOUBLE_EQ(ms.stddev, std::sqrt(1.25));
    EXPECT_THROW(mean_std(std::vector<double>{}), std::invalid_argument);
}

TEST(RepeatedCv, EnvelopesAndSeeds) {
    const Dataset d = toy(20, 20);
    CvOptions o;
    o.k = 4;
    o.repeats = 3;
    o.seed = 100;
    std::vector<std::uint64_t> seeds;
    const CvReport r = repeated_cv(
        d, o, [&](const Dataset& train, std::uint64_t seed) { return static_cast<double>(train.rows + seed % 7); },
        [](double model, const Dataset& held) { return model / 100.0 + static_cast<double>(held.rows); });
    ASSERT_EQ(r.per_repeat.size(), 3u);
    for (std::size_t rep = 0; rep < 3; ++rep) {
        EXPECT_EQ(r.per_repeat[rep].seed, repeat_seed(100, rep));
        EXPECT_EQ(r.per_repeat[rep].fold_scores.size(), 4u);
    }
    double lo = 1e9, hi = -1e9;
    for (const auto& rep : r.per_repeat) {
        lo = std::min(lo, rep.mean);
        hi = std::max(hi, rep.mean);
    }
    EXPECT_EQ(r.mean_envelope.min, lo);
    EXPECT_EQ(r.mean_envelope.max, hi);
}

TEST(RepeatedCv, SingleRepeatHasDegenerateEnvelope) {
    const Dataset d = toy(10, 10);
    CvOptions o;
    o.k = 5;
    o.repeats = 1;
    const CvReport r = repeated_cv(
        d, o, [](const Dataset&, std::uint64_t seed) { return static_cast<double>(seed % 10); },
        [](double m, const Dataset&) { return m; });
    EXPECT_EQ(r.mean_envelope.min, r.mean_envelope.max);
    EXPECT_EQ(r.std_envelope.min, r.std_envelope.max);
}

TEST(RepeatedCv, ThreadedMatchesSequential) {
    const Dataset d = toy(15, 15);
    CvOptions o;
    o.k = 3;
    o.repeats = 4;
    o.seed = 9;
    auto train_fn = [](const Dataset& train, std::uint64_t seed) {
        double s = static_cast<double>(seed % 1000);
        for (double v : train.features) s += v;
        return s;
    };
    auto metric_fn = [](double m, const Dataset& held) { return m + held.features.front(); };
    const CvReport a = repeated_cv(d, o, train_fn, metric_fn);
    o.threads = 4;
    const CvReport b = repeated_cv(d, o, train_fn, metric_fn);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(a.per_repeat[r].fold_scores, b.per_repeat[r].fold_scores);
}

TEST(RepeatedCv, CellFailureNamesTheCell) {
    const Dataset d = toy(10, 10);
    CvOptions o;
    o.k = 2;
    o.repeats = 2;
    try {
        repeated_cv(
            d, o,
            [](const Dataset&, std::uint64_t) -> double { throw std::runtime_error("boom"); },
            [](double m, const Dataset&) { return m; });
        FAIL();
    } catch (const CvCellError& e) {
        EXPECT_EQ(e.repeat(), 0u);
        EXPECT_EQ(e.fold(), 0u);
    }
}

TEST(Dataset, SubsetAndSelectFeatures) {
    Dataset d = toy(2, 2);
    d.cols = 2;
    d.features = {0, 1, 2, 3, 4, 5, 6, 7};
    d.feature_names = {"a", "b"};
    const std::vector<std::size_t> rows = {3, 0};
    const Dataset s = d.subset(rows);
    EXPECT_EQ(s.features, (std::vector<double>{6, 7, 0, 1}));
    EXPECT_EQ(s.labels, (std::vector<int>{0, 1}));
    const std::vector<std::size_t> cols = {1};
    const Dataset f = d.select_features(cols);
    EXPECT_EQ(f.features, (std::vector<double>{1, 3, 5, 7}));
    EXPECT_EQ(f.feature_names, (std::vector<std::string>{"b"}));
}
