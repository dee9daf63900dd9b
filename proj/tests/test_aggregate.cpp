#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace kstate;
using Catch::Approx;

namespace {

std::shared_ptr<const ItemDomain> domain_of(std::size_t n) {
    return std::make_shared<const ItemDomain>(ItemDomain::synthetic(n));
}

Cohort make(const std::vector<std::pair<std::string, Grade>>& rows, WPolicy policy = WPolicy::Fail) {
    const auto n = rows.front().first.size();
    std::vector<StudentRecord> recs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        recs.emplace_back("s" + std::to_string(i), "C", "T", KnowledgeState::from_bitstring(rows[i].first),
                          rows[i].second);
    }
    return Cohort("C", "T", domain_of(n), std::move(recs), policy);
}

} // namespace

TEST_CASE("mean barcode examples", "[aggregate]") {
    const auto one = make({{"1010", Grade::A}});
    CHECK(mean_barcode(one).proportions == std::vector<double>{1, 0, 1, 0});

    const auto pair = make({{"1100", Grade::A}, {"0011", Grade::F}});
    CHECK(mean_barcode(pair).proportions == std::vector<double>{0.5, 0.5, 0.5, 0.5});

    const auto four = make({{"10", Grade::A}, {"10", Grade::B}, {"10", Grade::F}, {"00", Grade::F}});
    CHECK(mean_barcode(four).proportions[0] == 0.75);
    CHECK(mean_barcode(four).n == 4);

    CHECK_THROWS_AS(mean_barcode(RecordSubset{}), Error);
}

TEST_CASE("outcome split sizes", "[aggregate]") {
    std::vector<std::pair<std::string, Grade>> rows;
    for (int i = 0; i < 7; ++i) rows.push_back({"1", Grade::B});
    for (int i = 0; i < 3; ++i) rows.push_back({"0", Grade::F});
    const auto s = split_by_outcome(make(rows));
    CHECK(s.pass.size() == 7);
    CHECK(s.fail.size() == 3);

    const auto all_pass = split_by_outcome(make({{"1", Grade::A}, {"0", Grade::C}}));
    CHECK(all_pass.pass.size() == 2);
    CHECK(all_pass.fail.empty());

    const auto excl = split_by_outcome(make({{"1", Grade::W}, {"0", Grade::F}}, WPolicy::Exclude));
    CHECK(excl.excluded.size() == 1);
    CHECK(excl.fail.size() == 1);
}

TEST_CASE("grade split omits empty groups and keeps best first", "[aggregate]") {
    const auto c = make({{"11", Grade::F}, {"10", Grade::AMinus}, {"01", Grade::A}, {"00", Grade::W}});
    const auto bands = split_by_grade(c, GradeGranularity::Band);
    REQUIRE(bands.rows.size() == 2);
    CHECK(bands.rows[0].label == "A");
    CHECK(bands.rows[0].barcode.n == 2);
    CHECK(bands.rows[1].label == "FW");
    CHECK(bands.rows[1].barcode.proportions == std::vector<double>{0.5, 0.5});

    const auto letters = split_by_grade(c, GradeGranularity::Letter);
    REQUIRE(letters.rows.size() == 4);
    CHECK(letters.rows[0].label == "A");
    CHECK(letters.rows[1].label == "A-");
    CHECK(letters.rows[3].label == "W");
}

TEST_CASE("mean barcode is the size-weighted average of any split", "[aggregate][property]") {
    test::Gen gen(55);
    for (int rep = 0; rep < 100; ++rep) {
        const auto c = gen.cohort(gen.count(1, 60), gen.count(1, 40));
        const auto whole = mean_barcode(c);
        const auto s = split_by_outcome(c);
        std::vector<double> acc(whole.proportions.size(), 0.0);
        for (const auto* part : {&s.pass, &s.fail}) {
            if (part->empty()) continue;
            const auto mb = mean_barcode(*part);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += mb.proportions[i] * double(mb.n);
        }
        for (std::size_t i = 0; i < acc.size(); ++i) {
            CHECK(std::abs(acc[i] / double(c.size()) - whole.proportions[i]) <= 1e-12);
        }

        const auto g = split_by_grade(c, GradeGranularity::Letter);
        std::size_t total = 0;
        for (const auto& row : g.rows) total += row.barcode.n;
        CHECK(total == c.size());
    }
}

TEST_CASE("score bins", "[aggregate]") {
    SECTION("a single bin reproduces the cohort grade distribution") {
        const auto c = make({{"11", Grade::A}, {"10", Grade::B}, {"00", Grade::F}, {"01", Grade::B}});
        const auto bins = score_bins(c, EqualCountBins{1});
        REQUIRE(bins.bins.size() == 1);
        const auto& p = *bins.bins[0].band_proportions;
        CHECK(p[0] == 0.25);
        CHECK(p[1] == 0.5);
        CHECK(p[4] == 0.25);
        CHECK(bins.bins[0].n == 4);
    }
    SECTION("score ordering pass above fail") {
        std::vector<std::pair<std::string, Grade>> rows;
        for (int i = 0; i < 10; ++i) {
            std::string bits(10, '0');
            for (int k = 0; k < i; ++k) bits[k] = '1';
            rows.push_back({bits, i >= 5 ? Grade::B : Grade::F});
        }
        const auto bins = score_bins(make(rows), EqualCountBins{2});
        REQUIRE(bins.bins.size() == 2);
        CHECK((*bins.bins[1].band_proportions)[4] < (*bins.bins[0].band_proportions)[4]);
        CHECK(bins.bins[0].n + bins.bins[1].n == 10);
    }
    SECTION("an empty fixed bin has no proportions") {
        const auto c = make({{"0000", Grade::A}, {"1111", Grade::F}});
        const auto bins = score_bins(c, FixedEdges{{0.25, 0.5}});
        REQUIRE(bins.bins.size() == 3);
        CHECK(bins.bins[1].n == 0);
        CHECK_FALSE(bins.bins[1].band_proportions.has_value());
        CHECK(bins.bins[2].hi_inclusive);
        CHECK(bins.bins[2].n == 1);
    }
    SECTION("bad edges") {
        const auto c = make({{"1", Grade::A}});
        CHECK_THROWS_AS(score_bins(c, FixedEdges{{0.5, 0.4}}), Error);
        CHECK_THROWS_AS(score_bins(c, FixedEdges{{1.5}}), Error);
        CHECK_THROWS_AS(score_bins(c, EqualCountBins{0}), Error);
    }
}

TEST_CASE("bins partition the cohort", "[aggregate][property]") {
    test::Gen gen(77);
    for (int rep = 0; rep < 100; ++rep) {
        const auto c = gen.cohort(gen.count(1, 80), gen.count(1, 20));
        const Binning b = gen.coin() ? Binning{EqualCountBins{gen.count(1, 12)}} : Binning{FixedEdges{{0.2, 0.5, 0.8}}};
        const auto bins = score_bins(c, b);
        std::size_t total = 0;
        for (const auto& bin : bins.bins) {
            total += bin.n;
            CHECK(bin.lo <= bin.hi);
            if (bin.band_proportions) {
                double s = 0;
                for (double p : *bin.band_proportions) s += p;
                CHECK(s == Approx(1.0).epsilon(1e-12));
            }
        }
        CHECK(total == c.size());
    }
}

TEST_CASE("trajectories", "[aggregate]") {
    const auto d = domain_of(2);
    auto cohort = [&](std::string course, std::vector<std::string> states) {
        std::vector<StudentRecord> recs;
        for (std::size_t i = 0; i < states.size(); ++i) {
            recs.emplace_back("s" + std::to_string(i), course, "T", KnowledgeState::from_bitstring(states[i]),
                              i % 2 ? Grade::A : Grade::F);
        }
        return Cohort(course, "T", d, std::move(recs));
    };
    const std::vector<Cohort> seq = {cohort("A", {"01", "01"}), cohort("B", {"01", "01", "01"})};
    const auto zero = item_trajectory(seq, 0, false);
    CHECK(zero.values == std::vector<std::vector<std::optional<double>>>{{0.0}, {0.0}});
    const auto one = item_trajectory(seq, 1, false);
    CHECK(one.values == std::vector<std::vector<std::optional<double>>>{{1.0}, {1.0}});
    const auto banded = item_trajectory(seq, 1, true);
    CHECK(banded.columns.size() == 5);
    CHECK(banded.values[0][0] == 1.0);
    CHECK_FALSE(banded.values[0][1].has_value());

    const auto m = prevalence_matrix(seq);
    CHECK(m.courses == std::vector<std::string>{"A T", "B T"});
    CHECK(m.values[1] == std::vector<std::optional<double>>{0.0, 1.0});

    const std::vector<Cohort> mixed = {seq[0], Cohort("X", "T", domain_of(3), {})};
    CHECK_THROWS_AS(prevalence_matrix(mixed), Error);
}

TEST_CASE("rising ability gives rising prevalence", "[aggregate][synth]") {
    SynthConfig base;
    base.n_items = 30;
    base.rng_seed = 3;
    const std::vector<CourseSpec> specs = {{"M012", "2010-FA", 3000, -1.0, 1.0},
                                           {"M115", "2010-FA", 3000, 0.0, 1.0},
                                           {"M220", "2010-FA", 3000, 1.0, 1.0}};
    const auto gen = gen_course_sequence(base, specs);
    std::vector<Cohort> cohorts;
    for (const auto& g : gen) cohorts.push_back(g.cohort);
    const auto m = prevalence_matrix(cohorts);
    for (std::size_t item = 0; item < 30; ++item) {
        CHECK(*m.values[0][item] < *m.values[1][item]);
        CHECK(*m.values[1][item] < *m.values[2][item]);
    }
}
