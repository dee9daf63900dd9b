// Acceptance suite. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "golden_cases.hpp"
#include "kstate_cli.hpp"
#include "oracle.hpp"
#include "scenarios.hpp"
#include "support.hpp"

using namespace kstate;

namespace {

const std::filesystem::path kFixtures = KSTATE_FIXTURE_DIR;
const std::filesystem::path kGolden = KSTATE_GOLDEN_DIR;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Verdict factorization() {
    test::Gen gen(20240101);
    std::size_t checked = 0, skipped = 0;
    double worst = 0;
    for (double c : {0.0, 0.5, 1.0}) {
        for (int i = 0; i < 12000; ++i) {
            const auto t = gen.table(500);
            const auto a = adjust(t, c);
            if (!a.positive()) { // only reachable with C = 0
                ++skipped;
                continue;
            }
            const double orr = odds_ratio(a);
            worst = std::max(worst, std::abs(orr - passing_ratio(a) * failing_ratio(a)) / orr);
            ++checked;
        }
    }
    return {checked >= 10000 && worst <= 1e-12,
            fmt("%zu tables (C in {0,0.5,1}; %zu zero-cell tables skipped at C=0), max rel err %.3g", checked, skipped,
                worst)};
}

Verdict null_calibration() {
    double sum_z = 0, sum_frac = 0, sum_z2 = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const auto a = analyze_cohort(gen_cohort(test::null_config(static_cast<std::uint64_t>(s), 10000, 50)).cohort);
        sum_z += *a.summary.mean_z;
        sum_z2 += *a.summary.mean_z * *a.summary.mean_z;
        sum_frac += *a.summary.frac_or_gt_1;
    }
    const double mean_z = sum_z / seeds;
    const double frac = sum_frac / seeds;
    const double sd_seed = std::sqrt((sum_z2 - seeds * mean_z * mean_z) / (seeds - 1));
    const bool ok = std::abs(mean_z) <= 0.1 && frac >= 0.45 && frac <= 0.55;
    return {ok, fmt("seeds 0..19: mean z %+.4f (need |.|<=0.1), frac OR>1 %.4f (need [0.45,0.55]); "
                    "per-seed sd of mean z %.3f, so the 20-seed average has standard error %.3f",
                    mean_z, frac, sd_seed, sd_seed / std::sqrt(double(seeds)))};
}

Verdict positive_coupling() {
    SynthConfig cfg;
    cfg.n_students = 10000;
    cfg.rng_seed = 42;
    cfg.grade_model.score_weight = 2.0;
    const auto a = analyze_cohort(gen_cohort(cfg).cohort);
    const double frac = *a.summary.frac_or_gt_1;
    return {frac >= 0.85, fmt("beta=2, 182 items, 10000 students: frac OR>1 = %.4f over %zu informative items", frac,
                              a.summary.n_items_informative)};
}

Verdict planted_recovery() {
    int basic_ok = 0, adv_ok = 0, prev_in_range = 0;
    double basic_prev = 0, adv_prev = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto b = analyze_cohort(gen_cohort(test::planted_config(EffectType::Basic, seed)).cohort);
        const auto& bi = b.items[test::kPlantedItem];
        basic_prev += bi.prevalence;
        prev_in_range += bi.prevalence >= 0.6 && bi.prevalence <= 0.95;
        basic_ok += (bi.classification == ItemClass::Basic || bi.classification == ItemClass::Core) &&
                    *bi.failing_ratio > *bi.passing_ratio;

        const auto v = analyze_cohort(gen_cohort(test::planted_config(EffectType::Advanced, seed)).cohort);
        const auto& vi = v.items[test::kPlantedItem];
        adv_prev += vi.prevalence;
        adv_ok += (vi.classification == ItemClass::Advanced || vi.classification == ItemClass::Core) &&
                  *vi.passing_ratio > *vi.failing_ratio;
    }
    return {basic_ok >= 95 && adv_ok >= 95 && prev_in_range == 100,
            fmt("n=2000, strength 1.5: basic recovered %d/100 (prevalence mean %.3f, %d/100 in [0.6,0.95]); "
                "advanced recovered %d/100 (prevalence mean %.3f)",
                basic_ok, basic_prev / 100, prev_in_range, adv_ok, adv_prev / 100)};
}

/// 227 students: 199 hold the item (149 pass, 50 fail), 28 lack it (12 pass,
/// 16 fail). These counts reproduce every quoted rounded rate: prevalence
/// 88%, pass given item 75%, fail given no item 57%, ambient pass 71%.
Verdict alge026() {
    const std::size_t n_items = 182;
    const std::size_t target = 25;
    std::vector<ItemMeta> metas;
    for (std::size_t i = 0; i < n_items; ++i) {
        metas.push_back({i, i == target ? "alge026" : "item" + std::to_string(i), "algebra", ""});
    }
    auto domain = std::make_shared<const ItemDomain>(std::move(metas));
    test::Gen gen(26);
    std::vector<StudentRecord> recs;
    auto add = [&](int n, bool has, bool pass) {
        for (int k = 0; k < n; ++k) {
            auto s = gen.state(n_items, 0.5);
            s.set(target, has);
            recs.emplace_back("st" + std::to_string(recs.size()), "M012", "2010-FA", s,
                              pass ? (gen.coin() ? Grade::B : Grade::CMinus) : (gen.coin() ? Grade::F : Grade::DPlus),
                              "2010-08-01");
        }
    };
    add(149, true, true);
    add(50, true, false);
    add(12, false, true);
    add(16, false, false);
    const Cohort built("M012", "2010-FA", domain, std::move(recs));

    // Through the CSV writer, the ingester and the report round trip.
    std::ostringstream csv_out;
    io::write_records(csv_out, std::span(&built, 1));
    std::istringstream csv_in(csv_out.str());
    const auto cohort = io::ingest(csv_in, domain).at(0);
    StatsConfig cfg;
    const auto report = io::read_report(io::write_report(io::make_report(cohort, analyze_cohort(cohort, cfg), cfg)));
    const auto& item = report.items.at(target).stats;

    const auto& t = item.table;
    const bool rates_match = std::lround(100.0 * t.has_item() / t.total()) == 88 &&
                             std::lround(100.0 * t.n00 / t.has_item()) == 75 &&
                             std::lround(100.0 * t.n11 / t.lacks_item()) == 57 &&
                             std::lround(100.0 * t.passed() / t.total()) == 71;
    const double ambient = report.metadata.ambient.pass_rate;
    const double fr = *item.failing_ratio;
    const double z = *item.z_score;
    const bool ok = rates_match && t.total() == 227 && std::abs(ambient - 0.71) <= 0.01 && fr > 2 && z >= 2.5 &&
                    z <= 5.0;
    return {ok, fmt("N=%llu ambient pass %.4f, failing ratio %.3f, passing ratio %.3f, z %.3f, class %s",
                    static_cast<unsigned long long>(t.total()), ambient, fr, *item.passing_ratio, z,
                    std::string(to_string(item.classification)).c_str())};
}

Verdict oracle_equivalence() {
    test::Gen gen(424242);
    std::size_t cohorts = 0, fields = 0, mismatches = 0;
    auto close = [&](double a, double b) {
        ++fields;
        if (test::rel_diff(a, b) > 1e-12) ++mismatches;
    };
    auto same = [&](bool ok) {
        ++fields;
        if (!ok) ++mismatches;
    };
    while (cohorts < 200) {
        const auto policy = gen.coin(0.8) ? WPolicy::Fail : WPolicy::Exclude;
        const auto c = gen.cohort(gen.count(1, 12), gen.count(1, 8), policy);
        StatsConfig cfg;
        cfg.pseudocount = std::vector<double>{0.0, 0.5, 1.0}[gen.count(0, 2)];
        cfg.small_count_threshold = gen.count(0, 6);
        CohortAnalysis a;
        try {
            a = analyze_cohort(c, cfg);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyCohort) ++mismatches;
            continue; // every record excluded; draw another cohort
        }
        ++cohorts;
        for (const auto& s : a.items) {
            const auto n = oracle::recompute(c, s.item_index, cfg.pseudocount, cfg.small_count_threshold,
                                             cfg.passing_threshold, cfg.failing_threshold, cfg.strong_multiplier);
            same(s.table.n00 == std::uint64_t(n.has_pass) && s.table.n01 == std::uint64_t(n.has_fail) &&
                 s.table.n10 == std::uint64_t(n.lack_pass) && s.table.n11 == std::uint64_t(n.lack_fail));
            same(s.informative == n.informative);
            same(s.small_counts == n.small);
            same(s.classification == n.cls);
            close(s.prevalence, n.prevalence);
            same(s.odds_ratio.has_value() == n.odds_ratio.has_value());
            if (s.odds_ratio && n.odds_ratio) {
                close(*s.odds_ratio, *n.odds_ratio);
                close(*s.log_or, *n.log_or);
                close(*s.variance, *n.variance);
                close(*s.z_score, *n.z);
                close(*s.passing_ratio, *n.pr);
                close(*s.failing_ratio, *n.fr);
            }
        }
    }
    return {mismatches == 0, fmt("%zu micro-cohorts, %zu field comparisons, %zu mismatches", cohorts, fields, mismatches)};
}

Verdict exclusion_rules() {
    test::Gen gen(555);
    std::size_t checked = 0, wrong = 0;
    enum Kind { N00, N11, NoHas, NoLack, NoPass, NoFail, Populated };
    for (int i = 0; i < 3500; ++i) {
        const auto kind = static_cast<Kind>(i % 7);
        ContingencyTable t = gen.positive_table(60);
        switch (kind) {
            case N00: t.n00 = 0; break;
            case N11: t.n11 = 0; break;
            case NoHas: t.n00 = t.n01 = 0; break;
            case NoLack: t.n10 = t.n11 = 0; break;
            case NoPass: t.n00 = t.n10 = 0; break;
            case NoFail: t.n01 = t.n11 = 0; break;
            case Populated: break;
        }
        const bool expect_informative = kind == Populated;
        // Directly and through a cohort.
        const auto direct = item_stats(0, t, {});
        const auto via = analyze_cohort(test::cohort_from_table(t)).items.at(0);
        for (const auto& s : {direct, via}) {
            ++checked;
            const bool uninformative = s.classification == ItemClass::Uninformative && !s.informative &&
                                       !s.odds_ratio && !s.z_score && !s.passing_ratio && !s.failing_ratio;
            if (uninformative == expect_informative) ++wrong;
        }
    }
    return {wrong == 0, fmt("%zu constructed tables (n00=0, n11=0, empty row, empty column, populated), %zu wrong",
                            checked, wrong)};
}

Verdict aggregation_identity() {
    test::Gen gen(909);
    double worst = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto c = gen.cohort(gen.count(1, 300), gen.count(1, 182));
        const auto whole = mean_barcode(c);
        const auto s = split_by_outcome(c);
        std::vector<double> acc(whole.proportions.size(), 0.0);
        for (const auto* part : {&s.pass, &s.fail}) {
            if (part->empty()) continue;
            const auto mb = mean_barcode(*part);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += double(mb.n) * mb.proportions[i];
        }
        for (std::size_t i = 0; i < acc.size(); ++i) {
            worst = std::max(worst, std::abs(acc[i] / double(c.size()) - whole.proportions[i]));
        }
    }
    return {worst <= 1e-12, fmt("100 random cohorts, max abs deviation %.3g", worst)};
}

int cli(std::vector<std::string> args, std::ostream& out) {
    args.insert(args.begin(), "kstate");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int cli(std::vector<std::string> args) {
    std::ostringstream sink;
    return cli(std::move(args), sink);
}

Verdict determinism() {
    test::ScratchDir dir("acceptance_det");
    std::vector<std::string> problems;
    for (const auto* sub : {"a", "b"}) {
        if (cli({"synth", "--seed", "42", "--out", (dir / sub).string()}) != 0) problems.push_back("synth failed");
    }
    for (const auto* f : {"records.csv", "items.csv", "ground_truth.json"}) {
        if (test::slurp(dir / "a" / f) != test::slurp(dir / "b" / f)) problems.push_back(std::string(f) + " differs");
    }
    const auto first = test::golden_cases(kFixtures);
    const auto second = test::golden_cases(kFixtures);
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i].second != second[i].second) problems.push_back(first[i].first + " not repeatable");
        if (test::slurp(kGolden / first[i].first) != first[i].second) problems.push_back(first[i].first + " != golden");
    }
    std::string detail = fmt("synth seed 42 twice, %zu renderings against golden files", first.size());
    for (const auto& p : problems) detail += "; " + p;
    return {problems.empty(), detail};
}

/// Tag balance plus XML declaration and root element.
bool well_formed_svg(const std::string& svg) {
    if (svg.rfind("<?xml", 0) != 0 || svg.find("<svg ") == std::string::npos) return false;
    std::vector<std::string> stack;
    std::size_t pos = svg.find("?>");
    while ((pos = svg.find('<', pos)) != std::string::npos) {
        const auto end = svg.find('>', pos);
        if (end == std::string::npos) return false;
        const std::string tag = svg.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
        } else if (tag.back() != '/') {
            stack.push_back(tag.substr(0, tag.find(' ')));
        }
    }
    return stack.empty();
}

Verdict end_to_end() {
    test::ScratchDir dir("acceptance_e2e");
    const auto cfg = (dir / "cfg.json").string();
    test::spit(cfg, R"({"n_items": 182, "n_students": 1000, "seed": 2010, "courses": [
        {"course_id": "M012", "ability_mean": -1.0}, {"course_id": "M115", "ability_mean": -0.5},
        {"course_id": "M220", "ability_mean": 0.0}, {"course_id": "M221", "ability_mean": 0.5},
        {"course_id": "M231", "ability_mean": 1.0}]})");
    const auto data = dir / "data";
    const auto items = (data / "items.csv").string();
    const auto records = (data / "records.csv").string();
    std::vector<std::string> problems;
    if (cli({"synth", "--config", cfg, "--out", data.string()}) != 0) problems.push_back("synth");
    std::ostringstream vout;
    if (cli({"validate", "--items", items, "--records", records}, vout) != 0 ||
        vout.str().find("\n0 errors\n") == std::string::npos) {
        problems.push_back("validate");
    }
    const std::vector<std::string> courses = {"M012", "M115", "M220", "M221", "M231"};
    for (const auto& c : courses) {
        const auto report = (dir / (c + ".json")).string();
        const auto bar = (dir / (c + "_bar.svg")).string();
        const auto dist = (dir / (c + "_dist.svg")).string();
        if (cli({"analyze", "--items", items, "--records", records, "--course", c, "--out", report}) != 0) {
            problems.push_back("analyze " + c);
            continue;
        }
        try {
            const auto r = io::read_report(test::slurp(report));
            const auto j = nlohmann::json::parse(test::slurp(report));
            const bool schema = j.at("schema_version") == io::kReportSchemaVersion && r.items.size() == 182 &&
                                r.metadata.n_records == 1000 && j.at("summary").contains("taxonomy_counts");
            if (!schema) problems.push_back("report schema " + c);
        } catch (const std::exception& e) {
            problems.push_back("report " + c + ": " + e.what());
        }
        if (cli({"barcode", "--items", items, "--records", records, "--course", c, "--split", "grade-band", "--out",
                 bar}) != 0 ||
            !well_formed_svg(test::slurp(bar))) {
            problems.push_back("barcode " + c);
        }
        if (cli({"distribution", "--items", items, "--records", records, "--course", c, "--out", dist}) != 0 ||
            !well_formed_svg(test::slurp(dist))) {
            problems.push_back("distribution " + c);
        }
    }
    const auto grid = (dir / "grid.svg").string();
    if (cli({"barcode", "--items", items, "--records", records, "--courses", "M012,M115,M220,M221,M231", "--split",
             "grade-band", "--out", grid}) != 0 ||
        !well_formed_svg(test::slurp(grid))) {
        problems.push_back("grade grid");
    }
    std::string detail = "5 cohorts x 182 items x 1000 students through synth, validate, analyze, barcode, distribution";
    for (const auto& p : problems) detail += "; failed: " + p;
    return {problems.empty(), detail};
}

struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Verdict()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"factorization identity", 5, factorization},
        {"null calibration", 30, null_calibration},
        {"positive coupling", 30, positive_coupling},
        {"planted-effect recovery", 120, planted_recovery},
        {"alge026 narrative check", 1, alge026},
        {"brute-force oracle equivalence", 5, oracle_equivalence},
        {"exclusion rules", 60, exclusion_rules},
        {"aggregation identity", 60, aggregation_identity},
        {"determinism and golden files", 60, determinism},
        {"end-to-end pipeline", 60, end_to_end},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << o.detail
                  << fmt(" (%.2fs, budget %.0fs%s)", secs, c.budget_seconds, in_time ? "" : ", over budget") << "\n";
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
