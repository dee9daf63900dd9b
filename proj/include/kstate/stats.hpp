#pragma once

// Per-item contingency statistics for a cohort.
//
// For each item the cohort is split into a 2x2 table:
//
//                 passed   failed
//   has item       n00      n01
//   lacks item     n10      n11
//
// A pseudocount C is added to every cell before any ratio is taken, so the
// odds ratio factors exactly into passing ratio x failing ratio.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kstate/core_model.hpp"
#include "kstate/error.hpp"

namespace kstate {

struct ContingencyTable {
    std::uint64_t n00 = 0; // has item, passed
    std::uint64_t n01 = 0; // has item, failed
    std::uint64_t n10 = 0; // lacks item, passed
    std::uint64_t n11 = 0; // lacks item, failed

    std::uint64_t total() const noexcept { return n00 + n01 + n10 + n11; }
    std::uint64_t has_item() const noexcept { return n00 + n01; }
    std::uint64_t lacks_item() const noexcept { return n10 + n11; }
    std::uint64_t passed() const noexcept { return n00 + n10; }
    std::uint64_t failed() const noexcept { return n01 + n11; }

    /// Exchanges both rows and both columns.
    ContingencyTable double_swapped() const noexcept { return {n11, n10, n01, n00}; }

    bool operator==(const ContingencyTable&) const = default;
};

struct AdjustedTable {
    double a00 = 0;
    double a01 = 0;
    double a10 = 0;
    double a11 = 0;

    bool positive() const noexcept { return a00 > 0 && a01 > 0 && a10 > 0 && a11 > 0; }

    bool operator==(const AdjustedTable&) const = default;
};

struct StatsConfig {
    double pseudocount = 0.5;
    std::size_t small_count_threshold = 30;
    double passing_threshold = 1.0;  // passing property: passing ratio above this
    double failing_threshold = 1.0;  // failing property: failing ratio above this
    double strong_multiplier = 2.0;  // one ratio must be this many times the other to dominate
    bool exclude_small_from_summary = false;
    unsigned threads = 0; // 0 = hardware concurrency; never affects results

    void validate() const {
        if (!(pseudocount >= 0) || !std::isfinite(pseudocount)) {
            throw Error(ErrorCode::InvalidArgument, "pseudocount must be a finite value >= 0");
        }
        if (!(passing_threshold >= 1) || !(failing_threshold >= 1)) {
            throw Error(ErrorCode::InvalidArgument, "passing/failing thresholds must be >= 1");
        }
        if (!(strong_multiplier > 1)) {
            throw Error(ErrorCode::InvalidArgument, "strong multiplier must be > 1");
        }
    }
};

enum class ItemClass : std::uint8_t { Basic, Advanced, Core, Neither, Uninformative };

inline constexpr std::array<ItemClass, 5> kAllItemClasses = {ItemClass::Basic, ItemClass::Advanced,
                                                             ItemClass::Core, ItemClass::Neither,
                                                             ItemClass::Uninformative};

constexpr std::string_view to_string(ItemClass c) noexcept {
    constexpr std::array<std::string_view, 5> names = {"basic", "advanced", "core", "neither",
                                                       "uninformative"};
    return names[static_cast<std::size_t>(c)];
}

inline std::optional<ItemClass> parse_item_class(std::string_view text) noexcept {
    for (auto c : kAllItemClasses) {
        if (to_string(c) == text) return c;
    }
    return std::nullopt;
}

/// Statistics for one item in one cohort. The ratio fields are empty for
/// uninformative items, which are excluded before any ratio is computed.
struct ItemStats {
    std::size_t item_index = 0;
    ContingencyTable table;
    std::optional<double> odds_ratio;
    std::optional<double> log_or;
    std::optional<double> variance;
    std::optional<double> z_score;
    std::optional<double> passing_ratio;
    std::optional<double> failing_ratio;
    double prevalence = 0;
    bool informative = false;
    bool small_counts = false;
    ItemClass classification = ItemClass::Uninformative;

    bool operator==(const ItemStats&) const = default;
};

struct AmbientRates {
    double pass_rate = 0;
    double fail_rate = 0;
};

struct SummaryMoments {
    std::size_t n = 0;
    std::optional<double> mean_z;
    std::optional<double> sd_z;
    std::optional<double> mean_log_or;
    std::optional<double> sd_log_or;

    bool operator==(const SummaryMoments&) const = default;
};

struct CohortStatsSummary {
    std::size_t n_items = 0;
    std::size_t n_items_informative = 0;
    std::optional<double> frac_or_gt_1;
    // Either all_informative or excluding_small, per exclude_small_from_summary.
    std::optional<double> mean_z;
    std::optional<double> sd_z;
    SummaryMoments all_informative;
    SummaryMoments excluding_small;
    std::array<std::size_t, 5> taxonomy_counts{}; // indexed by ItemClass
    std::size_t n_passing_property = 0;
    std::size_t n_failing_property = 0;
    std::size_t n_both = 0;

    std::size_t count(ItemClass c) const { return taxonomy_counts[static_cast<std::size_t>(c)]; }

    bool operator==(const CohortStatsSummary&) const = default;
};

struct CohortAnalysis {
    std::vector<ItemStats> items;
    CohortStatsSummary summary;
    AmbientRates ambient;
    std::size_t n_records = 0; // after W-policy filtering
};

// ---------------------------------------------------------------------------
// Table construction
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t worker_count(std::size_t n, unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min<std::size_t>(threads, n / 64));
}

/// Splits [0, n) into `workers` contiguous ranges and runs body(worker, lo, hi).
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    if (workers <= 1) {
        body(0, 0, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(n, w * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&body, w, lo, hi] { body(w, lo, hi); });
    }
}

} // namespace detail

inline ContingencyTable build_table(const Cohort& cohort, std::size_t item_index, WPolicy w_policy) {
    if (item_index >= cohort.domain().size()) {
        throw Error(ErrorCode::InvalidArgument, "item index " + std::to_string(item_index) +
                                                    " out of range for domain of size " +
                                                    std::to_string(cohort.domain().size()));
    }
    ContingencyTable t;
    for (const auto& r : cohort.records()) {
        const auto o = outcome(r.grade(), w_policy);
        if (!o) continue;
        const bool has = r.state().test(item_index);
        const bool pass = *o == Outcome::Pass;
        if (has) {
            (pass ? t.n00 : t.n01) += 1;
        } else {
            (pass ? t.n10 : t.n11) += 1;
        }
    }
    if (t.total() == 0) {
        throw Error(ErrorCode::EmptyCohort, "no records in " + cohort.label() + " after W-policy filtering");
    }
    return t;
}

inline ContingencyTable build_table(const Cohort& cohort, std::size_t item_index) {
    return build_table(cohort, item_index, cohort.w_policy());
}

/// Tables for every item in one pass over the records.
inline std::vector<ContingencyTable> build_all_tables(const Cohort& cohort, WPolicy w_policy,
                                                      unsigned threads = 0) {
    const std::size_t n_items = cohort.domain().size();
    const auto& records = cohort.records();

    struct Partial {
        std::vector<std::uint64_t> has_pass, has_fail;
        std::uint64_t pass = 0, fail = 0;
    };
    const std::size_t workers = detail::worker_count(records.size(), threads);
    std::vector<Partial> partials(workers);

    detail::parallel_for(records.size(), workers, [&](std::size_t worker, std::size_t lo, std::size_t hi) {
        Partial& p = partials[worker];
        p.has_pass.assign(n_items, 0);
        p.has_fail.assign(n_items, 0);
        for (std::size_t r = lo; r < hi; ++r) {
            const auto o = outcome(records[r].grade(), w_policy);
            if (!o) continue;
            const bool pass = *o == Outcome::Pass;
            auto& counts = pass ? p.has_pass : p.has_fail;
            (pass ? p.pass : p.fail) += 1;
            const auto& words = records[r].state().words();
            for (std::size_t w = 0; w < words.size(); ++w) {
                std::uint64_t bits = words[w];
                while (bits) {
                    const auto bit = static_cast<std::size_t>(std::countr_zero(bits));
                    counts[w * 64 + bit] += 1;
                    bits &= bits - 1;
                }
            }
        }
    });

    std::vector<ContingencyTable> tables(n_items);
    std::uint64_t pass = 0, fail = 0;
    for (const auto& p : partials) {
        pass += p.pass;
        fail += p.fail;
        for (std::size_t i = 0; i < n_items; ++i) {
            tables[i].n00 += p.has_pass[i];
            tables[i].n01 += p.has_fail[i];
        }
    }
    if (pass + fail == 0) {
        throw Error(ErrorCode::EmptyCohort, "no records in " + cohort.label() + " after W-policy filtering");
    }
    for (auto& t : tables) {
        t.n10 = pass - t.n00;
        t.n11 = fail - t.n01;
    }
    return tables;
}

inline AdjustedTable adjust(const ContingencyTable& t, double pseudocount) {
    if (!(pseudocount >= 0) || !std::isfinite(pseudocount)) {
        throw Error(ErrorCode::InvalidArgument, "pseudocount must be a finite value >= 0");
    }
    return {static_cast<double>(t.n00) + pseudocount, static_cast<double>(t.n01) + pseudocount,
            static_cast<double>(t.n10) + pseudocount, static_cast<double>(t.n11) + pseudocount};
}

// ---------------------------------------------------------------------------
// Ratios on adjusted tables
// ---------------------------------------------------------------------------

namespace detail {
inline void require_positive(const AdjustedTable& a, std::string_view what) {
    if (!a.positive()) {
        throw Error(ErrorCode::DegenerateTable,
                    std::string(what) + " requires all four table entries to be positive");
    }
}
} // namespace detail

inline double odds_ratio(const AdjustedTable& a) {
    detail::require_positive(a, "odds ratio");
    return (a.a00 * a.a11) / (a.a01 * a.a10);
}

/// Large-sample variance of the log odds ratio.
inline double log_or_variance(const AdjustedTable& a) {
    detail::require_positive(a, "log odds ratio variance");
    return 1.0 / a.a00 + 1.0 / a.a01 + 1.0 / a.a10 + 1.0 / a.a11;
}

inline double z_score(const AdjustedTable& a) {
    return std::log(odds_ratio(a)) / std::sqrt(log_or_variance(a));
}

/// Pr(pass | has item) / Pr(pass | lacks item).
inline double passing_ratio(const AdjustedTable& a) {
    detail::require_positive(a, "passing ratio");
    return (a.a00 / (a.a00 + a.a01)) / (a.a10 / (a.a10 + a.a11));
}

/// Pr(fail | lacks item) / Pr(fail | has item).
inline double failing_ratio(const AdjustedTable& a) {
    detail::require_positive(a, "failing ratio");
    return (a.a11 / (a.a10 + a.a11)) / (a.a01 / (a.a00 + a.a01));
}

// ---------------------------------------------------------------------------
// Exclusion and classification
// ---------------------------------------------------------------------------

/// False when nobody or everybody has the item, or when n00 or n11 is zero.
inline bool is_informative(const ContingencyTable& t, const StatsConfig& = {}) noexcept {
    return t.has_item() != 0 && t.lacks_item() != 0 && t.n00 != 0 && t.n11 != 0;
}

inline bool has_small_counts(const ContingencyTable& t, const StatsConfig& cfg = {}) noexcept {
    return std::min(t.has_item(), t.lacks_item()) < cfg.small_count_threshold;
}

inline ItemClass classify(const ItemStats& s, const StatsConfig& cfg = {}) noexcept {
    if (!s.informative || !s.passing_ratio || !s.failing_ratio) return ItemClass::Uninformative;
    const double pr = *s.passing_ratio;
    const double fr = *s.failing_ratio;
    const bool passing = pr > cfg.passing_threshold;
    const bool failing = fr > cfg.failing_threshold;
    if (passing && failing) {
        if (fr >= cfg.strong_multiplier * pr) return ItemClass::Basic;
        if (pr >= cfg.strong_multiplier * fr) return ItemClass::Advanced;
        return ItemClass::Core;
    }
    if (failing) return ItemClass::Basic;
    if (passing) return ItemClass::Advanced;
    return ItemClass::Neither;
}

/// Fills every ItemStats field from a finished table.
inline ItemStats item_stats(std::size_t item_index, const ContingencyTable& t, const StatsConfig& cfg) {
    ItemStats s;
    s.item_index = item_index;
    s.table = t;
    s.prevalence = t.total() == 0 ? 0.0 : static_cast<double>(t.has_item()) / static_cast<double>(t.total());
    s.small_counts = has_small_counts(t, cfg);
    const AdjustedTable a = adjust(t, cfg.pseudocount);
    // With C = 0 a populated diagonal can still leave an empty off-diagonal cell.
    s.informative = is_informative(t, cfg) && a.positive();
    if (s.informative) {
        s.odds_ratio = odds_ratio(a);
        s.log_or = std::log(*s.odds_ratio);
        s.variance = log_or_variance(a);
        s.z_score = *s.log_or / std::sqrt(*s.variance);
        s.passing_ratio = passing_ratio(a);
        s.failing_ratio = failing_ratio(a);
    }
    s.classification = classify(s, cfg);
    return s;
}

inline AmbientRates ambient_rates(const Cohort& cohort, WPolicy w_policy) {
    std::uint64_t pass = 0, fail = 0;
    for (const auto& r : cohort.records()) {
        const auto o = outcome(r.grade(), w_policy);
        if (!o) continue;
        (*o == Outcome::Pass ? pass : fail) += 1;
    }
    if (pass + fail == 0) {
        throw Error(ErrorCode::EmptyCohort, "no records in " + cohort.label() + " after W-policy filtering");
    }
    const double n = static_cast<double>(pass + fail);
    return {static_cast<double>(pass) / n, static_cast<double>(fail) / n};
}

inline AmbientRates ambient_rates(const Cohort& cohort) { return ambient_rates(cohort, cohort.w_policy()); }

namespace detail {

inline SummaryMoments moments(const std::vector<ItemStats>& items, bool skip_small) {
    SummaryMoments m;
    double sum_z = 0, sum_l = 0;
    for (const auto& s : items) {
        if (!s.informative || (skip_small && s.small_counts)) continue;
        ++m.n;
        sum_z += *s.z_score;
        sum_l += *s.log_or;
    }
    if (m.n == 0) return m;
    const double n = static_cast<double>(m.n);
    m.mean_z = sum_z / n;
    m.mean_log_or = sum_l / n;
    if (m.n < 2) return m;
    double ss_z = 0, ss_l = 0;
    for (const auto& s : items) {
        if (!s.informative || (skip_small && s.small_counts)) continue;
        ss_z += (*s.z_score - *m.mean_z) * (*s.z_score - *m.mean_z);
        ss_l += (*s.log_or - *m.mean_log_or) * (*s.log_or - *m.mean_log_or);
    }
    m.sd_z = std::sqrt(ss_z / (n - 1));
    m.sd_log_or = std::sqrt(ss_l / (n - 1));
    return m;
}

} // namespace detail

inline CohortStatsSummary summarize(const std::vector<ItemStats>& items, const StatsConfig& cfg) {
    CohortStatsSummary sum;
    sum.n_items = items.size();
    std::size_t or_gt_1 = 0;
    for (const auto& s : items) {
        sum.taxonomy_counts[static_cast<std::size_t>(s.classification)] += 1;
        if (!s.informative) continue;
        ++sum.n_items_informative;
        if (*s.odds_ratio > 1.0) ++or_gt_1;
        const bool passing = *s.passing_ratio > cfg.passing_threshold;
        const bool failing = *s.failing_ratio > cfg.failing_threshold;
        sum.n_passing_property += passing;
        sum.n_failing_property += failing;
        sum.n_both += passing && failing;
    }
    if (sum.n_items_informative > 0) {
        sum.frac_or_gt_1 = static_cast<double>(or_gt_1) / static_cast<double>(sum.n_items_informative);
    }
    sum.all_informative = detail::moments(items, false);
    sum.excluding_small = detail::moments(items, true);
    const auto& chosen = cfg.exclude_small_from_summary ? sum.excluding_small : sum.all_informative;
    sum.mean_z = chosen.mean_z;
    sum.sd_z = chosen.sd_z;
    return sum;
}

/// Full per-item analysis of one cohort; deterministic for any thread count.
inline CohortAnalysis analyze_cohort(const Cohort& cohort, const StatsConfig& cfg = {}) {
    cfg.validate();
    if (cohort.empty()) throw Error(ErrorCode::EmptyCohort, "cohort " + cohort.label() + " has no records");
    const auto tables = build_all_tables(cohort, cohort.w_policy(), cfg.threads);

    CohortAnalysis out;
    out.items.resize(tables.size());
    detail::parallel_for(tables.size(), detail::worker_count(tables.size(), cfg.threads),
                         [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) out.items[i] = item_stats(i, tables[i], cfg);
    });
    out.summary = summarize(out.items, cfg);
    out.ambient = ambient_rates(cohort);
    out.n_records = tables.empty() ? 0 : static_cast<std::size_t>(tables.front().total());
    return out;
}

} // namespace kstate
