#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "kstate/core_model.hpp"
#include "kstate/error.hpp"

namespace kstate {

/// Non-owning selection of records from a cohort.
using RecordSubset = std::vector<const StudentRecord*>;

struct MeanBarcode {
    std::vector<double> proportions; // entry i = fraction of records holding item i
    std::size_t n = 0;

    bool operator==(const MeanBarcode&) const = default;
};

namespace detail {
inline const StudentRecord& as_record(const StudentRecord& r) noexcept { return r; }
inline const StudentRecord& as_record(const StudentRecord* r) noexcept { return *r; }
} // namespace detail

template <class R>
concept RecordRange = std::ranges::input_range<R> && requires(std::ranges::range_reference_t<R> r) {
    { detail::as_record(r) } -> std::same_as<const StudentRecord&>;
};

/// Per-item proportion of the records that hold each item. Accepts any range
/// of records or record pointers.
template <RecordRange R>
MeanBarcode mean_barcode(const R& records) {
    std::vector<std::size_t> counts;
    std::size_t n = 0;
    for (const auto& entry : records) {
        const StudentRecord& r = detail::as_record(entry);
        if (n == 0) {
            counts.assign(r.state().size(), 0);
        } else if (r.state().size() != counts.size()) {
            throw Error(ErrorCode::DomainMismatch, "records in subset have different state lengths");
        }
        for (auto i : r.state().indices()) ++counts[i];
        ++n;
    }
    if (n == 0) throw Error(ErrorCode::EmptySubset, "mean barcode of an empty subset");
    MeanBarcode out;
    out.n = n;
    out.proportions.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out.proportions[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
    }
    return out;
}

inline MeanBarcode mean_barcode(const Cohort& cohort) { return mean_barcode(cohort.records()); }

inline MeanBarcode binary_barcode(const KnowledgeState& state) {
    MeanBarcode out;
    out.n = 1;
    out.proportions.resize(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) out.proportions[i] = state.test(i) ? 1.0 : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct OutcomeSplit {
    RecordSubset pass;
    RecordSubset fail;
    RecordSubset excluded; // W records under WPolicy::Exclude
};

inline OutcomeSplit split_by_outcome(const Cohort& cohort) {
    OutcomeSplit split;
    for (const auto& r : cohort.records()) {
        const auto o = outcome(r.grade(), cohort.w_policy());
        if (!o) {
            split.excluded.push_back(&r);
        } else if (*o == Outcome::Pass) {
            split.pass.push_back(&r);
        } else {
            split.fail.push_back(&r);
        }
    }
    return split;
}

enum class GradeGranularity { Band, Letter };

struct GradeRow {
    std::string label;
    MeanBarcode barcode;

    bool operator==(const GradeRow&) const = default;
};

/// Mean barcodes per grade group, best group first. Empty groups are omitted,
/// so the row sizes always sum to the cohort size.
struct GradeSplitBarcodes {
    GradeGranularity granularity = GradeGranularity::Band;
    std::vector<GradeRow> rows;

    std::size_t domain_size() const { return rows.empty() ? 0 : rows.front().barcode.proportions.size(); }
};

inline GradeSplitBarcodes split_by_grade(const Cohort& cohort,
                                         GradeGranularity granularity = GradeGranularity::Band) {
    GradeSplitBarcodes out;
    out.granularity = granularity;
    if (granularity == GradeGranularity::Band) {
        std::array<RecordSubset, 5> groups;
        for (const auto& r : cohort.records()) groups[static_cast<std::size_t>(grade_band(r.grade()))].push_back(&r);
        for (auto band : kAllBands) {
            const auto& g = groups[static_cast<std::size_t>(band)];
            if (!g.empty()) out.rows.push_back({std::string(to_string(band)), mean_barcode(g)});
        }
    } else {
        std::array<RecordSubset, 13> groups;
        for (const auto& r : cohort.records()) groups[static_cast<std::size_t>(r.grade())].push_back(&r);
        for (auto grade : kAllGrades) {
            const auto& g = groups[static_cast<std::size_t>(grade)];
            if (!g.empty()) out.rows.push_back({std::string(to_string(grade)), mean_barcode(g)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Score bins
// ---------------------------------------------------------------------------

struct EqualCountBins {
    std::size_t k = 8;
};

/// Interior cut points, strictly increasing inside (0, 1). m points give m+1
/// bins [0,e1), [e1,e2), ..., [em,1].
struct FixedEdges {
    std::vector<double> edges;
};

using Binning = std::variant<EqualCountBins, FixedEdges>;

using BandProportions = std::array<double, 5>; // indexed by GradeBand

struct ScoreBin {
    double lo = 0;
    double hi = 0;
    bool hi_inclusive = false;
    std::size_t n = 0;
    std::optional<BandProportions> band_proportions; // empty when n == 0

    bool operator==(const ScoreBin&) const = default;
};

struct ScoreBins {
    std::vector<ScoreBin> bins;
};

namespace detail {
inline std::optional<BandProportions> band_proportions(const RecordSubset& records) {
    if (records.empty()) return std::nullopt;
    std::array<std::size_t, 5> counts{};
    for (const auto* r : records) ++counts[static_cast<std::size_t>(grade_band(r->grade()))];
    BandProportions p{};
    for (std::size_t b = 0; b < 5; ++b) {
        p[b] = static_cast<double>(counts[b]) / static_cast<double>(records.size());
    }
    return p;
}
} // namespace detail

/// Groups records by score and reports each group's grade-band mix.
///
/// Equal-count bins are formed after sorting by (raw score, student id) and
/// differ in size by at most one; k is capped at the cohort size. Their
/// ranges are the closed interval of observed scores, so two neighbouring
/// bins may touch when a score value straddles the cut.
inline ScoreBins score_bins(const Cohort& cohort, const Binning& binning = EqualCountBins{}) {
    if (cohort.empty()) throw Error(ErrorCode::EmptyCohort, "score bins of an empty cohort");
    const double domain_size = static_cast<double>(cohort.domain().size());
    auto score_of = [&](const StudentRecord* r) {
        return static_cast<double>(r->assessment_score_raw()) / domain_size;
    };

    ScoreBins out;
    if (const auto* eq = std::get_if<EqualCountBins>(&binning)) {
        if (eq->k == 0) throw Error(ErrorCode::InvalidArgument, "equal-count binning needs k >= 1");
        RecordSubset sorted;
        for (const auto& r : cohort.records()) sorted.push_back(&r);
        std::ranges::stable_sort(sorted, [](const StudentRecord* a, const StudentRecord* b) {
            if (a->assessment_score_raw() != b->assessment_score_raw()) {
                return a->assessment_score_raw() < b->assessment_score_raw();
            }
            return a->student_id() < b->student_id();
        });
        const std::size_t k = std::min(eq->k, sorted.size());
        const std::size_t base = sorted.size() / k;
        const std::size_t extra = sorted.size() % k;
        std::size_t pos = 0;
        for (std::size_t b = 0; b < k; ++b) {
            const std::size_t len = base + (b < extra ? 1 : 0);
            RecordSubset group(sorted.begin() + static_cast<std::ptrdiff_t>(pos),
                               sorted.begin() + static_cast<std::ptrdiff_t>(pos + len));
            pos += len;
            out.bins.push_back({score_of(group.front()), score_of(group.back()), true, group.size(),
                                detail::band_proportions(group)});
        }
        return out;
    }

    const auto& edges = std::get<FixedEdges>(binning).edges;
    if (edges.empty()) throw Error(ErrorCode::InvalidArgument, "fixed-edge binning needs at least one edge");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (!(edges[i] > 0.0 && edges[i] < 1.0) || (i > 0 && !(edges[i] > edges[i - 1]))) {
            throw Error(ErrorCode::InvalidArgument, "bin edges must be strictly increasing inside (0, 1)");
        }
    }
    std::vector<RecordSubset> groups(edges.size() + 1);
    for (const auto& r : cohort.records()) {
        const double s = score_of(&r);
        const auto bin = static_cast<std::size_t>(std::ranges::upper_bound(edges, s) - edges.begin());
        groups[bin].push_back(&r);
    }
    for (std::size_t b = 0; b < groups.size(); ++b) {
        const double lo = b == 0 ? 0.0 : edges[b - 1];
        const double hi = b == edges.size() ? 1.0 : edges[b];
        out.bins.push_back({lo, hi, b == edges.size(), groups[b].size(), detail::band_proportions(groups[b])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cross-course trajectories
// ---------------------------------------------------------------------------

struct TrajectoryMatrix {
    std::vector<std::string> courses; // row labels, in the caller's order
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<double>>> values; // empty where a group has no records
};

namespace detail {
inline void require_shared_domain(std::span<const Cohort> cohorts) {
    for (const auto& c : cohorts) {
        if (c.domain_ptr() != cohorts.front().domain_ptr() && !(c.domain() == cohorts.front().domain())) {
            throw Error(ErrorCode::DomainMismatch, "cohort " + c.label() + " uses a different item domain than " +
                                                       cohorts.front().label());
        }
    }
}

inline std::optional<double> prevalence(const RecordSubset& records, std::size_t item) {
    if (records.empty()) return std::nullopt;
    std::size_t has = 0;
    for (const auto* r : records) has += r->state().test(item);
    return static_cast<double>(has) / static_cast<double>(records.size());
}
} // namespace detail

/// Prevalence of one item across an ordered list of cohorts, optionally per
/// grade band.
inline TrajectoryMatrix item_trajectory(std::span<const Cohort> cohorts, std::size_t item_index, bool by_band) {
    TrajectoryMatrix out;
    if (cohorts.empty()) return out;
    detail::require_shared_domain(cohorts);
    if (item_index >= cohorts.front().domain().size()) {
        throw Error(ErrorCode::InvalidArgument, "item index " + std::to_string(item_index) + " out of range");
    }
    if (by_band) {
        for (auto b : kAllBands) out.columns.emplace_back(to_string(b));
    } else {
        out.columns.emplace_back("all");
    }
    for (const auto& c : cohorts) {
        out.courses.push_back(c.label());
        std::vector<std::optional<double>> row;
        if (by_band) {
            std::array<RecordSubset, 5> groups;
            for (const auto& r : c.records()) groups[static_cast<std::size_t>(grade_band(r.grade()))].push_back(&r);
            for (const auto& g : groups) row.push_back(detail::prevalence(g, item_index));
        } else {
            RecordSubset all;
            for (const auto& r : c.records()) all.push_back(&r);
            row.push_back(detail::prevalence(all, item_index));
        }
        out.values.push_back(std::move(row));
    }
    return out;
}

/// Course x item prevalence for every item.
inline TrajectoryMatrix prevalence_matrix(std::span<const Cohort> cohorts) {
    TrajectoryMatrix out;
    if (cohorts.empty()) return out;
    detail::require_shared_domain(cohorts);
    for (const auto& item : cohorts.front().domain().items()) out.columns.push_back(item.code);
    for (const auto& c : cohorts) {
        out.courses.push_back(c.label());
        std::vector<std::optional<double>> row;
        if (c.empty()) {
            row.assign(out.columns.size(), std::nullopt);
        } else {
            const auto mb = mean_barcode(c);
            row.assign(mb.proportions.begin(), mb.proportions.end());
        }
        out.values.push_back(std::move(row));
    }
    return out;
}

} // namespace kstate
