#pragma once

// Canonical JSON analysis reports.
//
// Keys are sorted, indentation is two spaces, and every real number is
// rounded to 12 significant digits before it is written, so writing a parsed
// report reproduces the original bytes. NaN and infinities are rejected;
// statistics that do not exist (uninformative items) are written as null.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kstate/core_model.hpp"
#include "kstate/error.hpp"
#include "kstate/stats.hpp"

namespace kstate::io {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

using Json = nlohmann::json;

/// Rounds to 12 significant digits; throws on NaN or infinity.
inline double canonical_real(double x, std::string_view field = "value") {
    if (!std::isfinite(x)) {
        throw Error(ErrorCode::NonFiniteValue, std::string(field) + " is not finite");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    const double r = std::strtod(buf, nullptr);
    return r == 0.0 ? 0.0 : r; // drop negative zero
}

inline Json real_or_null(const std::optional<double>& x, std::string_view field) {
    if (!x) return nullptr;
    return canonical_real(*x, field);
}

struct ReportMetadata {
    std::string course_id;
    std::string term;
    std::size_t n_records = 0;
    std::string tool_version = std::string(kToolVersion);
    StatsConfig config;
    WPolicy w_policy = WPolicy::Fail;
    AmbientRates ambient;
};

struct ReportItem {
    std::string code;
    ItemStats stats;
};

struct AnalysisReport {
    ReportMetadata metadata;
    std::vector<ReportItem> items;
    CohortStatsSummary summary;
};

inline AnalysisReport make_report(const Cohort& cohort, const CohortAnalysis& analysis, const StatsConfig& cfg) {
    AnalysisReport report;
    report.metadata.course_id = cohort.course_id();
    report.metadata.term = cohort.term();
    report.metadata.n_records = analysis.n_records;
    report.metadata.config = cfg;
    report.metadata.config.threads = 0;
    report.metadata.w_policy = cohort.w_policy();
    report.metadata.ambient = analysis.ambient;
    for (const auto& s : analysis.items) report.items.push_back({cohort.domain()[s.item_index].code, s});
    report.summary = analysis.summary;
    return report;
}

namespace detail {

inline Json moments_to_json(const SummaryMoments& m) {
    return {{"n", m.n},
            {"mean_z", real_or_null(m.mean_z, "mean_z")},
            {"sd_z", real_or_null(m.sd_z, "sd_z")},
            {"mean_log_or", real_or_null(m.mean_log_or, "mean_log_or")},
            {"sd_log_or", real_or_null(m.sd_log_or, "sd_log_or")}};
}

inline std::optional<double> opt_real(const Json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

inline SummaryMoments moments_from_json(const Json& j) {
    return {j.at("n").get<std::size_t>(), opt_real(j, "mean_z"), opt_real(j, "sd_z"), opt_real(j, "mean_log_or"),
            opt_real(j, "sd_log_or")};
}

} // namespace detail

inline Json report_to_json(const AnalysisReport& r) {
    const auto& cfg = r.metadata.config;
    Json config = {{"pseudocount", canonical_real(cfg.pseudocount, "pseudocount")},
                   {"small_count_threshold", cfg.small_count_threshold},
                   {"passing_threshold", canonical_real(cfg.passing_threshold, "passing_threshold")},
                   {"failing_threshold", canonical_real(cfg.failing_threshold, "failing_threshold")},
                   {"strong_multiplier", canonical_real(cfg.strong_multiplier, "strong_multiplier")},
                   {"exclude_small_from_summary", cfg.exclude_small_from_summary},
                   {"w_policy", to_string(r.metadata.w_policy)}};
    Json meta = {{"course_id", r.metadata.course_id},
                 {"term", r.metadata.term},
                 {"n_records", r.metadata.n_records},
                 {"tool_version", r.metadata.tool_version},
                 {"config", config},
                 {"ambient_pass_rate", canonical_real(r.metadata.ambient.pass_rate, "ambient_pass_rate")},
                 {"ambient_fail_rate", canonical_real(r.metadata.ambient.fail_rate, "ambient_fail_rate")}};

    Json items = Json::array();
    for (const auto& item : r.items) {
        const auto& s = item.stats;
        items.push_back({{"index", s.item_index},
                         {"code", item.code},
                         {"n00", s.table.n00},
                         {"n01", s.table.n01},
                         {"n10", s.table.n10},
                         {"n11", s.table.n11},
                         {"odds_ratio", real_or_null(s.odds_ratio, "odds_ratio")},
                         {"log_or", real_or_null(s.log_or, "log_or")},
                         {"variance", real_or_null(s.variance, "variance")},
                         {"z_score", real_or_null(s.z_score, "z_score")},
                         {"passing_ratio", real_or_null(s.passing_ratio, "passing_ratio")},
                         {"failing_ratio", real_or_null(s.failing_ratio, "failing_ratio")},
                         {"prevalence", canonical_real(s.prevalence, "prevalence")},
                         {"informative", s.informative},
                         {"small_counts", s.small_counts},
                         {"classification", to_string(s.classification)}});
    }

    const auto& sum = r.summary;
    Json taxonomy = Json::object();
    for (auto c : kAllItemClasses) taxonomy[std::string(to_string(c))] = sum.count(c);
    Json summary = {{"n_items", sum.n_items},
                    {"n_items_informative", sum.n_items_informative},
                    {"frac_or_gt_1", real_or_null(sum.frac_or_gt_1, "frac_or_gt_1")},
                    {"mean_z", real_or_null(sum.mean_z, "mean_z")},
                    {"sd_z", real_or_null(sum.sd_z, "sd_z")},
                    {"all_informative", detail::moments_to_json(sum.all_informative)},
                    {"excluding_small", detail::moments_to_json(sum.excluding_small)},
                    {"taxonomy_counts", taxonomy},
                    {"n_passing_property", sum.n_passing_property},
                    {"n_failing_property", sum.n_failing_property},
                    {"n_both", sum.n_both}};

    return {{"schema_version", kReportSchemaVersion}, {"metadata", meta}, {"items", items}, {"summary", summary}};
}

inline std::string write_report(const AnalysisReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline AnalysisReport read_report(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("report is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("schema_version")) {
            throw Error(ErrorCode::ParseError, "report has no schema_version");
        }
        const int version = j.at("schema_version").get<int>();
        if (version != kReportSchemaVersion) {
            throw Error(ErrorCode::SchemaVersionMismatch, "report schema version " + std::to_string(version) +
                                                              ", expected " + std::to_string(kReportSchemaVersion));
        }
        AnalysisReport r;
        const auto& meta = j.at("metadata");
        r.metadata.course_id = meta.at("course_id").get<std::string>();
        r.metadata.term = meta.at("term").get<std::string>();
        r.metadata.n_records = meta.at("n_records").get<std::size_t>();
        r.metadata.tool_version = meta.at("tool_version").get<std::string>();
        r.metadata.ambient = {meta.at("ambient_pass_rate").get<double>(), meta.at("ambient_fail_rate").get<double>()};
        const auto& cfg = meta.at("config");
        r.metadata.config.pseudocount = cfg.at("pseudocount").get<double>();
        r.metadata.config.small_count_threshold = cfg.at("small_count_threshold").get<std::size_t>();
        r.metadata.config.passing_threshold = cfg.at("passing_threshold").get<double>();
        r.metadata.config.failing_threshold = cfg.at("failing_threshold").get<double>();
        r.metadata.config.strong_multiplier = cfg.at("strong_multiplier").get<double>();
        r.metadata.config.exclude_small_from_summary = cfg.at("exclude_small_from_summary").get<bool>();
        const auto policy = parse_w_policy(cfg.at("w_policy").get<std::string>());
        if (!policy) throw Error(ErrorCode::ParseError, "unknown w_policy in report");
        r.metadata.w_policy = *policy;

        for (const auto& it : j.at("items")) {
            ReportItem item;
            item.code = it.at("code").get<std::string>();
            auto& s = item.stats;
            s.item_index = it.at("index").get<std::size_t>();
            s.table = {it.at("n00").get<std::uint64_t>(), it.at("n01").get<std::uint64_t>(),
                       it.at("n10").get<std::uint64_t>(), it.at("n11").get<std::uint64_t>()};
            s.odds_ratio = detail::opt_real(it, "odds_ratio");
            s.log_or = detail::opt_real(it, "log_or");
            s.variance = detail::opt_real(it, "variance");
            s.z_score = detail::opt_real(it, "z_score");
            s.passing_ratio = detail::opt_real(it, "passing_ratio");
            s.failing_ratio = detail::opt_real(it, "failing_ratio");
            s.prevalence = it.at("prevalence").get<double>();
            s.informative = it.at("informative").get<bool>();
            s.small_counts = it.at("small_counts").get<bool>();
            const auto cls = parse_item_class(it.at("classification").get<std::string>());
            if (!cls) throw Error(ErrorCode::ParseError, "unknown classification in report");
            s.classification = *cls;
            r.items.push_back(std::move(item));
        }

        const auto& sum = j.at("summary");
        r.summary.n_items = sum.at("n_items").get<std::size_t>();
        r.summary.n_items_informative = sum.at("n_items_informative").get<std::size_t>();
        r.summary.frac_or_gt_1 = detail::opt_real(sum, "frac_or_gt_1");
        r.summary.mean_z = detail::opt_real(sum, "mean_z");
        r.summary.sd_z = detail::opt_real(sum, "sd_z");
        r.summary.all_informative = detail::moments_from_json(sum.at("all_informative"));
        r.summary.excluding_small = detail::moments_from_json(sum.at("excluding_small"));
        for (auto c : kAllItemClasses) {
            r.summary.taxonomy_counts[static_cast<std::size_t>(c)] =
                sum.at("taxonomy_counts").at(std::string(to_string(c))).get<std::size_t>();
        }
        r.summary.n_passing_property = sum.at("n_passing_property").get<std::size_t>();
        r.summary.n_failing_property = sum.at("n_failing_property").get<std::size_t>();
        r.summary.n_both = sum.at("n_both").get<std::size_t>();
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed report: ") + e.what());
    }
}

} // namespace kstate::io
