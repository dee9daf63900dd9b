#pragma once

// The `kstate` command line. `run` never calls exit() and writes only to the
// streams it is given, so tests drive it in-process.
//
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kstate/kstate.hpp"

namespace kstate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Raised for bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataOptions {
    std::string items;
    std::string records;
    std::string course;
    std::string term;
    std::vector<std::string> term_starts; // TERM=YYYY-MM-DD
    std::optional<long> window_days;
};

/// Flag values as given; unset flags fall back to the config file, then to
/// the built-in defaults.
struct StatsFlags {
    std::string config;
    std::optional<std::string> w_policy;
    std::optional<double> pseudocount;
    std::optional<std::size_t> small_count;
    std::optional<double> tau_p;
    std::optional<double> tau_f;
    std::optional<double> kappa;
    std::optional<unsigned> threads;
    bool exclude_small = false;
    CLI::Option* exclude_small_opt = nullptr;
};

struct Settings {
    StatsConfig stats;
    WPolicy w_policy = WPolicy::Fail;
    std::optional<io::AssessmentWindow> window;
};

namespace detail {

inline void add_data_options(CLI::App* sub, DataOptions& d, bool need_course) {
    sub->add_option("--items", d.items, "item manifest CSV (index,code,category,description)")->required();
    sub->add_option("--records", d.records, "student records CSV")->required();
    auto* course = sub->add_option("--course", d.course, "course id of the cohort to use");
    if (need_course) course->required();
    sub->add_option("--term", d.term, "term of the cohort; required when the course has several offerings");
    sub->add_option("--term-start", d.term_starts,
                    "TERM=YYYY-MM-DD; keep only assessments taken in the window before that term starts (repeatable)");
    sub->add_option("--window-days", d.window_days, "length of the assessment window in days")->default_str("122");
}

inline void add_stats_options(CLI::App* sub, StatsFlags& f) {
    sub->add_option("--config", f.config, "JSON file with any of the keys below (underscored names)");
    sub->add_option("--w-policy", f.w_policy, "treatment of W grades: fail or exclude")
        ->check(CLI::IsMember({"fail", "exclude"}))
        ->default_str("fail");
    sub->add_option("--pseudocount", f.pseudocount, "count added to every table cell")->default_str("0.5");
    sub->add_option("--small-count", f.small_count, "flag items whose smaller row total is below N")
        ->default_str("30");
    sub->add_option("--tau-p", f.tau_p, "passing property: passing ratio above this")->default_str("1");
    sub->add_option("--tau-f", f.tau_f, "failing property: failing ratio above this")->default_str("1");
    sub->add_option("--kappa", f.kappa, "dominance multiplier between the two ratios")->default_str("2");
    sub->add_option("--threads", f.threads, "worker threads, 0 = all cores")->default_str("0");
    f.exclude_small_opt =
        sub->add_flag("--exclude-small", f.exclude_small, "leave small-count items out of the summary moments");
}

inline std::string read_file(const std::string& path) {
    auto in = io::open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

inline WPolicy policy_or_usage(std::string_view text) {
    const auto p = parse_w_policy(text);
    if (!p) throw UsageError("w_policy must be 'fail' or 'exclude'");
    return *p;
}

inline Settings resolve_settings(const StatsFlags& f, const DataOptions& d) {
    Settings s;
    std::map<std::string, std::string> term_starts;
    std::optional<long> window_days;

    if (!f.config.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(f.config));
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config '" + f.config + "' is not valid JSON: " + e.what());
        }
        if (!j.is_object()) throw UsageError("config '" + f.config + "' must be a JSON object");
        try {
            for (const auto& [key, v] : j.items()) {
                if (key == "pseudocount") {
                    s.stats.pseudocount = v.get<double>();
                } else if (key == "small_count") {
                    s.stats.small_count_threshold = v.get<std::size_t>();
                } else if (key == "tau_p") {
                    s.stats.passing_threshold = v.get<double>();
                } else if (key == "tau_f") {
                    s.stats.failing_threshold = v.get<double>();
                } else if (key == "kappa") {
                    s.stats.strong_multiplier = v.get<double>();
                } else if (key == "threads") {
                    s.stats.threads = v.get<unsigned>();
                } else if (key == "exclude_small") {
                    s.stats.exclude_small_from_summary = v.get<bool>();
                } else if (key == "w_policy") {
                    s.w_policy = policy_or_usage(v.get<std::string>());
                } else if (key == "window_days") {
                    window_days = v.get<long>();
                } else if (key == "term_starts") {
                    term_starts = v.get<std::map<std::string, std::string>>();
                } else {
                    throw UsageError("unknown key '" + key + "' in config '" + f.config + "'");
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config '" + f.config + "': " + e.what());
        }
    }

    if (f.pseudocount) s.stats.pseudocount = *f.pseudocount;
    if (f.small_count) s.stats.small_count_threshold = *f.small_count;
    if (f.tau_p) s.stats.passing_threshold = *f.tau_p;
    if (f.tau_f) s.stats.failing_threshold = *f.tau_f;
    if (f.kappa) s.stats.strong_multiplier = *f.kappa;
    if (f.threads) s.stats.threads = *f.threads;
    if (f.exclude_small_opt && f.exclude_small_opt->count() > 0) s.stats.exclude_small_from_summary = f.exclude_small;
    if (f.w_policy) s.w_policy = policy_or_usage(*f.w_policy);
    if (d.window_days) window_days = d.window_days;
    for (const auto& ts : d.term_starts) {
        const auto eq = ts.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--term-start expects TERM=YYYY-MM-DD, got '" + ts + "'");
        term_starts[ts.substr(0, eq)] = ts.substr(eq + 1);
    }

    try {
        s.stats.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (!term_starts.empty() || window_days) {
        io::AssessmentWindow w;
        w.term_starts = std::move(term_starts);
        if (window_days) {
            if (*window_days < 0) throw UsageError("window_days must be >= 0");
            w.max_days_before = *window_days;
        }
        for (const auto& [term, date] : w.term_starts) {
            if (!io::parse_date(date)) throw UsageError("term start '" + date + "' for " + term + " is not an ISO date");
        }
        s.window = std::move(w);
    }
    return s;
}

inline std::vector<Cohort> load_cohorts(const DataOptions& d, const Settings& s) {
    auto domain = io::load_manifest(d.items);
    auto in = io::open_input(d.records);
    return io::ingest(in, domain, {s.w_policy, s.window});
}

/// "A,B:2011-SP" -> (A, default term), (B, 2011-SP).
inline std::vector<std::pair<std::string, std::string>> parse_course_list(const std::string& text,
                                                                          const std::string& default_term) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string entry;
    while (std::getline(ss, entry, ',')) {
        if (entry.empty()) continue;
        const auto colon = entry.find(':');
        if (colon == std::string::npos) {
            out.emplace_back(entry, default_term);
        } else {
            out.emplace_back(entry.substr(0, colon), entry.substr(colon + 1));
        }
    }
    if (out.empty()) throw UsageError("--courses needs at least one course id");
    return out;
}

inline std::vector<double> parse_edges(const std::string& text) {
    std::vector<double> edges;
    std::stringstream ss(text);
    std::string entry;
    while (std::getline(ss, entry, ',')) {
        try {
            std::size_t used = 0;
            edges.push_back(std::stod(entry, &used));
            if (used != entry.size()) throw std::invalid_argument(entry);
        } catch (const std::exception&) {
            throw UsageError("--edges expects comma-separated numbers, got '" + entry + "'");
        }
        if (!(edges.back() > 0.0 && edges.back() < 1.0) || (edges.size() > 1 && !(edges.back() > edges[edges.size() - 2]))) {
            throw UsageError("--edges must be strictly increasing values inside (0, 1)");
        }
    }
    return edges;
}

inline std::string fmt(double x, int precision = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(precision) << x;
    return ss.str();
}

inline std::string fmt(const std::optional<double>& x, int precision = 4) { return x ? fmt(*x, precision) : "NA"; }

inline GradeSplitBarcodes rows_for(const Cohort& cohort, const std::string& split) {
    if (split == "grade-band") return split_by_grade(cohort, GradeGranularity::Band);
    if (split == "grade") return split_by_grade(cohort, GradeGranularity::Letter);
    GradeSplitBarcodes out;
    if (split == "outcome") {
        const auto parts = split_by_outcome(cohort);
        if (!parts.pass.empty()) out.rows.push_back({"pass", mean_barcode(parts.pass)});
        if (!parts.fail.empty()) out.rows.push_back({"fail", mean_barcode(parts.fail)});
    } else if (!cohort.empty()) {
        out.rows.push_back({"all", mean_barcode(cohort)});
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_validate(const DataOptions& d, const StatsFlags& f, std::ostream& out, std::ostream& err) {
    const auto s = detail::resolve_settings(f, d);
    std::shared_ptr<const ItemDomain> domain;
    try {
        domain = io::load_manifest(d.items);
    } catch (const Error& e) {
        out << d.items << ": " << e.what() << "\n1 errors\n";
        return kExitData;
    }
    auto in = io::open_input(d.records);
    const auto result = io::ingest_records(in, domain, {s.w_policy, s.window});
    for (const auto& diag : result.diagnostics) out << diag.to_string() << "\n";
    for (const auto& c : result.cohorts) err << "cohort " << c.label() << ": " << c.size() << " students\n";
    out << result.rows_read << " rows, " << result.cohorts.size() << " cohorts, " << result.assessments_superseded
        << " superseded, " << result.rows_outside_window << " outside window\n";
    out << result.diagnostics.size() << " errors\n";
    return result.ok() ? kExitOk : kExitData;
}

inline int cmd_analyze(const DataOptions& d, const StatsFlags& f, const std::string& out_path, std::ostream& out,
                       std::ostream& err) {
    const auto s = detail::resolve_settings(f, d);
    const auto cohorts = detail::load_cohorts(d, s);
    const auto& cohort = io::find_cohort(cohorts, d.course, d.term);
    err << "analyzing " << cohort.label() << " (" << cohort.size() << " students, " << cohort.domain().size()
        << " items)\n";
    const auto analysis = analyze_cohort(cohort, s.stats);
    const auto text = io::write_report(io::make_report(cohort, analysis, s.stats));

    std::ostream& summary = out_path.empty() ? err : out;
    if (out_path.empty()) {
        out << text;
    } else {
        detail::write_file(out_path, text);
    }
    const auto& sum = analysis.summary;
    summary << cohort.course_id() << " " << cohort.term() << " n=" << cohort.size()
            << " pass_rate=" << detail::fmt(analysis.ambient.pass_rate)
            << " frac_or_gt_1=" << detail::fmt(sum.frac_or_gt_1);
    for (auto c : kAllItemClasses) summary << " " << to_string(c) << "=" << sum.count(c);
    summary << "\n";
    return kExitOk;
}

inline int cmd_classify(const DataOptions& d, const StatsFlags& f, const std::string& out_path,
                        const std::string& only, std::ostream& out, std::ostream& err) {
    const auto s = detail::resolve_settings(f, d);
    std::optional<ItemClass> filter;
    if (!only.empty()) {
        filter = parse_item_class(only);
        if (!filter) throw UsageError("unknown class '" + only + "'");
    }
    const auto cohorts = detail::load_cohorts(d, s);
    const auto& cohort = io::find_cohort(cohorts, d.course, d.term);
    const auto analysis = analyze_cohort(cohort, s.stats);

    std::ostringstream table;
    table << "class\tindex\tcode\tpassing_ratio\tfailing_ratio\tz_score\tsmall_counts\n";
    for (auto c : kAllItemClasses) {
        if (filter && *filter != c) continue;
        for (const auto& item : analysis.items) {
            if (item.classification != c) continue;
            table << to_string(c) << "\t" << item.item_index << "\t" << cohort.domain()[item.item_index].code << "\t"
                  << detail::fmt(item.passing_ratio) << "\t" << detail::fmt(item.failing_ratio) << "\t"
                  << detail::fmt(item.z_score) << "\t" << (item.small_counts ? "yes" : "no") << "\n";
        }
    }
    if (out_path.empty()) {
        out << table.str();
    } else {
        detail::write_file(out_path, table.str());
    }
    for (auto c : kAllItemClasses) err << to_string(c) << ": " << analysis.summary.count(c) << "\n";
    return kExitOk;
}

struct BarcodeArgs {
    std::string split = "none";
    std::string student;
    std::string courses;
    std::string title;
};

inline int cmd_barcode(const DataOptions& d, const StatsFlags& f, const BarcodeArgs& a, const std::string& out_path,
                       std::ostream& err) {
    const auto s = detail::resolve_settings(f, d);
    if (!a.student.empty() && (a.split != "none" || !a.courses.empty())) {
        throw UsageError("--student only combines with --split none and a single course");
    }
    if (a.courses.empty() && d.course.empty()) throw UsageError("--course or --courses is required");
    const auto cohorts = detail::load_cohorts(d, s);
    io::svg::HeatmapOptions opt;
    opt.title = a.title;

    std::string svg;
    if (!a.courses.empty()) {
        std::vector<io::svg::CohortGradeSplit> blocks;
        const ItemDomain* domain = nullptr;
        for (const auto& [course, term] : detail::parse_course_list(a.courses, d.term)) {
            const auto& c = io::find_cohort(cohorts, course, term);
            domain = &c.domain();
            blocks.push_back({c.label(), detail::rows_for(c, a.split)});
        }
        svg = io::svg::render_grade_grid(blocks, *domain, opt);
    } else {
        const auto& cohort = io::find_cohort(cohorts, d.course, d.term);
        if (!a.student.empty()) {
            const auto& recs = cohort.records();
            const auto it = std::ranges::find_if(recs, [&](const StudentRecord& r) { return r.student_id() == a.student; });
            if (it == recs.end()) {
                throw Error(ErrorCode::InvalidArgument, "student '" + a.student + "' not in " + cohort.label());
            }
            svg = io::svg::render_barcode(it->state(), cohort.domain(), opt, a.student);
        } else {
            const auto rows = detail::rows_for(cohort, a.split);
            svg = io::svg::render_barcode_rows(rows.rows, cohort.domain(), opt);
        }
    }
    detail::write_file(out_path, svg);
    err << "wrote " << out_path << "\n";
    return kExitOk;
}

inline int cmd_distribution(const DataOptions& d, const StatsFlags& f, std::optional<std::size_t> bins,
                            const std::string& edges, const std::string& title, const std::string& out_path,
                            std::ostream& err) {
    const auto s = detail::resolve_settings(f, d);
    if (bins && !edges.empty()) throw UsageError("--bins and --edges are mutually exclusive");
    Binning binning = EqualCountBins{bins.value_or(8)};
    if (!edges.empty()) binning = FixedEdges{detail::parse_edges(edges)};
    const auto cohorts = detail::load_cohorts(d, s);
    const auto& cohort = io::find_cohort(cohorts, d.course, d.term);
    io::svg::DistributionOptions opt;
    opt.title = title;
    detail::write_file(out_path, io::svg::render_score_distribution(score_bins(cohort, binning), opt));
    err << "wrote " << out_path << "\n";
    return kExitOk;
}

inline int cmd_trajectory(const DataOptions& d, const StatsFlags& f, const std::string& courses,
                          const std::string& item, bool by_band, const std::string& title,
                          const std::string& out_path, std::ostream& err) {
    const auto s = detail::resolve_settings(f, d);
    if (by_band && item.empty()) throw UsageError("--by-band needs --item");
    const auto all = detail::load_cohorts(d, s);
    std::vector<Cohort> chosen;
    for (const auto& [course, term] : detail::parse_course_list(courses, d.term)) {
        chosen.push_back(io::find_cohort(all, course, term));
    }
    TrajectoryMatrix m;
    if (item.empty()) {
        m = prevalence_matrix(chosen);
    } else {
        const auto idx = chosen.front().domain().find(item);
        if (!idx) throw Error(ErrorCode::UnknownItemCode, "unknown item code '" + item + "'");
        m = item_trajectory(chosen, *idx, by_band);
    }
    io::svg::HeatmapOptions opt;
    opt.title = title;
    detail::write_file(out_path, io::svg::render_trajectory(m, opt));
    err << "wrote " << out_path << "\n";
    return kExitOk;
}

inline int cmd_synth(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out_dir,
                     std::ostream& err) {
    io::SynthPlan plan;
    try {
        nlohmann::json j = nlohmann::json::object();
        if (!config.empty()) {
            try {
                j = nlohmann::json::parse(detail::read_file(config));
            } catch (const nlohmann::json::exception& e) {
                throw UsageError("config '" + config + "' is not valid JSON: " + e.what());
            }
        }
        if (seed && j.is_object()) j["seed"] = *seed;
        plan = io::parse_synth_config(j);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const auto generated = io::run_plan(plan);
    io::write_synth_outputs(out_dir, generated);
    for (const auto& g : generated) err << "generated " << g.cohort.label() << ": " << g.cohort.size() << " students\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Per-item success statistics, knowledge-state barcodes and synthetic cohorts.", "kstate"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(io::kToolVersion));
    app.footer(
        "Settings precedence: command-line flag, then the --config file, then the built-in default.\n"
        "Exit codes: 0 success, 1 data error, 2 usage error. Logs go to standard error.");

    DataOptions data;
    StatsFlags stats;
    std::string out_path;

    auto* validate = app.add_subcommand("validate", "check a records file and print per-line diagnostics");
    detail::add_data_options(validate, data, false);
    detail::add_stats_options(validate, stats);

    auto* analyze = app.add_subcommand("analyze", "write the per-item report for one cohort");
    detail::add_data_options(analyze, data, true);
    detail::add_stats_options(analyze, stats);
    analyze->add_option("--out", out_path, "report path; the report goes to standard output when omitted");

    std::string only;
    auto* classify = app.add_subcommand("classify", "list items by class as tab-separated rows");
    detail::add_data_options(classify, data, true);
    detail::add_stats_options(classify, stats);
    classify->add_option("--out", out_path, "table path; standard output when omitted");
    classify->add_option("--class", only, "only list this class (basic, advanced, core, neither, uninformative)");

    BarcodeArgs bargs;
    auto* barcode = app.add_subcommand("barcode", "render knowledge-state barcodes as SVG");
    detail::add_data_options(barcode, data, false);
    detail::add_stats_options(barcode, stats);
    barcode->add_option("--out", out_path, "SVG path")->required();
    barcode->add_option("--split", bargs.split, "row grouping")
        ->check(CLI::IsMember({"none", "outcome", "grade-band", "grade"}))
        ->capture_default_str();
    barcode->add_option("--student", bargs.student, "draw one student's state (with --split none)");
    barcode->add_option("--courses", bargs.courses,
                        "COURSE[:TERM],... stacked with the first course at the bottom");
    barcode->add_option("--title", bargs.title, "figure title");

    std::optional<std::size_t> bins;
    std::string edges;
    std::string title;
    auto* distribution = app.add_subcommand("distribution", "render grade bands per score bin as SVG");
    detail::add_data_options(distribution, data, true);
    detail::add_stats_options(distribution, stats);
    distribution->add_option("--out", out_path, "SVG path")->required();
    distribution->add_option("--bins", bins, "number of equal-count bins")->default_str("8");
    distribution->add_option("--edges", edges, "interior score cut points in (0,1), e.g. 0.3,0.5,0.7");
    distribution->add_option("--title", title, "figure title");

    std::string courses;
    std::string item;
    bool by_band = false;
    auto* trajectory = app.add_subcommand("trajectory", "render item prevalence across courses as SVG");
    detail::add_data_options(trajectory, data, false);
    detail::add_stats_options(trajectory, stats);
    trajectory->add_option("--out", out_path, "SVG path")->required();
    trajectory->add_option("--courses", courses, "COURSE[:TERM],... first course at the bottom")->required();
    trajectory->add_option("--item", item, "item code; all items when omitted");
    trajectory->add_flag("--by-band", by_band, "one column per grade band (needs --item)");
    trajectory->add_option("--title", title, "figure title");

    std::string synth_config;
    std::optional<std::uint64_t> seed;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--config", synth_config, "generator JSON config; built-in defaults when omitted");
    synth->add_option("--seed", seed, "overrides the config seed")->default_str("42");
    synth->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << io::kToolVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (!app.get_subcommands().empty()) {
            err << "run 'kstate " << app.get_subcommands().front()->get_name() << " --help' for usage\n";
        }
        return kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(data, stats, out, err);
        if (analyze->parsed()) return cmd_analyze(data, stats, out_path, out, err);
        if (classify->parsed()) return cmd_classify(data, stats, out_path, only, out, err);
        if (barcode->parsed()) return cmd_barcode(data, stats, bargs, out_path, err);
        if (distribution->parsed()) return cmd_distribution(data, stats, bins, edges, title, out_path, err);
        if (trajectory->parsed()) return cmd_trajectory(data, stats, courses, item, by_band, title, out_path, err);
        if (synth->parsed()) return cmd_synth(synth_config, seed, out_path, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

} // namespace kstate::cli
