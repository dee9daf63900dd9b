#pragma once

// Item manifests and cohort record files.
//
//   items.csv    index,code,category,description
//   records.csv  student_id,course_id,term,assessment_date,grade,state
//
// A state is either a 0/1 string with one character per item (canonical) or
// a semicolon-separated list of item codes. When a student has several
// assessments for one course offering, the one with the highest raw score is
// kept; ties go to the latest assessment_date and a remaining tie between
// different rows is an AmbiguousBest error.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kstate/core_model.hpp"
#include "kstate/error.hpp"
#include "kstate/io/csv.hpp"

namespace kstate::io {

inline constexpr std::array<std::string_view, 4> kManifestHeader = {"index", "code", "category", "description"};
inline constexpr std::array<std::string_view, 6> kRecordsHeader = {"student_id", "course_id", "term",
                                                                   "assessment_date", "grade", "state"};

struct Diagnostic {
    std::size_t line = 0;
    ErrorCode code = ErrorCode::ParseError;
    std::string message;

    std::string to_string() const {
        return "line " + std::to_string(line) + ": " + std::string(kstate::to_string(code)) + ": " + message;
    }
};

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

/// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr long days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

/// ISO-8601 date with optional time, e.g. 2010-08-01 or 2010-08-01T09:30:00Z.
struct AssessmentDate {
    long days = 0;
    long seconds = 0;

    auto operator<=>(const AssessmentDate&) const = default;
};

inline std::optional<AssessmentDate> parse_date(std::string_view text) {
    auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        if (pos + len > text.size()) return std::nullopt;
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const auto y = number(0, 4), m = number(5, 2), d = number(8, 2);
    if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1) return std::nullopt;
    constexpr std::array<int, 12> month_days = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (*y % 4 == 0 && *y % 100 != 0) || *y % 400 == 0;
    if (*d > month_days[static_cast<std::size_t>(*m - 1)] || (*m == 2 && *d == 29 && !leap)) return std::nullopt;
    AssessmentDate out{days_from_civil(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d)), 0};
    if (text.size() == 10) return out;
    if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
    std::string_view rest = text.substr(11);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    const std::size_t base = 11;
    const auto hh = number(base, 2);
    if (!hh || rest.size() < 5 || text[base + 2] != ':') return std::nullopt;
    const auto mm = number(base + 3, 2);
    int ss = 0;
    if (rest.size() == 8) {
        if (text[base + 5] != ':') return std::nullopt;
        const auto s = number(base + 6, 2);
        if (!s) return std::nullopt;
        ss = *s;
    } else if (rest.size() != 5) {
        return std::nullopt;
    }
    if (!mm || *hh > 23 || *mm > 59 || ss > 60) return std::nullopt;
    out.seconds = *hh * 3600L + *mm * 60L + ss;
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace detail {

template <std::size_t N>
std::optional<std::array<std::size_t, N>> map_header(const csv::Row& row,
                                                     const std::array<std::string_view, N>& expected) {
    if (row.fields.size() != N) return std::nullopt;
    std::array<std::size_t, N> pos{};
    for (std::size_t i = 0; i < N; ++i) {
        auto it = std::ranges::find(row.fields, expected[i]);
        if (it == row.fields.end()) return std::nullopt;
        pos[i] = static_cast<std::size_t>(it - row.fields.begin());
    }
    return pos;
}

template <std::size_t N>
std::string header_text(const std::array<std::string_view, N>& h) {
    std::string out;
    for (auto s : h) out += (out.empty() ? "" : ",") + std::string(s);
    return out;
}

} // namespace detail

inline ItemDomain read_manifest(std::istream& in) {
    csv::Reader reader(in);
    const auto header = reader.next();
    std::optional<std::array<std::size_t, 4>> cols;
    if (header) cols = detail::map_header(*header, kManifestHeader);
    if (!cols) {
        throw Error(ErrorCode::BadHeader,
                    "item manifest line 1: expected header '" + detail::header_text(kManifestHeader) + "'");
    }
    std::map<std::size_t, ItemMeta> by_index;
    while (auto row = reader.next()) {
        const std::string where = "item manifest line " + std::to_string(row->line) + ": ";
        if (row->fields.size() != 4) throw Error(ErrorCode::BadManifest, where + "expected 4 columns");
        const auto& idx_text = row->fields[(*cols)[0]];
        std::size_t idx = 0;
        auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
        if (ec != std::errc{} || ptr != idx_text.data() + idx_text.size()) {
            throw Error(ErrorCode::BadManifest, where + "index '" + idx_text + "' is not a non-negative integer");
        }
        ItemMeta meta{idx, row->fields[(*cols)[1]], row->fields[(*cols)[2]], row->fields[(*cols)[3]]};
        if (!by_index.emplace(idx, std::move(meta)).second) {
            throw Error(ErrorCode::BadManifest, where + "index " + std::to_string(idx) + " listed twice");
        }
    }
    std::vector<ItemMeta> items;
    for (auto& [idx, meta] : by_index) {
        if (idx != items.size()) {
            throw Error(ErrorCode::BadManifest, "item manifest: index " + std::to_string(items.size()) + " missing");
        }
        items.push_back(std::move(meta));
    }
    return ItemDomain(std::move(items));
}

inline void write_manifest(std::ostream& out, const ItemDomain& domain) {
    csv::write_row(out, {kManifestHeader.begin(), kManifestHeader.end()});
    for (const auto& item : domain.items()) {
        csv::write_row(out, {std::to_string(item.index), item.code, item.category, item.description});
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Keeps only assessments taken in the window before a term starts. Terms
/// without a configured start date are not filtered.
struct AssessmentWindow {
    std::map<std::string, std::string> term_starts; // term -> ISO date
    long max_days_before = 122;                      // about four months
};

struct IngestOptions {
    WPolicy w_policy = WPolicy::Fail;
    std::optional<AssessmentWindow> window;
};

struct IngestResult {
    std::vector<Cohort> cohorts;
    std::vector<Diagnostic> diagnostics;
    std::size_t rows_read = 0;
    std::size_t rows_outside_window = 0;
    std::size_t assessments_superseded = 0;

    bool ok() const noexcept { return diagnostics.empty(); }
};

/// Decodes either state encoding against the domain.
inline KnowledgeState decode_state(std::string_view text, const ItemDomain& domain) {
    const bool bitstring = !text.empty() && text.find_first_not_of("01") == std::string_view::npos;
    if (bitstring) {
        if (text.size() != domain.size()) {
            throw Error(ErrorCode::StateLengthMismatch, "state has " + std::to_string(text.size()) +
                                                            " bits, domain has " + std::to_string(domain.size()));
        }
        return KnowledgeState::from_bitstring(text);
    }
    KnowledgeState state(domain.size());
    while (!text.empty()) {
        const auto cut = text.find(';');
        const std::string_view code = text.substr(0, cut);
        if (!code.empty()) {
            const auto idx = domain.find(code);
            if (!idx) throw Error(ErrorCode::UnknownItemCode, "unknown item code '" + std::string(code) + "'");
            state.set(*idx);
        }
        if (cut == std::string_view::npos) break;
        text.remove_prefix(cut + 1);
    }
    return state;
}

inline IngestResult ingest_records(std::istream& in, std::shared_ptr<const ItemDomain> domain,
                                   const IngestOptions& options = {}) {
    IngestResult result;
    csv::Reader reader(in);

    std::optional<csv::Row> header;
    try {
        header = reader.next();
    } catch (const Error& e) {
        result.diagnostics.push_back({1, ErrorCode::BadHeader, e.what()});
        return result;
    }
    std::optional<std::array<std::size_t, 6>> cols;
    if (header) cols = detail::map_header(*header, kRecordsHeader);
    if (!cols) {
        result.diagnostics.push_back(
            {header ? header->line : 1, ErrorCode::BadHeader, "expected header '" + detail::header_text(kRecordsHeader) + "'"});
        return result;
    }

    std::map<std::string, AssessmentDate> term_starts;
    if (options.window) {
        for (const auto& [term, date] : options.window->term_starts) {
            const auto parsed = parse_date(date);
            if (!parsed) throw Error(ErrorCode::InvalidArgument, "term start '" + date + "' is not an ISO date");
            term_starts.emplace(term, *parsed);
        }
    }

    struct Candidate {
        std::size_t line;
        AssessmentDate date;
        StudentRecord record;
        std::size_t tied_with_line = 0; // nonzero while another row ties on score and date
    };
    // Offerings and students keep their first-seen order.
    std::vector<std::pair<std::string, std::string>> offering_order;
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> student_order;
    std::map<std::tuple<std::string, std::string, std::string>, Candidate> best;

    while (true) {
        std::optional<csv::Row> row;
        try {
            row = reader.next();
        } catch (const Error& e) {
            result.diagnostics.push_back({0, ErrorCode::ParseError, e.what()});
            break;
        }
        if (!row) break;
        ++result.rows_read;
        auto fail = [&](ErrorCode code, std::string message) {
            result.diagnostics.push_back({row->line, code, std::move(message)});
        };
        if (row->fields.size() != kRecordsHeader.size()) {
            fail(ErrorCode::BadRow, "expected 6 columns, found " + std::to_string(row->fields.size()));
            continue;
        }
        const auto& f = row->fields;
        const auto& c = *cols;
        const std::string& student = f[c[0]];
        const std::string& course = f[c[1]];
        const std::string& term = f[c[2]];
        if (student.empty() || course.empty() || term.empty()) {
            fail(ErrorCode::BadRow, "student_id, course_id and term must be non-empty");
            continue;
        }
        const auto date = parse_date(f[c[3]]);
        if (!date) {
            fail(ErrorCode::BadRow, "assessment_date '" + f[c[3]] + "' is not an ISO-8601 date");
            continue;
        }
        const auto grade = parse_grade(f[c[4]]);
        if (!grade) {
            fail(ErrorCode::BadGrade, "grade '" + f[c[4]] + "' is not one of A A- B+ B B- C+ C C- D+ D D- F W");
            continue;
        }
        std::optional<KnowledgeState> state;
        try {
            state = decode_state(f[c[5]], *domain);
        } catch (const Error& e) {
            fail(e.code(), e.what());
            continue;
        }
        if (auto it = term_starts.find(term); it != term_starts.end()) {
            const long before = it->second.days - date->days;
            if (before < 0 || before > options.window->max_days_before) {
                ++result.rows_outside_window;
                continue;
            }
        }

        const auto offering = std::make_pair(course, term);
        auto& students = student_order[offering];
        if (students.empty()) offering_order.push_back(offering);
        const auto key = std::make_tuple(course, term, student);
        Candidate cand{row->line, *date, StudentRecord(student, course, term, std::move(*state), *grade, f[c[3]])};
        auto it = best.find(key);
        if (it == best.end()) {
            students.push_back(student);
            best.emplace(key, std::move(cand));
            continue;
        }
        ++result.assessments_superseded;
        Candidate& cur = it->second;
        const auto cur_score = cur.record.assessment_score_raw();
        const auto new_score = cand.record.assessment_score_raw();
        if (new_score > cur_score || (new_score == cur_score && cand.date > cur.date)) {
            cur = std::move(cand);
        } else if (new_score == cur_score && cand.date == cur.date &&
                   (cand.record.state() != cur.record.state() || cand.record.grade() != cur.record.grade())) {
            cur.tied_with_line = cand.line;
        }
    }

    for (const auto& [key, cand] : best) {
        if (cand.tied_with_line == 0) continue;
        result.diagnostics.push_back({cand.tied_with_line, ErrorCode::AmbiguousBest,
                                      "student '" + std::get<2>(key) + "' in " + std::get<0>(key) + "/" +
                                          std::get<1>(key) + " has two different best assessments (also line " +
                                          std::to_string(cand.line) + ")"});
    }
    std::ranges::stable_sort(result.diagnostics, {}, &Diagnostic::line);
    if (!result.ok()) return result;

    for (const auto& offering : offering_order) {
        std::vector<StudentRecord> records;
        for (const auto& student : student_order[offering]) {
            records.push_back(best.at(std::make_tuple(offering.first, offering.second, student)).record);
        }
        result.cohorts.emplace_back(offering.first, offering.second, domain, std::move(records), options.w_policy);
    }
    return result;
}

/// Throwing form: any diagnostic aborts ingestion.
inline std::vector<Cohort> ingest(std::istream& records, std::shared_ptr<const ItemDomain> domain,
                                  const IngestOptions& options = {}) {
    auto result = ingest_records(records, std::move(domain), options);
    if (!result.ok()) {
        const auto& d = result.diagnostics.front();
        throw Error(d.code, "line " + std::to_string(d.line) + ": " + d.message);
    }
    return std::move(result.cohorts);
}

inline std::vector<Cohort> ingest(std::istream& records, std::istream& manifest, const IngestOptions& options = {}) {
    auto domain = std::make_shared<const ItemDomain>(read_manifest(manifest));
    return ingest(records, std::move(domain), options);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
    return in;
}

inline std::shared_ptr<const ItemDomain> load_manifest(const std::string& path) {
    auto in = open_input(path);
    return std::make_shared<const ItemDomain>(read_manifest(in));
}

/// Canonical export: bitstring states, one row per record, cohorts in order.
inline void write_records(std::ostream& out, std::span<const Cohort> cohorts) {
    csv::write_row(out, {kRecordsHeader.begin(), kRecordsHeader.end()});
    for (const auto& cohort : cohorts) {
        for (const auto& r : cohort.records()) {
            csv::write_row(out, {r.student_id(), r.course_id(), r.term(), r.assessment_date(),
                                 std::string(to_string(r.grade())), r.state().to_bitstring()});
        }
    }
}

/// Finds one offering by course and, when given, term.
inline const Cohort& find_cohort(std::span<const Cohort> cohorts, std::string_view course,
                                 std::string_view term = {}) {
    const Cohort* found = nullptr;
    for (const auto& c : cohorts) {
        if (c.course_id() != course || (!term.empty() && c.term() != term)) continue;
        if (found) {
            throw Error(ErrorCode::UnknownCohort,
                        "course '" + std::string(course) + "' is offered in several terms; pass a term");
        }
        found = &c;
    }
    if (!found) {
        throw Error(ErrorCode::UnknownCohort, "no records for course '" + std::string(course) + "'" +
                                                  (term.empty() ? "" : " in term '" + std::string(term) + "'"));
    }
    return *found;
}

} // namespace kstate::io
