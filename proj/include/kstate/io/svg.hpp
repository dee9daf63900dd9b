#pragma once

// Deterministic SVG 1.1 renderers for barcodes, grade heatmaps and score
// distributions. No timestamps or randomness: equal input gives equal bytes.
//
// Proportions map onto a 256-step sequential ramp from white (#ffffff, 0.0)
// to dark blue (#08306b, 1.0): step = round(p * 255) and each channel is
// low + round((high - low) * step / 255). Binary barcodes use the two ramp
// endpoints. Cells without data are grey (#d9d9d9).
//
// Each document embeds the plotted numbers as compact JSON in a <metadata>
// element so tests and downstream tools can recover them exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kstate/aggregate.hpp"
#include "kstate/core_model.hpp"
#include "kstate/error.hpp"

namespace kstate::io::svg {

struct Rgb {
    int r, g, b;
};

inline constexpr Rgb kRampLow{255, 255, 255};
inline constexpr Rgb kRampHigh{8, 48, 107};
inline constexpr std::string_view kNoDataFill = "#d9d9d9";

inline std::string hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

inline std::size_t ramp_step(double p) {
    const double clamped = std::clamp(std::isfinite(p) ? p : 0.0, 0.0, 1.0);
    return static_cast<std::size_t>(std::lround(clamped * 255.0));
}

inline std::string ramp_color(double p) {
    const auto step = static_cast<double>(ramp_step(p));
    auto channel = [&](int lo, int hi) { return lo + static_cast<int>(std::lround((hi - lo) * step / 255.0)); };
    return hex({channel(kRampLow.r, kRampHigh.r), channel(kRampLow.g, kRampHigh.g), channel(kRampLow.b, kRampHigh.b)});
}

/// Fixed-point with up to three decimals, trailing zeros trimmed.
inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

inline std::string escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

namespace detail {

inline void open_document(std::ostringstream& out, double width, double height) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "px\" height=\""
        << num(height) << "px\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" fill=\"#ffffff\"/>\n";
}

inline void metadata(std::ostringstream& out, const nlohmann::json& data) {
    out << "<metadata id=\"kstate-data\">" << escape(data.dump()) << "</metadata>\n";
}

inline void text(std::ostringstream& out, double x, double y, std::string_view content, std::string_view anchor = "start",
                 int size = 11) {
    out << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"" << size
        << "\" text-anchor=\"" << anchor << "\">" << escape(content) << "</text>\n";
}

} // namespace detail

// ---------------------------------------------------------------------------
// Heatmaps and barcodes
// ---------------------------------------------------------------------------

struct HeatmapOptions {
    double cell_width = 6;
    double cell_height = 24;
    double label_width = 140;
    double margin = 10;
    std::string title;
    bool legend = true;
    bool column_headers = false; // print column labels above the grid
};

struct HeatmapRow {
    std::string label;
    std::vector<std::optional<double>> values;
    std::size_t n = 0;
};

/// Rows under an optional labelled separator.
struct HeatmapGroup {
    std::string label;
    std::vector<HeatmapRow> rows;
};

/// Groups and rows are drawn top to bottom in the order given. Column labels
/// become per-cell tooltips and must match the row length.
inline std::string render_heatmap(std::span<const HeatmapGroup> groups, std::span<const std::string> columns,
                                  const HeatmapOptions& opt = {}) {
    for (const auto& g : groups) {
        for (const auto& row : g.rows) {
            if (row.values.size() != columns.size()) {
                throw Error(ErrorCode::DomainMismatch, "heatmap row '" + row.label + "' has " +
                                                           std::to_string(row.values.size()) + " cells, expected " +
                                                           std::to_string(columns.size()));
            }
        }
    }
    const double title_h = opt.title.empty() ? 0 : 22;
    const double group_h = 18;
    const double legend_h = opt.legend ? 40 : 0;
    const double header_h = opt.column_headers ? 16 : 0;
    double body_h = header_h;
    for (const auto& g : groups) body_h += (g.label.empty() ? 0 : group_h) + g.rows.size() * opt.cell_height;
    const double width = 2 * opt.margin + opt.label_width + columns.size() * opt.cell_width;
    const double height = 2 * opt.margin + title_h + body_h + legend_h;

    std::ostringstream out;
    detail::open_document(out, width, height);
    if (!opt.title.empty()) detail::text(out, opt.margin, opt.margin + 14, opt.title, "start", 14);

    nlohmann::json data_groups = nlohmann::json::array();
    const double x0 = opt.margin + opt.label_width;
    double y = opt.margin + title_h;
    if (opt.column_headers) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            detail::text(out, x0 + (i + 0.5) * opt.cell_width, y + 11, columns[i], "middle", 9);
        }
        y += header_h;
    }
    for (const auto& g : groups) {
        nlohmann::json data_rows = nlohmann::json::array();
        if (!g.label.empty()) {
            out << "<line x1=\"" << num(opt.margin) << "\" y1=\"" << num(y) << "\" x2=\"" << num(width - opt.margin)
                << "\" y2=\"" << num(y) << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
            detail::text(out, opt.margin, y + 13, g.label, "start", 12);
            y += group_h;
        }
        for (const auto& row : g.rows) {
            out << "<g class=\"row\">\n";
            detail::text(out, opt.margin, y + opt.cell_height / 2 + 4, row.label);
            nlohmann::json values = nlohmann::json::array();
            for (std::size_t i = 0; i < columns.size(); ++i) {
                const auto& v = row.values[i];
                const std::string fill = v ? ramp_color(*v) : std::string(kNoDataFill);
                out << "<rect x=\"" << num(x0 + i * opt.cell_width) << "\" y=\"" << num(y) << "\" width=\""
                    << num(opt.cell_width) << "\" height=\"" << num(opt.cell_height) << "\" fill=\"" << fill
                    << "\"><title>" << escape(columns[i]) << ": " << (v ? num(*v) : std::string("no data"))
                    << "</title></rect>\n";
                if (v) {
                    values.push_back(*v);
                } else {
                    values.push_back(nullptr);
                }
            }
            out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\""
                << num(columns.size() * opt.cell_width) << "\" height=\"" << num(opt.cell_height)
                << "\" fill=\"none\" stroke=\"#808080\" stroke-width=\"0.5\"/>\n";
            out << "</g>\n";
            data_rows.push_back({{"label", row.label}, {"n", row.n}, {"values", values}});
            y += opt.cell_height;
        }
        data_groups.push_back({{"label", g.label}, {"rows", data_rows}});
    }

    if (opt.legend) {
        const double ly = y + 10;
        const double lw = 20;
        for (int k = 0; k <= 10; ++k) {
            out << "<rect x=\"" << num(x0 + k * lw) << "\" y=\"" << num(ly) << "\" width=\"" << num(lw)
                << "\" height=\"10\" fill=\"" << ramp_color(k / 10.0) << "\" stroke=\"#808080\" stroke-width=\"0.5\"/>\n";
        }
        detail::text(out, x0, ly + 24, "0", "middle", 10);
        detail::text(out, x0 + 11 * lw, ly + 24, "1", "middle", 10);
        detail::text(out, opt.margin, ly + 9, "proportion", "start", 10);
    }

    detail::metadata(out, {{"kind", "heatmap"}, {"columns", columns}, {"groups", data_groups}});
    out << "</svg>\n";
    return out.str();
}

namespace detail {
inline std::vector<std::string> item_codes(const ItemDomain& domain) {
    std::vector<std::string> codes;
    for (const auto& item : domain.items()) codes.push_back(item.code);
    return codes;
}

inline HeatmapRow to_row(std::string label, const MeanBarcode& mb) {
    HeatmapRow row{std::move(label), {}, mb.n};
    row.values.assign(mb.proportions.begin(), mb.proportions.end());
    return row;
}
} // namespace detail

/// One student's state: filled cells for mastered items.
inline std::string render_barcode(const KnowledgeState& state, const ItemDomain& domain, HeatmapOptions opt = {},
                                  std::string label = "student") {
    if (state.size() != domain.size()) throw Error(ErrorCode::DomainMismatch, "state length differs from domain");
    opt.legend = false;
    const std::vector<HeatmapGroup> groups = {{"", {detail::to_row(std::move(label), binary_barcode(state))}}};
    const auto codes = detail::item_codes(domain);
    return render_heatmap(groups, codes, opt);
}

inline std::string render_barcode(const MeanBarcode& barcode, const ItemDomain& domain, const HeatmapOptions& opt = {},
                                  std::string label = "all") {
    const std::vector<HeatmapGroup> groups = {{"", {detail::to_row(std::move(label), barcode)}}};
    const auto codes = detail::item_codes(domain);
    return render_heatmap(groups, codes, opt);
}

/// Several labelled mean barcodes stacked in one figure (e.g. pass over fail).
inline std::string render_barcode_rows(std::span<const GradeRow> rows, const ItemDomain& domain,
                                       const HeatmapOptions& opt = {}) {
    HeatmapGroup group;
    for (const auto& r : rows) group.rows.push_back(detail::to_row(r.label, r.barcode));
    const std::vector<HeatmapGroup> groups = {std::move(group)};
    const auto codes = detail::item_codes(domain);
    return render_heatmap(groups, codes, opt);
}

struct CohortGradeSplit {
    std::string label;
    GradeSplitBarcodes split;
};

/// Course sequence heatmap: the first cohort is drawn at the bottom, each as a
/// labelled block of grade rows with the best grade on top.
inline std::string render_grade_grid(std::span<const CohortGradeSplit> bottom_to_top, const ItemDomain& domain,
                                     const HeatmapOptions& opt = {}) {
    std::vector<HeatmapGroup> groups;
    for (auto it = bottom_to_top.rbegin(); it != bottom_to_top.rend(); ++it) {
        if (it->split.domain_size() != 0 && it->split.domain_size() != domain.size()) {
            throw Error(ErrorCode::DomainMismatch, "grade split for " + it->label + " has " +
                                                       std::to_string(it->split.domain_size()) + " items, domain has " +
                                                       std::to_string(domain.size()));
        }
        HeatmapGroup g{it->label, {}};
        for (const auto& row : it->split.rows) g.rows.push_back(detail::to_row(row.label, row.barcode));
        groups.push_back(std::move(g));
    }
    const auto codes = detail::item_codes(domain);
    return render_heatmap(groups, codes, opt);
}

/// Course x column prevalence matrix, first course at the bottom.
inline std::string render_trajectory(const TrajectoryMatrix& m, HeatmapOptions opt = {}) {
    if (opt.cell_width < 30 && m.columns.size() <= 13) opt.cell_width = 30;
    HeatmapGroup group;
    for (std::size_t r = m.courses.size(); r-- > 0;) group.rows.push_back({m.courses[r], m.values[r], 0});
    opt.column_headers = m.columns.size() <= 13;
    const std::vector<HeatmapGroup> groups = {std::move(group)};
    return render_heatmap(groups, m.columns, opt);
}

// ---------------------------------------------------------------------------
// Score distribution
// ---------------------------------------------------------------------------

struct DistributionOptions {
    double bar_width = 44;
    double gap = 16;
    double plot_height = 300;
    double margin = 40;
    std::string title;
};

/// Fill per grade band, A first.
inline constexpr std::array<std::string_view, 5> kBandColors = {"#1a9850", "#91cf60", "#fee08b", "#fc8d59",
                                                                "#d73027"};

/// One stacked bar per bin, A on top and F/W at the bottom, with the score
/// range (in percent) and group size under each bar.
inline std::string render_score_distribution(const ScoreBins& bins, const DistributionOptions& opt = {}) {
    if (std::ranges::none_of(bins.bins, [](const ScoreBin& b) { return b.n > 0; })) {
        throw Error(ErrorCode::AllBinsEmpty, "every score bin is empty");
    }
    const double legend_w = 80;
    const double title_h = opt.title.empty() ? 0 : 24;
    const double width = 2 * opt.margin + bins.bins.size() * (opt.bar_width + opt.gap) + legend_w;
    const double height = 2 * opt.margin + title_h + opt.plot_height + 36;
    const double base_y = opt.margin + title_h + opt.plot_height;

    std::ostringstream out;
    detail::open_document(out, width, height);
    if (!opt.title.empty()) detail::text(out, opt.margin, opt.margin + 14, opt.title, "start", 14);
    out << "<line x1=\"" << num(opt.margin) << "\" y1=\"" << num(base_y) << "\" x2=\""
        << num(opt.margin + bins.bins.size() * (opt.bar_width + opt.gap)) << "\" y2=\"" << num(base_y)
        << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

    auto pct = [](double v) { return num(100.0 * v); };
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t b = 0; b < bins.bins.size(); ++b) {
        const auto& bin = bins.bins[b];
        const double x = opt.margin + opt.gap / 2 + b * (opt.bar_width + opt.gap);
        out << "<g class=\"bin\">\n";
        if (bin.band_proportions) {
            // Stack from the bottom: FW, D, C, B, A.
            double y = base_y;
            for (std::size_t k = 5; k-- > 0;) {
                const double h = (*bin.band_proportions)[k] * opt.plot_height;
                if (h <= 0) continue;
                y -= h;
                out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(opt.bar_width)
                    << "\" height=\"" << num(h) << "\" fill=\"" << kBandColors[k] << "\"><title>"
                    << to_string(kAllBands[k]) << ": " << num((*bin.band_proportions)[k]) << "</title></rect>\n";
            }
        } else {
            out << "<rect x=\"" << num(x) << "\" y=\"" << num(base_y - opt.plot_height) << "\" width=\""
                << num(opt.bar_width) << "\" height=\"" << num(opt.plot_height)
                << "\" fill=\"none\" stroke=\"#808080\" stroke-dasharray=\"4 2\"/>\n";
        }
        detail::text(out, x + opt.bar_width / 2, base_y + 14,
                     pct(bin.lo) + "-" + pct(bin.hi) + (bin.hi_inclusive ? "]" : ")"), "middle", 9);
        detail::text(out, x + opt.bar_width / 2, base_y + 27, "n=" + std::to_string(bin.n), "middle", 9);
        out << "</g>\n";

        nlohmann::json props = nullptr;
        if (bin.band_proportions) {
            props = nlohmann::json::object();
            for (auto band : kAllBands) props[std::string(to_string(band))] = (*bin.band_proportions)[static_cast<std::size_t>(band)];
        }
        data.push_back({{"lo", bin.lo}, {"hi", bin.hi}, {"hi_inclusive", bin.hi_inclusive}, {"n", bin.n},
                        {"band_proportions", props}});
    }

    const double lx = width - opt.margin - legend_w + 10;
    for (std::size_t k = 0; k < 5; ++k) {
        const double ly = opt.margin + title_h + k * 18;
        out << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" width=\"12\" height=\"12\" fill=\""
            << kBandColors[k] << "\"/>\n";
        detail::text(out, lx + 18, ly + 10, k == 4 ? "F/W" : std::string(to_string(kAllBands[k])), "start", 10);
    }
    detail::metadata(out, {{"kind", "score_distribution"}, {"bins", data}});
    out << "</svg>\n";
    return out.str();
}

/// Parses the JSON embedded by any renderer above.
inline nlohmann::json embedded_data(std::string_view svg) {
    const auto open = svg.find("<metadata id=\"kstate-data\">");
    const auto close = svg.find("</metadata>");
    if (open == std::string_view::npos || close == std::string_view::npos) {
        throw Error(ErrorCode::ParseError, "SVG has no embedded data");
    }
    std::string body(svg.substr(open + 27, close - open - 27));
    std::string plain;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '&') {
            plain.push_back(body[i]);
            continue;
        }
        const auto semi = body.find(';', i);
        const auto entity = body.substr(i, semi - i + 1);
        plain.push_back(entity == "&amp;" ? '&' : entity == "&lt;" ? '<' : entity == "&gt;" ? '>' : '"');
        i = semi;
    }
    return nlohmann::json::parse(plain);
}

} // namespace kstate::io::svg
