#include "infogap/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "infogap/error.hpp"
#include "infogap/log.hpp"

namespace infogap::figures {

const std::vector<FigureSpec>& standard_figures() {
    static const std::vector<FigureSpec> specs = {
        {"curiosity", "curiosity.tsv", FigureKind::line, "Mean curiosity by chapter", "chapter_index",
         {"mean_curiosity"}},
        {"topic_counts", "chapter_topics.tsv", FigureKind::bars, "Topics by chapter", "chapter_index",
         {"n_topics", "n_novel"}},
        {"topic_frequency", "topic_freq.tsv", FigureKind::heatmap, "log2 chunk count per topic and chapter", "", {}},
        {"betti", "betti.tsv", FigureKind::line, "Betti numbers by chapter", "chapter_index",
         {"beta0", "beta1", "beta2"}},
        {"wasserstein", "distances.tsv", FigureKind::line, "Wasserstein distance to previous chapter",
         "chapter_index", {"dist_W_beta0", "dist_W_beta1", "dist_W_beta2"}},
        {"bottleneck", "distances.tsv", FigureKind::line, "Bottleneck distance to previous chapter", "chapter_index",
         {"dist_B_beta0", "dist_B_beta1", "dist_B_beta2"}},
        {"persistence_diagram", "diagrams.tsv", FigureKind::diagram, "Persistence diagram, final chapter", "", {}},
        {"correlations", "correlations.tsv", FigureKind::matrix, "Spearman correlations", "", {}},
    };
    return specs;
}

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 130, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1b6ca8", "#d1495b", "#66a182", "#edae49", "#5c415d", "#00798c"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

double cell(const std::string& s) {
    if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return util::parse_double(s);
}

class Svg {
public:
    Svg(double w, double h) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
             << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
        out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1) {
        out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
             << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
             << "\" fill=\"" << fill << "\"/>\n";
    }
    void circle(double x, double y, double r, const std::string& fill) {
        out_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill
             << "\" fill-opacity=\"0.7\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
            out_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
        out_ << "\"/>\n";
    }
    void text(double x, double y, std::string_view s, const char* anchor = "start", int size = 11) {
        out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\" font-size=\""
             << size << "\">" << escape(s) << "</text>\n";
    }
    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    std::ostringstream out_;
};

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle(bool include_zero) {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (include_zero) lo = std::min(lo, 0.0), hi = std::max(hi, 0.0);
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    }
    double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void axes(Svg& svg, const Range& xr, const Range& yr, const std::string& title, const std::string& xlabel) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    svg.text(kWidth / 2, 20, title, "middle", 13);
    svg.line(x0, y0, x1, y0, "#333");
    svg.line(x0, y0, x0, y1, "#333");
    for (int i = 0; i <= 4; ++i) {
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        const double py = yr.map(fy, y0, y1);
        svg.line(x0 - 4, py, x0, py, "#333");
        svg.line(x0, py, x1, py, "#eee");
        svg.text(x0 - 6, py + 4, tick(fy), "end");
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double px = xr.map(fx, x0, x1);
        svg.line(px, y0, px, y0 + 4, "#333");
        svg.text(px, y0 + 16, tick(fx), "middle");
    }
    svg.text((x0 + x1) / 2, kHeight - 12, xlabel, "middle");
}

void legend(Svg& svg, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = kTop + 14.0 * static_cast<double>(i);
        svg.rect(kWidth - kRight + 12, y - 8, 10, 10, kPalette[i % 6]);
        svg.text(kWidth - kRight + 26, y + 1, names[i]);
    }
}

std::string render_xy(const FigureSpec& spec, const util::Table& data) {
    const std::size_t xc = data.column(spec.x_column);
    std::vector<std::size_t> ycols;
    for (const auto& y : spec.y_columns) ycols.push_back(data.column(y));
    Range xr, yr;
    for (const auto& row : data.rows) {
        xr.add(cell(row[xc]));
        for (auto c : ycols) yr.add(cell(row[c]));
    }
    const bool bars = spec.kind == FigureKind::bars;
    if (bars) xr.lo -= 0.5, xr.hi += 0.5;
    xr.settle(false);
    yr.settle(bars);
    Svg svg(kWidth, kHeight);
    axes(svg, xr, yr, spec.title, spec.x_column);
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    if (bars) {
        const double slot = (x1 - x0) / std::max(1.0, xr.hi - xr.lo) * 0.8;
        const double w = slot / static_cast<double>(ycols.size());
        for (const auto& row : data.rows) {
            const double px = xr.map(cell(row[xc]), x0, x1) - slot / 2;
            for (std::size_t s = 0; s < ycols.size(); ++s) {
                const double v = cell(row[ycols[s]]);
                if (!std::isfinite(v)) continue;
                const double top = yr.map(std::max(v, 0.0), y0, y1), base = yr.map(std::min(v, 0.0), y0, y1);
                svg.rect(px + w * static_cast<double>(s), top, w, base - top, kPalette[s % 6]);
            }
        }
    } else {
        for (std::size_t s = 0; s < ycols.size(); ++s) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& row : data.rows) {
                const double x = cell(row[xc]), y = cell(row[ycols[s]]);
                if (std::isfinite(x) && std::isfinite(y)) pts.emplace_back(xr.map(x, x0, x1), yr.map(y, y0, y1));
            }
            svg.polyline(pts, kPalette[s % 6]);
            for (const auto& [px, py] : pts) svg.circle(px, py, 2, kPalette[s % 6]);
        }
    }
    legend(svg, spec.y_columns);
    return svg.finish();
}

std::string render_heatmap(const FigureSpec& spec, const util::Table& data) {
    const std::size_t tc = data.column("topic_id"), cc = data.column("chapter_index"), vc = data.column("log2_count");
    std::map<long long, std::map<long long, double>> grid;
    std::set<long long> chapters;
    double vmax = 0;
    for (const auto& row : data.rows) {
        const long long t = util::parse_int(row[tc]), c = util::parse_int(row[cc]);
        const double v = cell(row[vc]);
        grid[t][c] = v;
        chapters.insert(c);
        vmax = std::max(vmax, v);
    }
    const double x0 = kLeft, x1 = kWidth - 40, y0 = kTop, y1 = kHeight - kBottom;
    Svg svg(kWidth, kHeight);
    svg.text(kWidth / 2, 20, spec.title, "middle", 13);
    if (grid.empty() || chapters.empty()) return svg.finish();
    const long long cmin = *chapters.begin(), cmax = *chapters.rbegin();
    const double cw = (x1 - x0) / static_cast<double>(cmax - cmin + 1);
    const double rh = (y1 - y0) / static_cast<double>(grid.size());
    std::size_t r = 0;
    for (const auto& [topic, row] : grid) {
        for (const auto& [c, v] : row) {
            const double shade = vmax > 0 ? std::clamp(v / vmax, 0.0, 1.0) : 1.0;
            const int level = static_cast<int>(std::lround(230 - 200 * shade));
            char fill[16];
            std::snprintf(fill, sizeof fill, "#%02x%02xff", level, level);
            svg.rect(x0 + cw * static_cast<double>(c - cmin), y0 + rh * static_cast<double>(r), cw, rh, fill);
        }
        ++r;
    }
    svg.text((x0 + x1) / 2, kHeight - 12, "chapter " + std::to_string(cmin) + " to " + std::to_string(cmax), "middle");
    svg.text(16, (y0 + y1) / 2, std::to_string(grid.size()) + " topics", "start");
    return svg.finish();
}

std::string render_diagram(const FigureSpec& spec, const util::Table& data) {
    const std::size_t cc = data.column("chapter_index"), dc = data.column("dim"), bc = data.column("birth"),
                      ec = data.column("death");
    long long last = 0;
    for (const auto& row : data.rows) last = std::max(last, util::parse_int(row[cc]));
    Range r;
    std::vector<std::tuple<int, double, double>> pts;
    for (const auto& row : data.rows) {
        if (util::parse_int(row[cc]) != last) continue;
        const double b = cell(row[bc]), d = cell(row[ec]);
        pts.emplace_back(static_cast<int>(util::parse_int(row[dc])), b, d);
        r.add(b);
        r.add(d);
    }
    r.settle(true);
    Svg svg(kWidth, kHeight);
    axes(svg, r, r, spec.title + " (" + std::to_string(last) + ")", "birth");
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    svg.line(r.map(r.lo, x0, x1), r.map(r.lo, y0, y1), r.map(r.hi, x0, x1), r.map(r.hi, y0, y1), "#999");
    for (const auto& [dim, b, d] : pts) svg.circle(r.map(b, x0, x1), r.map(d, y0, y1), 3, kPalette[dim % 6]);
    legend(svg, {"H0", "H1", "H2"});
    return svg.finish();
}

std::string render_matrix(const FigureSpec& spec, const util::Table& data) {
    const std::size_t n = data.rows.size();
    const double size = std::min(kWidth - 200, kHeight - 80);
    const double x0 = 160, y0 = 40, w = n ? size / static_cast<double>(n) : 0;
    Svg svg(kWidth, kHeight);
    svg.text(kWidth / 2, 20, spec.title, "middle", 13);
    for (std::size_t i = 0; i < n; ++i) {
        svg.text(x0 - 6, y0 + w * (static_cast<double>(i) + 0.5) + 4, data.rows[i][0], "end", 9);
        for (std::size_t j = 0; j < n && j + 1 < data.rows[i].size(); ++j) {
            const double v = cell(data.rows[i][j + 1]);
            std::string fill = "#dddddd";
            if (std::isfinite(v)) {
                const int level = static_cast<int>(std::lround(255 - 200 * std::min(1.0, std::abs(v))));
                char buf[16];
                if (v >= 0)
                    std::snprintf(buf, sizeof buf, "#ff%02x%02x", level, level);
                else
                    std::snprintf(buf, sizeof buf, "#%02x%02xff", level, level);
                fill = buf;
            }
            svg.rect(x0 + w * static_cast<double>(j), y0 + w * static_cast<double>(i), w, w, fill);
        }
    }
    return svg.finish();
}

}  // namespace

std::string render(const FigureSpec& spec, const util::Table& data) {
    switch (spec.kind) {
        case FigureKind::line:
        case FigureKind::bars:
            return render_xy(spec, data);
        case FigureKind::heatmap:
            return render_heatmap(spec, data);
        case FigureKind::diagram:
            return render_diagram(spec, data);
        case FigureKind::matrix:
            return render_matrix(spec, data);
    }
    throw DomainError("unknown figure kind");
}

std::vector<std::string> write_figures(const std::filesystem::path& artifact_dir) {
    const auto dir = artifact_dir / "figures";
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    for (const auto& spec : standard_figures()) {
        const auto source = artifact_dir / spec.source;
        if (!std::filesystem::exists(source)) {
            log::warn("figure '" + spec.name + "' skipped: " + spec.source + " is missing");
            continue;
        }
        const util::Table data = util::read_table(source);
        util::write_table(dir / (spec.name + ".tsv"), data);
        util::write_file(dir / (spec.name + ".svg"), render(spec, data));
        written.push_back(spec.name);
    }
    return written;
}

}  // namespace infogap::figures
