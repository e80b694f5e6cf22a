#include "skyway/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace skyway::plot {

namespace fs = std::filesystem;

namespace {

constexpr int kPanelWidth = 420;
constexpr int kPanelHeight = 280;
constexpr int kMargin = 48;
constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

void render_panel(std::ostringstream& os, const Panel& p, double ox, double oy) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : p.series) {
        for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
        for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
    }
    for (double g : p.guides) ymin = std::min(ymin, g), ymax = std::max(ymax, g);
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
    if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
    const double w = kPanelWidth - 2 * kMargin;
    const double h = kPanelHeight - 2 * kMargin;
    auto px = [&](double x) { return ox + kMargin + (x - xmin) / (xmax - xmin) * w; };
    auto py = [&](double y) { return oy + kMargin + h - (y - ymin) / (ymax - ymin) * h; };

    os << "<rect x=\"" << ox + kMargin << "\" y=\"" << oy + kMargin << "\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"none\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << ox + kPanelWidth / 2.0 << "\" y=\"" << oy + 20
       << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(p.title) << "</text>\n";
    os << "<text x=\"" << ox + kPanelWidth / 2.0 << "\" y=\"" << oy + kPanelHeight - 10
       << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(p.x_label) << "</text>\n";
    os << "<text x=\"" << ox + 12 << "\" y=\"" << oy + kPanelHeight / 2.0 << "\" font-size=\"11\" transform=\"rotate(-90 "
       << ox + 12 << ' ' << oy + kPanelHeight / 2.0 << ")\" text-anchor=\"middle\">" << escape(p.y_label)
       << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << oy + kMargin + h + 14
           << "\" text-anchor=\"middle\" font-size=\"9\">" << num(xv) << "</text>\n";
        os << "<text x=\"" << ox + kMargin - 4 << "\" y=\"" << py(yv) + 3
           << "\" text-anchor=\"end\" font-size=\"9\">" << num(yv) << "</text>\n";
    }
    for (double g : p.guides) {
        os << "<line x1=\"" << px(xmin) << "\" x2=\"" << px(xmax) << "\" y1=\"" << py(g) << "\" y2=\"" << py(g)
           << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (std::size_t i = 0; i < p.series.size(); ++i) {
        const auto& s = p.series[i];
        const char* color = kPalette[i % kPalette.size()];
        os << "<polyline fill=\"none\" stroke-width=\"1.3\" stroke=\"" << color << "\" points=\"";
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) os << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
        os << "\"/>\n";
        if (s.x.size() == 1) {
            os << "<circle cx=\"" << px(s.x[0]) << "\" cy=\"" << py(s.y[0]) << "\" r=\"2.5\" fill=\"" << color
               << "\"/>\n";
        }
        if (!s.label.empty()) {
            os << "<text x=\"" << ox + kMargin + w - 4 << "\" y=\"" << oy + kMargin + 12 + 11 * static_cast<double>(i)
               << "\" text-anchor=\"end\" font-size=\"9\" fill=\"" << color << "\">" << escape(s.label) << "</text>\n";
        }
    }
}

std::string write_svg(const std::vector<Panel>& panels, int columns, const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream(path) << render_svg(panels, columns);
    return path.string();
}

}  // namespace

bool Table::has(const std::string& name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::size_t Table::index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw SchemaError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> Table::numeric(const std::string& name) const {
    const std::size_t i = index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        try {
            out.push_back(i < r.size() ? std::stod(r[i]) : std::numeric_limits<double>::quiet_NaN());
        } catch (const std::exception&) {
            throw SchemaError(source + ": non-numeric value in column '" + name + "'");
        }
    }
    return out;
}

std::vector<std::string> Table::text(const std::string& name) const {
    const std::size_t i = index(name);
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(i < r.size() ? r[i] : "");
    return out;
}

Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path + ": cannot open");
    Table t;
    t.source = path;
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw SchemaError(path + ": empty file, no header");
    t.columns = split_csv_line(line);
    while (std::getline(in, line)) {
        if (!line.empty()) t.rows.push_back(split_csv_line(line));
    }
    if (t.rows.empty()) throw SchemaError(path + ": no data rows");
    return t;
}

std::string render_svg(const std::vector<Panel>& panels, int columns) {
    columns = std::max(1, columns);
    const int rows = static_cast<int>((panels.size() + columns - 1) / columns);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << columns * kPanelWidth << "\" height=\""
       << std::max(rows, 1) * kPanelHeight << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i) {
        render_panel(os, panels[i], static_cast<double>(i % columns) * kPanelWidth,
                     static_cast<double>(i / columns) * kPanelHeight);
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<Panel> profile_panels(const Table& t) {
    const auto time = t.numeric("t");
    const auto uav = t.numeric("uav");
    const auto x = t.numeric("x");
    const auto y = t.numeric("y");
    const auto z = t.numeric("z");
    const auto roll = t.numeric("roll_deg");
    const auto pitch = t.numeric("pitch_deg");
    const auto rate = t.numeric("rate_mbps");

    std::map<int, std::array<Series, 6>> by_uav;
    for (std::size_t i = 0; i < time.size(); ++i) {
        auto& s = by_uav[static_cast<int>(uav[i])];
        const double ts = time[i];
        s[0].x.push_back(x[i]), s[0].y.push_back(y[i]);
        s[1].x.push_back(ts), s[1].y.push_back(z[i]);
        s[2].x.push_back(ts), s[2].y.push_back(roll[i]);
        s[3].x.push_back(ts), s[3].y.push_back(pitch[i]);
        s[4].x.push_back(ts), s[4].y.push_back(rate[i]);
    }
    std::vector<Panel> panels{{"Trajectory (top view)", "x [m]", "y [m]", {}, {}},
                              {"Altitude", "step", "z [m]", {}, {}},
                              {"Roll", "step", "roll [deg]", {}, {-15.0, 15.0}},
                              {"Pitch", "step", "pitch [deg]", {}, {-15.0, 15.0}},
                              {"Serving datarate", "step", "rate [Mbps]", {}, {}}};
    for (auto& [id, s] : by_uav) {
        for (int k = 0; k < 5; ++k) {
            s[k].label = "UAV " + std::to_string(id);
            panels[k].series.push_back(std::move(s[k]));
        }
    }
    return panels;
}

std::vector<Panel> training_panels(const Table& t) {
    const auto ep = t.numeric("episode");
    const auto m = t.numeric("num_uavs");
    Panel tr{"Transport reward per UAV", "episode", "sum R_tran / M", {}, {}};
    Panel te{"Telecom reward per UAV", "episode", "sum R_tele / M", {}, {}};
    Panel ho{"Handover probability", "episode", "P(HO)", {}, {}};
    Series a{"", ep, t.numeric("total_r_tran")}, b{"", ep, t.numeric("total_r_tele")},
        c{"", ep, t.numeric("handover_probability")};
    for (std::size_t i = 0; i < ep.size(); ++i) {
        a.y[i] /= m[i];
        b.y[i] /= m[i];
    }
    tr.series.push_back(a);
    te.series.push_back(b);
    ho.series.push_back(c);
    return {tr, te, ho};
}

std::vector<Panel> sweep_panels(const Table& t) {
    const auto variant = t.text("variant");
    const auto m = t.numeric("M");
    const auto tr = t.numeric("transport_mean");
    const auto ho = t.numeric("ho_prob_mean");
    std::vector<std::string> order;
    std::map<std::string, std::pair<Series, Series>> by_variant;
    for (std::size_t i = 0; i < variant.size(); ++i) {
        if (!by_variant.count(variant[i])) order.push_back(variant[i]);
        auto& [a, b] = by_variant[variant[i]];
        a.label = b.label = variant[i];
        a.x.push_back(m[i]), a.y.push_back(tr[i]);
        b.x.push_back(m[i]), b.y.push_back(ho[i]);
    }
    Panel p1{"Transport reward vs fleet size", "M (UAVs)", "R_tran per UAV", {}, {}};
    Panel p2{"Handover probability vs fleet size", "M (UAVs)", "P(HO)", {}, {}};
    for (const auto& v : order) {
        p1.series.push_back(by_variant[v].first);
        p2.series.push_back(by_variant[v].second);
    }
    return {p1, p2};
}

std::vector<std::string> emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir) {
    std::vector<std::string> written;
    for (const auto& path : csv_paths) {
        const Table t = read_csv(path);
        const std::string stem = fs::path(path).stem().string();
        if (t.has("roll_deg")) {
            written.push_back(write_svg(profile_panels(t), 3, fs::path(out_dir) / (stem + "_profile.svg")));
        } else if (t.has("transport_mean")) {
            written.push_back(write_svg(sweep_panels(t), 2, fs::path(out_dir) / (stem + "_vs_M.svg")));
        } else if (t.has("episode")) {
            written.push_back(write_svg(training_panels(t), 3, fs::path(out_dir) / (stem + "_training.svg")));
        } else {
            throw SchemaError(path + ": unrecognized CSV (expected timeseries, metrics or sweep columns)");
        }
    }
    return written;
}

}  // namespace skyway::plot
