#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace skyway::plot {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::string source;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    bool has(const std::string& name) const;
    // Throws SchemaError naming the missing column.
    std::size_t index(const std::string& name) const;
    std::vector<double> numeric(const std::string& name) const;
    std::vector<std::string> text(const std::string& name) const;
};

// Header plus at least one data row, else SchemaError.
Table read_csv(const std::string& path);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    // Horizontal reference lines, e.g. attitude bounds.
    std::vector<double> guides;
};

std::string render_svg(const std::vector<Panel>& panels, int columns);

// Profile sheet for a timeseries CSV.
std::vector<Panel> profile_panels(const Table& t);
// Reward per episode for a metrics CSV.
std::vector<Panel> training_panels(const Table& t);
// Transport reward and HO probability vs M for a sweep CSV.
std::vector<Panel> sweep_panels(const Table& t);

// Chooses the layout from the CSV header; returns the written SVG paths.
std::vector<std::string> emit_plots(const std::vector<std::string>& csv_paths, const std::string& out_dir);

}  // namespace skyway::plot
