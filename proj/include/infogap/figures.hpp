#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "infogap/util.hpp"

namespace infogap::figures {

enum class FigureKind { line, bars, heatmap, diagram, matrix };

// One figure: a renderer applied to a TSV data file. The SVG is a pure
// function of that table, so re-rendering reproduces it byte for byte.
struct FigureSpec {
    std::string name;       // figures/<name>.svg and figures/<name>.tsv
    std::string source;     // artifact the data is copied from
    FigureKind kind;
    std::string title;
    std::string x_column;                // line/bars
    std::vector<std::string> y_columns;  // line/bars
};

const std::vector<FigureSpec>& standard_figures();

std::string render(const FigureSpec& spec, const util::Table& data);

// Copies each figure's data next to it and renders the SVG. Figures whose
// source artifact is missing are skipped.
std::vector<std::string> write_figures(const std::filesystem::path& artifact_dir);

}  // namespace infogap::figures
