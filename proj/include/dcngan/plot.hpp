#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dcngan {

// Grouped bar chart: one group per column label, one bar per series.
void write_bar_plot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<std::string>& groups, const std::vector<std::string>& series,
                    const std::vector<std::vector<double>>& values,  // [series][group]
                    const std::string& y_label);

struct ScatterPoint {
  std::string label;
  double x = 0;
  double y = 0;
};

void write_scatter_plot(const std::filesystem::path& path, const std::string& title,
                        const std::vector<ScatterPoint>& points, const std::string& x_label,
                        const std::string& y_label);

}  // namespace dcngan
