#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rulemon::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Line chart on [0,1] x [0,1] axes (the range of every curve the tools plot).
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series, bool diagonal = false);

}  // namespace rulemon::svg
