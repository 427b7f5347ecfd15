#include "rulemon/svg.hpp"

#include <algorithm>
#include <sstream>

namespace rulemon::svg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series, bool diagonal) {
  constexpr double W = 480, H = 400, L = 60, R = 20, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  const auto X = [&](double x) { return L + std::clamp(x, 0.0, 1.0) * pw; };
  const auto Y = [&](double y) { return T + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };
  std::ostringstream os;
  os.precision(5);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    os << "<line x1=\"" << X(v) << "\" y1=\"" << T + ph << "\" x2=\"" << X(v) << "\" y2=\"" << T + ph + 4 << "\" stroke=\"black\"/>";
    os << "<text x=\"" << X(v) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << v << "</text>\n";
    os << "<line x1=\"" << L - 4 << "\" y1=\"" << Y(v) << "\" x2=\"" << L << "\" y2=\"" << Y(v) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << L - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << T + ph / 2
     << ")\">" << escape(y_label) << "</text>\n";
  if (diagonal) {
    os << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(1) << "\" y2=\"" << Y(1)
       << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[s].points) os << X(x) << ',' << Y(y) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << L + 8 << "\" y=\"" << T + 16 + 14 * static_cast<double>(s) << "\" fill=\"" << color << "\">"
       << escape(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rulemon::svg
