// Copyright 2026 The BridgeAD Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bridgead::tools
{
namespace
{

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
const char * const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string & s)
{
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v)
{
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Frame
{
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void header(std::ostream & os, const std::string & title, const std::string & x_label, const std::string & y_label)
{
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << escape(x_label)
     << "</text>\n"
     << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n";
}

void axes(std::ostream & os, const Frame & f, bool x_ticks)
{
  os << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
     << f.py(f.y0) << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << f.py(f.y0)
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      os << "<text x=\"" << f.px(x) << "\" y=\"" << f.py(f.y0) + 16 << "\" text-anchor=\"middle\">" << num(x)
         << "</text>\n";
    }
  }
}

void save(const std::filesystem::path & path, const std::string & text)
{
  std::ofstream out(path);
  out << text;
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

}  // namespace

void write_line_plot(const std::filesystem::path & path, const std::string & title, const std::string & x_label,
                     const std::string & y_label, const std::vector<Series> & series)
{
  Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto & s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        continue;
      }
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  }
  if (!std::isfinite(f.x0)) {
    f = {0.0, 1.0, 0.0, 1.0};
  }
  if (f.x1 <= f.x0) {
    f.x1 = f.x0 + 1.0;
  }
  f.y0 = std::min(f.y0, 0.0);
  if (f.y1 <= f.y0) {
    f.y1 = f.y0 + 1.0;
  }
  std::ostringstream os;
  header(os, title, x_label, y_label);
  axes(os, f, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto & s = series[k];
    const char * color = kColors[k % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.y[i])) {
        os << f.px(s.x[i]) << "," << f.py(s.y[i]) << " ";
      }
    }
    os << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << kTop + 14 * static_cast<double>(k) << "\" fill=\""
       << color << "\" text-anchor=\"end\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  save(path, os.str());
}

void write_bar_plot(const std::filesystem::path & path, const std::string & title, const std::string & y_label,
                    const std::vector<std::string> & labels, const std::vector<double> & values)
{
  double top = 0.0;
  for (const double v : values) {
    if (std::isfinite(v)) {
      top = std::max(top, v);
    }
  }
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(values.size(), 1)), 0.0, top > 0.0 ? top * 1.1 : 1.0};
  std::ostringstream os;
  header(os, title, "", y_label);
  axes(os, f, false);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double x = f.px(static_cast<double>(i) + 0.15);
    const double w = f.px(static_cast<double>(i) + 0.85) - x;
    os << "<rect x=\"" << x << "\" y=\"" << f.py(v) << "\" width=\"" << w << "\" height=\"" << f.py(0.0) - f.py(v)
       << "\" fill=\"" << kColors[i % std::size(kColors)] << "\"/>\n"
       << "<text x=\"" << x + w / 2 << "\" y=\"" << f.py(0.0) + 16 << "\" text-anchor=\"middle\">"
       << escape(i < labels.size() ? labels[i] : "") << "</text>\n"
       << "<text x=\"" << x + w / 2 << "\" y=\"" << f.py(v) - 4 << "\" text-anchor=\"middle\">" << num(v)
       << "</text>\n";
  }
  os << "</svg>\n";
  save(path, os.str());
}

}  // namespace bridgead::tools
