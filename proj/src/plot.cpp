#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <vector>

#include "hvi/bench.hpp"

namespace hvi {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void emit_plot(const std::string& aggregate_csv, const std::string& svg_path) {
  const auto rows = load_aggregate_csv(aggregate_csv);
  if (rows.empty()) {
    std::cerr << "emit_plot: no aggregate rows in " << aggregate_csv
              << ", nothing to plot\n";
    return;
  }

  std::vector<std::string> methods;
  double dmin = 1e300, dmax = -1e300, emin = 1e300, emax = -1e300;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    dmin = std::min(dmin, static_cast<double>(r.d));
    dmax = std::max(dmax, static_cast<double>(r.d));
    emin = std::min(emin, r.mean_theta_err_sq);
    emax = std::max(emax, r.mean_theta_err_sq);
  }
  if (dmax == dmin) {
    dmin -= 1.0;
    dmax += 1.0;
  }
  if (emax == emin) {
    emin -= 1.0;
    emax += 1.0;
  }
  const double pad = 0.05 * (emax - emin);
  emin -= pad;
  emax += pad;

  const double width = 640, height = 440;
  const double ml = 80, mr = 150, mt = 30, mb = 60;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double d) { return ml + (d - dmin) / (dmax - dmin) * pw; };
  auto py = [&](double e) { return mt + ph - (e - emin) / (emax - emin) * ph; };

  std::ofstream out(svg_path);
  if (!out) throw IoError("cannot write " + svg_path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double dv = dmin + (dmax - dmin) * t / 4.0;
    const double ev = emin + (emax - emin) * t / 4.0;
    out << "<text x=\"" << px(dv) << "\" y=\"" << mt + ph + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << fmt(dv)
        << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(ev) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(ev) << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << py(ev) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << py(ev)
        << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 15
      << "\" font-size=\"14\" text-anchor=\"middle\">d</text>\n";
  out << "<text x=\"20\" y=\"" << mt + ph / 2
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << mt + ph / 2 << ")\">mean ||theta - theta_hat||^2</text>\n";

  for (size_t m = 0; m < methods.size(); ++m) {
    const char* color = kPalette[m % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::map<int, double> pts;
    for (const auto& r : rows)
      if (r.method == methods[m]) pts[r.d] = r.mean_theta_err_sq;
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [d, e] : pts) out << px(d) << ',' << py(e) << ' ';
    out << "\"/>\n";
    for (const auto& [d, e] : pts)
      out << "<circle cx=\"" << px(d) << "\" cy=\"" << py(e)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = mt + 16 + 18.0 * static_cast<double>(m);
    out << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\""
        << ml + pw + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << ml + pw + 36 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\">" << methods[m] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace hvi
