#include "cmbrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <utility>

#include "cmbrl/errors.hpp"

namespace cmbrl::plot {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 130.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* colour(Variant v) { return v == Variant::kMbrl ? "#d62728" : "#1f77b4"; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Round tick spacing giving roughly `n` intervals over [lo, hi].
double tick_step(double lo, double hi, int n) {
  const double raw = (hi - lo) / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

using Series = std::map<Variant, std::vector<std::pair<int, double>>>;

std::string render(int task_id, envsim::Scenario scenario, const Series& series) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& [v, pts] : series) {
    for (const auto& [x, y] : pts) {
      xmin = std::min<double>(xmin, x);
      xmax = std::max<double>(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double ystep = tick_step(ymin, ymax, 5);
  ymin = std::floor(ymin / ystep) * ystep;
  ymax = std::ceil(ymax / ystep) * ystep;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       "Task " + std::to_string(task_id) + ", " + std::string(to_string(scenario)) + "</text>\n";

  for (double y = ymin; y <= ymax + 0.5 * ystep; y += ystep) {
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(y)) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(py(y)) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(y) + 4) +
         "\" text-anchor=\"end\">" + label(std::abs(y) < 1e-12 ? 0.0 : y) + "</text>\n";
  }
  const double xstep = std::max(1.0, tick_step(xmin, xmax, 6));
  for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9; x += xstep) {
    s += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + ph + 18) +
         "\" text-anchor=\"middle\">" + label(x) + "</text>\n";
  }
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 10) +
       "\" text-anchor=\"middle\">episode</text>\n";
  s += "<text transform=\"translate(16 " + num(kTop + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">episodic return (K h)</text>\n";

  int legend = 0;
  for (const auto& [v, pts] : series) {
    s += "<polyline fill=\"none\" stroke=\"" + std::string(colour(v)) +
         "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) s += " ";
      s += num(px(pts[i].first)) + "," + num(py(pts[i].second));
    }
    s += "\"/>\n";
    for (const auto& [x, y] : pts) {
      s += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"2.5\" fill=\"" +
           colour(v) + "\"/>\n";
    }
    const double ly = kTop + 14 + 20.0 * legend++;
    const double lx = kLeft + pw + 12;
    s += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 24) +
         "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + colour(v) + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly) + "\">" + std::string(to_string(v)) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace

std::vector<Figure> learning_curves(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw ContractViolation("no metrics rows to plot");
  std::map<std::pair<int, envsim::Scenario>, Series> groups;
  for (const auto& r : rows) {
    groups[{r.task_id, r.scenario}][r.variant].emplace_back(r.episode, r.episodic_return);
  }
  std::vector<Figure> out;
  for (auto& [key, series] : groups) {
    for (auto& [v, pts] : series) std::stable_sort(pts.begin(), pts.end());
    Figure f;
    f.task_id = key.first;
    f.scenario = key.second;
    f.file_name = "learning_curve_task" + std::to_string(key.first) + "_" +
                  std::string(to_string(key.second)) + ".svg";
    f.svg = render(key.first, key.second, series);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::string> write_learning_curves(const std::vector<MetricsRow>& rows,
                                               const std::string& dir) {
  const auto figures = learning_curves(rows);
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (const auto& f : figures) {
    const auto path = (std::filesystem::path(dir) / f.file_name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << f.svg;
    paths.push_back(path);
  }
  return paths;
}

}  // namespace cmbrl::plot
