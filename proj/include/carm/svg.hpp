#ifndef CARM_SVG_HPP_
#define CARM_SVG_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "carm/model.hpp"
#include "carm/records.hpp"
#include "carm/topology.hpp"

namespace carm {

/// Axis limits and canvas size of a roofline plot; unset limits auto-fit
/// with one decade of margin around the plotted content.
struct PlotOptions {
  std::optional<double> ai_min, ai_max;
  std::optional<double> gflops_min, gflops_max;
  int width = 800;
  int height = 560;
  std::string title;
};

/// Resolved log-log axes.
struct LogAxes {
  double ai_min = 0, ai_max = 0, gflops_min = 0, gflops_max = 0;
};

namespace detail::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Six significant digits, used for data attributes and labels.
inline std::string sig(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline double decade_below(double v) { return std::pow(10.0, std::floor(std::log10(v)) - 1.0); }
inline double decade_above(double v) { return std::pow(10.0, std::ceil(std::log10(v)) + 1.0); }

inline const char* roof_colour(MemLevel l) {
  switch (l) {
    case MemLevel::L1: return "#1f77b4";
    case MemLevel::L2: return "#2ca02c";
    case MemLevel::L3: return "#ff7f0e";
    case MemLevel::DRAM: return "#d62728";
  }
  return "#000000";
}

struct Canvas {
  int width, height;
  double left = 80, right = 230, top = 40, bottom = 60;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

template <typename T>
std::string join_unique(const std::vector<T>& v) {
  std::set<std::string> s(v.begin(), v.end());
  std::string o;
  for (const auto& x : s) o += (o.empty() ? "" : ", ") + x;
  return o;
}

}  // namespace detail::svg

/// Relative slack allowed before a point counts as above the attainable bound.
inline constexpr double kAnomalyTolerance = 1e-9;

/// True when the point exceeds min(F_peak, B_fastest * AI).
inline bool is_anomalous(const CarmModel& m, const AppPoint& p) {
  if (!(p.ai >= 0) || !std::isfinite(p.ai)) return false;
  return p.gflops > m.attainable(m.fastest_roof(), p.ai) * (1.0 + kAnomalyTolerance);
}

/// Axis limits that show every ridge, ceiling and point with one decade of margin.
inline LogAxes fit_axes(const CarmModel& m, const std::vector<AppPoint>& points, const PlotOptions& opt = {}) {
  double peak = m.peak_gflops();
  double lo_ai = std::numeric_limits<double>::infinity(), hi_ai = 0;
  double lo_g = std::numeric_limits<double>::infinity(), hi_g = 0;
  for (const auto& r : m.roofs()) {
    double ridge = ridge_point(peak, r.bandwidth_gbps);
    lo_ai = std::min(lo_ai, ridge);
    hi_ai = std::max(hi_ai, ridge);
  }
  for (const auto& c : m.ceilings()) {
    lo_g = std::min(lo_g, c.gflops);
    hi_g = std::max(hi_g, c.gflops);
    double ridge = ridge_point(c.gflops, m.fastest_roof().bandwidth_gbps);
    lo_ai = std::min(lo_ai, ridge);
  }
  for (const auto& p : points) {
    if (p.ai > 0 && std::isfinite(p.ai)) lo_ai = std::min(lo_ai, p.ai), hi_ai = std::max(hi_ai, p.ai);
    if (p.gflops > 0 && std::isfinite(p.gflops)) lo_g = std::min(lo_g, p.gflops), hi_g = std::max(hi_g, p.gflops);
  }
  LogAxes a;
  a.ai_min = opt.ai_min.value_or(detail::svg::decade_below(lo_ai));
  a.ai_max = opt.ai_max.value_or(detail::svg::decade_above(hi_ai));
  a.gflops_min = opt.gflops_min.value_or(detail::svg::decade_below(lo_g));
  a.gflops_max = opt.gflops_max.value_or(detail::svg::decade_above(hi_g));
  if (!(a.ai_min > 0 && a.ai_max > a.ai_min && a.gflops_min > 0 && a.gflops_max > a.gflops_min))
    throw ConfigError("plot axis limits must be positive and increasing");
  return a;
}

/// Log-log roofline plot: one sloped segment per roof ending at its ridge
/// with the peak ceiling, horizontal ceilings, ridge markers and points.
inline std::string render_roofline_svg(const CarmModel& m, const std::vector<AppPoint>& points,
                                       const PlotOptions& opt = {}) {
  namespace s = detail::svg;
  const LogAxes ax = fit_axes(m, points, opt);
  s::Canvas cv{opt.width, opt.height};
  const double lx0 = std::log10(ax.ai_min), lx1 = std::log10(ax.ai_max);
  const double ly0 = std::log10(ax.gflops_min), ly1 = std::log10(ax.gflops_max);
  auto X = [&](double ai) { return cv.left + (std::log10(ai) - lx0) / (lx1 - lx0) * cv.plot_w(); };
  auto Y = [&](double g) { return cv.top + (ly1 - std::log10(g)) / (ly1 - ly0) * cv.plot_h(); };
  auto clamp_ai = [&](double v) { return std::clamp(v, ax.ai_min, ax.ai_max); };
  auto clamp_g = [&](double v) { return std::clamp(v, ax.gflops_min, ax.gflops_max); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << cv.width << "\" height=\"" << cv.height
    << "\" viewBox=\"0 0 " << cv.width << ' ' << cv.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << cv.width << "\" height=\"" << cv.height << "\" fill=\"#ffffff\"/>\n";
  std::string title = opt.title.empty() ? "Cache-aware roofline: " + m.machine() : opt.title;
  o << "<text class=\"title\" x=\"" << s::num(cv.left) << "\" y=\"24\" font-size=\"14\">" << s::escape(title)
    << "</text>\n";

  // Grid and decade ticks.
  o << "<g class=\"axes\" stroke=\"#cccccc\" stroke-width=\"0.5\">\n";
  for (int e = static_cast<int>(std::ceil(lx0 - 1e-9)); e <= static_cast<int>(std::floor(lx1 + 1e-9)); ++e) {
    double x = X(std::pow(10.0, e));
    o << "<line x1=\"" << s::num(x) << "\" y1=\"" << s::num(cv.top) << "\" x2=\"" << s::num(x) << "\" y2=\""
      << s::num(cv.top + cv.plot_h()) << "\"/>\n";
  }
  for (int e = static_cast<int>(std::ceil(ly0 - 1e-9)); e <= static_cast<int>(std::floor(ly1 + 1e-9)); ++e) {
    double y = Y(std::pow(10.0, e));
    o << "<line x1=\"" << s::num(cv.left) << "\" y1=\"" << s::num(y) << "\" x2=\"" << s::num(cv.left + cv.plot_w())
      << "\" y2=\"" << s::num(y) << "\"/>\n";
  }
  o << "</g>\n<g class=\"tick-labels\" fill=\"#333333\">\n";
  for (int e = static_cast<int>(std::ceil(lx0 - 1e-9)); e <= static_cast<int>(std::floor(lx1 + 1e-9)); ++e)
    o << "<text x=\"" << s::num(X(std::pow(10.0, e))) << "\" y=\"" << s::num(cv.top + cv.plot_h() + 16)
      << "\" text-anchor=\"middle\">" << s::sig(std::pow(10.0, e)) << "</text>\n";
  for (int e = static_cast<int>(std::ceil(ly0 - 1e-9)); e <= static_cast<int>(std::floor(ly1 + 1e-9)); ++e)
    o << "<text x=\"" << s::num(cv.left - 6) << "\" y=\"" << s::num(Y(std::pow(10.0, e)) + 4)
      << "\" text-anchor=\"end\">" << s::sig(std::pow(10.0, e)) << "</text>\n";
  o << "</g>\n";
  o << "<rect class=\"frame\" x=\"" << s::num(cv.left) << "\" y=\"" << s::num(cv.top) << "\" width=\""
    << s::num(cv.plot_w()) << "\" height=\"" << s::num(cv.plot_h()) << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  o << "<text class=\"x-label\" x=\"" << s::num(cv.left + cv.plot_w() / 2) << "\" y=\"" << cv.height - 18
    << "\" text-anchor=\"middle\">Arithmetic intensity (FLOP/byte)</text>\n";
  o << "<text class=\"y-label\" transform=\"translate(20 " << s::num(cv.top + cv.plot_h() / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">Performance (GFLOP/s)</text>\n";

  // Ceilings, highest first, each starting at its ridge with the fastest roof.
  std::vector<FpCeiling> ceilings = m.ceilings();
  std::stable_sort(ceilings.begin(), ceilings.end(), [](const auto& a, const auto& b) { return a.gflops > b.gflops; });
  const double fast_bw = m.fastest_roof().bandwidth_gbps;
  o << "<g class=\"ceilings\">\n";
  for (const auto& c : ceilings) {
    double x0 = clamp_ai(ridge_point(c.gflops, fast_bw));
    double y = Y(clamp_g(c.gflops));
    o << "<line class=\"ceiling\" data-op=\"" << to_string(c.op) << "\" data-gflops=\"" << s::sig(c.gflops)
      << "\" x1=\"" << s::num(X(x0)) << "\" y1=\"" << s::num(y) << "\" x2=\"" << s::num(X(ax.ai_max)) << "\" y2=\""
      << s::num(y) << "\" stroke=\"#555555\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n";
  }
  o << "</g>\n";

  // Roofs up to their ridge with the peak ceiling.
  const double peak = m.peak_gflops();
  o << "<g class=\"roofs\">\n";
  for (const auto& r : m.roofs()) {
    double ridge = ridge_point(peak, r.bandwidth_gbps);
    double start = std::max(ax.ai_min, ax.gflops_min / r.bandwidth_gbps);
    double end = std::min(ridge, ax.ai_max);
    if (start >= end) continue;
    o << "<line class=\"roof\" data-level=\"" << to_string(r.level) << "\" data-bandwidth=\""
      << s::sig(r.bandwidth_gbps) << "\" x1=\"" << s::num(X(start)) << "\" y1=\""
      << s::num(Y(clamp_g(r.bandwidth_gbps * start))) << "\" x2=\"" << s::num(X(end)) << "\" y2=\""
      << s::num(Y(clamp_g(r.bandwidth_gbps * end))) << "\" stroke=\"" << s::roof_colour(r.level)
      << "\" stroke-width=\"2\"/>\n";
  }
  o << "</g>\n<g class=\"ridges\">\n";
  for (const auto& r : m.roofs()) {
    double ridge = ridge_point(peak, r.bandwidth_gbps);
    if (ridge < ax.ai_min || ridge > ax.ai_max) continue;
    o << "<circle class=\"ridge\" data-level=\"" << to_string(r.level) << "\" data-ai=\"" << s::sig(ridge)
      << "\" cx=\"" << s::num(X(ridge)) << "\" cy=\"" << s::num(Y(clamp_g(peak))) << "\" r=\"3\" fill=\""
      << s::roof_colour(r.level) << "\"/>\n";
  }
  o << "</g>\n";

  // Points.
  std::vector<const AppPoint*> anomalous;
  o << "<g class=\"points\">\n";
  for (const auto& p : points) {
    bool bad = is_anomalous(m, p);
    if (bad) anomalous.push_back(&p);
    double px = p.ai > 0 ? clamp_ai(p.ai) : ax.ai_min;
    double py = p.gflops > 0 ? clamp_g(p.gflops) : ax.gflops_min;
    const char* fill = p.source == AppSource::pmu ? "#9467bd" : p.source == AppSource::dbi ? "#8c564b" : "#000000";
    o << "<circle class=\"point" << (bad ? " anomalous" : "") << "\" data-source=\"" << to_string(p.source)
      << "\" data-ai=\"" << s::sig(p.ai) << "\" data-gflops=\"" << s::sig(p.gflops) << "\" cx=\"" << s::num(X(px))
      << "\" cy=\"" << s::num(Y(py)) << "\" r=\"4\" fill=\"" << fill << "\""
      << (bad ? " stroke=\"#ff0000\" stroke-width=\"2\"" : "") << "><title>" << s::escape(p.label) << "</title></circle>\n";
  }
  o << "</g>\n";

  // Legend.
  std::vector<std::string> isas, precs;
  for (const auto& r : m.roofs()) isas.emplace_back(to_string(r.isa)), precs.emplace_back(to_string(r.precision));
  for (const auto& c : m.ceilings()) isas.emplace_back(to_string(c.isa)), precs.emplace_back(to_string(c.precision));
  double lx = cv.left + cv.plot_w() + 16, ly = cv.top + 4;
  auto text = [&](const std::string& cls, const std::string& t) {
    ly += 16;
    o << "<text class=\"" << cls << "\" x=\"" << s::num(lx) << "\" y=\"" << s::num(ly) << "\">" << s::escape(t)
      << "</text>\n";
  };
  o << "<g class=\"legend\">\n";
  text("legend machine", "Machine: " + m.machine());
  text("legend isa", "ISA: " + s::join_unique(isas));
  text("legend precision", "Precision: " + s::join_unique(precs));
  for (const auto& r : m.roofs())
    text("legend roof", std::string(to_string(r.level)) + ": " + s::sig(r.bandwidth_gbps) + " GB/s");
  for (const auto& c : ceilings) text("legend ceiling", std::string(to_string(c.op)) + ": " + s::sig(c.gflops) + " GFLOP/s");
  for (const auto* p : anomalous)
    text("legend anomalous", "Anomalous (above roof): " + (p->label.empty() ? s::sig(p->ai) : p->label));
  o << "</g>\n</svg>\n";
  return o.str();
}

/// Bandwidth against log2(working set) with optional cache-size markers.
inline std::string render_memcurve_svg(const MemoryCurveRecord& curve, const CacheTopology* topology = nullptr,
                                       int width = 800, int height = 480) {
  namespace s = detail::svg;
  if (curve.points.size() < 2) throw ConfigError("memory curve plot needs at least two points");
  s::Canvas cv{width, height};
  cv.right = 40;
  double lo = std::numeric_limits<double>::infinity(), hi = 0, bw_max = 0;
  for (const auto& p : curve.points) {
    double b = static_cast<double>(p.array_bytes ? p.array_bytes : p.requested_bytes);
    if (!(b > 0)) throw DomainError("memory curve point with zero size");
    lo = std::min(lo, std::log2(b));
    hi = std::max(hi, std::log2(b));
    bw_max = std::max(bw_max, p.bandwidth_gbps);
  }
  lo = std::floor(lo);
  hi = std::ceil(hi);
  if (hi <= lo) hi = lo + 1;
  if (!(bw_max > 0)) bw_max = 1;
  const double y_top = bw_max * 1.1;
  auto X = [&](double bytes) { return cv.left + (std::log2(bytes) - lo) / (hi - lo) * cv.plot_w(); };
  auto Y = [&](double bw) { return cv.top + (1.0 - bw / y_top) * cv.plot_h(); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << cv.width << "\" height=\"" << cv.height
    << "\" viewBox=\"0 0 " << cv.width << ' ' << cv.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << cv.width << "\" height=\"" << cv.height << "\" fill=\"#ffffff\"/>\n";
  o << "<text class=\"title\" x=\"" << s::num(cv.left) << "\" y=\"24\" font-size=\"14\">"
    << s::escape("Memory curve: " + curve.header.machine.hostname + " " + std::string(to_string(curve.isa)) + " " +
                 std::string(to_string(curve.precision)) + " " + curve.ratio.to_string())
    << "</text>\n";
  o << "<rect class=\"frame\" x=\"" << s::num(cv.left) << "\" y=\"" << s::num(cv.top) << "\" width=\""
    << s::num(cv.plot_w()) << "\" height=\"" << s::num(cv.plot_h()) << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  o << "<g class=\"tick-labels\" fill=\"#333333\">\n";
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); e += 2) {
    double b = std::ldexp(1.0, e);
    std::string label = e >= 30 ? std::to_string(1 << (e - 30)) + " GiB"
                        : e >= 20 ? std::to_string(1 << (e - 20)) + " MiB"
                        : e >= 10 ? std::to_string(1 << (e - 10)) + " KiB"
                                  : std::to_string(1 << e) + " B";
    o << "<text x=\"" << s::num(X(b)) << "\" y=\"" << s::num(cv.top + cv.plot_h() + 16)
      << "\" text-anchor=\"middle\">" << label << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    double bw = y_top * i / 5.0;
    o << "<text x=\"" << s::num(cv.left - 6) << "\" y=\"" << s::num(Y(bw) + 4) << "\" text-anchor=\"end\">"
      << s::sig(std::round(bw * 100) / 100) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text class=\"x-label\" x=\"" << s::num(cv.left + cv.plot_w() / 2) << "\" y=\"" << cv.height - 18
    << "\" text-anchor=\"middle\">Working set</text>\n";
  o << "<text class=\"y-label\" transform=\"translate(20 " << s::num(cv.top + cv.plot_h() / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">Bandwidth (GB/s)</text>\n";

  if (topology) {
    struct Marker {
      const char* level;
      std::uint64_t kib;
    };
    const Marker markers[] = {{"L1", topology->l1d_kib}, {"L2", topology->l2_kib}, {"L3", topology->l3_total_kib}};
    o << "<g class=\"cache-markers\">\n";
    for (const auto& mk : markers) {
      if (!mk.kib) continue;
      double b = static_cast<double>(mk.kib) * 1024.0;
      if (std::log2(b) < lo || std::log2(b) > hi) continue;
      o << "<line class=\"cache-marker\" data-level=\"" << mk.level << "\" data-bytes=\"" << mk.kib * 1024
        << "\" x1=\"" << s::num(X(b)) << "\" y1=\"" << s::num(cv.top) << "\" x2=\"" << s::num(X(b)) << "\" y2=\""
        << s::num(cv.top + cv.plot_h()) << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
      o << "<text class=\"cache-label\" x=\"" << s::num(X(b) + 3) << "\" y=\"" << s::num(cv.top + 12) << "\">"
        << mk.level << ' ' << mk.kib << " KiB</text>\n";
    }
    o << "</g>\n";
  }

  o << "<polyline class=\"curve\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    double b = static_cast<double>(p.array_bytes ? p.array_bytes : p.requested_bytes);
    o << (i ? " " : "") << s::num(X(b)) << ',' << s::num(Y(p.bandwidth_gbps));
  }
  o << "\"/>\n<g class=\"samples\">\n";
  for (const auto& p : curve.points) {
    double b = static_cast<double>(p.array_bytes ? p.array_bytes : p.requested_bytes);
    o << "<circle class=\"sample\" data-bytes=\"" << (p.array_bytes ? p.array_bytes : p.requested_bytes)
      << "\" data-bandwidth=\"" << s::sig(p.bandwidth_gbps) << "\" cx=\"" << s::num(X(b)) << "\" cy=\""
      << s::num(Y(p.bandwidth_gbps)) << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace carm

#endif  // CARM_SVG_HPP_
