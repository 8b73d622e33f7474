#include "spiral/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spiral/errors.hpp"
#include "spiral/sphere_geom.hpp"

namespace spiral {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

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

}  // namespace

std::string render_svg(const PointChunk& chunk, const PlotOptions& opt, const PlotOverlay& overlay) {
  if (!(opt.T > 0.0) || !std::isfinite(opt.T)) throw ArgumentError("plot radius must be positive");
  if (opt.size < 16) throw ArgumentError("plot size too small");
  const double size = opt.size;
  const double scale = size / (2.0 * opt.T);
  auto px = [&](double x) { return (x + opt.T) * scale; };
  auto py = [&](double y) { return (opt.T - y) * scale; };
  const double marker = opt.eps > 0.0 ? std::max(0.3, opt.eps * scale) : std::clamp(0.15 * scale, 0.5, 3.0);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.size << "\" height=\"" << opt.size
     << "\" viewBox=\"0 0 " << opt.size << ' ' << opt.size << "\">\n";
  if (!opt.title.empty()) os << "<title>" << escape(opt.title) << "</title>\n";
  if (!opt.description.empty()) os << "<desc>" << escape(opt.description) << "</desc>\n";
  os << "<defs><clipPath id=\"box\"><rect width=\"" << opt.size << "\" height=\"" << opt.size
     << "\"/></clipPath></defs>\n";
  os << "<rect width=\"" << opt.size << "\" height=\"" << opt.size << "\" fill=\"white\"/>\n";
  os << "<g clip-path=\"url(#box)\">\n";
  if (overlay.strip) {
    const double lo = (*overlay.strip)[0];
    const double hi = (*overlay.strip)[1];
    os << "<rect x=\"0\" y=\"" << fmt(py(hi)) << "\" width=\"" << opt.size << "\" height=\"" << fmt((hi - lo) * scale)
       << "\" fill=\"#9ecae1\" fill-opacity=\"0.4\"/>\n";
  }
  os << "<circle cx=\"" << fmt(px(0)) << "\" cy=\"" << fmt(py(0)) << "\" r=\"" << fmt(opt.T * scale)
     << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";

  os << "<g fill=\"black\">\n";
  for (std::int64_t i = 0; i < chunk.size(); ++i) {
    const auto p = chunk.point(i);
    if (norm(p) > opt.T) continue;
    os << "<circle cx=\"" << fmt(px(p[0])) << "\" cy=\"" << fmt(py(p[1])) << "\" r=\"" << fmt(marker) << "\"/>\n";
  }
  os << "</g>\n";

  const double L = 3.0 * opt.T;
  auto ray = [&](double x0, double y0, const std::vector<double>& v, const char* colour) {
    if (v.size() < 2) return;
    const double n = std::hypot(v[0], v[1]);
    if (n == 0.0) return;
    os << "<line x1=\"" << fmt(px(x0)) << "\" y1=\"" << fmt(py(y0)) << "\" x2=\"" << fmt(px(x0 + L * v[0] / n))
       << "\" y2=\"" << fmt(py(y0 + L * v[1] / n)) << "\" stroke=\"" << colour << "\" stroke-width=\"1\"/>\n";
  };
  for (const auto& v : overlay.origin_rays) ray(0.0, 0.0, v, "#d62728");
  if (overlay.ray_start.size() >= 2) {
    for (const auto& v : overlay.start_rays) ray(overlay.ray_start[0], overlay.ray_start[1], v, "#2ca02c");
    os << "<circle cx=\"" << fmt(px(overlay.ray_start[0])) << "\" cy=\"" << fmt(py(overlay.ray_start[1]))
       << "\" r=\"" << fmt(2.0 * marker + 1.0) << "\" fill=\"#2ca02c\"/>\n";
  }
  const double ring = std::max(2.0 * marker, 3.0);
  for (std::int64_t n : overlay.highlight) {
    if (n < chunk.n_lo || n > chunk.n_hi()) continue;
    const auto p = chunk.point(n - chunk.n_lo);
    os << "<circle cx=\"" << fmt(px(p[0])) << "\" cy=\"" << fmt(py(p[1])) << "\" r=\"" << fmt(ring)
       << "\" fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"1\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace spiral
