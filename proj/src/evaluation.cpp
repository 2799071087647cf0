#include "ganda/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ganda/errors.hpp"

namespace ganda {

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size())
    throw ShapeError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  if (truth.empty()) throw ShapeError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double TargetEvaluator::target_accuracy(const ModelBundle& bundle) const {
  return accuracy(predict(bundle, pair_->target_features), reveal_for_evaluation(pair_->target_labels));
}

double TargetEvaluator::source_accuracy(const ModelBundle& bundle) const {
  return accuracy(predict(bundle, pair_->source.features), pair_->source.labels);
}

double mean_embedding_norm(const ModelBundle& bundle, const DomainPair& pair) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Matrix* x : {&pair.source.features, &pair.target_features}) {
    const Matrix f = embed(bundle, *x);
    for (std::size_t r = 0; r < f.rows; ++r) {
      double sq = 0.0;
      for (double v : f.row(r)) sq += v * v;
      total += std::sqrt(sq);
    }
    count += f.rows;
  }
  return total / static_cast<double>(count);
}

// ---- decision boundary -----------------------------------------------------

BoundaryGrid boundary_grid(const ModelBundle& bundle, const DomainPair& pair, int resolution) {
  if (pair.source.dim() != 2)
    throw ConfigError("boundary_grid: input dimension must be 2, got " + std::to_string(pair.source.dim()));
  if (resolution < 2) throw ConfigError("boundary_grid: resolution must be >= 2");

  BoundaryGrid g;
  g.resolution = resolution;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Matrix* m : {&pair.source.features, &pair.target_features})
    for (std::size_t r = 0; r < m->rows; ++r) {
      x0 = std::min(x0, (*m)(r, 0));
      x1 = std::max(x1, (*m)(r, 0));
      y0 = std::min(y0, (*m)(r, 1));
      y1 = std::max(y1, (*m)(r, 1));
    }
  const double mx = std::max(0.1 * (x1 - x0), 1e-6);
  const double my = std::max(0.1 * (y1 - y0), 1e-6);
  g.x_min = x0 - mx;
  g.x_max = x1 + mx;
  g.y_min = y0 - my;
  g.y_max = y1 + my;

  const auto res = static_cast<std::size_t>(resolution);
  const double dx = (g.x_max - g.x_min) / static_cast<double>(res);
  const double dy = (g.y_max - g.y_min) / static_cast<double>(res);
  for (std::size_t i = 0; i < res; ++i) {
    g.x_centers.push_back(g.x_min + (static_cast<double>(i) + 0.5) * dx);
    g.y_centers.push_back(g.y_min + (static_cast<double>(i) + 0.5) * dy);
  }
  Matrix pts(res * res, 2);
  for (std::size_t iy = 0; iy < res; ++iy)
    for (std::size_t ix = 0; ix < res; ++ix) {
      pts(iy * res + ix, 0) = g.x_centers[ix];
      pts(iy * res + ix, 1) = g.y_centers[iy];
    }
  g.cells = predict(bundle, pts);
  return g;
}

namespace {

constexpr double kCanvas = 600.0;
constexpr double kLegendWidth = 170.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string hsl_hex(double hue, double sat, double light) {
  const double c = (1 - std::abs(2 * light - 1)) * sat;
  const double hp = hue / 60.0;
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = light - c / 2;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)), static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

// Evenly spaced hues; light tints for regions, saturated for points.
std::string region_color(int c, int class_count) { return hsl_hex(360.0 * c / class_count, 0.65, 0.85); }
std::string point_color(int c, int class_count) { return hsl_hex(360.0 * c / class_count, 0.75, 0.40); }

struct Mapper {
  double x_first, x_last, y_first, y_last, cell;
  int res;
  double px(double x) const { return (0.5 + (res - 1) * (x - x_first) / (x_last - x_first)) * cell; }
  double py(double y) const { return kCanvas - (0.5 + (res - 1) * (y - y_first) / (y_last - y_first)) * cell; }
};

void legend(std::ostringstream& os, int class_count) {
  double y = 24;
  const double x = kCanvas + 16;
  os << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"13\">\n";
  for (int c = 0; c < class_count; ++c, y += 22) {
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y - 11) << "\" width=\"14\" height=\"14\" fill=\""
       << point_color(c, class_count) << "\"/>";
    os << "<text x=\"" << fmt(x + 22) << "\" y=\"" << fmt(y + 1) << "\">class " << c << "</text>\n";
  }
  os << "<circle cx=\"" << fmt(x + 7) << "\" cy=\"" << fmt(y - 4) << "\" r=\"4\" fill=\"#444444\"/>";
  os << "<text x=\"" << fmt(x + 22) << "\" y=\"" << fmt(y + 1) << "\">source</text>\n";
  y += 22;
  os << "<path d=\"M" << fmt(x + 3) << ' ' << fmt(y - 8) << "l8 8m0 -8l-8 8\" stroke=\"#000000\" stroke-width=\"1.5\"/>";
  os << "<text x=\"" << fmt(x + 22) << "\" y=\"" << fmt(y + 1) << "\">target</text>\n";
  os << "</g>\n";
}

}  // namespace

std::string render_boundary_svg(const BoundaryGrid& grid, const DomainPair& pair, int class_count) {
  const int res = grid.resolution;
  const double cell = kCanvas / res;
  const Mapper map{grid.x_centers.front(), grid.x_centers.back(), grid.y_centers.front(),
                   grid.y_centers.back(), cell, res};
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kCanvas + kLegendWidth)
     << "\" height=\"" << fmt(kCanvas) << "\" viewBox=\"0 0 " << fmt(kCanvas + kLegendWidth) << ' '
     << fmt(kCanvas) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  os << "<g class=\"cells\" shape-rendering=\"crispEdges\">\n";
  for (int iy = 0; iy < res; ++iy) {
    int ix = 0;
    while (ix < res) {
      const int cls = grid.at(ix, iy);
      int end = ix + 1;
      while (end < res && grid.at(end, iy) == cls) ++end;
      os << "<rect class=\"cell\" x=\"" << fmt(ix * cell) << "\" y=\"" << fmt(kCanvas - (iy + 1) * cell)
         << "\" width=\"" << fmt((end - ix) * cell) << "\" height=\"" << fmt(cell) << "\" fill=\""
         << region_color(cls, class_count) << "\"/>\n";
      ix = end;
    }
  }
  os << "</g>\n<g class=\"source\">\n";
  for (std::size_t r = 0; r < pair.source.size(); ++r) {
    os << "<circle cx=\"" << fmt(map.px(pair.source.features(r, 0))) << "\" cy=\""
       << fmt(map.py(pair.source.features(r, 1))) << "\" r=\"3.5\" fill=\""
       << point_color(pair.source.labels[r], class_count) << "\"/>\n";
  }
  os << "</g>\n<g class=\"target\" stroke=\"#000000\" stroke-width=\"1.2\">\n";
  for (std::size_t r = 0; r < pair.target_features.rows; ++r) {
    const double x = map.px(pair.target_features(r, 0));
    const double y = map.py(pair.target_features(r, 1));
    os << "<path d=\"M" << fmt(x - 3) << ' ' << fmt(y - 3) << "l6 6m0 -6l-6 6\"/>\n";
  }
  os << "</g>\n";
  legend(os, class_count);
  os << "</svg>\n";
  return os.str();
}

void write_grid_csv(const BoundaryGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "ix,iy,x,y,class\n";
  char buf[64];
  auto num = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (int iy = 0; iy < grid.resolution; ++iy)
    for (int ix = 0; ix < grid.resolution; ++ix) {
      out << ix << ',' << iy << ',';
      num(grid.x_centers[static_cast<std::size_t>(ix)]);
      out << ',';
      num(grid.y_centers[static_cast<std::size_t>(iy)]);
      out << ',' << grid.at(ix, iy) << '\n';
    }
  if (!out) throw ConfigError("failed writing " + path.string());
}

BoundaryGrid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ix,iy,x,y,class")
    throw ConfigError(path.string() + ": missing grid header");
  struct Row { int ix, iy; double x, y; int cls; };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Row r{};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto field = [&](auto& v) {
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ConfigError(path.string() + " row " + std::to_string(line_no) + ": bad field");
      p = ptr;
      if (p < end && *p == ',') ++p;
    };
    field(r.ix);
    field(r.iy);
    field(r.x);
    field(r.y);
    field(r.cls);
    rows.push_back(r);
  }
  const auto res = static_cast<int>(std::lround(std::sqrt(static_cast<double>(rows.size()))));
  if (res < 2 || static_cast<std::size_t>(res * res) != rows.size())
    throw ConfigError(path.string() + ": row count is not a square grid");
  BoundaryGrid g;
  g.resolution = res;
  g.x_centers.assign(static_cast<std::size_t>(res), 0.0);
  g.y_centers.assign(static_cast<std::size_t>(res), 0.0);
  g.cells.assign(rows.size(), 0);
  for (const Row& r : rows) {
    if (r.ix < 0 || r.iy < 0 || r.ix >= res || r.iy >= res) throw ConfigError(path.string() + ": index out of range");
    g.x_centers[static_cast<std::size_t>(r.ix)] = r.x;
    g.y_centers[static_cast<std::size_t>(r.iy)] = r.y;
    g.cells[static_cast<std::size_t>(r.iy * res + r.ix)] = r.cls;
  }
  const double hx = (g.x_centers.back() - g.x_centers.front()) / (2.0 * (res - 1));
  const double hy = (g.y_centers.back() - g.y_centers.front()) / (2.0 * (res - 1));
  g.x_min = g.x_centers.front() - hx;
  g.x_max = g.x_centers.back() + hx;
  g.y_min = g.y_centers.front() - hy;
  g.y_max = g.y_centers.back() + hy;
  return g;
}

void export_plot(const BoundaryGrid& grid, const DomainPair& pair, int class_count,
                 const std::filesystem::path& svg_path) {
  std::ofstream out(svg_path);
  if (!out) throw ConfigError("cannot write " + svg_path.string());
  out << render_boundary_svg(grid, pair, class_count);
  if (!out) throw ConfigError("failed writing " + svg_path.string());
  auto csv = svg_path;
  csv.replace_extension(".csv");
  write_grid_csv(grid, csv);
}

// ---- embeddings ------------------------------------------------------------

Matrix principal_axes(const Matrix& x, int k) {
  const std::size_t d = x.cols;
  if (k < 1 || static_cast<std::size_t>(k) > d) throw ConfigError("principal_axes: bad component count");
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += x(r, c) / static_cast<double>(x.rows);
  Matrix cov(d, d);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += (x(r, i) - mu[i]) * (x(r, j) - mu[j]);

  Matrix axes(static_cast<std::size_t>(k), d);
  for (std::size_t a = 0; a < static_cast<std::size_t>(k); ++a) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i + a);
    for (int it = 0; it < 500; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) w[i] += cov(i, j) * v[j];
      // deflate previously found axes
      for (std::size_t b = 0; b < a; ++b) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += w[i] * axes(b, i);
        for (std::size_t i = 0; i < d; ++i) w[i] -= dot * axes(b, i);
      }
      double norm = 0.0;
      for (double e : w) norm += e * e;
      norm = std::sqrt(norm);
      if (norm < 1e-300) break;
      for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
    }
    for (std::size_t i = 0; i < d; ++i) axes(a, i) = v[i];
  }
  return axes;
}

std::string render_embedding_svg(const ModelBundle& bundle, const DomainPair& pair) {
  const Matrix fs = embed(bundle, pair.source.features);
  const Matrix ft = embed(bundle, pair.target_features);
  Matrix all(fs.rows + ft.rows, fs.cols);
  std::copy(fs.data.begin(), fs.data.end(), all.data.begin());
  std::copy(ft.data.begin(), ft.data.end(), all.data.begin() + static_cast<std::ptrdiff_t>(fs.data.size()));
  const Matrix axes = principal_axes(all, std::min<int>(2, static_cast<int>(all.cols)));

  std::vector<std::pair<double, double>> proj(all.rows);
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (std::size_t r = 0; r < all.rows; ++r) {
    double px = 0.0, py = 0.0;
    for (std::size_t c = 0; c < all.cols; ++c) {
      px += all(r, c) * axes(0, c);
      if (axes.rows > 1) py += all(r, c) * axes(1, c);
    }
    proj[r] = {px, py};
    x0 = std::min(x0, px); x1 = std::max(x1, px);
    y0 = std::min(y0, py); y1 = std::max(y1, py);
  }
  const double sx = x1 > x0 ? (kCanvas - 40) / (x1 - x0) : 1.0;
  const double sy = y1 > y0 ? (kCanvas - 40) / (y1 - y0) : 1.0;
  const int C = pair.class_count;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kCanvas + kLegendWidth) << "\" height=\""
     << fmt(kCanvas) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t r = 0; r < all.rows; ++r) {
    const double x = 20 + (proj[r].first - x0) * sx;
    const double y = kCanvas - 20 - (proj[r].second - y0) * sy;
    if (r < fs.rows) {
      os << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\""
         << point_color(pair.source.labels[r], C) << "\"/>\n";
    } else {
      os << "<path d=\"M" << fmt(x - 3) << ' ' << fmt(y - 3) << "l6 6m0 -6l-6 6\" stroke=\"#000000\"/>\n";
    }
  }
  legend(os, C);
  os << "</svg>\n";
  return os.str();
}

}  // namespace ganda
