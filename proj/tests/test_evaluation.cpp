#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ganda/errors.hpp"
#include "ganda/evaluation.hpp"
#include "ganda/trainer.hpp"

using namespace ganda;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const FitResult& trained_moons() {
  static const FitResult r = [] {
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.lr = 1e-2;
    cfg.lambda_align = 0.0;
    cfg.lambda_adv = 0.0;
    return fit(make_rotated_moons(MoonsOptions{}), cfg);
  }();
  return r;
}

// Minimal XML well-formedness: a tag stack over the document, ignoring the prolog.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  bool saw_root = false;
  while ((pos = doc.find('<', pos)) != std::string::npos) {
    const std::size_t end = doc.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = doc.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    if (tag.back() == '/') {
      saw_root = true;
      continue;
    }
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
    stack.push_back(name);
    saw_root = true;
  }
  return saw_root && stack.empty();
}

}  // namespace

TEST_CASE("accuracy examples") {
  CHECK(accuracy(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1}) == 1.0);
  CHECK(accuracy(std::vector<int>{0, 1}, std::vector<int>{1, 0}) == 0.0);
  CHECK(accuracy(std::vector<int>{0, 1, 2, 3}, std::vector<int>{0, 1, 2, 0}) == 0.75);
  CHECK_THROWS_AS(accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("property: accuracy equals a counting oracle") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const int C = std::uniform_int_distribution<int>(2, 10)(rng);
    std::vector<int> p(n), y(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::uniform_int_distribution<int>(0, C - 1)(rng);
      y[i] = std::uniform_int_distribution<int>(0, C - 1)(rng);
      if (p[i] == y[i]) ++hits;
    }
    CHECK(accuracy(p, y) == static_cast<double>(hits) / static_cast<double>(n));
  }
}

TEST_CASE("evaluator reads held-out labels") {
  const FitResult& r = trained_moons();
  const DomainPair pair = make_rotated_moons(MoonsOptions{});
  const TargetEvaluator ev(pair);
  const auto truth = reveal_for_evaluation(pair.target_labels);
  CHECK(ev.target_accuracy(r.bundle) == accuracy(predict(r.bundle, pair.target_features), truth));
  CHECK(ev.source_accuracy(r.bundle) == accuracy(predict(r.bundle, pair.source.features), pair.source.labels));
  CHECK(ev.target_accuracy(r.bundle) == r.history.back().acc_target);
}

TEST_CASE("boundary grid") {
  const FitResult& r = trained_moons();
  const DomainPair pair = make_rotated_moons(MoonsOptions{});
  const BoundaryGrid g = boundary_grid(r.bundle, pair, 200);
  CHECK(g.cells.size() == 40000);
  CHECK(g.x_centers.size() == 200);

  // box covers every point with a 10% margin
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const Matrix* m : {&pair.source.features, &pair.target_features})
    for (std::size_t i = 0; i < m->rows; ++i) {
      x0 = std::min(x0, (*m)(i, 0));
      x1 = std::max(x1, (*m)(i, 0));
      y0 = std::min(y0, (*m)(i, 1));
      y1 = std::max(y1, (*m)(i, 1));
    }
  CHECK(g.x_min <= x0 - 0.1 * (x1 - x0) + 1e-12);
  CHECK(g.x_max >= x1 + 0.1 * (x1 - x0) - 1e-12);
  CHECK(g.y_min <= y0 - 0.1 * (y1 - y0) + 1e-12);
  CHECK(g.y_max >= y1 + 0.1 * (y1 - y0) - 1e-12);

  // cells agree with direct predictions at their centres
  Matrix centres(static_cast<std::size_t>(200 * 200), 2);
  for (int iy = 0; iy < 200; ++iy)
    for (int ix = 0; ix < 200; ++ix) {
      centres(static_cast<std::size_t>(iy * 200 + ix), 0) = g.x_centers[static_cast<std::size_t>(ix)];
      centres(static_cast<std::size_t>(iy * 200 + ix), 1) = g.y_centers[static_cast<std::size_t>(iy)];
    }
  CHECK(predict(r.bundle, centres) == g.cells);

  ModelBundle constant = init_bundle(2, 15, 2, 16, 0);
  for (auto p : constant.generator.parameters())
    for (double& v : p.mutable_values()) v = 0.0;
  const BoundaryGrid flat = boundary_grid(constant, pair, 50);
  CHECK(std::set<int>(flat.cells.begin(), flat.cells.end()).size() == 1);

  DomainPair three_d = make_blobs(2, 3, 10, 2.0, std::vector<double>(3, 0.0), 0);
  CHECK_THROWS_AS(boundary_grid(init_bundle(3, 15, 2, 16, 0), three_d, 10), ConfigError);
}

TEST_CASE("plot export") {
  const FitResult& r = trained_moons();
  const DomainPair pair = make_rotated_moons(MoonsOptions{});
  const BoundaryGrid g = boundary_grid(r.bundle, pair, 60);
  const fs::path dir = fs::temp_directory_path() / "ganda_test_plot";
  fs::create_directories(dir);
  export_plot(g, pair, 2, dir / "fig.svg");
  const std::string svg = slurp(dir / "fig.svg");
  CHECK(well_formed_xml(svg));
  CHECK(svg == render_boundary_svg(g, pair, 2));

  std::ifstream csv(dir / "fig.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == 60 * 60 + 1);

  // exactly C distinct tile fills on a run whose classifier separates the classes
  std::set<int> classes(g.cells.begin(), g.cells.end());
  REQUIRE(classes.size() == 2);
  std::set<std::string> fills;
  const std::regex rect("<rect[^>]*class=\"cell\"[^>]*fill=\"([^\"]+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), rect); it != std::sregex_iterator(); ++it)
    fills.insert((*it)[1]);
  CHECK(fills.size() == 2);

  const BoundaryGrid back = read_grid_csv(dir / "fig.csv");
  CHECK(back.cells == g.cells);
  CHECK(render_boundary_svg(back, pair, 2) == svg);

  CHECK_THROWS(export_plot(g, pair, 2, dir / "missing" / "sub" / "fig.svg"));
}

TEST_CASE("embedding plot and principal axes") {
  const Matrix x(4, 2, {1, 0, -1, 0, 2, 0, -2, 0});
  const Matrix axes = principal_axes(x, 1);
  CHECK(std::abs(axes(0, 0)) == doctest::Approx(1.0));
  CHECK(axes(0, 1) == doctest::Approx(0.0).scale(1.0));

  const DomainPair blobs = make_blobs(3, 5, 10, 3.0, std::vector<double>(5, 1.0), 2);
  const std::string svg = render_embedding_svg(init_bundle(5, 15, 3, 16, 0), blobs);
  CHECK(well_formed_xml(svg));
}

TEST_CASE("mean embedding norm") {
  const DomainPair pair = make_rotated_moons(MoonsOptions{});
  const ModelBundle b = init_bundle(2, 15, 2, 16, 1);
  const Matrix fs_ = embed(b, pair.source.features), ft = embed(b, pair.target_features);
  double total = 0.0;
  for (const Matrix* m : {&fs_, &ft})
    for (std::size_t i = 0; i < m->rows; ++i) {
      double n2 = 0.0;
      for (double v : m->row(i)) n2 += v * v;
      total += std::sqrt(n2);
    }
  CHECK(mean_embedding_norm(b, pair) == doctest::Approx(total / 400.0).epsilon(1e-13));
}
