#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ganda/datasets.hpp"
#include "ganda/models.hpp"

namespace ganda {

// Fraction of positions where prediction equals truth.
double accuracy(std::span<const int> predictions, std::span<const int> truth);

// The only reader of held-out target labels.
class TargetEvaluator {
 public:
  explicit TargetEvaluator(const DomainPair& pair) : pair_(&pair) {}
  double target_accuracy(const ModelBundle& bundle) const;
  double source_accuracy(const ModelBundle& bundle) const;

 private:
  const DomainPair* pair_;
};

// Mean L2 norm of generator outputs over every source and target row.
double mean_embedding_norm(const ModelBundle& bundle, const DomainPair& pair);

struct BoundaryGrid {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  int resolution = 0;
  std::vector<double> x_centers;  // resolution entries
  std::vector<double> y_centers;  // resolution entries
  std::vector<int> cells;         // resolution^2, row-major with iy outer

  int at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy * resolution + ix)]; }
};

// Bounding box of source + target points widened by 10% of its extent per side.
BoundaryGrid boundary_grid(const ModelBundle& bundle, const DomainPair& pair, int resolution);

// Writes `svg_path` and a sibling CSV (same stem, .csv) of the raw grid.
void export_plot(const BoundaryGrid& grid, const DomainPair& pair, int class_count,
                 const std::filesystem::path& svg_path);
std::string render_boundary_svg(const BoundaryGrid& grid, const DomainPair& pair, int class_count);
void write_grid_csv(const BoundaryGrid& grid, const std::filesystem::path& path);
BoundaryGrid read_grid_csv(const std::filesystem::path& path);

// Scatter of generator embeddings projected onto their first two principal axes.
std::string render_embedding_svg(const ModelBundle& bundle, const DomainPair& pair);

// Columns are centred; returns the top-k unit eigenvectors (k x cols) of the covariance.
Matrix principal_axes(const Matrix& x, int k);

}  // namespace ganda
