#include "ganda/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "ganda/errors.hpp"

namespace ganda {

std::span<const int> reveal_for_evaluation(const HeldOutLabels& held) { return held.labels_; }

void LabeledSet::validate() const {
  if (labels.empty()) throw ConfigError("labeled set is empty");
  if (features.rows != labels.size())
    throw ConfigError("labeled set has " + std::to_string(features.rows) + " feature rows but " +
                      std::to_string(labels.size()) + " labels");
  if (class_count < 1) throw ConfigError("class_count must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      throw ConfigError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i + 1) +
                        " outside [0, " + std::to_string(class_count) + ")");
  }
  for (double v : features.data)
    if (!std::isfinite(v)) throw ConfigError("labeled set contains a non-finite feature");
}

void DomainPair::validate() const {
  source.validate();
  if (source.class_count != class_count)
    throw ConfigError("source class count differs from the pair's class count");
  if (target_features.rows == 0) throw ConfigError("target domain is empty");
  if (target_features.cols != source.dim())
    throw ConfigError("feature dimension mismatch: source " + std::to_string(source.dim()) +
                      ", target " + std::to_string(target_features.cols));
  if (target_labels.size() != target_features.rows)
    throw ConfigError("held-out target labels do not match the target row count");
  for (double v : target_features.data)
    if (!std::isfinite(v)) throw ConfigError("target features contain a non-finite value");
}

LabeledSet make_moons(int n_per_class, double noise_sigma, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("make_moons: n_per_class must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("make_moons: noise_sigma must be >= 0");
  const auto n = static_cast<std::size_t>(n_per_class);
  LabeledSet set{Matrix(2 * n, 2), std::vector<int>(2 * n), 2};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    set.features(i, 0) = std::cos(t);
    set.features(i, 1) = std::sin(t);
    set.labels[i] = 0;
    set.features(n + i, 0) = 1.0 - std::cos(t);
    set.features(n + i, 1) = 0.5 - std::sin(t);
    set.labels[n + i] = 1;
  }
  if (noise_sigma > 0.0)
    for (double& v : set.features.data) v += noise_sigma * noise(rng);
  return set;
}

LabeledSet rotate(const LabeledSet& set, double theta_degrees) {
  if (set.dim() != 2)
    throw ConfigError("rotate: feature dimension must be 2, got " + std::to_string(set.dim()));
  const double theta = theta_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  LabeledSet out = set;
  for (std::size_t i = 0; i < set.features.rows; ++i) {
    const double x = set.features(i, 0), y = set.features(i, 1);
    out.features(i, 0) = c * x - s * y;
    out.features(i, 1) = s * x + c * y;
  }
  return out;
}

DomainPair make_rotated_moons(const MoonsOptions& opts) {
  DomainPair pair;
  pair.source = make_moons(opts.n_per_class, opts.noise_sigma, opts.seed);
  LabeledSet target = rotate(make_moons(opts.n_per_class, opts.noise_sigma, opts.seed + 1),
                             opts.rotation_degrees);
  pair.target_features = std::move(target.features);
  pair.target_labels = HeldOutLabels(std::move(target.labels));
  pair.class_count = 2;
  return pair;
}

DomainPair make_blobs(int class_count, int dim, int n_per_class, double center_spread,
                      std::span<const double> shift, std::uint64_t seed) {
  if (class_count < 2) throw ConfigError("make_blobs: need at least 2 classes");
  if (dim < 2) throw ConfigError("make_blobs: need dimension >= 2");
  if (n_per_class < 1) throw ConfigError("make_blobs: n_per_class must be >= 1");
  if (shift.size() != static_cast<std::size_t>(dim))
    throw ConfigError("make_blobs: shift vector has " + std::to_string(shift.size()) +
                      " entries, expected " + std::to_string(dim));
  const auto C = static_cast<std::size_t>(class_count);
  const auto d = static_cast<std::size_t>(dim);
  const auto n = static_cast<std::size_t>(n_per_class);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix centers(C, d);
  for (double& v : centers.data) v = center_spread * gauss(rng);

  auto sample = [&](bool shifted) {
    LabeledSet set{Matrix(C * n, d), std::vector<int>(C * n), class_count};
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = c * n + i;
        set.labels[r] = static_cast<int>(c);
        for (std::size_t k = 0; k < d; ++k)
          set.features(r, k) = centers(c, k) + (shifted ? shift[k] : 0.0) + gauss(rng);
      }
    return set;
  };

  DomainPair pair;
  pair.source = sample(false);
  LabeledSet target = sample(true);
  pair.target_features = std::move(target.features);
  pair.target_labels = HeldOutLabels(std::move(target.labels));
  pair.class_count = class_count;
  return pair;
}

// ---- CSV -------------------------------------------------------------------

namespace {

struct RawTable {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

RawTable parse_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    const auto where = [&] { return path.string() + " row " + std::to_string(line_no); };
    if (cells.size() < 2) throw ConfigError(where() + ": need at least one feature and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ConfigError(where() + ": expected " + std::to_string(width) + " cells, found " +
                        std::to_string(cells.size()));
    std::vector<double> feats(width - 1);
    for (std::size_t c = 0; c + 1 < width; ++c) {
      const std::string& cell = cells[c];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), feats[c]);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() ||
          !std::isfinite(feats[c]))
        throw ConfigError(where() + ": non-numeric feature '" + cell + "' in column " +
                          std::to_string(c + 1));
    }
    int label = 0;
    const std::string& lc = cells.back();
    auto [ptr, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), label);
    if (ec != std::errc() || ptr != lc.data() + lc.size() || lc.empty())
      throw ConfigError(where() + ": label '" + lc + "' is not an integer");
    if (label < 0) throw ConfigError(where() + ": negative label " + std::to_string(label));
    table.rows.push_back(std::move(feats));
    table.labels.push_back(label);
  }
  if (table.rows.empty()) throw ConfigError(path.string() + ": file contains no rows");
  return table;
}

Matrix to_matrix(const RawTable& t) {
  Matrix m(t.rows.size(), t.rows.front().size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) std::copy(t.rows[r].begin(), t.rows[r].end(), m.row(r).begin());
  return m;
}

void check_labels(const RawTable& t, int class_count, const std::filesystem::path& path) {
  for (std::size_t r = 0; r < t.labels.size(); ++r)
    if (t.labels[r] >= class_count)
      throw ConfigError(path.string() + " row " + std::to_string(r + 1) + ": label " +
                        std::to_string(t.labels[r]) + " >= class count " +
                        std::to_string(class_count));
}

}  // namespace

LabeledSet read_labeled_csv(const std::filesystem::path& path) {
  RawTable t = parse_table(path);
  const int c = *std::max_element(t.labels.begin(), t.labels.end()) + 1;
  return LabeledSet{to_matrix(t), std::move(t.labels), c};
}

DomainPair load_feature_csv(const std::filesystem::path& source_path,
                            const std::filesystem::path& target_path,
                            std::optional<int> class_count) {
  RawTable src = parse_table(source_path);
  RawTable tgt = parse_table(target_path);
  if (src.rows.front().size() != tgt.rows.front().size())
    throw ConfigError("feature dimension mismatch: " + source_path.string() + " has " +
                      std::to_string(src.rows.front().size()) + ", " + target_path.string() +
                      " has " + std::to_string(tgt.rows.front().size()));
  const int C = class_count.value_or(*std::max_element(src.labels.begin(), src.labels.end()) + 1);
  check_labels(src, C, source_path);
  check_labels(tgt, C, target_path);

  DomainPair pair;
  pair.source = LabeledSet{to_matrix(src), std::move(src.labels), C};
  pair.target_features = to_matrix(tgt);
  pair.target_labels = HeldOutLabels(std::move(tgt.labels));
  pair.class_count = C;
  pair.validate();
  return pair;
}

void write_labeled_csv(const std::filesystem::path& path, const Matrix& features,
                       std::span<const int> labels) {
  if (features.rows != labels.size()) throw ConfigError("write_labeled_csv: row/label count mismatch");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  char buf[64];
  for (std::size_t r = 0; r < features.rows; ++r) {
    for (std::size_t c = 0; c < features.cols; ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, features(r, c));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << labels[r] << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path.string());
}

// ---- batches ---------------------------------------------------------------

namespace {

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, int epoch, std::uint32_t domain) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), domain};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::span<const std::size_t> chunk(std::span<const std::size_t> perm, std::size_t index,
                                   std::size_t batch_size) {
  const std::size_t begin = index * batch_size;
  return perm.subspan(begin, std::min(batch_size, perm.size() - begin));
}

}  // namespace

BatchStream::BatchStream(const DomainPair& pair, std::size_t batch_size, std::uint64_t seed, int epoch)
    : pair_(&pair), batch_size_(batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  source_perm_ = permutation(pair.source.size(), seed, epoch, 0);
  target_perm_ = permutation(pair.target_features.rows, seed, epoch, 1);
  source_batches_ = ceil_div(source_perm_.size(), batch_size);
  target_batches_ = ceil_div(target_perm_.size(), batch_size);
  steps_ = std::max(source_batches_, target_batches_);
}

Batch BatchStream::operator[](std::size_t step) const {
  const auto s_idx = chunk(source_perm_, step % source_batches_, batch_size_);
  const auto t_idx = chunk(target_perm_, step % target_batches_, batch_size_);
  Batch b;
  b.source_indices.assign(s_idx.begin(), s_idx.end());
  b.target_indices.assign(t_idx.begin(), t_idx.end());
  b.source.features = take_rows(pair_->source.features, s_idx);
  b.source.class_count = pair_->class_count;
  for (std::size_t i : s_idx) b.source.labels.push_back(pair_->source.labels[i]);
  b.target = take_rows(pair_->target_features, t_idx);
  return b;
}

BatchStream batch_iter(const DomainPair& pair, std::size_t batch_size, std::uint64_t seed, int epoch) {
  return BatchStream(pair, batch_size, seed, epoch);
}

}  // namespace ganda
