#include "ganda/models.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "ganda/errors.hpp"

namespace ganda {

using nlohmann::json;

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ConfigError("mlp: need at least input and output widths");
  for (int w : layer_widths)
    if (w < 1) throw ConfigError("mlp: layer widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("mlp: dropout must be in [0, 1)");
}

Mlp::Mlp(MlpSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  spec_.validate();
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < spec_.layer_widths.size(); ++l) {
    const auto in = static_cast<std::size_t>(spec_.layer_widths[l]);
    const auto out = static_cast<std::size_t>(spec_.layer_widths[l + 1]);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = std_dev * gauss(rng);
    weights_.emplace_back(Shape{in, out}, std::move(w), true);
    biases_.push_back(DiffArray::zeros({out}, true));
  }
}

DiffArray Mlp::forward(const DiffArray& x, std::mt19937_64* rng) const {
  DiffArray h = x;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_row_bias(matmul(h, weights_[l]), biases_[l]);
    if (l < last) {
      h = relu(h);
      if (rng != nullptr && spec_.dropout > 0.0) {
        std::bernoulli_distribution keep(1.0 - spec_.dropout);
        std::vector<double> mask(h.size());
        for (double& m : mask) m = keep(*rng) ? 1.0 / (1.0 - spec_.dropout) : 0.0;
        h = mul(h, DiffArray(h.shape(), std::move(mask)));
      }
    } else if (spec_.output_activation == OutputActivation::Relu) {
      h = relu(h);
    }
  }
  return h;
}

std::vector<DiffArray> Mlp::parameters() const {
  std::vector<DiffArray> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

namespace {

void append_named(std::vector<NamedParameter>& out, const std::string& prefix, const Mlp& net) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    out.push_back({prefix + "." + std::to_string(l) + ".weight", net.weight(l)});
    out.push_back({prefix + "." + std::to_string(l) + ".bias", net.bias(l)});
  }
}

}  // namespace

std::vector<NamedParameter> ModelBundle::named_parameters() const {
  std::vector<NamedParameter> out;
  append_named(out, "generator", generator);
  append_named(out, "classifier", classifier);
  append_named(out, "discriminator", discriminator);
  return out;
}

std::vector<DiffArray> ModelBundle::generator_classifier_parameters() const {
  auto out = generator.parameters();
  auto cls = classifier.parameters();
  out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

std::vector<DiffArray> ModelBundle::discriminator_parameters() const {
  return discriminator.parameters();
}

ModelBundle init_bundle(const BundleOptions& o) {
  if (o.embed_dim < o.class_count + 1)
    throw ConfigError("init_bundle: embed_dim " + std::to_string(o.embed_dim) +
                      " < class_count + 1 = " + std::to_string(o.class_count + 1));
  if (o.input_dim < 1 || o.hidden < 1 || o.class_count < 2)
    throw ConfigError("init_bundle: input_dim, hidden must be >= 1 and class_count >= 2");
  std::mt19937_64 rng(o.seed);
  ModelBundle b;
  b.input_dim = o.input_dim;
  b.embed_dim = o.embed_dim;
  b.class_count = o.class_count;
  const int h = o.hidden;
  b.generator = Mlp({{o.input_dim, h, h, h, o.embed_dim}, OutputActivation::Relu, 0.0}, rng);
  b.classifier = Mlp({{o.embed_dim, h, h, o.class_count}, OutputActivation::Identity, 0.0}, rng);
  b.discriminator =
      Mlp({{o.embed_dim * o.class_count, h, h, 1}, OutputActivation::Identity, o.dropout}, rng);
  return b;
}

ModelBundle init_bundle(int input_dim, int embed_dim, int class_count, int hidden, std::uint64_t seed) {
  return init_bundle(BundleOptions{input_dim, embed_dim, class_count, hidden, 0.0, seed});
}

ForwardResult forward_all(const ModelBundle& bundle, const DiffArray& x, double grl_coeff,
                          bool with_discriminator, std::mt19937_64* dropout_rng) {
  if (x.cols() != static_cast<std::size_t>(bundle.input_dim))
    throw ShapeError("forward_all: input has " + std::to_string(x.cols()) +
                     " columns, model expects " + std::to_string(bundle.input_dim));
  ForwardResult r;
  r.features = bundle.generator.forward(x);
  r.logits = bundle.classifier.forward(r.features);
  r.probabilities = softmax(r.logits);
  if (with_discriminator) {
    DiffArray joint = grad_reverse(rowwise_outer(r.features, r.probabilities), grl_coeff);
    r.domain_logits = bundle.discriminator.forward(joint, dropout_rng);
  }
  return r;
}

std::vector<int> predict(const ModelBundle& bundle, const Matrix& x) {
  const DiffArray logits =
      bundle.classifier.forward(bundle.generator.forward(DiffArray::from_matrix(x))).detach();
  const std::size_t C = logits.cols();
  std::vector<int> out(logits.rows());
  const auto v = logits.values();
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (v[r * C + c] > v[r * C + best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

Matrix embed(const ModelBundle& bundle, const Matrix& x) {
  return bundle.generator.forward(DiffArray::from_matrix(x)).to_matrix();
}

// ---- persistence -----------------------------------------------------------

namespace {

json spec_json(const MlpSpec& s) {
  return {{"widths", s.layer_widths},
          {"output", s.output_activation == OutputActivation::Relu ? "relu" : "identity"},
          {"dropout", s.dropout}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec s;
  s.layer_widths = j.at("widths").get<std::vector<int>>();
  const std::string out = j.at("output").get<std::string>();
  if (out != "relu" && out != "identity") throw ConfigError("bundle: unknown output activation " + out);
  s.output_activation = out == "relu" ? OutputActivation::Relu : OutputActivation::Identity;
  s.dropout = j.value("dropout", 0.0);
  s.validate();
  return s;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  json j;
  j["format"] = "ganda-bundle-v1";
  j["input_dim"] = bundle.input_dim;
  j["embed_dim"] = bundle.embed_dim;
  j["class_count"] = bundle.class_count;
  j["networks"] = {{"generator", spec_json(bundle.generator.spec())},
                   {"classifier", spec_json(bundle.classifier.spec())},
                   {"discriminator", spec_json(bundle.discriminator.spec())}};
  json params = json::array();
  for (const auto& p : bundle.named_parameters()) {
    const auto v = p.value.values();
    params.push_back({{"name", p.name},
                      {"shape", p.value.shape()},
                      {"values", std::vector<double>(v.begin(), v.end())}});
  }
  j["parameters"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump() << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "ganda-bundle-v1")
    throw ConfigError(path.string() + ": not a ganda model bundle");

  ModelBundle b;
  b.input_dim = j.at("input_dim").get<int>();
  b.embed_dim = j.at("embed_dim").get<int>();
  b.class_count = j.at("class_count").get<int>();
  std::mt19937_64 rng(0);
  const auto& nets = j.at("networks");
  b.generator = Mlp(spec_from_json(nets.at("generator")), rng);
  b.classifier = Mlp(spec_from_json(nets.at("classifier")), rng);
  b.discriminator = Mlp(spec_from_json(nets.at("discriminator")), rng);

  auto slots = b.named_parameters();
  const auto& params = j.at("parameters");
  if (params.size() != slots.size())
    throw ConfigError(path.string() + ": expected " + std::to_string(slots.size()) +
                      " parameter records, found " + std::to_string(params.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& rec = params[i];
    if (rec.at("name").get<std::string>() != slots[i].name)
      throw ConfigError(path.string() + ": parameter " + std::to_string(i) + " is '" +
                        rec.at("name").get<std::string>() + "', expected '" + slots[i].name + "'");
    if (rec.at("shape").get<Shape>() != slots[i].value.shape())
      throw ConfigError(path.string() + ": shape mismatch for " + slots[i].name);
    const auto values = rec.at("values").get<std::vector<double>>();
    auto dst = slots[i].value.mutable_values();
    if (values.size() != dst.size()) throw ConfigError(path.string() + ": value count mismatch for " + slots[i].name);
    std::copy(values.begin(), values.end(), dst.begin());
  }
  return b;
}

}  // namespace ganda
