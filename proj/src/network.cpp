#include "tsastat/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tsastat/errors.hpp"
#include "tsastat/random.hpp"

namespace tsastat {

namespace {

using nlohmann::json;

constexpr const char* kCheckpointFormat = "tsastat-net-v1";

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1D: return "conv";
    case LayerKind::MaxPool: return "pool";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::OutputDense: return "output";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  for (LayerKind k : {LayerKind::Conv1D, LayerKind::MaxPool, LayerKind::Dense,
                      LayerKind::Relu, LayerKind::Flatten, LayerKind::OutputDense})
    if (kind_name(k) == name) return k;
  throw ConfigError("unknown layer kind '" + name + "'");
}

struct ParamShape {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index fan_in;
};

/// Walk the layer list, validating shapes and collecting parameter shapes
/// in checkpoint order (weight then bias per parametric layer).
std::vector<ParamShape> derive_params(const ArchSpec& arch, Eigen::Index channels,
                                      Eigen::Index steps, int label_count) {
  require(!arch.layers.empty(), "architecture '" + arch.name + "' has no layers");
  require(arch.layers.back().kind == LayerKind::OutputDense,
          "architecture '" + arch.name + "' must end with an output layer");
  require(channels > 0 && steps > 0, "input shape must be positive");
  require(label_count >= 2, "need at least two classes");

  std::vector<ParamShape> out;
  Eigen::Index rows = channels;
  Eigen::Index cols = steps;
  bool flat = false;
  int conv_index = 0;
  int dense_index = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& layer = arch.layers[i];
    const bool last = i + 1 == arch.layers.size();
    require(last == (layer.kind == LayerKind::OutputDense),
            "architecture '" + arch.name + "': output layer must be last and unique");
    switch (layer.kind) {
      case LayerKind::Conv1D: {
        require(!flat, "conv layer after flatten");
        require(layer.a >= 1 && layer.b >= 1, "conv layer needs filters and kernel");
        require(cols >= layer.b, "conv kernel longer than remaining steps");
        const Eigen::Index fan_in = rows * layer.b;
        std::string base = "conv" + std::to_string(conv_index++);
        out.push_back({base + ".w", layer.a, fan_in, fan_in});
        out.push_back({base + ".b", layer.a, 1, fan_in});
        cols = cols - layer.b + 1;
        rows = layer.a;
        break;
      }
      case LayerKind::MaxPool:
        require(!flat, "pool layer after flatten");
        require(layer.a >= 1, "pool layer needs a width");
        require(cols / layer.a >= 1, "pool width longer than remaining steps");
        cols /= layer.a;
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::Flatten:
        require(!flat, "double flatten");
        rows *= cols;
        cols = 1;
        flat = true;
        break;
      case LayerKind::Dense: {
        require(flat, "dense layer before flatten");
        require(layer.a >= 1, "dense layer needs units");
        std::string base = "dense" + std::to_string(dense_index++);
        out.push_back({base + ".w", layer.a, rows, rows});
        out.push_back({base + ".b", layer.a, 1, rows});
        rows = layer.a;
        break;
      }
      case LayerKind::OutputDense: {
        require(flat, "output layer before flatten");
        out.push_back({"out.w", label_count, rows, rows});
        out.push_back({"out.b", label_count, 1, rows});
        rows = label_count;
        break;
      }
    }
  }
  return out;
}

}  // namespace

ArchSpec arch_by_name(const std::string& name) {
  auto conv = [](int f, int k) { return LayerSpec{LayerKind::Conv1D, f, k}; };
  auto pool = [](int w) { return LayerSpec{LayerKind::MaxPool, w, 0}; };
  auto dense = [](int u) { return LayerSpec{LayerKind::Dense, u, 0}; };
  const LayerSpec relu{LayerKind::Relu, 0, 0};
  const LayerSpec flatten{LayerKind::Flatten, 0, 0};
  const LayerSpec output{LayerKind::OutputDense, 0, 0};
  if (name == "a0")
    return {name, {conv(66, 12), relu, pool(12), flatten, dense(1024), relu, output}};
  if (name == "a1")
    return {name, {conv(20, 12), relu, pool(2), flatten, dense(512), relu, output}};
  if (name == "a2")
    return {name, {conv(100, 5), relu, conv(50, 5), relu, pool(4), flatten, dense(200), relu,
                   dense(100), relu, output}};
  throw ConfigError("unknown architecture '" + name + "' (expected a0, a1 or a2)");
}

Network Network::make(const std::string& arch_name, Eigen::Index channels, Eigen::Index steps,
                      int label_count, std::uint64_t seed) {
  return make_custom(arch_by_name(arch_name), channels, steps, label_count, seed);
}

Network Network::make_custom(ArchSpec arch, Eigen::Index channels, Eigen::Index steps,
                             int label_count, std::uint64_t seed) {
  Network net;
  net.arch_ = std::move(arch);
  net.channels_ = channels;
  net.steps_ = steps;
  net.label_count_ = label_count;
  net.init_seed_ = seed;
  const auto shapes = derive_params(net.arch_, channels, steps, label_count);
  for (size_t p = 0; p < shapes.size(); ++p) {
    const ParamShape& s = shapes[p];
    Tensor t = Tensor::Zero(s.rows, s.cols);
    const bool is_bias = s.cols == 1 && s.name.size() > 2 &&
                         s.name.compare(s.name.size() - 2, 2, ".b") == 0;
    if (!is_bias) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in));
      auto rng = make_rng(derive_seed(seed, p));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    }
    net.params_.emplace_back(s.name, std::move(t));
  }
  return net;
}

Tensor& Network::parameter(const std::string& name) {
  for (auto& [n, t] : params_)
    if (n == name) return t;
  throw ConfigError("network has no parameter '" + name + "'");
}

Vector Network::logits(const Tensor& x) const {
  require(x.rows() == channels_ && x.cols() == steps_,
          "input shape " + shape_string(x) + " does not match network (" +
              std::to_string(channels_) + " x " + std::to_string(steps_) + ")");
  auto param = [&](size_t i) -> const Tensor& { return params_[i].second; };
  size_t p = 0;
  Tensor cur = x;
  for (const LayerSpec& layer : arch_.layers) {
    switch (layer.kind) {
      case LayerKind::Conv1D: {
        const Tensor& w = param(p++);
        const Tensor& b = param(p++);
        const Eigen::Index in_ch = cur.rows();
        const int kernel = layer.b;
        const Eigen::Index out_steps = cur.cols() - kernel + 1;
        Tensor cols(in_ch * kernel, out_steps);
        for (Eigen::Index c = 0; c < in_ch; ++c)
          for (int k = 0; k < kernel; ++k)
            cols.row(c * kernel + k) = cur.row(c).segment(k, out_steps);
        cur = (w.matrix() * cols.matrix()).array() + b.replicate(1, out_steps);
        break;
      }
      case LayerKind::MaxPool: {
        const int width = layer.a;
        const Eigen::Index pooled = cur.cols() / width;
        Tensor next(cur.rows(), pooled);
        for (Eigen::Index c = 0; c < cur.rows(); ++c)
          for (Eigen::Index q = 0; q < pooled; ++q)
            next(c, q) = cur.row(c).segment(q * width, width).maxCoeff();
        cur = std::move(next);
        break;
      }
      case LayerKind::Relu:
        cur = cur.max(0.0);
        break;
      case LayerKind::Flatten: {
        Tensor next(cur.size(), 1);
        Eigen::Map<Eigen::ArrayXd>(next.data(), next.size()) =
            Eigen::Map<const Eigen::ArrayXd>(cur.data(), cur.size());
        cur = std::move(next);
        break;
      }
      case LayerKind::Dense:
      case LayerKind::OutputDense: {
        const Tensor& w = param(p++);
        const Tensor& b = param(p++);
        Tensor h = (w.matrix() * cur.matrix()).array();
        cur = h + b;
        break;
      }
    }
  }
  if (!cur.allFinite()) throw NumericalError("non-finite logits");
  return Eigen::Map<const Vector>(cur.data(), cur.rows());
}

int Network::predict(const Tensor& x) const { return argmax(logits(x)); }

Graph::NodeId Network::logits_node(Graph& g, Graph::NodeId x, bool trainable) const {
  require(g.value(x).rows() == channels_ && g.value(x).cols() == steps_,
          "graph input shape does not match network");
  auto param = [&](size_t i) {
    const auto& [name, value] = params_[i];
    if (!trainable) return g.constant(value, name);
    Graph::NodeId id = g.leaf(name, value.rows(), value.cols());
    g.bind(name, value);
    return id;
  };
  size_t p = 0;
  Graph::NodeId cur = x;
  for (const LayerSpec& layer : arch_.layers) {
    switch (layer.kind) {
      case LayerKind::Conv1D: {
        Graph::NodeId w = param(p++);
        Graph::NodeId b = param(p++);
        cur = g.conv1d(cur, w, b, layer.b);
        break;
      }
      case LayerKind::MaxPool:
        cur = g.maxpool1d(cur, layer.a);
        break;
      case LayerKind::Relu:
        cur = g.relu(cur);
        break;
      case LayerKind::Flatten:
        cur = g.flatten(cur);
        break;
      case LayerKind::Dense:
      case LayerKind::OutputDense: {
        Graph::NodeId w = param(p++);
        Graph::NodeId b = param(p++);
        cur = g.add(g.matmul(w, cur), b);
        break;
      }
    }
  }
  return cur;
}

void Network::absorb_parameters(const Graph& g) {
  for (auto& [name, value] : params_) value = g.leaf_value(name);
}

void Network::save(const std::string& path) const {
  json layers = json::array();
  for (const LayerSpec& l : arch_.layers)
    layers.push_back({{"kind", kind_name(l.kind)}, {"a", l.a}, {"b", l.b}});
  json params = json::array();
  for (const auto& [name, t] : params_)
    params.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  json header;
  header["format"] = kCheckpointFormat;
  header["arch"] = arch_.name;
  header["layers"] = std::move(layers);
  header["channels"] = channels_;
  header["steps"] = steps_;
  header["label_count"] = label_count_;
  header["seed"] = init_seed_;
  header["params"] = std::move(params);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write '" + path + "'");
  out << header.dump() << "\n";
  for (const auto& [name, t] : params_)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
  require(out.good(), "write to '" + path + "' failed");
}

Network Network::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  std::string header_line;
  require(static_cast<bool>(std::getline(in, header_line)), "checkpoint '" + path + "' is empty");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse checkpoint header in '" + path + "': " + e.what());
  }
  require(header.value("format", "") == kCheckpointFormat,
          "checkpoint '" + path + "' has wrong or missing format tag");

  ArchSpec arch;
  arch.name = header.at("arch").get<std::string>();
  for (const auto& l : header.at("layers"))
    arch.layers.push_back(
        {kind_from_name(l.at("kind").get<std::string>()), l.at("a").get<int>(), l.at("b").get<int>()});

  Network net;
  net.arch_ = std::move(arch);
  net.channels_ = header.at("channels").get<Eigen::Index>();
  net.steps_ = header.at("steps").get<Eigen::Index>();
  net.label_count_ = header.at("label_count").get<int>();
  net.init_seed_ = header.at("seed").get<std::uint64_t>();

  const auto shapes = derive_params(net.arch_, net.channels_, net.steps_, net.label_count_);
  const auto& listed = header.at("params");
  require(listed.size() == shapes.size(), "checkpoint '" + path + "' parameter list mismatch");
  for (size_t p = 0; p < shapes.size(); ++p) {
    const ParamShape& s = shapes[p];
    require(listed[p].at("name").get<std::string>() == s.name &&
                listed[p].at("rows").get<Eigen::Index>() == s.rows &&
                listed[p].at("cols").get<Eigen::Index>() == s.cols,
            "checkpoint '" + path + "' disagrees with its own architecture");
    Tensor t(s.rows, s.cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    require(in.gcount() == static_cast<std::streamsize>(sizeof(double) * t.size()),
            "checkpoint '" + path + "' is truncated");
    net.params_.emplace_back(s.name, std::move(t));
  }
  in.peek();
  require(in.eof(), "checkpoint '" + path + "' has trailing bytes");
  return net;
}

int argmax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;  // tie keeps the lowest class id
  return best;
}

std::vector<EpochStats> train(Network& net, const std::vector<Tensor>& x,
                              const std::vector<int>& y, const std::vector<Tensor>& val_x,
                              const std::vector<int>& val_y, const TrainConfig& cfg) {
  require(!x.empty() && x.size() == y.size(), "training set empty or label count mismatch");
  require(val_x.size() == val_y.size(), "validation label count mismatch");
  require(cfg.batch >= 1 && cfg.epochs >= 0, "bad batch size or epoch count");
  for (int label : y)
    require(label >= 0 && label < net.label_count(), "training label out of range");
  std::vector<EpochStats> history;
  if (cfg.epochs == 0) return history;

  Graph g;
  Graph::NodeId input = g.leaf("x", net.channels(), net.steps(), /*differentiable=*/false);
  Graph::NodeId logits_id = net.logits_node(g, input, /*trainable=*/true);
  Graph::NodeId loss_id = g.softmax_cross_entropy(logits_id, 0);

  std::vector<Tensor> velocity;
  for (const auto& [name, t] : net.parameters())
    velocity.push_back(Tensor::Zero(t.rows(), t.cols()));

  const size_t count = x.size();
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto rng = make_rng(derive_seed(cfg.seed, 0xE0000u + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t start = 0; start < count; start += static_cast<size_t>(cfg.batch)) {
      const size_t batch = std::min(static_cast<size_t>(cfg.batch), count - start);
      for (size_t j = 0; j < batch; ++j) {
        const size_t idx = order[start + j];
        g.bind("x", x[idx]);
        g.set_label(loss_id, y[idx]);
        g.forward();
        const double loss = g.value(loss_id)(0, 0);
        if (!std::isfinite(loss))
          throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) +
                               ", example " + std::to_string(idx));
        loss_sum += loss;
        const Tensor& z = g.value(logits_id);
        correct += argmax(Eigen::Map<const Vector>(z.data(), z.rows())) == y[idx] ? 1 : 0;
        g.backward(loss_id, /*accumulate=*/j > 0);
      }
      const double inv_batch = 1.0 / static_cast<double>(batch);
      size_t p = 0;
      for (const auto& [name, t] : net.parameters()) {
        velocity[p] = cfg.momentum * velocity[p] -
                      cfg.learning_rate * inv_batch * g.leaf_gradient(name);
        g.leaf_value(name) += velocity[p];
        ++p;
      }
    }
    net.absorb_parameters(g);
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(count);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(count);
    stats.val_accuracy = val_x.empty() ? 0.0 : accuracy(net, val_x, val_y);
    history.push_back(stats);
    if (cfg.verbose)
      std::fprintf(stderr, "epoch %3d  loss %.4f  train %.3f  val %.3f\n", stats.epoch,
                   stats.train_loss, stats.train_accuracy, stats.val_accuracy);
  }
  return history;
}

double accuracy(const Network& net, const std::vector<Tensor>& x, const std::vector<int>& y) {
  require(!x.empty() && x.size() == y.size(), "accuracy: empty set or label mismatch");
  size_t correct = 0;
  for (size_t i = 0; i < x.size(); ++i)
    if (net.predict(x[i]) == y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(x.size());
}

}  // namespace tsastat
