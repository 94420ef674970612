#include "demandmap/cnn/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace demandmap::cnn {

int Network::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

Tensor Network::forward(const Tensor& x, bool training, int up_to) {
  int stop = up_to < 0 ? layer_count() - 1 : up_to;
  if (stop >= layer_count()) throw ArgumentError("forward: layer index out of range");
  Tensor h = x;
  for (int i = 0; i <= stop; ++i) {
    h = layers_[static_cast<size_t>(i)]->forward(h, training);
  }
  last_forward_depth_ = stop + 1;
  return h;
}

Tensor Network::backward(const Tensor& dy) {
  Tensor g = dy;
  for (int i = last_forward_depth_ - 1; i >= 0; --i) {
    g = layers_[static_cast<size_t>(i)]->backward(g);
  }
  return g;
}

void Network::zero_grads() {
  for (auto& layer : layers_) {
    for (auto& p : layer->params()) p.grad->zero();
  }
}

std::vector<ParamRef> Network::params_of(int layer_index) {
  return layers_.at(static_cast<size_t>(layer_index))->params();
}

std::vector<std::pair<int, ParamRef>> Network::all_params() {
  std::vector<std::pair<int, ParamRef>> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    for (auto& p : layers_[i]->params()) out.emplace_back(static_cast<int>(i), p);
  }
  return out;
}

std::vector<std::pair<int, ParamRef>> Network::all_buffers() {
  std::vector<std::pair<int, ParamRef>> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    for (auto& p : layers_[i]->buffers()) out.emplace_back(static_cast<int>(i), p);
  }
  return out;
}

void Network::set_step_seed(uint64_t seed) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (auto* d = dynamic_cast<Dropout*>(layers_[i].get())) {
      d->set_step_seed(mix_seed(seed, "dropout", static_cast<uint64_t>(i)));
    }
  }
}

void Network::set_guided_relu(bool guided) {
  for (auto& layer : layers_) {
    if (auto* r = dynamic_cast<ReLU*>(layer.get())) r->set_guided(guided);
  }
}

long BackboneSpec::scaled(long base) const {
  if (width_scale <= 0.0 || width_scale > 1.0) {
    throw ArgumentError(strf("width_scale %.4f outside (0, 1]", width_scale));
  }
  return std::max<long>(1, std::llround(static_cast<double>(base) * width_scale));
}

Network build_backbone(const BackboneSpec& spec) {
  Rng rng(spec.init_seed);
  Network net;
  long prev = 3;
  auto conv_block = [&](long base_out) {
    long out = spec.scaled(base_out);
    auto conv = std::make_unique<Conv2d>(prev, out);
    conv->init(rng);
    net.add(std::move(conv));
    net.add(std::make_unique<BatchNorm2d>(out));
    net.add(std::make_unique<ReLU>());
    prev = out;
  };
  conv_block(64);
  net.add(std::make_unique<MaxPool2d>());          // 3
  conv_block(128);
  net.add(std::make_unique<MaxPool2d>());          // 7
  conv_block(256);
  conv_block(256);
  net.add(std::make_unique<MaxPool2d>());          // 14
  conv_block(512);
  conv_block(512);
  net.add(std::make_unique<MaxPool2d>());          // 21
  conv_block(512);
  conv_block(512);
  net.add(std::make_unique<MaxPool2d>());          // 28
  net.add(std::make_unique<AdaptiveAvgPool2d>(7, 7));  // 29

  long fc_in = prev * 7 * 7;
  long fc_dim = spec.feature_dim();
  auto fc1 = std::make_unique<Linear>(fc_in, fc_dim);
  fc1->init(rng);
  net.add(std::move(fc1));                         // 30
  net.add(std::make_unique<ReLU>());               // 31
  net.add(std::make_unique<Dropout>(0.5));         // 32
  auto fc2 = std::make_unique<Linear>(fc_dim, fc_dim);
  fc2->init(rng);
  net.add(std::move(fc2));                         // 33
  net.add(std::make_unique<ReLU>());               // 34
  net.add(std::make_unique<Dropout>(0.5));         // 35
  auto fc3 = std::make_unique<Linear>(fc_dim, spec.num_classes);
  fc3->init(rng);
  net.add(std::move(fc3));                         // 36

  if (!spec.weights_path.empty()) {
    load_weight_bundle(net, spec.weights_path);
  }
  return net;
}

namespace {

constexpr char kMagic[4] = {'D', 'M', 'W', 'B'};

struct Entry {
  int32_t layer_index;
  std::string name;
  std::vector<long> shape;
  std::vector<double> data;
};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_weight_bundle(const Network& net, const std::string& path) {
  auto& mutable_net = const_cast<Network&>(net);
  std::vector<Entry> entries;
  auto collect = [&](const std::vector<std::pair<int, ParamRef>>& refs) {
    for (const auto& [idx, p] : refs) {
      Entry e;
      e.layer_index = idx;
      e.name = p.name;
      e.shape = p.value->shape();
      e.data.assign(p.value->data(), p.value->data() + p.value->size());
      entries.push_back(std::move(e));
    }
  };
  collect(mutable_net.all_params());
  collect(mutable_net.all_buffers());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weight bundle: " + path);
  out.write(kMagic, 4);
  write_pod<uint32_t>(out, 1);  // version
  write_pod<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    write_pod<int32_t>(out, e.layer_index);
    write_pod<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(e.shape.size()));
    for (long d : e.shape) write_pod<int64_t>(out, d);
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write: " + path);
}

void load_weight_bundle(Network& net, const std::string& path, int final_layer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight bundle: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw SchemaError(path + ": not a weight bundle");
  }
  uint32_t version = read_pod<uint32_t>(in);
  if (version != 1) throw SchemaError(strf("%s: unsupported bundle version %u", path.c_str(), version));
  uint32_t count = read_pod<uint32_t>(in);

  std::map<std::pair<int, std::string>, ParamRef> targets;
  for (auto& [idx, p] : net.all_params()) targets[{idx, p.name}] = p;
  for (auto& [idx, p] : net.all_buffers()) targets[{idx, p.name}] = p;

  std::map<std::pair<int, std::string>, bool> loaded;
  for (uint32_t i = 0; i < count; ++i) {
    int32_t layer_index = read_pod<int32_t>(in);
    uint32_t name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t ndim = read_pod<uint32_t>(in);
    std::vector<long> shape(ndim);
    long total = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<long>(read_pod<int64_t>(in));
      total *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(total));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw SchemaError(path + ": truncated weight bundle");

    auto it = targets.find({layer_index, name});
    if (it == targets.end()) {
      if (layer_index >= net.layer_count()) {
        throw DataError(strf("%s: bundle entry for layer %d (%s) but network has %d layers",
                             path.c_str(), layer_index, name.c_str(), net.layer_count()));
      }
      continue;  // entry for a parameter this architecture does not have
    }
    ParamRef& target = it->second;
    if (target.value->shape() != shape) {
      if (layer_index == final_layer) {
        // Classifier head from a different task (e.g. 1000 classes): keep
        // the fresh initialization.
        continue;
      }
      throw DataError(strf("%s: layer %d (%s): bundle shape %s, spec expects %s", path.c_str(),
                           layer_index, name.c_str(), shape_str(shape).c_str(),
                           shape_str(target.value->shape()).c_str()));
    }
    std::copy(data.begin(), data.end(), target.value->data());
    loaded[{layer_index, name}] = true;
  }

  // Every learnable parameter below the final layer must have been covered.
  for (auto& [idx, p] : net.all_params()) {
    if (idx == final_layer) continue;
    if (!loaded.count({idx, p.name})) {
      throw DataError(strf("%s: bundle is missing layer %d parameter \"%s\"", path.c_str(), idx,
                           p.name.c_str()));
    }
  }
}

uint64_t param_checksum(Network& net, int layer_index) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (auto& p : net.params_of(layer_index)) {
    h = fnv1a64(p.name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p.value->data()),
                                 static_cast<size_t>(p.value->size()) * sizeof(double)),
                h);
  }
  return h;
}

}  // namespace demandmap::cnn
