#include "ghnforge/target_net/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ghnforge/core/hash.hpp"

namespace ghnforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

void DatasetConfig::validate() const {
  if (classes < 2) throw ConfigError("dataset.classes must be >= 2");
  if (n_train < 1 || n_val < 1) throw ConfigError("dataset split sizes must be >= 1");
  if (hw < 8) throw ConfigError("dataset.hw must be >= 8");
  if (noise < 0) throw ConfigError("dataset.noise must be >= 0");
}

namespace {

struct ClassStyle {
  double theta, freq, blob_x, blob_y, blob_amp;
  double mix[3];
};

std::vector<ClassStyle> class_styles(const DatasetConfig& cfg) {
  std::vector<ClassStyle> out;
  for (int c = 0; c < cfg.classes; ++c) {
    Rng rng(derive_seed(cfg.style_seed, {0xc1a5, static_cast<uint64_t>(c)}));
    ClassStyle s;
    s.theta = rng.uniform(0.0, std::numbers::pi);
    s.freq = 1.0 + rng.uniform_int(0, 3);
    s.blob_x = rng.uniform(0.2, 0.8);
    s.blob_y = rng.uniform(0.2, 0.8);
    s.blob_amp = rng.uniform(0.8, 1.4);
    double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.mix[0] = std::cos(a);
    s.mix[1] = std::sin(a);
    s.mix[2] = std::cos(2.0 * a);
    out.push_back(s);
  }
  return out;
}

void render_sample(const ClassStyle& s, const DatasetConfig& cfg, Rng& rng, float* dst) {
  const int hw = cfg.hw;
  double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double amp = rng.uniform(0.8, 1.2);
  double cx = s.blob_x * hw + rng.uniform(-2.0, 2.0);
  double cy = s.blob_y * hw + rng.uniform(-2.0, 2.0);
  double sigma2 = 2.0 * (0.12 * hw) * (0.12 * hw);
  for (int y = 0; y < hw; ++y) {
    for (int x = 0; x < hw; ++x) {
      double u = (x * std::cos(s.theta) + y * std::sin(s.theta)) / hw;
      double g = amp * std::sin(2.0 * std::numbers::pi * s.freq * u + phase);
      double dx = x - cx, dy = y - cy;
      double blob = s.blob_amp * std::exp(-(dx * dx + dy * dy) / sigma2);
      for (int ch = 0; ch < 3; ++ch) {
        double v = g * s.mix[ch] + blob * (ch == 0 ? 1.0 : (ch == 1 ? -0.5 : 0.25)) +
                   cfg.noise * rng.normal();
        dst[(ch * hw + y) * hw + x] = static_cast<float>(v);
      }
    }
  }
}

void fill_split(const DatasetConfig& cfg, const std::vector<ClassStyle>& styles, int n,
                uint64_t split_tag, Tensor<float>& xs, std::vector<int>& ys) {
  xs = Tensor<float>(Shape{n, 3, cfg.hw, cfg.hw});
  ys.resize(static_cast<size_t>(n));
  const int64_t sample_sz = 3LL * cfg.hw * cfg.hw;
  for (int i = 0; i < n; ++i) {
    int c = i % cfg.classes;
    ys[static_cast<size_t>(i)] = c;
    Rng rng(derive_seed(cfg.seed, {split_tag, static_cast<uint64_t>(i)}));
    render_sample(styles[static_cast<size_t>(c)], cfg, rng, xs.ptr() + i * sample_sz);
  }
}

uint64_t tensor_checksum(const Tensor<float>& t) {
  return fnv1a64(t.ptr(), static_cast<size_t>(t.numel()) * sizeof(float));
}

}  // namespace

Dataset synth_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.cfg = cfg;
  auto styles = class_styles(cfg);
  fill_split(cfg, styles, cfg.n_train, 0x7721, ds.train_x, ds.train_y);
  fill_split(cfg, styles, cfg.n_val, 0x7a1, ds.val_x, ds.val_y);
  return ds;
}

namespace {

void write_raw(const std::string& path, const Tensor<float>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out.write(reinterpret_cast<const char*>(t.ptr()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

void write_labels(const std::string& path, const std::vector<int>& ys) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  for (int y : ys) {
    int32_t v = y;
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
}

Tensor<float> read_raw(const std::string& path, Shape shape) {
  Tensor<float> t(std::move(shape));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read: " + path);
  in.read(reinterpret_cast<char*>(t.ptr()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(float)))
    throw IoError("truncated tensor file: " + path);
  return t;
}

std::vector<int> read_labels(const std::string& path, int64_t n) {
  std::vector<int> ys(static_cast<size_t>(n));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read: " + path);
  for (auto& y : ys) {
    int32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    y = v;
  }
  if (!in) throw IoError("truncated label file: " + path);
  return ys;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  write_raw((fs::path(dir) / "train.bin").string(), ds.train_x);
  write_raw((fs::path(dir) / "val.bin").string(), ds.val_x);
  write_labels((fs::path(dir) / "train.labels").string(), ds.train_y);
  write_labels((fs::path(dir) / "val.labels").string(), ds.val_y);
  json m{{"name", ds.cfg.name},
         {"classes", ds.cfg.classes},
         {"n_train", ds.cfg.n_train},
         {"n_val", ds.cfg.n_val},
         {"hw", ds.cfg.hw},
         {"seed", ds.cfg.seed},
         {"style_seed", ds.cfg.style_seed},
         {"noise", ds.cfg.noise},
         {"train_checksum", hex64(tensor_checksum(ds.train_x))},
         {"val_checksum", hex64(tensor_checksum(ds.val_x))}};
  std::ofstream out((fs::path(dir) / "manifest.json").string(), std::ios::binary);
  if (!out) throw IoError("cannot write dataset manifest in " + dir);
  out << m.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in((fs::path(dir) / "manifest.json").string(), std::ios::binary);
  if (!in) throw IoError("no dataset manifest in " + dir);
  json m;
  try {
    in >> m;
  } catch (const std::exception& e) {
    throw IoError(std::string("dataset manifest parse error: ") + e.what());
  }
  Dataset ds;
  ds.cfg.name = m.at("name").get<std::string>();
  ds.cfg.classes = m.at("classes").get<int>();
  ds.cfg.n_train = m.at("n_train").get<int>();
  ds.cfg.n_val = m.at("n_val").get<int>();
  ds.cfg.hw = m.at("hw").get<int>();
  ds.cfg.seed = m.at("seed").get<uint64_t>();
  ds.cfg.style_seed = m.at("style_seed").get<uint64_t>();
  ds.cfg.noise = m.at("noise").get<double>();
  ds.train_x = read_raw((fs::path(dir) / "train.bin").string(),
                        Shape{ds.cfg.n_train, 3, ds.cfg.hw, ds.cfg.hw});
  ds.val_x =
      read_raw((fs::path(dir) / "val.bin").string(), Shape{ds.cfg.n_val, 3, ds.cfg.hw, ds.cfg.hw});
  ds.train_y = read_labels((fs::path(dir) / "train.labels").string(), ds.cfg.n_train);
  ds.val_y = read_labels((fs::path(dir) / "val.labels").string(), ds.cfg.n_val);
  if (hex64(tensor_checksum(ds.train_x)) != m.at("train_checksum").get<std::string>() ||
      hex64(tensor_checksum(ds.val_x)) != m.at("val_checksum").get<std::string>())
    throw IoError("dataset checksum mismatch in " + dir);
  return ds;
}

Dataset ensure_dataset(const DatasetConfig& cfg, const std::string& dir) {
  if (fs::exists(fs::path(dir) / "manifest.json")) {
    Dataset ds = load_dataset(dir);
    if (ds.cfg.classes == cfg.classes && ds.cfg.n_train == cfg.n_train &&
        ds.cfg.n_val == cfg.n_val && ds.cfg.hw == cfg.hw && ds.cfg.seed == cfg.seed &&
        ds.cfg.style_seed == cfg.style_seed && ds.cfg.noise == cfg.noise)
      return ds;
    throw ConfigError("dataset at " + dir + " does not match the requested config");
  }
  Dataset ds = synth_dataset(cfg);
  save_dataset(ds, dir);
  return ds;
}

Batch make_batch(const Tensor<float>& xs, const std::vector<int>& ys,
                 const std::vector<int64_t>& indices) {
  int64_t b = static_cast<int64_t>(indices.size());
  int64_t c = xs.shape[1], h = xs.shape[2], w = xs.shape[3];
  Batch out;
  out.images = Tensor<float>(Shape{b, c, h, w});
  out.labels.resize(static_cast<size_t>(b));
  int64_t sz = c * h * w;
  for (int64_t i = 0; i < b; ++i) {
    int64_t src = indices[static_cast<size_t>(i)];
    std::copy_n(xs.ptr() + src * sz, sz, out.images.ptr() + i * sz);
    out.labels[static_cast<size_t>(i)] = ys[static_cast<size_t>(src)];
  }
  return out;
}

std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int64_t epoch) {
  std::vector<int64_t> perm(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng(derive_seed(seed, {0x9e9e, static_cast<uint64_t>(epoch)}));
  rng.shuffle(perm.begin(), perm.end());
  return perm;
}

}  // namespace ghnforge
