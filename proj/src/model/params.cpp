#include "natlab/model/params.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace natlab::model {

namespace fs = std::filesystem;

Param& ParamStore::add(const std::string& name, std::vector<int> shape,
                       double init_std, util::Rng& rng) {
  compute::Tensor t(shape);
  for (double& x : t.v) x = init_std > 0.0 ? rng.normal(0.0, init_std) : 0.0;
  return add_const(name, std::move(t));
}

Param& ParamStore::add_const(const std::string& name, compute::Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate param " + name);
  Param p;
  p.name = name;
  p.grad = compute::Tensor(init.shape);
  p.value = std::move(init);
  index_[name] = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown param " + name);
  return params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown param " + name);
  return params_[it->second];
}

void ParamStore::zero_grad() {
  for (Param& p : params_) p.grad.fill(0.0);
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name) return false;
    if (params_[i].value.shape != other.params_[i].value.shape) return false;
    if (std::memcmp(params_[i].value.v.data(), other.params_[i].value.v.data(),
                    params_[i].value.v.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

namespace {

// little-endian doubles; asserts at build time on big-endian hosts
void write_doubles(const std::string& path, const std::vector<double>& v) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint format requires a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failure on " + path);
}

std::vector<double> read_doubles(const std::string& path, size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != n * sizeof(double))
    throw std::runtime_error("short read on " + path);
  return v;
}

std::string file_name(const std::string& param_name) {
  std::string s = param_name;
  for (char& c : s)
    if (c == '/' || c == '\\') c = '_';
  return s + ".f64";
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "params");
  std::ofstream man(fs::path(dir) / "manifest.txt");
  if (!man) throw std::runtime_error("cannot write manifest in " + dir);
  for (const auto& [k, v] : store.meta) man << "meta " << k << " " << v << "\n";
  for (const Param& p : store.all()) {
    man << "param " << p.name;
    for (int d : p.value.shape) man << " " << d;
    man << "\n";
    write_doubles((fs::path(dir) / "params" / file_name(p.name)).string(), p.value.v);
  }
}

ParamStore load_checkpoint(const std::string& dir) {
  std::ifstream man(fs::path(dir) / "manifest.txt");
  if (!man) throw std::runtime_error("cannot read manifest in " + dir);
  ParamStore store;
  std::string line;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind == "meta") {
      std::string key;
      is >> key;
      std::string rest;
      std::getline(is, rest);
      if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
      store.meta[key] = rest;
    } else if (kind == "param") {
      std::string name;
      is >> name;
      std::vector<int> shape;
      int d;
      while (is >> d) shape.push_back(d);
      compute::Tensor t(shape);
      t.v = read_doubles((fs::path(dir) / "params" / file_name(name)).string(),
                         t.v.size());
      store.add_const(name, std::move(t));
    } else {
      throw std::runtime_error("bad manifest line: " + line);
    }
  }
  return store;
}

ParamStore average_stores(const std::vector<const ParamStore*>& stores) {
  if (stores.empty()) throw std::invalid_argument("average: no checkpoints");
  ParamStore out;
  out.meta = stores[0]->meta;
  const auto& first = stores[0]->all();
  for (size_t i = 0; i < first.size(); ++i) {
    compute::Tensor mean(first[i].value.shape);
    for (const ParamStore* s : stores) {
      const auto& ps = s->all();
      if (ps.size() != first.size() || ps[i].name != first[i].name ||
          ps[i].value.shape != first[i].value.shape)
        throw std::invalid_argument("average: checkpoint shape mismatch at " +
                                    first[i].name);
      for (int j = 0; j < mean.size(); ++j) mean.v[j] += ps[i].value.v[j];
    }
    for (double& x : mean.v) x /= static_cast<double>(stores.size());
    out.add_const(first[i].name, std::move(mean));
  }
  return out;
}

ParamStore average_checkpoints(const std::vector<std::string>& dirs) {
  std::vector<ParamStore> loaded;
  loaded.reserve(dirs.size());
  for (const std::string& d : dirs) loaded.push_back(load_checkpoint(d));
  std::vector<const ParamStore*> ptrs;
  for (const ParamStore& s : loaded) ptrs.push_back(&s);
  return average_stores(ptrs);
}

}  // namespace natlab::model
