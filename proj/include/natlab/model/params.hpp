#pragma once

#include <map>
#include <string>
#include <vector>

#include "natlab/compute/tensor.hpp"
#include "natlab/util/rng.hpp"

namespace natlab::model {

struct Param {
  std::string name;
  compute::Tensor value;
  compute::Tensor grad;
};

class ParamStore {
 public:
  Param& add(const std::string& name, std::vector<int> shape, double init_std,
             util::Rng& rng);
  Param& add_const(const std::string& name, compute::Tensor init);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  void zero_grad();
  bool same_values(const ParamStore& other) const;  // bit-exact compare

  // extra manifest entries persisted with checkpoints
  std::map<std::string, std::string> meta;

 private:
  std::vector<Param> params_;  // creation order, deterministic
  std::map<std::string, int> index_;
};

void save_checkpoint(const ParamStore& store, const std::string& dir);
ParamStore load_checkpoint(const std::string& dir);

// Arithmetic mean per parameter across checkpoints with identical shapes.
ParamStore average_checkpoints(const std::vector<std::string>& dirs);
ParamStore average_stores(const std::vector<const ParamStore*>& stores);

}  // namespace natlab::model
