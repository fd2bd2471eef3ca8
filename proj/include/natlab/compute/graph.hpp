#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "natlab/compute/tensor.hpp"

namespace natlab::compute {

class GraphError : public std::runtime_error {
 public:
  GraphError(int node, const std::string& msg)
      : std::runtime_error("node " + std::to_string(node) + ": " + msg),
        node_id(node) {}
  int node_id;
};

// Reverse-mode tape. Ops compute values eagerly and record a backward
// closure; backward() runs the closures in reverse creation order, which is
// a valid topological order by construction.
class Graph {
 public:
  using Ref = int;

  Ref input(Tensor t);
  // Leaf whose gradient is accumulated into *grad_sink (shape must match).
  Ref param(const Tensor* value, Tensor* grad_sink);

  Ref matmul(Ref a, Ref b);
  Ref transpose(Ref a);
  Ref add(Ref a, Ref b);          // same shape, or b a row vector broadcast over a's rows
  Ref mul(Ref a, Ref b);          // elementwise
  Ref scale(Ref a, double c);
  Ref relu(Ref a);
  Ref rows(Ref table, std::vector<int> ids);  // embedding lookup
  Ref layer_norm(Ref a, Ref gain, Ref bias);  // per-row, eps 1e-5
  Ref softmax(Ref a);             // rowwise
  Ref log_softmax(Ref a);         // rowwise
  Ref slice_cols(Ref a, int start, int n);
  Ref concat_cols(const std::vector<Ref>& parts);
  Ref sum(Ref a);
  Ref mean(Ref a);
  Ref mean_rows(Ref a);           // [m,n] -> [1,n]
  Ref detach(Ref a);              // value copy, gradient barrier

  // Weighted mean NLL with label smoothing over rowwise log-probabilities.
  // loss = sum_i w_i * (-(1-eps) logp[i][t_i] - eps/V * sum_v logp[i][v]) / sum_i w_i
  Ref weighted_nll(Ref logp, std::vector<int> targets, std::vector<double> weights,
                   double smoothing = 0.0);

  // Masked scaled dot-product attention, composed from primitives.
  // mask is additive ([Lq,Lk], 0 or -inf); pass kNoRef for none.
  Ref attention(Ref q, Ref k, Ref v, Ref mask, double scale);

  static constexpr Ref kNoRef = -1;

  const Tensor& value(Ref r) const { return nodes_[check(r)].val; }
  const Tensor& grad(Ref r) const { return nodes_[check(r)].grad; }

  void backward(Ref loss);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::vector<Ref> parents;
    std::function<void(Graph&, int)> backprop;  // may be empty (leaf/detach)
    Tensor* grad_sink = nullptr;
  };

  int check(Ref r) const {
    if (r < 0 || r >= static_cast<int>(nodes_.size()))
      throw GraphError(r, "invalid node reference");
    return r;
  }
  Ref push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }
  Node& node(Ref r) { return nodes_[check(r)]; }

  std::vector<Node> nodes_;
};

// Central finite differences, the gradient test oracle.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h);

}  // namespace natlab::compute
