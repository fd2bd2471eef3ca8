#include "natlab/compute/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace natlab::compute {

namespace {
constexpr double kLnEps = 1e-5;  // layer norm variance floor
}

Graph::Ref Graph::input(Tensor t) {
  Node n;
  n.val = std::move(t);
  return push(std::move(n));
}

Graph::Ref Graph::param(const Tensor* value, Tensor* grad_sink) {
  if (!value->same_shape(*grad_sink))
    throw GraphError(num_nodes(), "param grad shape " + grad_sink->shape_str() +
                                      " != value shape " + value->shape_str());
  Node n;
  n.val = *value;
  n.grad_sink = grad_sink;
  return push(std::move(n));
}

Graph::Ref Graph::matmul(Ref a, Ref b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows())
    throw GraphError(b, "matmul inner dims " + A.shape_str() + " x " + B.shape_str());
  int m = A.rows(), k = A.cols(), n = B.cols();
  Node nd;
  nd.val = Tensor({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = A.at(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) nd.val.at(i, j) += av * B.at(p, j);
    }
  nd.parents = {a, b};
  nd.backprop = [a, b, m, k, n](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    const Tensor& A2 = g.value(a);
    const Tensor& B2 = g.value(b);
    Tensor& dA = g.node(a).grad;
    Tensor& dB = g.node(b).grad;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double gv = G.at(i, j);
        if (gv == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          dA.at(i, p) += gv * B2.at(p, j);
          dB.at(p, j) += gv * A2.at(i, p);
        }
      }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::transpose(Ref a) {
  const Tensor& A = value(a);
  int m = A.rows(), n = A.cols();
  Node nd;
  nd.val = Tensor({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) nd.val.at(j, i) = A.at(i, j);
  nd.parents = {a};
  nd.backprop = [a, m, n](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) dA.at(i, j) += G.at(j, i);
  };
  return push(std::move(nd));
}

Graph::Ref Graph::add(Ref a, Ref b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  bool broadcast = B.rows() == 1 && A.rows() != 1 && A.cols() == B.cols();
  if (!broadcast && !A.same_shape(B))
    throw GraphError(b, "add shape " + A.shape_str() + " vs " + B.shape_str());
  Node nd;
  nd.val = A;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) nd.val.at(i, j) += B.at(broadcast ? 0 : i, j);
  nd.parents = {a, b};
  nd.backprop = [a, b, broadcast](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    Tensor& dA = g.node(a).grad;
    Tensor& dB = g.node(b).grad;
    for (int i = 0; i < G.rows(); ++i)
      for (int j = 0; j < G.cols(); ++j) {
        dA.at(i, j) += G.at(i, j);
        dB.at(broadcast ? 0 : i, j) += G.at(i, j);
      }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::mul(Ref a, Ref b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B))
    throw GraphError(b, "mul shape " + A.shape_str() + " vs " + B.shape_str());
  Node nd;
  nd.val = A;
  for (int i = 0; i < A.size(); ++i) nd.val.v[i] *= B.v[i];
  nd.parents = {a, b};
  nd.backprop = [a, b](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    const Tensor& A2 = g.value(a);
    const Tensor& B2 = g.value(b);
    Tensor& dA = g.node(a).grad;
    Tensor& dB = g.node(b).grad;
    for (int i = 0; i < G.size(); ++i) {
      dA.v[i] += G.v[i] * B2.v[i];
      dB.v[i] += G.v[i] * A2.v[i];
    }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::scale(Ref a, double c) {
  Node nd;
  nd.val = value(a);
  for (double& x : nd.val.v) x *= c;
  nd.parents = {a};
  nd.backprop = [a, c](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < G.size(); ++i) dA.v[i] += c * G.v[i];
  };
  return push(std::move(nd));
}

Graph::Ref Graph::relu(Ref a) {
  Node nd;
  nd.val = value(a);
  for (double& x : nd.val.v) x = std::max(0.0, x);
  nd.parents = {a};
  nd.backprop = [a](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    const Tensor& A2 = g.value(a);
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < G.size(); ++i)
      if (A2.v[i] > 0.0) dA.v[i] += G.v[i];
  };
  return push(std::move(nd));
}

Graph::Ref Graph::rows(Ref table, std::vector<int> ids) {
  const Tensor& T = value(table);
  int d = T.cols();
  for (int id : ids)
    if (id < 0 || id >= T.rows())
      throw GraphError(table, "row index " + std::to_string(id) + " out of range");
  Node nd;
  nd.val = Tensor({static_cast<int>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < d; ++j) nd.val.at(static_cast<int>(i), j) = T.at(ids[i], j);
  nd.parents = {table};
  nd.backprop = [table, ids, d](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    Tensor& dT = g.node(table).grad;
    for (size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j) dT.at(ids[i], j) += G.at(static_cast<int>(i), j);
  };
  return push(std::move(nd));
}

Graph::Ref Graph::layer_norm(Ref a, Ref gain, Ref bias) {
  const Tensor& A = value(a);
  const Tensor& Gn = value(gain);
  const Tensor& Bi = value(bias);
  int m = A.rows(), n = A.cols();
  if (Gn.size() != n || Bi.size() != n)
    throw GraphError(gain, "layer_norm gain/bias size != " + std::to_string(n));
  Node nd;
  nd.val = Tensor({m, n});
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += A.at(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (A.at(i, j) - mu) * (A.at(i, j) - mu);
    var /= n;
    double inv = 1.0 / std::sqrt(var + kLnEps);
    for (int j = 0; j < n; ++j)
      nd.val.at(i, j) = Gn.v[j] * (A.at(i, j) - mu) * inv + Bi.v[j];
  }
  nd.parents = {a, gain, bias};
  nd.backprop = [a, gain, bias, m, n](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    const Tensor& A2 = g.value(a);
    const Tensor& Gn2 = g.value(gain);
    Tensor& dA = g.node(a).grad;
    Tensor& dGn = g.node(gain).grad;
    Tensor& dBi = g.node(bias).grad;
    for (int i = 0; i < m; ++i) {
      double mu = 0.0;
      for (int j = 0; j < n; ++j) mu += A2.at(i, j);
      mu /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) var += (A2.at(i, j) - mu) * (A2.at(i, j) - mu);
      var /= n;
      double inv = 1.0 / std::sqrt(var + kLnEps);
      double mean_u = 0.0, mean_ux = 0.0;
      for (int j = 0; j < n; ++j) {
        double xhat = (A2.at(i, j) - mu) * inv;
        double u = G.at(i, j) * Gn2.v[j];
        mean_u += u;
        mean_ux += u * xhat;
        dGn.v[j] += G.at(i, j) * xhat;
        dBi.v[j] += G.at(i, j);
      }
      mean_u /= n;
      mean_ux /= n;
      for (int j = 0; j < n; ++j) {
        double xhat = (A2.at(i, j) - mu) * inv;
        double u = G.at(i, j) * Gn2.v[j];
        dA.at(i, j) += inv * (u - mean_u - xhat * mean_ux);
      }
    }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::softmax(Ref a) {
  const Tensor& A = value(a);
  int m = A.rows(), n = A.cols();
  Node nd;
  nd.val = Tensor({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) mx = std::max(mx, A.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(A.at(i, j) - mx);
    for (int j = 0; j < n; ++j) nd.val.at(i, j) = std::exp(A.at(i, j) - mx) / z;
  }
  nd.parents = {a};
  nd.backprop = [a, m, n](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    const Tensor& Y = g.value(self);
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += G.at(i, j) * Y.at(i, j);
      for (int j = 0; j < n; ++j) dA.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
    }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::log_softmax(Ref a) {
  const Tensor& A = value(a);
  int m = A.rows(), n = A.cols();
  Node nd;
  nd.val = Tensor({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) mx = std::max(mx, A.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(A.at(i, j) - mx);
    double lz = mx + std::log(z);
    for (int j = 0; j < n; ++j) nd.val.at(i, j) = A.at(i, j) - lz;
  }
  nd.parents = {a};
  nd.backprop = [a, m, n](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    const Tensor& Y = g.value(self);
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += G.at(i, j);
      for (int j = 0; j < n; ++j) dA.at(i, j) += G.at(i, j) - std::exp(Y.at(i, j)) * s;
    }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::slice_cols(Ref a, int start, int n) {
  const Tensor& A = value(a);
  if (start < 0 || start + n > A.cols())
    throw GraphError(a, "slice_cols out of range");
  int m = A.rows();
  Node nd;
  nd.val = Tensor({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) nd.val.at(i, j) = A.at(i, start + j);
  nd.parents = {a};
  nd.backprop = [a, start, n, m](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) dA.at(i, start + j) += G.at(i, j);
  };
  return push(std::move(nd));
}

Graph::Ref Graph::concat_cols(const std::vector<Ref>& parts) {
  if (parts.empty()) throw GraphError(num_nodes(), "concat_cols of nothing");
  int m = value(parts[0]).rows();
  int total = 0;
  for (Ref p : parts) {
    if (value(p).rows() != m) throw GraphError(p, "concat_cols row mismatch");
    total += value(p).cols();
  }
  Node nd;
  nd.val = Tensor({m, total});
  int off = 0;
  for (Ref p : parts) {
    const Tensor& P = value(p);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < P.cols(); ++j) nd.val.at(i, off + j) = P.at(i, j);
    off += P.cols();
  }
  nd.parents = parts;
  nd.backprop = [parts, m](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    int o = 0;
    for (Ref p : parts) {
      Tensor& dP = g.node(p).grad;
      int c = dP.cols();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j) dP.at(i, j) += G.at(i, o + j);
      o += c;
    }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::sum(Ref a) {
  const Tensor& A = value(a);
  double s = 0.0;
  for (double x : A.v) s += x;
  Node nd;
  nd.val = Tensor::scalar(s);
  nd.parents = {a};
  nd.backprop = [a](Graph& g, int self) {
    double gv = g.node(self).grad.v[0];
    Tensor& dA = g.node(a).grad;
    for (double& x : dA.v) x += gv;
  };
  return push(std::move(nd));
}

Graph::Ref Graph::mean(Ref a) {
  int n = value(a).size();
  return scale(sum(a), 1.0 / n);
}

Graph::Ref Graph::mean_rows(Ref a) {
  const Tensor& A = value(a);
  int m = A.rows(), n = A.cols();
  Node nd;
  nd.val = Tensor({1, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) nd.val.at(0, j) += A.at(i, j) / m;
  nd.parents = {a};
  nd.backprop = [a, m, n](Graph& g, int self) {
    const Tensor& G = g.node(self).grad;
    Tensor& dA = g.node(a).grad;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) dA.at(i, j) += G.at(0, j) / m;
  };
  return push(std::move(nd));
}

Graph::Ref Graph::detach(Ref a) {
  Node nd;
  nd.val = value(a);
  return push(std::move(nd));
}

Graph::Ref Graph::weighted_nll(Ref logp, std::vector<int> targets,
                               std::vector<double> weights, double smoothing) {
  const Tensor& L = value(logp);
  int m = L.rows(), V = L.cols();
  if (static_cast<int>(targets.size()) != m)
    throw GraphError(logp, "weighted_nll: targets size != rows");
  if (weights.empty()) weights.assign(m, 1.0);
  if (static_cast<int>(weights.size()) != m)
    throw GraphError(logp, "weighted_nll: weights size != rows");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (wsum <= 0.0) {
    Node zero;
    zero.val = Tensor::scalar(0.0);
    zero.parents = {logp};
    return push(std::move(zero));
  }
  for (int i = 0; i < m; ++i)
    if (targets[i] < 0 || targets[i] >= V)
      throw GraphError(logp, "weighted_nll: target id out of range");
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    double li = -(1.0 - smoothing) * L.at(i, targets[i]);
    if (smoothing > 0.0) {
      double s = 0.0;
      for (int v = 0; v < V; ++v) s += L.at(i, v);
      li -= smoothing / V * s;
    }
    loss += weights[i] * li;
  }
  loss /= wsum;
  Node nd;
  nd.val = Tensor::scalar(loss);
  nd.parents = {logp};
  nd.backprop = [logp, targets, weights, smoothing, wsum, m, V](Graph& g, int self) {
    double gv = g.node(self).grad.v[0];
    Tensor& dL = g.node(logp).grad;
    for (int i = 0; i < m; ++i) {
      double c = gv * weights[i] / wsum;
      dL.at(i, targets[i]) += c * -(1.0 - smoothing);
      if (smoothing > 0.0)
        for (int v = 0; v < V; ++v) dL.at(i, v) += c * -(smoothing / V);
    }
  };
  return push(std::move(nd));
}

Graph::Ref Graph::attention(Ref q, Ref k, Ref v, Ref mask, double sc) {
  Ref scores = scale(matmul(q, transpose(k)), sc);
  if (mask != kNoRef) scores = add(scores, mask);
  return matmul(softmax(scores), v);
}

void Graph::backward(Ref loss) {
  check(loss);
  if (!nodes_[loss].val.is_scalar())
    throw GraphError(loss, "backward: loss is not a scalar");
  for (int i = 0; i <= loss; ++i) {
    nodes_[i].grad = Tensor(nodes_[i].val.shape.empty() ? std::vector<int>{1, 1}
                                                        : nodes_[i].val.shape);
  }
  nodes_[loss].grad.v[0] = 1.0;
  for (int i = loss; i >= 0; --i) {
    if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
    if (nodes_[i].grad_sink) {
      Tensor& sink = *nodes_[i].grad_sink;
      for (int j = 0; j < sink.size(); ++j) sink.v[j] += nodes_[i].grad.v[j];
    }
  }
}

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::vector<double> g(x.size());
  std::vector<double> xp = x;
  for (size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    double fp = f(xp);
    xp[i] = x[i] - h;
    double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace natlab::compute
