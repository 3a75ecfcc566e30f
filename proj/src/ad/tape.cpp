#include "lfr/ad/tape.hpp"

#include <cassert>
#include <cmath>

namespace lfr::ad {

Var Tape::push(Matrix value, bool requires_grad,
               std::function<void(const Matrix&)> backward) {
  Node node;
  node.storage = std::move(value);
  node.value = &node.storage;
  node.requires_grad = requires_grad;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  // storage moved into the vector; fix the pointer.
  nodes_.back().value = &nodes_.back().storage;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(const Matrix& external, bool requires_grad) {
  Node node;
  node.value = &external;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

void Tape::accumulate(int index, const Matrix& g) {
  Node& node = nodes_[index];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var output, double seed) {
  assert(output.tape_ == this);
  assert(val(output).rows() == 1 && val(output).cols() == 1);
  Matrix s(1, 1);
  s(0, 0) = seed;
  accumulate(output.index_, s);
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& node = nodes_[i];
    if (node.backward && node.requires_grad && node.grad.size() != 0) {
      node.backward(node.grad);
    }
  }
}

Var Tape::add(Var a, Var b) {
  bool rg = needs_grad(a) || needs_grad(b);
  int ia = a.index_, ib = b.index_;
  return push(val(a) + val(b), rg, [this, ia, ib](const Matrix& g) {
    accumulate(ia, g);
    accumulate(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  bool rg = needs_grad(a) || needs_grad(b);
  int ia = a.index_, ib = b.index_;
  return push(val(a) - val(b), rg, [this, ia, ib](const Matrix& g) {
    accumulate(ia, g);
    accumulate(ib, Matrix(-g));
  });
}

Var Tape::scale(Var a, double s) {
  int ia = a.index_;
  return push(val(a) * s, needs_grad(a), [this, ia, s](const Matrix& g) {
    accumulate(ia, Matrix(g * s));
  });
}

Var Tape::add_row_broadcast(Var x, Var row) {
  assert(val(row).rows() == 1 && val(row).cols() == val(x).cols());
  bool rg = needs_grad(x) || needs_grad(row);
  int ix = x.index_, ir = row.index_;
  Matrix out = val(x);
  out.rowwise() += val(row).row(0);
  return push(std::move(out), rg, [this, ix, ir](const Matrix& g) {
    accumulate(ix, g);
    accumulate(ir, Matrix(g.colwise().sum()));
  });
}

Var Tape::repeat_row(Var row, int n) {
  assert(val(row).rows() == 1);
  int ir = row.index_;
  Matrix out = val(row).row(0).replicate(n, 1);
  return push(std::move(out), needs_grad(row), [this, ir](const Matrix& g) {
    accumulate(ir, Matrix(g.colwise().sum()));
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  int rows = static_cast<int>(val(parts[0]).rows());
  int cols = 0;
  bool rg = false;
  for (Var p : parts) {
    assert(val(p).rows() == rows);
    cols += static_cast<int>(val(p).cols());
    rg = rg || needs_grad(p);
  }
  Matrix out(rows, cols);
  std::vector<int> offsets;
  std::vector<int> indices;
  int at = 0;
  for (Var p : parts) {
    int c = static_cast<int>(val(p).cols());
    out.middleCols(at, c) = val(p);
    offsets.push_back(at);
    indices.push_back(p.index_);
    at += c;
  }
  return push(std::move(out), rg,
              [this, offsets, indices](const Matrix& g) {
                for (size_t k = 0; k < indices.size(); ++k) {
                  int c = static_cast<int>(nodes_[indices[k]].value->cols());
                  accumulate(indices[k], Matrix(g.middleCols(offsets[k], c)));
                }
              });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  assert(!parts.empty());
  int cols = static_cast<int>(val(parts[0]).cols());
  int rows = 0;
  bool rg = false;
  for (Var p : parts) {
    assert(val(p).cols() == cols);
    rows += static_cast<int>(val(p).rows());
    rg = rg || needs_grad(p);
  }
  Matrix out(rows, cols);
  std::vector<int> offsets;
  std::vector<int> indices;
  int at = 0;
  for (Var p : parts) {
    int r = static_cast<int>(val(p).rows());
    out.middleRows(at, r) = val(p);
    offsets.push_back(at);
    indices.push_back(p.index_);
    at += r;
  }
  return push(std::move(out), rg,
              [this, offsets, indices](const Matrix& g) {
                for (size_t k = 0; k < indices.size(); ++k) {
                  int r = static_cast<int>(nodes_[indices[k]].value->rows());
                  accumulate(indices[k], Matrix(g.middleRows(offsets[k], r)));
                }
              });
}

Var Tape::gather_rows(Var x, const GatherTaps& taps) {
  int cols = static_cast<int>(val(x).cols());
  Matrix out = Matrix::Zero(static_cast<int>(taps.size()), cols);
  for (size_t i = 0; i < taps.size(); ++i) {
    for (const auto& [row, w] : taps[i]) {
      out.row(static_cast<int>(i)) += w * val(x).row(row);
    }
  }
  int ix = x.index_;
  return push(std::move(out), needs_grad(x),
              [this, ix, taps](const Matrix& g) {
                if (!nodes_[ix].requires_grad) return;
                Matrix gx = Matrix::Zero(nodes_[ix].value->rows(),
                                         nodes_[ix].value->cols());
                for (size_t i = 0; i < taps.size(); ++i) {
                  for (const auto& [row, w] : taps[i]) {
                    gx.row(row) += w * g.row(static_cast<int>(i));
                  }
                }
                accumulate(ix, gx);
              });
}

Var Tape::matmul(Var a, Var b) {
  bool rg = needs_grad(a) || needs_grad(b);
  int ia = a.index_, ib = b.index_;
  return push(val(a) * val(b), rg, [this, ia, ib](const Matrix& g) {
    accumulate(ia, Matrix(g * nodes_[ib].value->transpose()));
    accumulate(ib, Matrix(nodes_[ia].value->transpose() * g));
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  bool rg = needs_grad(a) || needs_grad(b);
  int ia = a.index_, ib = b.index_;
  return push(val(a) * val(b).transpose(), rg, [this, ia, ib](const Matrix& g) {
    accumulate(ia, Matrix(g * (*nodes_[ib].value)));
    accumulate(ib, Matrix(g.transpose() * (*nodes_[ia].value)));
  });
}

Var Tape::matmul_tn(Var a, Var b) {
  bool rg = needs_grad(a) || needs_grad(b);
  int ia = a.index_, ib = b.index_;
  return push(val(a).transpose() * val(b), rg, [this, ia, ib](const Matrix& g) {
    accumulate(ia, Matrix((*nodes_[ib].value) * g.transpose()));
    accumulate(ib, Matrix((*nodes_[ia].value) * g));
  });
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Var Tape::gelu(Var x) {
  const Matrix& in = val(x);
  Matrix out = in.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  });
  int ix = x.index_;
  return push(std::move(out), needs_grad(x), [this, ix](const Matrix& g) {
    const Matrix& in = *nodes_[ix].value;
    Matrix d = in.unaryExpr([](double v) {
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      return cdf + v * pdf;
    });
    accumulate(ix, Matrix(g.cwiseProduct(d)));
  });
}

Var Tape::sigmoid(Var x) {
  Matrix out = val(x).unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  });
  int ix = x.index_;
  Var result = push(std::move(out), needs_grad(x), {});
  int iy = result.index_;
  nodes_[iy].backward = [this, ix, iy](const Matrix& g) {
    const Matrix& y = *nodes_[iy].value;
    accumulate(ix, Matrix(g.cwiseProduct(y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y))));
  };
  return result;
}

Var Tape::softmax_rows(Var x) {
  const Matrix& in = val(x);
  Matrix out(in.rows(), in.cols());
  for (int r = 0; r < in.rows(); ++r) {
    double m = in.row(r).maxCoeff();
    Eigen::RowVectorXd e = (in.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  int ix = x.index_;
  Var result = push(std::move(out), needs_grad(x), {});
  int iy = result.index_;
  nodes_[iy].backward = [this, ix, iy](const Matrix& g) {
    const Matrix& y = *nodes_[iy].value;
    Matrix gx(y.rows(), y.cols());
    for (int r = 0; r < y.rows(); ++r) {
      double dot = g.row(r).dot(y.row(r));
      gx.row(r) = (g.row(r).array() - dot) * y.row(r).array();
    }
    accumulate(ix, gx);
  };
  return result;
}

Var Tape::layernorm_rows(Var x, Var gamma, Var beta, double eps) {
  const Matrix& in = val(x);
  const int rows = static_cast<int>(in.rows());
  const int cols = static_cast<int>(in.cols());
  assert(val(gamma).rows() == 1 && val(gamma).cols() == cols);
  assert(val(beta).rows() == 1 && val(beta).cols() == cols);
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_sigma(rows);
  for (int r = 0; r < rows; ++r) {
    double mu = in.row(r).mean();
    double var = (in.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    xhat.row(r) = (in.row(r).array() - mu) * is;
  }
  Matrix out = xhat;
  out.array().rowwise() *= val(gamma).row(0).array();
  out.rowwise() += val(beta).row(0);
  bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
  int ix = x.index_, ig = gamma.index_, ib = beta.index_;
  return push(std::move(out), rg,
              [this, ix, ig, ib, xhat, inv_sigma](const Matrix& g) {
                accumulate(ib, Matrix(g.colwise().sum()));
                accumulate(ig, Matrix(g.cwiseProduct(xhat).colwise().sum()));
                if (!nodes_[ix].requires_grad) return;
                const Matrix& gamma = *nodes_[ig].value;
                Matrix gx(g.rows(), g.cols());
                for (int r = 0; r < g.rows(); ++r) {
                  Eigen::RowVectorXd dxhat =
                      g.row(r).cwiseProduct(gamma.row(0));
                  double m1 = dxhat.mean();
                  double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                  gx.row(r) = inv_sigma[r] *
                              (dxhat.array() - m1 - xhat.row(r).array() * m2);
                }
                accumulate(ix, gx);
              });
}

Var Tape::mean_sq(Var a, const Matrix& target) {
  const Matrix& in = val(a);
  assert(in.rows() == target.rows() && in.cols() == target.cols());
  double n = static_cast<double>(in.size());
  Matrix diff = in - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  int ia = a.index_;
  return push(std::move(out), needs_grad(a),
              [this, ia, diff, n](const Matrix& g) {
                accumulate(ia, Matrix(diff * (2.0 * g(0, 0) / n)));
              });
}

}  // namespace lfr::ad
