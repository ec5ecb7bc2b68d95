#include "gridlearn/autograd.hpp"

#include <cmath>
#include <memory>
#include <limits>

#include "gridlearn/util.hpp"

namespace gridlearn {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::DimensionMismatch, what);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Mat& Var::value() const { return tape->nodes_[static_cast<std::size_t>(id)].value; }
Mat& Var::grad() const { return tape->nodes_[static_cast<std::size_t>(id)].grad; }

Var Tape::push(Mat value, std::function<void()> backward) {
  nodes_.push_back({std::move(value), Mat(), std::move(backward)});
  return {static_cast<int>(nodes_.size()) - 1, this};
}

Var Tape::constant(Mat value) { return push(std::move(value)); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value);
  if (p.trainable) {
    Parameter* target = &p;
    v = {v.id, this};
    nodes_.back().backward = [this, target, v] { target->grad += g(v); };
  }
  return v;
}

void Tape::backward(Var root) {
  check(val(root).rows() == 1 && val(root).cols() == 1, "backward root must be 1 x 1");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  g(root)(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward) n.backward();
  }
}

Var Tape::matmul(Var a, Var b) {
  check(val(a).cols() == val(b).rows(), "matmul inner dimensions differ");
  Var out = push(val(a) * val(b));
  nodes_.back().backward = [this, a, b, out] {
    g(a).noalias() += g(out) * val(b).transpose();
    g(b).noalias() += val(a).transpose() * g(out);
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "add shapes differ");
  Var out = push(val(a) + val(b));
  nodes_.back().backward = [this, a, b, out] {
    g(a) += g(out);
    g(b) += g(out);
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "sub shapes differ");
  Var out = push(val(a) - val(b));
  nodes_.back().backward = [this, a, b, out] {
    g(a) += g(out);
    g(b) -= g(out);
  };
  return out;
}

Var Tape::add_row(Var a, Var row) {
  check(val(row).rows() == 1 && val(row).cols() == val(a).cols(), "add_row shapes differ");
  Mat v = val(a);
  v.rowwise() += val(row).row(0);
  Var out = push(std::move(v));
  nodes_.back().backward = [this, a, row, out] {
    g(a) += g(out);
    g(row) += g(out).colwise().sum();
  };
  return out;
}

Var Tape::mul(Var a, Var b) {
  check(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "mul shapes differ");
  Var out = push(val(a).cwiseProduct(val(b)));
  nodes_.back().backward = [this, a, b, out] {
    g(a) += g(out).cwiseProduct(val(b));
    g(b) += g(out).cwiseProduct(val(a));
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  Var out = push(val(a) * s);
  nodes_.back().backward = [this, a, s, out] { g(a) += g(out) * s; };
  return out;
}

Var Tape::relu(Var a) {
  const Mat& x = val(a);
  for (Eigen::Index i = 0; i < x.size(); ++i) gates_ = (gates_ ^ (x.data()[i] > 0.0 ? 1u : 0u)) * 1099511628211ull;
  Var out = push(val(a).cwiseMax(0.0));
  nodes_.back().backward = [this, a, out] {
    g(a) += g(out).cwiseProduct((val(a).array() > 0.0).cast<double>().matrix());
  };
  return out;
}

Var Tape::gelu(Var a) {
  const Mat& x = val(a);
  Mat y = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
  Var out = push(std::move(y));
  nodes_.back().backward = [this, a, out] {
    const Mat d = val(a).unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
      const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
      return cdf + v * pdf;
    });
    g(a) += g(out).cwiseProduct(d);
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  Var out = push(val(a).unaryExpr(&sigmoid_scalar));
  nodes_.back().backward = [this, a, out] {
    const Mat& s = val(out);
    g(a) += g(out).cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  };
  return out;
}

Var Tape::silu(Var a) {
  Var out = push(val(a).unaryExpr([](double v) { return v * sigmoid_scalar(v); }));
  nodes_.back().backward = [this, a, out] {
    const Mat d = val(a).unaryExpr([](double v) {
      const double s = sigmoid_scalar(v);
      return s + v * s * (1.0 - s);
    });
    g(a) += g(out).cwiseProduct(d);
  };
  return out;
}

Var Tape::softplus(Var a) {
  Var out = push(val(a).unaryExpr([](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }));
  nodes_.back().backward = [this, a, out] { g(a) += g(out).cwiseProduct(val(a).unaryExpr(&sigmoid_scalar)); };
  return out;
}

Var Tape::rmsnorm(Var x, Var gain, double eps) {
  const Mat& xv = val(x);
  check(val(gain).rows() == 1 && val(gain).cols() == xv.cols(), "rmsnorm gain shape");
  const Vec inv = ((xv.array().square().rowwise().mean()) + eps).sqrt().inverse().matrix();
  const Mat n = inv.asDiagonal() * xv;
  Mat y = n;
  y.array().rowwise() *= val(gain).row(0).array();
  Var out = push(std::move(y));
  nodes_.back().backward = [this, x, gain, out, n, inv] {
    const Mat& dy = g(out);
    g(gain) += dy.cwiseProduct(n).colwise().sum();
    Mat dn = dy;
    dn.array().rowwise() *= val(gain).row(0).array();
    const Vec proj = dn.cwiseProduct(n).rowwise().mean();
    Mat dx = dn - proj.asDiagonal() * n;
    g(x) += inv.asDiagonal() * dx;
  };
  return out;
}

Var Tape::gather(Var a, const RowIndex& idx, int k) {
  check(k >= 1 && idx.size() % static_cast<std::size_t>(k) == 0, "gather index length");
  const Mat& av = val(a);
  const Eigen::Index c = av.cols();
  const Eigen::Index rows = static_cast<Eigen::Index>(idx.size()) / k;
  Mat y = Mat::Zero(rows, c * k);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int j = 0; j < k; ++j) {
      const int src = idx[static_cast<std::size_t>(r * k + j)];
      if (src >= 0) y.block(r, j * c, 1, c) = av.row(src);
    }
  }
  Var out = push(std::move(y));
  nodes_.back().backward = [this, a, out, idx, k, c, rows] {
    Mat& ga = g(a);
    const Mat& go = g(out);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (int j = 0; j < k; ++j) {
        const int src = idx[static_cast<std::size_t>(r * k + j)];
        if (src >= 0) ga.row(src) += go.block(r, j * c, 1, c);
      }
    }
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat of nothing");
  const Eigen::Index rows = val(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    check(val(p).rows() == rows, "concat row counts differ");
    cols += val(p).cols();
  }
  Mat y(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    y.middleCols(off, val(p).cols()) = val(p);
    off += val(p).cols();
  }
  Var out = push(std::move(y));
  nodes_.back().backward = [this, parts, out] {
    Eigen::Index o = 0;
    for (Var p : parts) {
      g(p) += g(out).middleCols(o, val(p).cols());
      o += val(p).cols();
    }
  };
  return out;
}

Mat rope_rotate(const Mat& x, const std::vector<int>& positions, int head_dim, double base, double sign) {
  Mat y = x;
  const int heads = static_cast<int>(x.cols()) / head_dim;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double pos = positions[static_cast<std::size_t>(r)];
    for (int i = 0; i < head_dim / 2; ++i) {
      const double theta = std::pow(base, -2.0 * i / head_dim);
      const double c = std::cos(sign * pos * theta), s = std::sin(sign * pos * theta);
      for (int h = 0; h < heads; ++h) {
        const int j = h * head_dim + 2 * i;
        const double a = x(r, j), b = x(r, j + 1);
        y(r, j) = a * c - b * s;
        y(r, j + 1) = a * s + b * c;
      }
    }
  }
  return y;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat of nothing");
  const Eigen::Index cols = val(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    check(val(p).cols() == cols, "concat column counts differ");
    rows += val(p).rows();
  }
  Mat y(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    y.middleRows(off, val(p).rows()) = val(p);
    off += val(p).rows();
  }
  Var out = push(std::move(y));
  nodes_.back().backward = [this, parts, out] {
    Eigen::Index o = 0;
    for (Var p : parts) {
      g(p) += g(out).middleRows(o, val(p).rows());
      o += val(p).rows();
    }
  };
  return out;
}

Var Tape::rope(Var x, const std::vector<int>& positions, int head_dim, double base) {
  check(head_dim % 2 == 0 && val(x).cols() % head_dim == 0, "rope head_dim");
  check(static_cast<Eigen::Index>(positions.size()) == val(x).rows(), "rope positions length");
  Var out = push(rope_rotate(val(x), positions, head_dim, base, 1.0));
  nodes_.back().backward = [this, x, out, positions, head_dim, base] {
    g(x) += rope_rotate(g(out), positions, head_dim, base, -1.0);
  };
  return out;
}

Var Tape::attention(Var q, Var k, Var v, const std::vector<int>& segments, int n_heads, int n_kv_heads) {
  const Mat& Q = val(q);
  const Mat& K = val(k);
  const Mat& V = val(v);
  check(n_heads % n_kv_heads == 0, "n_heads must be a multiple of n_kv_heads");
  const int dh = static_cast<int>(Q.cols()) / n_heads;
  check(K.cols() == dh * n_kv_heads && V.cols() == K.cols(), "attention widths");
  check(K.rows() == Q.rows() && V.rows() == Q.rows(), "attention rows");
  const int group = n_heads / n_kv_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat O = Mat::Zero(Q.rows(), Q.cols());
  auto probs = std::make_shared<std::vector<Mat>>();
  int off = 0;
  for (int len : segments) {
    for (int h = 0; h < n_heads; ++h) {
      const int kv = h / group;
      Mat S = Q.block(off, h * dh, len, dh) * K.block(off, kv * dh, len, dh).transpose() * sc;
      for (int i = 0; i < len; ++i) {
        const double m = S.row(i).head(i + 1).maxCoeff();
        double z = 0;
        for (int j = 0; j <= i; ++j) {
          S(i, j) = std::exp(S(i, j) - m);
          z += S(i, j);
        }
        S.row(i).head(i + 1) /= z;
        S.row(i).tail(len - i - 1).setZero();
      }
      O.block(off, h * dh, len, dh).noalias() = S * V.block(off, kv * dh, len, dh);
      probs->push_back(std::move(S));
    }
    off += len;
  }
  check(off == Q.rows(), "attention segments must cover every row");
  Var out = push(std::move(O));
  nodes_.back().backward = [this, q, k, v, out, segments, n_heads, dh, group, sc, probs] {
    const Mat& Qv = val(q);
    const Mat& Kv = val(k);
    const Mat& Vv = val(v);
    const Mat& dO = g(out);
    Mat& dQ = g(q);
    Mat& dK = g(k);
    Mat& dV = g(v);
    int o = 0;
    std::size_t pi = 0;
    for (int len : segments) {
      for (int h = 0; h < n_heads; ++h) {
        const int kv = h / group;
        const Mat& P = (*probs)[pi++];
        const auto dOh = dO.block(o, h * dh, len, dh);
        dV.block(o, kv * dh, len, dh).noalias() += P.transpose() * dOh;
        Mat dP = dOh * Vv.block(o, kv * dh, len, dh).transpose();
        const Vec rs = dP.cwiseProduct(P).rowwise().sum();
        Mat dS = P.cwiseProduct(dP - rs.replicate(1, len));
        dQ.block(o, h * dh, len, dh).noalias() += dS * Kv.block(o, kv * dh, len, dh) * sc;
        dK.block(o, kv * dh, len, dh).noalias() += dS.transpose() * Qv.block(o, h * dh, len, dh) * sc;
      }
      o += len;
    }
  };
  return out;
}

Var Tape::cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>& weights) {
  const Mat& L = val(logits);
  check(static_cast<Eigen::Index>(targets.size()) == L.rows() && targets.size() == weights.size(), "CE lengths");
  Mat soft(L.rows(), L.cols());
  double loss = 0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const double m = L.row(r).maxCoeff();
    const auto e = (L.row(r).array() - m).exp();
    const double z = e.sum();
    soft.row(r) = e / z;
    loss += weights[static_cast<std::size_t>(r)] * (m + std::log(z) - L(r, targets[static_cast<std::size_t>(r)]));
  }
  Var out = push(Mat::Constant(1, 1, loss));
  nodes_.back().backward = [this, logits, out, targets, weights, soft] {
    Mat d = soft;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      d(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
      d.row(r) *= weights[static_cast<std::size_t>(r)];
    }
    g(logits) += d * g(out)(0, 0);
  };
  return out;
}

Var Tape::mse(Var pred, const Mat& target, const std::vector<double>& weights) {
  const Mat& P = val(pred);
  check(P.rows() == target.rows() && P.cols() == target.cols(), "mse shapes");
  check(static_cast<Eigen::Index>(weights.size()) == P.rows(), "mse weights");
  const Mat diff = P - target;
  const Vec w = Eigen::Map<const Vec>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const double loss = w.dot(diff.array().square().rowwise().mean().matrix());
  Var out = push(Mat::Constant(1, 1, loss));
  nodes_.back().backward = [this, pred, out, diff, w] {
    g(pred) += (w.asDiagonal() * diff) * (2.0 / static_cast<double>(diff.cols()) * g(out)(0, 0));
  };
  return out;
}

Var Tape::cosine_loss(Var pred, const Mat& target, const std::vector<double>& weights, double eps) {
  const Mat& P = val(pred);
  check(P.rows() == target.rows() && P.cols() == target.cols(), "cosine shapes");
  check(static_cast<Eigen::Index>(weights.size()) == P.rows(), "cosine weights");
  Mat d = Mat::Zero(P.rows(), P.cols());
  double loss = 0;
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    const double w = weights[static_cast<std::size_t>(r)];
    const double np_raw = P.row(r).norm();
    const double np = std::max(np_raw, eps);
    const double nt = std::max(target.row(r).norm(), eps);
    const double c = P.row(r).dot(target.row(r)) / (np * nt);
    loss += w * (1.0 - c);
    d.row(r) = target.row(r) / (np * nt);
    if (np_raw > eps) d.row(r) -= c * P.row(r) / (np * np);
    d.row(r) *= -w;
  }
  Var out = push(Mat::Constant(1, 1, loss));
  nodes_.back().backward = [this, pred, out, d] { g(pred) += d * g(out)(0, 0); };
  return out;
}

Var Tape::weighted_average(const std::vector<Var>& losses, const std::vector<Var>& weights) {
  check(!losses.empty() && losses.size() == weights.size(), "weighted_average lengths");
  double wsum = 0, num = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    wsum += weights[i].scalar();
    num += weights[i].scalar() * losses[i].scalar();
  }
  const double total = num / wsum;
  Var out = push(Mat::Constant(1, 1, total));
  nodes_.back().backward = [this, losses, weights, out, wsum, total] {
    const double go = g(out)(0, 0);
    for (std::size_t i = 0; i < losses.size(); ++i) {
      g(losses[i])(0, 0) += go * weights[i].scalar() / wsum;
      g(weights[i])(0, 0) += go * (losses[i].scalar() - total) / wsum;
    }
  };
  return out;
}

}  // namespace gridlearn
