// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/autodiff/ops.hpp"

#include <cmath>
#include <memory>

#include "lgtse/common/error.hpp"
#include "lgtse/kernels/nn.hpp"

namespace lgtse::ad {

namespace {

void same_shape(Var a, Var b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kShape,
          what);
}

std::vector<double> to_vector(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix to_column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<long>(v.size()));
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), ErrorKind::kShape, "matmul inner dimension");
  Tape& tape = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape.record(a.value() * b.value(), {a, b},
                     [ia, ib](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       if (t.requires_grad(ia))
                         t.accumulate(ia, Matrix(g * t.value(ib).transpose()));
                       if (t.requires_grad(ib))
                         t.accumulate(ib, Matrix(t.value(ia).transpose() * g));
                     });
}

Var matmul_tn(Var a, Var b) {
  require(a.rows() == b.rows(), ErrorKind::kShape, "matmul_tn inner dimension");
  Tape& tape = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape.record(a.value().transpose() * b.value(), {a, b},
                     [ia, ib](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       if (t.requires_grad(ia))
                         t.accumulate(ia, Matrix(t.value(ib) * g.transpose()));
                       if (t.requires_grad(ib))
                         t.accumulate(ib, Matrix(t.value(ia) * g));
                     });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add shape");
  Tape& tape = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape.record(a.value() + b.value(), {a, b},
                     [ia, ib](Tape& t, std::size_t self) {
                       t.accumulate(ia, t.grad(self));
                       t.accumulate(ib, t.grad(self));
                     });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub shape");
  Tape& tape = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape.record(a.value() - b.value(), {a, b},
                     [ia, ib](Tape& t, std::size_t self) {
                       t.accumulate(ia, t.grad(self));
                       t.accumulate(ib, Matrix(-t.grad(self)));
                     });
}

Var hadamard(Var a, Var b) {
  same_shape(a, b, "hadamard shape");
  Tape& tape = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape.record(
      a.value().cwiseProduct(b.value()), {a, b},
      [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia))
          t.accumulate(ia, Matrix(g.cwiseProduct(t.value(ib))));
        if (t.requires_grad(ib))
          t.accumulate(ib, Matrix(g.cwiseProduct(t.value(ia))));
      });
}

Var scale(Var a, double c) {
  Tape& tape = *a.tape();
  const auto ia = a.id();
  return tape.record(a.value() * c, {a}, [ia, c](Tape& t, std::size_t self) {
    t.accumulate(ia, Matrix(t.grad(self) * c));
  });
}

Var add_bias(Var x, Var bias) {
  require(bias.cols() == 1 && bias.rows() == x.rows(), ErrorKind::kShape,
          "bias must be [rows x 1]");
  Tape& tape = *x.tape();
  const auto ix = x.id(), ib = bias.id();
  Matrix out = x.value();
  out.colwise() += bias.value().col(0);
  return tape.record(std::move(out), {x, bias},
                     [ix, ib](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       t.accumulate(ix, g);
                       if (t.requires_grad(ib))
                         t.accumulate(ib, Matrix(g.rowwise().sum()));
                     });
}

Var linear(Var w, Var x, Var bias) {
  require(w.cols() == x.rows(), ErrorKind::kShape, "linear input width");
  require(bias.cols() == 1 && bias.rows() == w.rows(), ErrorKind::kShape,
          "linear bias shape");
  Tape& tape = *x.tape();
  const auto iw = w.id(), ix = x.id(), ib = bias.id();
  Matrix out = w.value() * x.value();
  out.colwise() += bias.value().col(0);
  return tape.record(
      std::move(out), {w, x, bias}, [iw, ix, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(iw))
          t.accumulate(iw, Matrix(g * t.value(ix).transpose()));
        if (t.requires_grad(ix))
          t.accumulate(ix, Matrix(t.value(iw).transpose() * g));
        if (t.requires_grad(ib)) t.accumulate(ib, Matrix(g.rowwise().sum()));
      });
}

Var tanh(Var x) {
  Tape& tape = *x.tape();
  const auto ix = x.id();
  Matrix out = x.value().array().tanh().matrix();
  return tape.record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ix, Matrix(t.grad(self).array() * (1.0 - y.array().square())));
  });
}

Var sigmoid(Var x) {
  Tape& tape = *x.tape();
  const auto ix = x.id();
  Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  return tape.record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ix,
                 Matrix(t.grad(self).array() * y.array() * (1.0 - y.array())));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::kShape, "concat of nothing");
  Tape& tape = *parts.front().tape();
  const long cols = parts.front().cols();
  long rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, ErrorKind::kShape, "concat_rows column count");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, long>> spans;
  long r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    r += p.rows();
  }
  return tape.record(std::move(out), parts,
                     [spans](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       long off = 0;
                       for (const auto& [id, n] : spans) {
                         if (t.requires_grad(id))
                           t.accumulate(id, Matrix(g.middleRows(off, n)));
                         off += n;
                       }
                     });
}

Var slice_rows(Var x, long start, long count) {
  require(start >= 0 && count >= 0 && start + count <= x.rows(),
          ErrorKind::kShape, "slice_rows out of range");
  Tape& tape = *x.tape();
  const auto ix = x.id();
  const long rows = x.rows();
  return tape.record(Matrix(x.value().middleRows(start, count)), {x},
                     [ix, start, count, rows](Tape& t, std::size_t self) {
                       Matrix g = Matrix::Zero(rows, t.grad(self).cols());
                       g.middleRows(start, count) = t.grad(self);
                       t.accumulate(ix, std::move(g));
                     });
}

Var sum(Var x) {
  Tape& tape = *x.tape();
  const auto ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const long r = x.rows(), c = x.cols();
  return tape.record(std::move(out), {x}, [ix, r, c](Tape& t, std::size_t self) {
    t.accumulate(ix, Matrix::Constant(r, c, t.grad(self)(0, 0)));
  });
}

Var squared_norm(Var x) {
  Tape& tape = *x.tape();
  const auto ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return tape.record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    t.accumulate(ix, Matrix(2.0 * t.grad(self)(0, 0) * t.value(ix)));
  });
}

Var softmax_cols(Var logits) {
  Tape& tape = *logits.tape();
  const auto ix = logits.id();
  return tape.record(kernels::omp::softmax_cols(logits.value()), {logits},
                     [ix](Tape& t, std::size_t self) {
                       t.accumulate(ix, kernels::omp::softmax_cols_vjp(
                                            t.value(self), t.grad(self)));
                     });
}

Var conv1d_causal(Var w, Var x, Var bias, int kernel, int dilation) {
  require(w.cols() == x.rows() * kernel, ErrorKind::kShape,
          "conv weight must be [out x in*kernel]");
  require(bias.cols() == 1 && bias.rows() == w.rows(), ErrorKind::kShape,
          "conv bias shape");
  Tape& tape = *x.tape();
  const auto iw = w.id(), ix = x.id(), ib = bias.id();
  const int channels = static_cast<int>(x.rows());
  auto cols = std::make_shared<const Matrix>(
      kernels::omp::im2col_causal(x.value(), kernel, dilation));
  Matrix out = w.value() * *cols;
  out.colwise() += bias.value().col(0);
  return tape.record(
      std::move(out), {w, x, bias},
      [iw, ix, ib, cols, channels, kernel, dilation](Tape& t,
                                                     std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(iw))
          t.accumulate(iw, Matrix(g * cols->transpose()));
        if (t.requires_grad(ib)) t.accumulate(ib, Matrix(g.rowwise().sum()));
        if (t.requires_grad(ix)) {
          const Matrix dcols = t.value(iw).transpose() * g;
          t.accumulate(ix, kernels::omp::col2im_causal(dcols, channels, kernel,
                                                       dilation));
        }
      });
}

namespace {
struct GruCache {
  Matrix r, z, n, ghn, hprev;
};
}  // namespace

Var gru(Var x, Var wx, Var wh, Var bx, Var bh) {
  const long h = wh.cols();
  require(wh.rows() == 3 * h && wx.rows() == 3 * h && wx.cols() == x.rows(),
          ErrorKind::kShape, "gru weight shapes");
  require(bx.rows() == 3 * h && bh.rows() == 3 * h && bx.cols() == 1 &&
              bh.cols() == 1,
          ErrorKind::kShape, "gru bias shapes");
  Tape& tape = *x.tape();
  const long steps = x.cols();
  const Matrix& whv = wh.value();
  Matrix gx = wx.value() * x.value();
  gx.colwise() += bx.value().col(0);

  auto cache = std::make_shared<GruCache>();
  cache->r.resize(h, steps);
  cache->z.resize(h, steps);
  cache->n.resize(h, steps);
  cache->ghn.resize(h, steps);
  cache->hprev.resize(h, steps);
  Matrix out(h, steps);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd gh(3 * h);
  for (long t = 0; t < steps; ++t) {
    cache->hprev.col(t) = state;
    gh.noalias() = whv * state;
    gh += bh.value().col(0);
    for (long i = 0; i < h; ++i) {
      const double r = 1.0 / (1.0 + std::exp(-(gx(i, t) + gh(i))));
      const double z = 1.0 / (1.0 + std::exp(-(gx(h + i, t) + gh(h + i))));
      const double n = std::tanh(gx(2 * h + i, t) + r * gh(2 * h + i));
      cache->r(i, t) = r;
      cache->z(i, t) = z;
      cache->n(i, t) = n;
      cache->ghn(i, t) = gh(2 * h + i);
      state(i) = (1.0 - z) * n + z * state(i);
    }
    out.col(t) = state;
  }

  const auto ix = x.id(), iwx = wx.id(), iwh = wh.id(), ibx = bx.id(),
             ibh = bh.id();
  return tape.record(
      std::move(out), {x, wx, wh, bx, bh},
      [=](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& whm = t.value(iwh);
        const GruCache& c = *cache;
        Matrix dgx(3 * h, steps);
        Matrix dgh(3 * h, steps);
        Eigen::VectorXd dnext = Eigen::VectorXd::Zero(h);
        Eigen::VectorXd dgh_col(3 * h);
        for (long s = steps; s-- > 0;) {
          for (long i = 0; i < h; ++i) {
            const double dh = g(i, s) + dnext(i);
            const double r = c.r(i, s), z = c.z(i, s), n = c.n(i, s);
            const double dn_pre = dh * (1.0 - z) * (1.0 - n * n);
            const double dz_pre = dh * (c.hprev(i, s) - n) * z * (1.0 - z);
            const double dr_pre = dn_pre * c.ghn(i, s) * r * (1.0 - r);
            dgx(i, s) = dr_pre;
            dgx(h + i, s) = dz_pre;
            dgx(2 * h + i, s) = dn_pre;
            dgh_col(i) = dr_pre;
            dgh_col(h + i) = dz_pre;
            dgh_col(2 * h + i) = dn_pre * r;
            dnext(i) = dh * z;
          }
          dgh.col(s) = dgh_col;
          dnext.noalias() += whm.transpose() * dgh_col;
        }
        if (t.requires_grad(ix))
          t.accumulate(ix, Matrix(t.value(iwx).transpose() * dgx));
        if (t.requires_grad(iwx))
          t.accumulate(iwx, Matrix(dgx * t.value(ix).transpose()));
        if (t.requires_grad(ibx)) t.accumulate(ibx, Matrix(dgx.rowwise().sum()));
        if (t.requires_grad(iwh))
          t.accumulate(iwh, Matrix(dgh * c.hprev.transpose()));
        if (t.requires_grad(ibh)) t.accumulate(ibh, Matrix(dgh.rowwise().sum()));
      });
}

Var complex_mul(Var a, Var b) {
  same_shape(a, b, "complex_mul shape");
  Tape& tape = *a.tape();
  const auto ia = a.id(), ib = b.id();
  return tape.record(
      kernels::omp::complex_mul(a.value(), b.value()), {a, b},
      [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& av = t.value(ia);
        const Matrix& bv = t.value(ib);
        const long f = g.rows() / 2;
        // d(a*b)/da applied to g is g * conj(b); likewise for b.
        auto conj_mul = [f](const Matrix& grad, const Matrix& other) {
          Matrix out(grad.rows(), grad.cols());
          out.topRows(f) = grad.topRows(f).cwiseProduct(other.topRows(f)) +
                           grad.bottomRows(f).cwiseProduct(other.bottomRows(f));
          out.bottomRows(f) =
              grad.bottomRows(f).cwiseProduct(other.topRows(f)) -
              grad.topRows(f).cwiseProduct(other.bottomRows(f));
          return out;
        };
        if (t.requires_grad(ia)) t.accumulate(ia, conj_mul(g, bv));
        if (t.requires_grad(ib)) t.accumulate(ib, conj_mul(g, av));
      });
}

Var complex_abs(Var x, double eps) {
  require(x.rows() % 2 == 0, ErrorKind::kShape, "complex stack needs 2F rows");
  Tape& tape = *x.tape();
  const auto ix = x.id();
  const long f = x.rows() / 2;
  const Matrix& v = x.value();
  Matrix out = (v.topRows(f).array().square() +
                v.bottomRows(f).array().square() + eps)
                   .sqrt()
                   .matrix();
  return tape.record(std::move(out), {x}, [ix, f](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& m = t.value(self);
    const Matrix& v = t.value(ix);
    Matrix d(2 * f, g.cols());
    d.topRows(f) = (g.array() * v.topRows(f).array() / m.array()).matrix();
    d.bottomRows(f) =
        (g.array() * v.bottomRows(f).array() / m.array()).matrix();
    t.accumulate(ix, std::move(d));
  });
}

Var magnitude_power(Var x, double gamma) {
  Tape& tape = *x.tape();
  const auto ix = x.id();
  return tape.record(signal::magnitude_power(x.value(), gamma), {x},
                     [ix, gamma](Tape& t, std::size_t self) {
                       t.accumulate(ix, signal::magnitude_power_vjp(
                                            t.value(ix), gamma, t.grad(self)));
                     });
}

Var stft(Var sig, const signal::SpectroConfig& cfg) {
  require(sig.cols() == 1, ErrorKind::kShape, "stft expects a column signal");
  Tape& tape = *sig.tape();
  const auto ix = sig.id();
  const auto len = static_cast<std::size_t>(sig.rows());
  return tape.record(signal::stft_matrix(to_vector(sig.value()), cfg), {sig},
                     [ix, cfg, len](Tape& t, std::size_t self) {
                       t.accumulate(ix, to_column(signal::stft_adjoint(
                                            t.grad(self), cfg, len)));
                     });
}

Var istft(Var spec, const signal::SpectroConfig& cfg, std::size_t out_len) {
  Tape& tape = *spec.tape();
  const auto ix = spec.id();
  const int frames = static_cast<int>(spec.cols());
  return tape.record(
      to_column(signal::istft_matrix(spec.value(), cfg, out_len)), {spec},
      [ix, cfg, frames](Tape& t, std::size_t self) {
        t.accumulate(ix, signal::istft_adjoint(to_vector(t.grad(self)), cfg,
                                               frames));
      });
}

}  // namespace lgtse::ad
