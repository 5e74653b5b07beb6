// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sbvqa {

void Tape::backward(const TracedTensor& loss, double seed) {
  if (nodes_.empty()) throw TensorError("backward called without a recorded forward pass");
  if (loss.value->numel() != 1) throw TensorError("loss must be a scalar");
  loss.grad->data[0] += seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

namespace {

void check_vector(const TracedTensor& t, const char* what) {
  if (t.value->rank() != 1) throw TensorError(std::string(what) + " must be rank 1");
}

double apply_act(Activation act, double x) {
  switch (act) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

// Derivative expressed through the activation output y.
double act_grad_from_output(Activation act, double y) {
  switch (act) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kRelu: return y > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TracedTensor conv1d(Tape* tape, const TracedTensor& input, const TracedTensor& kernels,
                    const TracedTensor& bias, std::size_t stride, std::size_t pad_left,
                    std::size_t pad_right) {
  if (input.value->rank() != 2) throw TensorError("conv1d input must be [L, Cin]");
  if (kernels.value->rank() != 3) throw TensorError("conv1d kernels must be [K, Cin, Cout]");
  const std::size_t len = input.value->dim(0);
  const std::size_t cin = input.value->dim(1);
  const std::size_t k = kernels.value->dim(0);
  const std::size_t cout = kernels.value->dim(2);
  if (kernels.value->dim(1) != cin)
    throw TensorError("conv1d channel mismatch: input has " + std::to_string(cin) +
                      ", kernels expect " + std::to_string(kernels.value->dim(1)));
  if (bias.value->rank() != 1 || bias.value->dim(0) != cout)
    throw TensorError("conv1d bias shape mismatch");
  if (stride < 1) throw TensorError("conv1d stride must be >= 1");
  if (len + pad_left + pad_right < k) throw TensorError("conv1d input shorter than kernel");

  const std::size_t out_len = (len + pad_left + pad_right - k) / stride + 1;
  TracedTensor out = TracedTensor::from(Tensor({out_len, cout}));

  const double* in = input.value->data.data();
  const double* ker = kernels.value->data.data();
  const double* b = bias.value->data.data();
  double* o = out.value->data.data();

  for (std::size_t l = 0; l < out_len; ++l) {
    double* orow = o + l * cout;
    for (std::size_t c = 0; c < cout; ++c) orow[c] = b[c];
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(l * stride) -
                                static_cast<std::ptrdiff_t>(pad_left);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(kk);
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
      const double* irow = in + static_cast<std::size_t>(pos) * cin;
      const double* krow = ker + kk * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double a = irow[ci];
        if (a == 0.0) continue;
        const double* kvec = krow + ci * cout;
        for (std::size_t c = 0; c < cout; ++c) orow[c] += a * kvec[c];
      }
    }
  }

  if (tape) {
    tape->record([input, kernels, bias, stride, pad_left, out, len, cin, k, cout, out_len]() {
      const double* in = input.value->data.data();
      const double* ker = kernels.value->data.data();
      const double* og = out.grad->data.data();
      double* ig = input.grad->data.data();
      double* kg = kernels.grad->data.data();
      double* bg = bias.grad->data.data();
      for (std::size_t l = 0; l < out_len; ++l) {
        const double* grow = og + l * cout;
        for (std::size_t c = 0; c < cout; ++c) bg[c] += grow[c];
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(l * stride) -
                                    static_cast<std::ptrdiff_t>(pad_left);
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(kk);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
          const double* irow = in + static_cast<std::size_t>(pos) * cin;
          double* igrow = ig + static_cast<std::size_t>(pos) * cin;
          const double* krow = ker + kk * cin * cout;
          double* kgrow = kg + kk * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double a = irow[ci];
            const double* kvec = krow + ci * cout;
            double* kgvec = kgrow + ci * cout;
            double acc = 0.0;
            for (std::size_t c = 0; c < cout; ++c) {
              const double g = grow[c];
              acc += kvec[c] * g;
              kgvec[c] += a * g;
            }
            igrow[ci] += acc;
          }
        }
      }
    });
  }
  return out;
}

TracedTensor maxpool1d(Tape* tape, const TracedTensor& input, std::size_t size,
                       std::size_t stride) {
  if (input.value->rank() != 2) throw TensorError("maxpool1d input must be [L, C]");
  const std::size_t len = input.value->dim(0);
  const std::size_t ch = input.value->dim(1);
  if (len < size) throw TensorError("maxpool1d input shorter than window");
  if (stride < 1) throw TensorError("maxpool1d stride must be >= 1");
  const std::size_t out_len = (len - size) / stride + 1;

  TracedTensor out = TracedTensor::from(Tensor({out_len, ch}));
  // First maximum wins on ties so the adjoint routing is deterministic.
  auto argmax = std::make_shared<std::vector<std::size_t>>(out_len * ch);

  const double* in = input.value->data.data();
  double* o = out.value->data.data();
  for (std::size_t l = 0; l < out_len; ++l) {
    const std::size_t start = l * stride;
    for (std::size_t c = 0; c < ch; ++c) {
      std::size_t best = start;
      double m = in[start * ch + c];
      for (std::size_t w = 1; w < size; ++w) {
        const double v = in[(start + w) * ch + c];
        if (v > m) {
          m = v;
          best = start + w;
        }
      }
      o[l * ch + c] = m;
      (*argmax)[l * ch + c] = best;
    }
  }

  if (tape) {
    tape->record([input, out, argmax, ch, out_len]() {
      double* ig = input.grad->data.data();
      const double* og = out.grad->data.data();
      for (std::size_t i = 0; i < out_len * ch; ++i)
        ig[(*argmax)[i] * ch + (i % ch)] += og[i];
    });
  }
  return out;
}

TracedTensor lstm_encode(Tape* tape, const TracedTensor& seq, const std::vector<bool>* mask,
                         const LstmParams& params) {
  if (seq.value->rank() != 2) throw TensorError("lstm_encode expects [T, D]");
  const std::size_t steps = seq.value->dim(0);
  const std::size_t dim = seq.value->dim(1);
  if (params.w_in.value->rank() != 2 || params.w_in.value->dim(0) != dim)
    throw TensorError("lstm w_in shape mismatch");
  const std::size_t hidden = params.w_in.value->dim(1) / 4;
  if (params.w_in.value->dim(1) != 4 * hidden ||
      params.w_rec.value->shape != std::vector<std::size_t>{hidden, 4 * hidden} ||
      params.bias.value->shape != std::vector<std::size_t>{4 * hidden})
    throw TensorError("lstm parameter shapes inconsistent");
  if (mask && mask->size() != steps) throw TensorError("lstm mask length mismatch");

  std::size_t active = 0;
  for (std::size_t t = 0; t < steps; ++t)
    if (!mask || (*mask)[t]) ++active;
  if (active == 0) throw TensorError("lstm_encode: sequence empty after masking");

  // Per-step caches for the adjoint: gate outputs and cell states.
  struct Cache {
    std::vector<double> gates;  // i, f, g, o per step, post-activation
    std::vector<double> cell;   // c_t per step
    std::vector<double> hid;    // h_t per step
    std::vector<bool> live;
  };
  auto cache = std::make_shared<Cache>();
  cache->gates.assign(steps * 4 * hidden, 0.0);
  cache->cell.assign(steps * hidden, 0.0);
  cache->hid.assign(steps * hidden, 0.0);
  cache->live.assign(steps, true);

  const double* x = seq.value->data.data();
  const double* wi = params.w_in.value->data.data();
  const double* wr = params.w_rec.value->data.data();
  const double* b = params.bias.value->data.data();

  std::vector<double> h(hidden, 0.0), c(hidden, 0.0), pre(4 * hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    const bool live = !mask || (*mask)[t];
    cache->live[t] = live;
    if (live) {
      for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] = b[j];
      const double* xr = x + t * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        const double a = xr[d];
        if (a == 0.0) continue;
        const double* w = wi + d * 4 * hidden;
        for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] += a * w[j];
      }
      for (std::size_t d = 0; d < hidden; ++d) {
        const double a = h[d];
        if (a == 0.0) continue;
        const double* w = wr + d * 4 * hidden;
        for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] += a * w[j];
      }
      double* gt = cache->gates.data() + t * 4 * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const double gi = sigmoid(pre[j]);
        const double gf = sigmoid(pre[hidden + j]);
        const double gg = std::tanh(pre[2 * hidden + j]);
        const double go = sigmoid(pre[3 * hidden + j]);
        c[j] = gf * c[j] + gi * gg;
        h[j] = go * std::tanh(c[j]);
        gt[j] = gi;
        gt[hidden + j] = gf;
        gt[2 * hidden + j] = gg;
        gt[3 * hidden + j] = go;
      }
    }
    std::copy(c.begin(), c.end(), cache->cell.begin() + t * hidden);
    std::copy(h.begin(), h.end(), cache->hid.begin() + t * hidden);
  }

  TracedTensor out = TracedTensor::from(Tensor({hidden}, h));

  if (tape) {
    TracedTensor w_in = params.w_in, w_rec = params.w_rec, bias = params.bias;
    tape->record([seq, w_in, w_rec, bias, out, cache, steps, dim, hidden]() {
      const double* x = seq.value->data.data();
      const double* wi = w_in.value->data.data();
      const double* wr = w_rec.value->data.data();
      double* xg = seq.grad->data.data();
      double* wig = w_in.grad->data.data();
      double* wrg = w_rec.grad->data.data();
      double* bg = bias.grad->data.data();

      std::vector<double> dh(out.grad->data);
      std::vector<double> dc(hidden, 0.0), da(4 * hidden);
      for (std::size_t ti = steps; ti-- > 0;) {
        if (!cache->live[ti]) continue;  // masked steps are identity on state
        const double* gt = cache->gates.data() + ti * 4 * hidden;
        const double* ct = cache->cell.data() + ti * hidden;
        const double* cprev = ti > 0 ? cache->cell.data() + (ti - 1) * hidden : nullptr;
        for (std::size_t j = 0; j < hidden; ++j) {
          const double gi = gt[j], gf = gt[hidden + j], gg = gt[2 * hidden + j],
                       go = gt[3 * hidden + j];
          const double tc = std::tanh(ct[j]);
          const double dout = dh[j];
          const double dcell = dc[j] + dout * go * (1.0 - tc * tc);
          const double cp = cprev ? cprev[j] : 0.0;
          da[j] = dcell * gg * gi * (1.0 - gi);                  // input gate
          da[hidden + j] = dcell * cp * gf * (1.0 - gf);         // forget gate
          da[2 * hidden + j] = dcell * gi * (1.0 - gg * gg);     // candidate
          da[3 * hidden + j] = dout * tc * go * (1.0 - go);      // output gate
          dc[j] = dcell * gf;
        }
        for (std::size_t j = 0; j < 4 * hidden; ++j) bg[j] += da[j];
        const double* xr = x + ti * dim;
        double* xgr = xg + ti * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          const double* w = wi + d * 4 * hidden;
          double* wg = wig + d * 4 * hidden;
          const double a = xr[d];
          double acc = 0.0;
          for (std::size_t j = 0; j < 4 * hidden; ++j) {
            acc += w[j] * da[j];
            wg[j] += a * da[j];
          }
          xgr[d] += acc;
        }
        // Previous live step's hidden state feeds the recurrent term.
        std::ptrdiff_t prev = static_cast<std::ptrdiff_t>(ti) - 1;
        while (prev >= 0 && !cache->live[static_cast<std::size_t>(prev)]) --prev;
        std::fill(dh.begin(), dh.end(), 0.0);
        const double* hprev =
            prev >= 0 ? cache->hid.data() + static_cast<std::size_t>(prev) * hidden : nullptr;
        for (std::size_t d = 0; d < hidden; ++d) {
          const double* w = wr + d * 4 * hidden;
          double* wg = wrg + d * 4 * hidden;
          const double a = hprev ? hprev[d] : 0.0;
          double acc = 0.0;
          for (std::size_t j = 0; j < 4 * hidden; ++j) {
            acc += w[j] * da[j];
            wg[j] += a * da[j];
          }
          dh[d] = acc;
        }
      }
    });
  }
  return out;
}

TracedTensor dense(Tape* tape, const TracedTensor& x, const TracedTensor& w,
                   const TracedTensor& b, Activation act) {
  check_vector(x, "dense input");
  if (w.value->rank() != 2) throw TensorError("dense weight must be [D, M]");
  const std::size_t d = x.value->dim(0);
  const std::size_t m = w.value->dim(1);
  if (w.value->dim(0) != d)
    throw TensorError("dense shape mismatch: input " + std::to_string(d) + " vs weight " +
                      shape_string(w.value->shape));
  if (b.value->rank() != 1 || b.value->dim(0) != m) throw TensorError("dense bias mismatch");

  TracedTensor out = TracedTensor::from(Tensor({m}));
  double* o = out.value->data.data();
  const double* xv = x.value->data.data();
  const double* wv = w.value->data.data();
  for (std::size_t j = 0; j < m; ++j) o[j] = b.value->data[j];
  for (std::size_t i = 0; i < d; ++i) {
    const double a = xv[i];
    if (a == 0.0) continue;
    const double* wr = wv + i * m;
    for (std::size_t j = 0; j < m; ++j) o[j] += a * wr[j];
  }
  for (std::size_t j = 0; j < m; ++j) o[j] = apply_act(act, o[j]);

  if (tape) {
    tape->record([x, w, b, out, act, d, m]() {
      const double* y = out.value->data.data();
      const double* og = out.grad->data.data();
      std::vector<double> dpre(m);
      for (std::size_t j = 0; j < m; ++j) dpre[j] = og[j] * act_grad_from_output(act, y[j]);
      const double* xv = x.value->data.data();
      const double* wv = w.value->data.data();
      double* xg = x.grad->data.data();
      double* wg = w.grad->data.data();
      double* bgr = b.grad->data.data();
      for (std::size_t j = 0; j < m; ++j) bgr[j] += dpre[j];
      for (std::size_t i = 0; i < d; ++i) {
        const double* wr = wv + i * m;
        double* wgr = wg + i * m;
        const double a = xv[i];
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          acc += wr[j] * dpre[j];
          wgr[j] += a * dpre[j];
        }
        xg[i] += acc;
      }
    });
  }
  return out;
}

TracedTensor embedding_lookup(Tape* tape, const std::vector<int>& indices,
                              const TracedTensor& table, std::vector<bool>* mask_out) {
  if (table.value->rank() != 2) throw TensorError("embedding table must be [V, E]");
  const std::size_t v = table.value->dim(0);
  const std::size_t e = table.value->dim(1);
  if (indices.empty()) throw TensorError("embedding_lookup: empty index sequence");
  for (int idx : indices)
    if (idx < 0 || static_cast<std::size_t>(idx) >= v)
      throw TensorError("embedding index " + std::to_string(idx) + " out of range [0, " +
                        std::to_string(v) + ")");

  const std::size_t steps = indices.size();
  TracedTensor out = TracedTensor::from(Tensor({steps, e}));
  if (mask_out) mask_out->assign(steps, true);
  for (std::size_t t = 0; t < steps; ++t) {
    if (indices[t] == 0) {
      if (mask_out) (*mask_out)[t] = false;
      continue;  // masked padding / OOV: row stays zero, excluded downstream
    }
    const double* row = table.value->data.data() + static_cast<std::size_t>(indices[t]) * e;
    std::copy(row, row + e, out.value->data.begin() + t * e);
  }

  if (tape) {
    auto idx = std::make_shared<std::vector<int>>(indices);
    tape->record([table, out, idx, e]() {
      const double* og = out.grad->data.data();
      double* tg = table.grad->data.data();
      for (std::size_t t = 0; t < idx->size(); ++t) {
        const int i = (*idx)[t];
        if (i == 0) continue;
        double* row = tg + static_cast<std::size_t>(i) * e;
        const double* g = og + t * e;
        for (std::size_t j = 0; j < e; ++j) row[j] += g[j];
      }
    });
  }
  return out;
}

TracedTensor elementwise_mul(Tape* tape, const TracedTensor& a, const TracedTensor& b) {
  if (!a.value->same_shape(*b.value))
    throw TensorError("elementwise_mul shape mismatch: " + shape_string(a.value->shape) +
                      " vs " + shape_string(b.value->shape));
  TracedTensor out = TracedTensor::from(Tensor(a.value->shape));
  const std::size_t n = a.value->numel();
  for (std::size_t i = 0; i < n; ++i) out.value->data[i] = a.value->data[i] * b.value->data[i];
  if (tape) {
    tape->record([a, b, out, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        a.grad->data[i] += out.grad->data[i] * b.value->data[i];
        b.grad->data[i] += out.grad->data[i] * a.value->data[i];
      }
    });
  }
  return out;
}

TracedTensor relu(Tape* tape, const TracedTensor& x) {
  TracedTensor out = TracedTensor::from(Tensor(x.value->shape));
  const std::size_t n = x.value->numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.value->data[i];
    out.value->data[i] = v > 0.0 ? v : 0.0;
  }
  if (tape) {
    tape->record([x, out, n]() {
      for (std::size_t i = 0; i < n; ++i)
        if (out.value->data[i] > 0.0) x.grad->data[i] += out.grad->data[i];
    });
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw TensorError("softmax expects a vector");
  const std::size_t n = logits.numel();
  Tensor probs({n});
  double mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (std::size_t i = 0; i < n; ++i) probs[i] /= sum;
  return probs;
}

SoftmaxXent softmax_xent(Tape* tape, const TracedTensor& logits, std::size_t label) {
  check_vector(logits, "softmax logits");
  const std::size_t n = logits.value->numel();
  if (label >= n) throw TensorError("softmax_xent label out of range");
  Tensor probs = softmax(*logits.value);
  const double loss = -std::log(std::max(probs[label], 1e-300));
  TracedTensor out = TracedTensor::from(Tensor::scalar(loss));

  if (tape) {
    auto p = std::make_shared<Tensor>(probs);
    tape->record([logits, out, p, label, n]() {
      const double g = out.grad->data[0];
      for (std::size_t i = 0; i < n; ++i)
        logits.grad->data[i] += g * (p->data[i] - (i == label ? 1.0 : 0.0));
    });
  }
  return {out, std::move(probs)};
}

TracedTensor mean_of(Tape* tape, const std::vector<TracedTensor>& scalars) {
  if (scalars.empty()) throw TensorError("mean_of: empty input");
  double sum = 0.0;
  for (const auto& s : scalars) {
    if (s.value->numel() != 1) throw TensorError("mean_of expects scalars");
    sum += s.value->data[0];
  }
  const double inv = 1.0 / static_cast<double>(scalars.size());
  TracedTensor out = TracedTensor::from(Tensor::scalar(sum * inv));
  if (tape) {
    auto items = std::make_shared<std::vector<TracedTensor>>(scalars);
    tape->record([items, out, inv]() {
      for (auto& s : *items) s.grad->data[0] += out.grad->data[0] * inv;
    });
  }
  return out;
}

}  // namespace sbvqa
