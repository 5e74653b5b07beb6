// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over the small set of operations the two
// models are assembled from. Forward calls record adjoint closures on a
// Tape; Tape::backward replays them in reverse order.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "sbvqa/tensor.hpp"

namespace sbvqa {

/// A tensor paired with its gradient buffer. Both buffers are shared so
/// that adjoint closures recorded on the tape keep them alive.
struct TracedTensor {
  std::shared_ptr<Tensor> value;
  std::shared_ptr<Tensor> grad;

  TracedTensor() = default;

  static TracedTensor from(Tensor t) {
    TracedTensor out;
    out.value = std::make_shared<Tensor>(std::move(t));
    out.grad = std::make_shared<Tensor>(out.value->shape, 0.0);
    return out;
  }

  Tensor& v() { return *value; }
  const Tensor& v() const { return *value; }
  Tensor& g() { return *grad; }
  const Tensor& g() const { return *grad; }
};

/// Ordered record of executed operations. Backward visits every recorded
/// node exactly once, in reverse order of execution.
class Tape {
 public:
  void record(std::function<void()> adjoint) { nodes_.push_back(std::move(adjoint)); }

  /// Seeds the loss gradient and propagates adjoints through the record.
  /// Throws if no forward pass was recorded.
  void backward(const TracedTensor& loss, double seed = 1.0);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

enum class Activation { kIdentity, kTanh, kRelu };

/// input [L, Cin], kernels [K, Cin, Cout], bias [Cout] -> [L', Cout] with
/// L' = floor((L + pad_left + pad_right - K) / stride) + 1. Padding
/// positions contribute zeros.
TracedTensor conv1d(Tape* tape, const TracedTensor& input, const TracedTensor& kernels,
                    const TracedTensor& bias, std::size_t stride, std::size_t pad_left,
                    std::size_t pad_right);

/// input [L, C] -> [floor((L - size) / stride) + 1, C], per-channel window
/// maxima over valid windows only.
TracedTensor maxpool1d(Tape* tape, const TracedTensor& input, std::size_t size,
                       std::size_t stride);

struct LstmParams {
  TracedTensor w_in;   // [D, 4H], gate order i, f, g, o
  TracedTensor w_rec;  // [H, 4H]
  TracedTensor bias;   // [4H]
};

/// Runs a standard LSTM cell over seq [T, D] and returns the final hidden
/// state [H]. Positions where mask is false leave the state unchanged.
/// Throws if every step is masked.
TracedTensor lstm_encode(Tape* tape, const TracedTensor& seq, const std::vector<bool>* mask,
                         const LstmParams& params);

/// activation(x . W + b); x [D], W [D, M], b [M].
TracedTensor dense(Tape* tape, const TracedTensor& x, const TracedTensor& w,
                   const TracedTensor& b, Activation act);

/// Gathers rows of table [V, E] into [T, E]. Index 0 marks a masked
/// position: the output row is zero and mask_out (if given) is false there.
TracedTensor embedding_lookup(Tape* tape, const std::vector<int>& indices,
                              const TracedTensor& table, std::vector<bool>* mask_out);

TracedTensor elementwise_mul(Tape* tape, const TracedTensor& a, const TracedTensor& b);

/// Elementwise max(x, 0), any shape.
TracedTensor relu(Tape* tape, const TracedTensor& x);

struct SoftmaxXent {
  TracedTensor loss;  // scalar
  Tensor probs;       // [C], sums to 1
};

/// Numerically stable softmax + cross-entropy against one label.
SoftmaxXent softmax_xent(Tape* tape, const TracedTensor& logits, std::size_t label);

/// Plain softmax of a raw logit vector (inference path).
Tensor softmax(const Tensor& logits);

/// Mean of scalar losses, for batch aggregation.
TracedTensor mean_of(Tape* tape, const std::vector<TracedTensor>& scalars);

}  // namespace sbvqa
