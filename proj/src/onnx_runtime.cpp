// Copyright 2026 The SlideSpin Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference CPU interpreter for the ONNX operator subset used by patch
// encoders. Float32 storage, double accumulation in reductions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "slidespin/error.hpp"
#include "slidespin/onnx.hpp"

namespace slidespin::onnx {

namespace {

using Shape = std::vector<std::int64_t>;

[[noreturn]] void op_error(const Node& n, const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch,
              n.op_type + " (" + (n.name.empty() ? n.outputs.front() : n.name) +
                  "): " + what);
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::int64_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::int64_t{1},
                         std::multiplies<>());
}

Shape strides_of(const Shape& s) {
  Shape st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) {
    st[i] = st[i + 1] * s[i + 1];
  }
  return st;
}

std::int64_t norm_axis(std::int64_t axis, std::size_t rank) {
  return axis < 0 ? axis + static_cast<std::int64_t>(rank) : axis;
}

const Tensor& require_float(const Node& n, const Tensor* t) {
  if (!t) op_error(n, "missing input");
  if (t->type != ElemType::Float) op_error(n, "expected a float tensor");
  return *t;
}

Shape broadcast_shape(const Node& n, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      op_error(n, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `s` viewed inside broadcast shape `out` (0 on broadcast axes).
Shape broadcast_strides(const Shape& s, const Shape& out) {
  Shape st(out.size(), 0);
  const Shape own = strides_of(s);
  const std::size_t off = out.size() - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    st[off + i] = s[i] == 1 ? 0 : own[i];
  }
  return st;
}

Tensor binary(const Node& n, const Tensor& a, const Tensor& b,
              const std::function<float(float, float)>& f) {
  const Shape out_shape = broadcast_shape(n, a.shape, b.shape);
  const Shape sa = broadcast_strides(a.shape, out_shape);
  const Shape sb = broadcast_strides(b.shape, out_shape);
  const std::int64_t total = numel(out_shape);
  std::vector<float> out(static_cast<std::size_t>(total));
  Shape idx(out_shape.size(), 0);
  for (std::int64_t i = 0; i < total; ++i) {
    std::int64_t ia = 0, ib = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) {
      ia += idx[d] * sa[d];
      ib += idx[d] * sb[d];
    }
    out[static_cast<std::size_t>(i)] = f(a.floats[ia], b.floats[ib]);
    for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return Tensor::of_floats(out_shape, std::move(out));
}

Tensor unary(const Tensor& x, const std::function<float(float)>& f) {
  Tensor out = Tensor::of_floats(x.shape, x.floats);
  for (auto& v : out.floats) v = f(v);
  return out;
}

// out[M,N] = A[M,K] * B[K,N] with optional transposes.
void gemm_kernel(const float* a, const float* b, float* out, std::int64_t m,
                 std::int64_t k, std::int64_t nn, bool trans_a, bool trans_b) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < nn; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) {
        const float av = trans_a ? a[p * m + i] : a[i * k + p];
        const float bv = trans_b ? b[j * k + p] : b[p * nn + j];
        acc += static_cast<double>(av) * bv;
      }
      out[i * nn + j] = static_cast<float>(acc);
    }
  }
}

Tensor matmul(const Node& n, const Tensor& a, const Tensor& b) {
  if (a.shape.size() < 2 || b.shape.size() < 2) op_error(n, "rank-1 operands are not supported");
  const std::int64_t m = a.shape[a.shape.size() - 2];
  const std::int64_t k = a.shape.back();
  const std::int64_t kb = b.shape[b.shape.size() - 2];
  const std::int64_t nn = b.shape.back();
  if (k != kb) op_error(n, "inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
  Shape batch_a(a.shape.begin(), a.shape.end() - 2);
  Shape batch_b(b.shape.begin(), b.shape.end() - 2);
  if (!batch_b.empty() && batch_b != batch_a) op_error(n, "batched rhs must match lhs batch");
  const std::int64_t batches = numel(batch_a);
  Shape out_shape = batch_a;
  out_shape.push_back(m);
  out_shape.push_back(nn);
  std::vector<float> out(static_cast<std::size_t>(numel(out_shape)));
  for (std::int64_t bi = 0; bi < batches; ++bi) {
    const float* bp = b.floats.data() + (batch_b.empty() ? 0 : bi * k * nn);
    gemm_kernel(a.floats.data() + bi * m * k, bp, out.data() + bi * m * nn, m, k,
                nn, false, false);
  }
  return Tensor::of_floats(out_shape, std::move(out));
}

Tensor gemm(const Node& n, const Tensor& a, const Tensor& b, const Tensor* c) {
  if (a.shape.size() != 2 || b.shape.size() != 2) op_error(n, "Gemm needs 2-D operands");
  const bool ta = n.attr_int("transA", 0) != 0;
  const bool tb = n.attr_int("transB", 0) != 0;
  const float alpha = n.attr_float("alpha", 1.0f);
  const float beta = n.attr_float("beta", 1.0f);
  const std::int64_t m = ta ? a.shape[1] : a.shape[0];
  const std::int64_t k = ta ? a.shape[0] : a.shape[1];
  const std::int64_t kb = tb ? b.shape[1] : b.shape[0];
  const std::int64_t nn = tb ? b.shape[0] : b.shape[1];
  if (k != kb) op_error(n, "inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
  std::vector<float> out(static_cast<std::size_t>(m * nn));
  gemm_kernel(a.floats.data(), b.floats.data(), out.data(), m, k, nn, ta, tb);
  Tensor y = Tensor::of_floats({m, nn}, std::move(out));
  for (auto& v : y.floats) v *= alpha;
  if (c) {
    const Tensor& cc = require_float(n, c);
    Tensor scaled = unary(cc, [beta](float v) { return v * beta; });
    if (broadcast_shape(n, scaled.shape, y.shape) != y.shape) op_error(n, "C does not broadcast to output");
    y = binary(n, y, scaled, std::plus<float>());
  }
  return y;
}

struct Window {
  std::int64_t kh, kw, sh, sw, dh, dw, pt, pl, pb, pr;
};

Window window_of(const Node& n, std::int64_t kh, std::int64_t kw) {
  const auto auto_pad = n.attr("auto_pad");
  if (auto_pad && auto_pad->s != "NOTSET" && auto_pad->s != "VALID") {
    throw Error(ErrorCode::UnsupportedOperator,
                n.op_type + ": auto_pad=" + auto_pad->s + " is not supported");
  }
  if (n.attr_int("ceil_mode", 0) != 0) {
    throw Error(ErrorCode::UnsupportedOperator, n.op_type + ": ceil_mode is not supported");
  }
  Window w{kh, kw, 1, 1, 1, 1, 0, 0, 0, 0};
  const auto strides = n.attr_ints("strides");
  if (strides.size() == 2) { w.sh = strides[0]; w.sw = strides[1]; }
  const auto dil = n.attr_ints("dilations");
  if (dil.size() == 2) { w.dh = dil[0]; w.dw = dil[1]; }
  const auto pads = n.attr_ints("pads");
  if (pads.size() == 4) { w.pt = pads[0]; w.pl = pads[1]; w.pb = pads[2]; w.pr = pads[3]; }
  return w;
}

std::pair<std::int64_t, std::int64_t> window_out(const Node& n, const Window& w,
                                                 std::int64_t h, std::int64_t wd) {
  const std::int64_t oh = (h + w.pt + w.pb - w.dh * (w.kh - 1) - 1) / w.sh + 1;
  const std::int64_t ow = (wd + w.pl + w.pr - w.dw * (w.kw - 1) - 1) / w.sw + 1;
  if (oh < 1 || ow < 1) op_error(n, "window larger than input");
  return {oh, ow};
}

Tensor conv(const Node& n, const Tensor& x, const Tensor& wt, const Tensor* bias) {
  if (x.shape.size() != 4 || wt.shape.size() != 4) op_error(n, "only 2-D convolution is supported");
  const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const std::int64_t M = wt.shape[0], Cg = wt.shape[1];
  const std::int64_t group = n.attr_int("group", 1);
  if (group < 1 || C % group || M % group || C / group != Cg) {
    op_error(n, "channel/group mismatch " + shape_str(x.shape) + " vs " + shape_str(wt.shape));
  }
  const Window w = window_of(n, wt.shape[2], wt.shape[3]);
  const auto [OH, OW] = window_out(n, w, H, W);
  if (bias && (bias->type != ElemType::Float || bias->numel() != M)) op_error(n, "bias size");
  std::vector<float> out(static_cast<std::size_t>(N * M * OH * OW));
  const std::int64_t m_per_group = M / group;
  for (std::int64_t b = 0; b < N; ++b) {
    for (std::int64_t m = 0; m < M; ++m) {
      const std::int64_t g = m / m_per_group;
      for (std::int64_t oy = 0; oy < OH; ++oy) {
        for (std::int64_t ox = 0; ox < OW; ++ox) {
          double acc = bias ? bias->floats[m] : 0.0;
          for (std::int64_t c = 0; c < Cg; ++c) {
            const std::int64_t ic = g * Cg + c;
            for (std::int64_t ky = 0; ky < w.kh; ++ky) {
              const std::int64_t iy = oy * w.sh - w.pt + ky * w.dh;
              if (iy < 0 || iy >= H) continue;
              for (std::int64_t kx = 0; kx < w.kw; ++kx) {
                const std::int64_t ix = ox * w.sw - w.pl + kx * w.dw;
                if (ix < 0 || ix >= W) continue;
                acc += static_cast<double>(x.floats[((b * C + ic) * H + iy) * W + ix]) *
                       wt.floats[((m * Cg + c) * w.kh + ky) * w.kw + kx];
              }
            }
          }
          out[((b * M + m) * OH + oy) * OW + ox] = static_cast<float>(acc);
        }
      }
    }
  }
  return Tensor::of_floats({N, M, OH, OW}, std::move(out));
}

Tensor pool(const Node& n, const Tensor& x, bool is_max) {
  if (x.shape.size() != 4) op_error(n, "only 2-D pooling is supported");
  const auto kernel = n.attr_ints("kernel_shape");
  if (kernel.size() != 2) op_error(n, "kernel_shape must have 2 entries");
  const Window w = window_of(n, kernel[0], kernel[1]);
  const bool include_pad = n.attr_int("count_include_pad", 0) != 0;
  const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const auto [OH, OW] = window_out(n, w, H, W);
  std::vector<float> out(static_cast<std::size_t>(N * C * OH * OW));
  for (std::int64_t bc = 0; bc < N * C; ++bc) {
    const float* src = x.floats.data() + bc * H * W;
    for (std::int64_t oy = 0; oy < OH; ++oy) {
      for (std::int64_t ox = 0; ox < OW; ++ox) {
        double acc = is_max ? -INFINITY : 0.0;
        std::int64_t count = 0;
        for (std::int64_t ky = 0; ky < w.kh; ++ky) {
          const std::int64_t iy = oy * w.sh - w.pt + ky * w.dh;
          for (std::int64_t kx = 0; kx < w.kw; ++kx) {
            const std::int64_t ix = ox * w.sw - w.pl + kx * w.dw;
            const bool inside = iy >= 0 && iy < H && ix >= 0 && ix < W;
            if (!inside) {
              if (include_pad) ++count;
              continue;
            }
            const double v = src[iy * W + ix];
            acc = is_max ? std::max(acc, v) : acc + v;
            ++count;
          }
        }
        out[(bc * OH + oy) * OW + ox] =
            static_cast<float>(is_max ? acc : (count ? acc / count : 0.0));
      }
    }
  }
  return Tensor::of_floats({N, C, OH, OW}, std::move(out));
}

Tensor reduce_mean(const Node& n, const Tensor& x, std::vector<std::int64_t> axes) {
  const bool keep = n.attr_int("keepdims", 1) != 0;
  if (axes.empty()) {
    axes.resize(x.shape.size());
    std::iota(axes.begin(), axes.end(), 0);
  }
  std::vector<bool> reduced(x.shape.size(), false);
  for (auto a : axes) {
    const auto ax = norm_axis(a, x.shape.size());
    if (ax < 0 || ax >= static_cast<std::int64_t>(x.shape.size())) op_error(n, "axis out of range");
    reduced[ax] = true;
  }
  Shape kept_shape;
  for (std::size_t d = 0; d < x.shape.size(); ++d) kept_shape.push_back(reduced[d] ? 1 : x.shape[d]);
  const Shape kst = strides_of(kept_shape);
  std::vector<double> acc(static_cast<std::size_t>(numel(kept_shape)), 0.0);
  Shape idx(x.shape.size(), 0);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    std::int64_t o = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) o += (reduced[d] ? 0 : idx[d]) * kst[d];
    acc[o] += x.floats[i];
    for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
      if (++idx[d] < x.shape[d]) break;
      idx[d] = 0;
    }
  }
  const double count = static_cast<double>(x.numel()) / static_cast<double>(acc.size());
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / count);
  Shape out_shape;
  for (std::size_t d = 0; d < x.shape.size(); ++d) {
    if (!reduced[d]) out_shape.push_back(x.shape[d]);
    else if (keep) out_shape.push_back(1);
  }
  return Tensor::of_floats(out_shape, std::move(out));
}

Tensor transpose(const Node& n, const Tensor& x) {
  std::vector<std::int64_t> perm = n.attr_ints("perm");
  const std::size_t rank = x.shape.size();
  if (perm.empty()) {
    perm.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) perm[i] = static_cast<std::int64_t>(rank - 1 - i);
  }
  if (perm.size() != rank) op_error(n, "perm rank mismatch");
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.shape[perm[i]];
  const Shape in_st = strides_of(x.shape);
  std::vector<float> out(x.floats.size());
  Shape idx(rank, 0);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    std::int64_t src = 0;
    for (std::size_t d = 0; d < rank; ++d) src += idx[d] * in_st[perm[d]];
    out[i] = x.floats[src];
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return Tensor::of_floats(out_shape, std::move(out));
}

Tensor softmax(const Node& n, const Tensor& x) {
  const auto axis = norm_axis(n.attr_int("axis", -1), x.shape.size());
  if (axis < 0 || axis >= static_cast<std::int64_t>(x.shape.size())) op_error(n, "axis out of range");
  const std::int64_t len = x.shape[axis];
  const std::int64_t inner = numel(Shape(x.shape.begin() + axis + 1, x.shape.end()));
  const std::int64_t outer = x.numel() / (len * inner);
  Tensor y = Tensor::of_floats(x.shape, x.floats);
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      auto at = [&](std::int64_t j) -> float& { return y.floats[(o * len + j) * inner + in]; };
      float mx = at(0);
      for (std::int64_t j = 1; j < len; ++j) mx = std::max(mx, at(j));
      double sum = 0.0;
      for (std::int64_t j = 0; j < len; ++j) sum += std::exp(static_cast<double>(at(j)) - mx);
      for (std::int64_t j = 0; j < len; ++j) {
        at(j) = static_cast<float>(std::exp(static_cast<double>(at(j)) - mx) / sum);
      }
    }
  }
  return y;
}

Tensor concat(const Node& n, const std::vector<const Tensor*>& xs) {
  if (xs.empty()) op_error(n, "no inputs");
  const auto axis = norm_axis(n.attr_int("axis", 0), xs[0]->shape.size());
  Shape out_shape = xs[0]->shape;
  out_shape[axis] = 0;
  for (const Tensor* t : xs) {
    require_float(n, t);
    if (t->shape.size() != out_shape.size()) op_error(n, "rank mismatch");
    for (std::size_t d = 0; d < out_shape.size(); ++d) {
      if (static_cast<std::int64_t>(d) != axis && t->shape[d] != xs[0]->shape[d]) op_error(n, "shape mismatch");
    }
    out_shape[axis] += t->shape[axis];
  }
  const std::int64_t outer = numel(Shape(out_shape.begin(), out_shape.begin() + axis));
  const std::int64_t inner = numel(Shape(out_shape.begin() + axis + 1, out_shape.end()));
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(numel(out_shape)));
  for (std::int64_t o = 0; o < outer; ++o) {
    for (const Tensor* t : xs) {
      const std::int64_t chunk = t->shape[axis] * inner;
      out.insert(out.end(), t->floats.begin() + o * chunk, t->floats.begin() + (o + 1) * chunk);
    }
  }
  return Tensor::of_floats(out_shape, std::move(out));
}

Tensor constant_of(const Node& n) {
  if (const Attribute* a = n.attr("value"); a && !a->tensor.empty()) return a->tensor.front();
  if (const Attribute* a = n.attr("value_float")) return Tensor::of_floats({}, {a->f});
  if (const Attribute* a = n.attr("value_floats")) {
    return Tensor::of_floats({static_cast<std::int64_t>(a->floats.size())}, a->floats);
  }
  if (const Attribute* a = n.attr("value_int")) return Tensor::of_ints({}, {a->i});
  if (const Attribute* a = n.attr("value_ints")) {
    return Tensor::of_ints({static_cast<std::int64_t>(a->ints.size())}, a->ints);
  }
  throw Error(ErrorCode::UnsupportedOperator, "Constant without a supported value attribute");
}

}  // namespace

const std::vector<std::string>& Runtime::supported_ops() {
  static const std::vector<std::string> ops = {
      "Add", "AveragePool", "Concat", "Constant", "Conv", "Div", "Flatten",
      "Gemm", "GlobalAveragePool", "Identity", "MatMul", "MaxPool", "Mul",
      "ReduceMean", "Relu", "Reshape", "Sigmoid", "Softmax", "Sub", "Tanh",
      "Transpose"};
  return ops;
}

Runtime::Runtime(Model model) : model_(std::move(model)) {
  auto opset = model_.opsets.find("");
  if (opset == model_.opsets.end() || opset->second < 13) {
    throw Error(ErrorCode::UnsupportedOperator,
                "model must import the default ONNX opset at version >= 13");
  }
  const auto inputs = model_.runtime_inputs();
  if (inputs.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch,
                "encoder must have exactly one image input, found " +
                    std::to_string(inputs.size()));
  }
  input_ = inputs.front();
  if (model_.graph.outputs.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch,
                "encoder must have exactly one output, found " +
                    std::to_string(model_.graph.outputs.size()));
  }
  const auto& ops = supported_ops();
  for (const Node& n : model_.graph.nodes) {
    if (!n.domain.empty() && n.domain != "ai.onnx") {
      throw Error(ErrorCode::UnsupportedOperator, "custom domain '" + n.domain + "'");
    }
    if (std::find(ops.begin(), ops.end(), n.op_type) == ops.end()) {
      throw Error(ErrorCode::UnsupportedOperator, "operator " + n.op_type + " is not supported");
    }
  }
  for (auto& t : model_.graph.initializers) constants_[t.name] = t;
  model_.graph.initializers.clear();
  for (const Node& n : model_.graph.nodes) {
    if (n.op_type == "Constant") constants_[n.outputs.at(0)] = constant_of(n);
  }
}

Tensor Runtime::run(const Tensor& input) const {
  std::unordered_map<std::string, Tensor> values;
  values[input_->name] = input;
  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (name.empty()) return nullptr;
    if (auto it = values.find(name); it != values.end()) return &it->second;
    if (auto it = constants_.find(name); it != constants_.end()) return &it->second;
    return nullptr;
  };

  for (const Node& n : model_.graph.nodes) {
    if (n.op_type == "Constant") continue;
    auto in = [&](std::size_t i) -> const Tensor* {
      return i < n.inputs.size() ? lookup(n.inputs[i]) : nullptr;
    };
    auto fin = [&](std::size_t i) -> const Tensor& { return require_float(n, in(i)); };
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (!n.inputs[i].empty() && !lookup(n.inputs[i])) {
        op_error(n, "undefined input '" + n.inputs[i] + "'");
      }
    }

    Tensor y;
    const std::string& op = n.op_type;
    if (op == "Identity") {
      if (!in(0)) op_error(n, "missing input");
      y = *in(0);
    } else if (op == "Relu") {
      y = unary(fin(0), [](float v) { return v > 0.0f ? v : 0.0f; });
    } else if (op == "Sigmoid") {
      y = unary(fin(0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
    } else if (op == "Tanh") {
      y = unary(fin(0), [](float v) { return std::tanh(v); });
    } else if (op == "Add") {
      y = binary(n, fin(0), fin(1), std::plus<float>());
    } else if (op == "Sub") {
      y = binary(n, fin(0), fin(1), std::minus<float>());
    } else if (op == "Mul") {
      y = binary(n, fin(0), fin(1), std::multiplies<float>());
    } else if (op == "Div") {
      y = binary(n, fin(0), fin(1), std::divides<float>());
    } else if (op == "MatMul") {
      y = matmul(n, fin(0), fin(1));
    } else if (op == "Gemm") {
      y = gemm(n, fin(0), fin(1), in(2));
    } else if (op == "Conv") {
      y = conv(n, fin(0), fin(1), in(2));
    } else if (op == "MaxPool" || op == "AveragePool") {
      y = pool(n, fin(0), op == "MaxPool");
    } else if (op == "GlobalAveragePool") {
      const Tensor& x = fin(0);
      if (x.shape.size() < 3) op_error(n, "needs rank >= 3");
      std::vector<std::int64_t> axes;
      for (std::size_t d = 2; d < x.shape.size(); ++d) axes.push_back(static_cast<std::int64_t>(d));
      Node keep = n;
      keep.attributes.clear();
      y = reduce_mean(keep, x, axes);
    } else if (op == "ReduceMean") {
      std::vector<std::int64_t> axes = n.attr_ints("axes");
      if (const Tensor* a = in(1)) {
        if (a->type != ElemType::Int64) op_error(n, "axes must be int64");
        axes = a->ints;
      }
      if (axes.empty() && n.attr_int("noop_with_empty_axes", 0) != 0) {
        y = fin(0);
      } else {
        y = reduce_mean(n, fin(0), axes);
      }
    } else if (op == "Flatten") {
      const Tensor& x = fin(0);
      const auto axis = norm_axis(n.attr_int("axis", 1), x.shape.size());
      if (axis < 0 || axis > static_cast<std::int64_t>(x.shape.size())) op_error(n, "axis out of range");
      const std::int64_t outer = numel(Shape(x.shape.begin(), x.shape.begin() + axis));
      y = Tensor::of_floats({outer, x.numel() / std::max<std::int64_t>(outer, 1)}, x.floats);
    } else if (op == "Reshape") {
      const Tensor& x = fin(0);
      const Tensor* s = in(1);
      if (!s || s->type != ElemType::Int64) op_error(n, "shape must be an int64 tensor");
      Shape shape = s->ints;
      std::int64_t known = 1;
      int infer = -1;
      for (std::size_t d = 0; d < shape.size(); ++d) {
        if (shape[d] == 0 && d < x.shape.size()) shape[d] = x.shape[d];
        if (shape[d] == -1) {
          if (infer >= 0) op_error(n, "more than one -1 in shape");
          infer = static_cast<int>(d);
        } else {
          known *= shape[d];
        }
      }
      if (infer >= 0) shape[infer] = known ? x.numel() / known : 0;
      if (numel(shape) != x.numel()) {
        op_error(n, "cannot reshape " + shape_str(x.shape) + " to " + shape_str(shape));
      }
      y = Tensor::of_floats(shape, x.floats);
    } else if (op == "Transpose") {
      y = transpose(n, fin(0));
    } else if (op == "Softmax") {
      y = softmax(n, fin(0));
    } else if (op == "Concat") {
      std::vector<const Tensor*> xs;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) xs.push_back(in(i));
      y = concat(n, xs);
    }
    values[n.outputs.at(0)] = std::move(y);
  }

  const std::string& out_name = model_.graph.outputs.front().name;
  const Tensor* out = lookup(out_name);
  if (!out) throw Error(ErrorCode::ShapeMismatch, "graph output '" + out_name + "' was never produced");
  Tensor result = *out;
  result.name = out_name;
  return result;
}

}  // namespace slidespin::onnx
