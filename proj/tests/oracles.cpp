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

#include "oracles.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>

#include "support.hpp"

namespace slidespin::oracle {

using boost::multiprecision::cpp_int;

int otsu(const GrayHistogram& h) {
  // Between-class variance up to the shared 1/N^2 factor:
  // n0*n1*(s0/n0 - s1/n1)^2 = (s0*n1 - s1*n0)^2 / (n0*n1), compared by
  // cross-multiplication. Each side is summed from scratch.
  int best = 0;
  cpp_int best_num = 0;
  cpp_int best_den = 1;
  for (int t = 0; t < 256; ++t) {
    std::int64_t n0 = 0, s0 = 0, n1 = 0, s1 = 0;
    for (int v = 0; v < 256; ++v) {
      const auto c = static_cast<std::int64_t>(h.counts[v]);
      if (v <= t) {
        n0 += c;
        s0 += c * v;
      } else {
        n1 += c;
        s1 += c * v;
      }
    }
    if (n0 == 0 || n1 == 0) continue;  // variance undefined, treated as 0
    const cpp_int d = cpp_int(s0) * n1 - cpp_int(s1) * n0;
    const cpp_int num = d * d;
    const cpp_int den = cpp_int(n0) * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best = t;
    }
  }
  return best;
}

std::size_t plan_count(const TissueMask& mask, std::int64_t width, std::int64_t height,
                       std::int64_t side, std::int64_t stride, double threshold) {
  std::size_t count = 0;
  for (std::int64_t y = 0; y + side <= height; y += stride) {
    for (std::int64_t x = 0; x + side <= width; x += stride) {
      // Mask pixels touched by the rect: [floor(x/s), ceil((x+side)/s)).
      const long mx0 = std::max(0L, static_cast<long>(std::floor(x / mask.scale_x)));
      const long my0 = std::max(0L, static_cast<long>(std::floor(y / mask.scale_y)));
      const long mx1 =
          std::min<long>(mask.width, static_cast<long>(std::ceil((x + side) / mask.scale_x)));
      const long my1 =
          std::min<long>(mask.height, static_cast<long>(std::ceil((y + side) / mask.scale_y)));
      long on = 0;
      long total = 0;
      for (long my = my0; my < my1; ++my) {
        for (long mx = mx0; mx < mx1; ++mx) {
          ++total;
          on += mask.bits[static_cast<std::size_t>(my * mask.width + mx)];
        }
      }
      const double fraction = total == 0 ? 0.0 : static_cast<double>(on) / total;
      if (fraction >= threshold) ++count;
    }
  }
  return count;
}

MilOutput mil_forward(const AggregatorWeights& w, const EmbeddingMatrix& h) {
  const int n = static_cast<int>(h.rows);
  const int D = w.dim, L = w.hidden, C = w.num_classes;
  auto V = [&](int l, int d) { return static_cast<long double>(w.V[l * D + d]); };
  auto U = [&](int l, int d) { return static_cast<long double>(w.U[l * D + d]); };
  auto H = [&](int k, int d) { return static_cast<long double>(h.values[k * D + d]); };

  std::vector<long double> e(n);
  for (int k = 0; k < n; ++k) {
    long double score = 0;
    for (int l = 0; l < L; ++l) {
      long double pre = 0;
      for (int d = 0; d < D; ++d) pre += V(l, d) * H(k, d);
      long double act = std::tanh(pre);
      if (w.attention == AttentionKind::Gated) {
        long double gate = 0;
        for (int d = 0; d < D; ++d) gate += U(l, d) * H(k, d);
        act *= 1.0L / (1.0L + std::exp(-gate));
      }
      score += w.w[l] * act;
    }
    e[k] = score;
  }
  long double denom = 0;
  for (int k = 0; k < n; ++k) denom += std::exp(e[k]);

  MilOutput out;
  out.attention.resize(n);
  for (int k = 0; k < n; ++k) out.attention[k] = std::exp(e[k]) / denom;
  std::vector<long double> z(D, 0);
  for (int d = 0; d < D; ++d) {
    for (int k = 0; k < n; ++k) z[d] += out.attention[k] * H(k, d);
  }
  out.logits.resize(C);
  for (int c = 0; c < C; ++c) {
    long double v = w.b_out[c];
    for (int d = 0; d < D; ++d) v += w.W_out[c * D + d] * z[d];
    out.logits[c] = v;
  }
  return out;
}

GrayHistogram random_histogram(std::mt19937& rng) {
  GrayHistogram h;
  const int mode = testing::uniform(rng, 0, 3);
  for (int v = 0; v < 256; ++v) {
    switch (mode) {
      case 0:  // dense
        h.counts[v] = static_cast<std::uint64_t>(testing::uniform(rng, 0, 1000));
        break;
      case 1:  // sparse
        h.counts[v] = testing::uniform(rng, 0, 9) == 0
                          ? static_cast<std::uint64_t>(testing::uniform(rng, 1, 50))
                          : 0;
        break;
      case 2:  // few distinct small counts: many ties
        h.counts[v] = static_cast<std::uint64_t>(testing::uniform(rng, 0, 2));
        break;
      default:  // huge counts
        h.counts[v] = static_cast<std::uint64_t>(rng()) * 1000;
        break;
    }
  }
  if (h.total() == 0) h.counts[static_cast<std::size_t>(testing::uniform(rng, 0, 255))] = 1;
  return h;
}

MilInstance random_mil(std::mt19937& rng, bool gated) {
  auto uf = [&](double lo, double hi) {
    return static_cast<float>(lo + (hi - lo) * testing::unit(rng));
  };
  MilInstance m;
  AggregatorWeights& w = m.weights;
  w.dim = testing::uniform(rng, 1, 16);
  w.hidden = testing::uniform(rng, 1, 8);
  w.num_classes = testing::uniform(rng, 2, 4);
  w.attention = gated ? AttentionKind::Gated : AttentionKind::Tanh;
  const auto D = static_cast<std::size_t>(w.dim);
  const auto L = static_cast<std::size_t>(w.hidden);
  const auto C = static_cast<std::size_t>(w.num_classes);
  for (std::size_t i = 0; i < L * D; ++i) w.V.push_back(uf(-1.5, 1.5));
  for (std::size_t i = 0; i < L; ++i) w.w.push_back(uf(-2, 2));
  if (gated) {
    for (std::size_t i = 0; i < L * D; ++i) w.U.push_back(uf(-1.5, 1.5));
  }
  for (std::size_t i = 0; i < C * D; ++i) w.W_out.push_back(uf(-3, 3));
  for (std::size_t i = 0; i < C; ++i) w.b_out.push_back(uf(-1, 1));
  for (std::size_t i = 0; i < C; ++i) w.class_names.push_back("c" + std::to_string(i));

  m.bag.rows = static_cast<std::size_t>(testing::uniform(rng, 1, 32));
  m.bag.dim = w.dim;
  for (std::size_t i = 0; i < m.bag.rows * D; ++i) m.bag.values.push_back(uf(-2, 2));
  return m;
}

}  // namespace slidespin::oracle
