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

// Protobuf wire-format codec for the ONNX ModelProto subset used here.

#include <cstring>
#include <fstream>
#include <iterator>

#include "slidespin/error.hpp"
#include "slidespin/onnx.hpp"

namespace slidespin::onnx {

namespace {

enum WireType : int { kVarint = 0, kFixed64 = 1, kLengthDelimited = 2, kFixed32 = 5 };

[[noreturn]] void fail(const std::string& what) {
  throw Error(ErrorCode::ParseError, "malformed ONNX model: " + what);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= data_.size()) fail("truncated varint");
      const std::uint8_t b = data_[pos_++];
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
    }
    fail("varint too long");
  }

  std::pair<int, int> tag() {
    const std::uint64_t t = varint();
    return {static_cast<int>(t >> 3), static_cast<int>(t & 7)};
  }

  std::span<const std::uint8_t> bytes() {
    const std::uint64_t n = varint();
    if (n > data_.size() - pos_) fail("length exceeds buffer");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::string string() {
    auto b = bytes();
    return std::string(b.begin(), b.end());
  }

  std::uint32_t fixed32() {
    if (data_.size() - pos_ < 4) fail("truncated fixed32");
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  float float32() {
    const std::uint32_t bits = fixed32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  void skip(int wire) {
    switch (wire) {
      case kVarint: varint(); break;
      case kFixed64:
        if (data_.size() - pos_ < 8) fail("truncated fixed64");
        pos_ += 8;
        break;
      case kLengthDelimited: bytes(); break;
      case kFixed32: fixed32(); break;
      default: fail("unsupported wire type " + std::to_string(wire));
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void read_ints(Reader& r, int wire, std::vector<std::int64_t>& out) {
  if (wire == kLengthDelimited) {
    Reader packed(r.bytes());
    while (!packed.done()) out.push_back(static_cast<std::int64_t>(packed.varint()));
  } else {
    out.push_back(static_cast<std::int64_t>(r.varint()));
  }
}

void read_floats(Reader& r, int wire, std::vector<float>& out) {
  if (wire == kLengthDelimited) {
    Reader packed(r.bytes());
    while (!packed.done()) out.push_back(packed.float32());
  } else {
    out.push_back(r.float32());
  }
}

Tensor parse_tensor(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Tensor t;
  int data_type = 0;
  std::span<const std::uint8_t> raw;
  bool has_raw = false;
  std::vector<std::int64_t> int_data;
  std::vector<float> float_data;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    switch (field) {
      case 1: read_ints(r, wire, t.shape); break;
      case 2: data_type = static_cast<int>(r.varint()); break;
      case 4: read_floats(r, wire, float_data); break;
      case 5:  // int32_data
      case 7: read_ints(r, wire, int_data); break;
      case 8: t.name = r.string(); break;
      case 9: raw = r.bytes(); has_raw = true; break;
      case 14:
        if (r.varint() != 0) fail("external tensor data is not supported");
        break;
      default: r.skip(wire);
    }
  }
  const std::int64_t n = t.numel();
  if (data_type == 1) {
    t.type = ElemType::Float;
    if (has_raw) {
      if (raw.size() != static_cast<std::size_t>(n) * 4) fail("raw float size for " + t.name);
      t.floats.resize(static_cast<std::size_t>(n));
      std::memcpy(t.floats.data(), raw.data(), raw.size());
    } else {
      t.floats = std::move(float_data);
    }
    if (static_cast<std::int64_t>(t.floats.size()) != n) fail("float count for " + t.name);
  } else if (data_type == 7 || data_type == 6) {
    t.type = ElemType::Int64;
    const std::size_t width = data_type == 7 ? 8 : 4;
    if (has_raw) {
      if (raw.size() != static_cast<std::size_t>(n) * width) fail("raw int size for " + t.name);
      t.ints.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        if (width == 8) {
          std::memcpy(&t.ints[i], raw.data() + i * 8, 8);
        } else {
          std::int32_t v;
          std::memcpy(&v, raw.data() + i * 4, 4);
          t.ints[i] = v;
        }
      }
    } else {
      t.ints = std::move(int_data);
    }
    if (static_cast<std::int64_t>(t.ints.size()) != n) fail("int count for " + t.name);
  } else {
    throw Error(ErrorCode::UnsupportedOperator,
                "tensor '" + t.name + "' has unsupported data type " +
                    std::to_string(data_type));
  }
  return t;
}

std::vector<Dim> parse_shape(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  std::vector<Dim> dims;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    if (field != 1) {
      r.skip(wire);
      continue;
    }
    Reader d(r.bytes());
    Dim dim;
    while (!d.done()) {
      auto [f, w] = d.tag();
      if (f == 1) dim.value = static_cast<std::int64_t>(d.varint());
      else if (f == 2) dim.param = d.string();
      else d.skip(w);
    }
    dims.push_back(dim);
  }
  return dims;
}

ValueInfo parse_value_info(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  ValueInfo vi;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    if (field == 1) {
      vi.name = r.string();
    } else if (field == 2) {
      Reader type(r.bytes());
      while (!type.done()) {
        auto [tf, tw] = type.tag();
        if (tf != 1) {
          type.skip(tw);
          continue;
        }
        Reader tensor(type.bytes());
        while (!tensor.done()) {
          auto [f, w] = tensor.tag();
          if (f == 1) {
            vi.elem_type = static_cast<ElemType>(tensor.varint());
          } else if (f == 2) {
            vi.shape = parse_shape(tensor.bytes());
            vi.has_shape = true;
          } else {
            tensor.skip(w);
          }
        }
      }
    } else {
      r.skip(wire);
    }
  }
  return vi;
}

Attribute parse_attribute(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Attribute a;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    switch (field) {
      case 1: a.name = r.string(); break;
      case 2: a.f = r.float32(); break;
      case 3: a.i = static_cast<std::int64_t>(r.varint()); break;
      case 4: a.s = r.string(); break;
      case 5: a.tensor.push_back(parse_tensor(r.bytes())); break;
      case 7: read_floats(r, wire, a.floats); break;
      case 8: read_ints(r, wire, a.ints); break;
      case 20: a.kind = static_cast<Attribute::Kind>(r.varint()); break;
      default: r.skip(wire);
    }
  }
  return a;
}

Node parse_node(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Node n;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    switch (field) {
      case 1: n.inputs.push_back(r.string()); break;
      case 2: n.outputs.push_back(r.string()); break;
      case 3: n.name = r.string(); break;
      case 4: n.op_type = r.string(); break;
      case 5: n.attributes.push_back(parse_attribute(r.bytes())); break;
      case 7: n.domain = r.string(); break;
      default: r.skip(wire);
    }
  }
  return n;
}

Graph parse_graph(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Graph g;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    switch (field) {
      case 1: g.nodes.push_back(parse_node(r.bytes())); break;
      case 2: g.name = r.string(); break;
      case 5: g.initializers.push_back(parse_tensor(r.bytes())); break;
      case 11: g.inputs.push_back(parse_value_info(r.bytes())); break;
      case 12: g.outputs.push_back(parse_value_info(r.bytes())); break;
      default: r.skip(wire);
    }
  }
  return g;
}

// ---- writer ----------------------------------------------------------------

class Writer {
 public:
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      buf_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    buf_.push_back(static_cast<std::uint8_t>(v));
  }
  void tag(int field, int wire) {
    varint(static_cast<std::uint64_t>(field) << 3 | static_cast<unsigned>(wire));
  }
  void field_varint(int field, std::uint64_t v) {
    tag(field, kVarint);
    varint(v);
  }
  void field_bytes(int field, std::span<const std::uint8_t> b) {
    tag(field, kLengthDelimited);
    varint(b.size());
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void field_string(int field, const std::string& s) {
    field_bytes(field, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }
  void field_message(int field, const Writer& sub) { field_bytes(field, sub.buf_); }
  void field_float(int field, float f) {
    tag(field, kFixed32);
    std::uint8_t b[4];
    std::memcpy(b, &f, 4);
    buf_.insert(buf_.end(), b, b + 4);
  }
  void field_packed_ints(int field, const std::vector<std::int64_t>& v) {
    Writer packed;
    for (auto x : v) packed.varint(static_cast<std::uint64_t>(x));
    field_message(field, packed);
  }
  void field_packed_floats(int field, const std::vector<float>& v) {
    tag(field, kLengthDelimited);
    varint(v.size() * 4);
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    buf_.insert(buf_.end(), p, p + v.size() * 4);
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

Writer write_tensor(const Tensor& t) {
  Writer w;
  if (!t.shape.empty()) w.field_packed_ints(1, t.shape);
  w.field_varint(2, static_cast<std::uint64_t>(t.type));
  if (!t.name.empty()) w.field_string(8, t.name);
  if (t.type == ElemType::Float) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.floats.data());
    w.field_bytes(9, {p, t.floats.size() * 4});
  } else {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.ints.data());
    w.field_bytes(9, {p, t.ints.size() * 8});
  }
  return w;
}

Writer write_value_info(const ValueInfo& vi) {
  Writer tensor;
  tensor.field_varint(1, static_cast<std::uint64_t>(vi.elem_type));
  if (vi.has_shape) {
    Writer shape;
    for (const Dim& d : vi.shape) {
      Writer dim;
      if (d.value) dim.field_varint(1, static_cast<std::uint64_t>(*d.value));
      else dim.field_string(2, d.param);
      shape.field_message(1, dim);
    }
    tensor.field_message(2, shape);
  }
  Writer type;
  type.field_message(1, tensor);
  Writer w;
  w.field_string(1, vi.name);
  w.field_message(2, type);
  return w;
}

Writer write_attribute(const Attribute& a) {
  Writer w;
  w.field_string(1, a.name);
  switch (a.kind) {
    case Attribute::Kind::Float: w.field_float(2, a.f); break;
    case Attribute::Kind::Int: w.field_varint(3, static_cast<std::uint64_t>(a.i)); break;
    case Attribute::Kind::String: w.field_string(4, a.s); break;
    case Attribute::Kind::Tensor: w.field_message(5, write_tensor(a.tensor.at(0))); break;
    case Attribute::Kind::Floats: w.field_packed_floats(7, a.floats); break;
    case Attribute::Kind::Ints: w.field_packed_ints(8, a.ints); break;
    case Attribute::Kind::Undefined: break;
  }
  w.field_varint(20, static_cast<std::uint64_t>(a.kind));
  return w;
}

Writer write_node(const Node& n) {
  Writer w;
  for (const auto& in : n.inputs) w.field_string(1, in);
  for (const auto& out : n.outputs) w.field_string(2, out);
  if (!n.name.empty()) w.field_string(3, n.name);
  w.field_string(4, n.op_type);
  for (const auto& a : n.attributes) w.field_message(5, write_attribute(a));
  if (!n.domain.empty()) w.field_string(7, n.domain);
  return w;
}

}  // namespace

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::of_floats(std::vector<std::int64_t> shape, std::vector<float> data,
                         std::string name) {
  Tensor t;
  t.name = std::move(name);
  t.type = ElemType::Float;
  t.shape = std::move(shape);
  t.floats = std::move(data);
  return t;
}

Tensor Tensor::of_ints(std::vector<std::int64_t> shape,
                       std::vector<std::int64_t> data, std::string name) {
  Tensor t;
  t.name = std::move(name);
  t.type = ElemType::Int64;
  t.shape = std::move(shape);
  t.ints = std::move(data);
  return t;
}

const Attribute* Node::attr(const std::string& key) const {
  for (const auto& a : attributes) {
    if (a.name == key) return &a;
  }
  return nullptr;
}

std::int64_t Node::attr_int(const std::string& key, std::int64_t fallback) const {
  const Attribute* a = attr(key);
  return a ? a->i : fallback;
}

float Node::attr_float(const std::string& key, float fallback) const {
  const Attribute* a = attr(key);
  return a ? a->f : fallback;
}

std::vector<std::int64_t> Node::attr_ints(const std::string& key) const {
  const Attribute* a = attr(key);
  return a ? a->ints : std::vector<std::int64_t>{};
}

std::vector<const ValueInfo*> Model::runtime_inputs() const {
  std::vector<const ValueInfo*> out;
  for (const auto& in : graph.inputs) {
    bool is_init = false;
    for (const auto& t : graph.initializers) is_init |= t.name == in.name;
    if (!is_init) out.push_back(&in);
  }
  return out;
}

Model parse_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Model m;
  bool has_graph = false;
  while (!r.done()) {
    auto [field, wire] = r.tag();
    switch (field) {
      case 1: m.ir_version = static_cast<std::int64_t>(r.varint()); break;
      case 2: m.producer_name = r.string(); break;
      case 7:
        m.graph = parse_graph(r.bytes());
        has_graph = true;
        break;
      case 8: {
        Reader op(r.bytes());
        std::string domain;
        std::int64_t version = 0;
        while (!op.done()) {
          auto [f, w] = op.tag();
          if (f == 1) domain = op.string();
          else if (f == 2) version = static_cast<std::int64_t>(op.varint());
          else op.skip(w);
        }
        if (domain == "ai.onnx") domain.clear();
        m.opsets[domain] = version;
        break;
      }
      default: r.skip(wire);
    }
  }
  if (!has_graph) fail("no graph");
  return m;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_model(bytes);
}

std::vector<std::uint8_t> serialize_model(const Model& model) {
  Writer graph;
  for (const auto& n : model.graph.nodes) graph.field_message(1, write_node(n));
  graph.field_string(2, model.graph.name.empty() ? "graph" : model.graph.name);
  for (const auto& t : model.graph.initializers) graph.field_message(5, write_tensor(t));
  for (const auto& vi : model.graph.inputs) graph.field_message(11, write_value_info(vi));
  for (const auto& vi : model.graph.outputs) graph.field_message(12, write_value_info(vi));

  Writer w;
  w.field_varint(1, static_cast<std::uint64_t>(model.ir_version));
  if (!model.producer_name.empty()) w.field_string(2, model.producer_name);
  w.field_message(7, graph);
  for (const auto& [domain, version] : model.opsets) {
    Writer op;
    if (!domain.empty()) op.field_string(1, domain);
    op.field_varint(2, static_cast<std::uint64_t>(version));
    w.field_message(8, op);
  }
  return std::move(w.buffer());
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::WriteFailure, "cannot write " + path.string());
}

}  // namespace slidespin::onnx
