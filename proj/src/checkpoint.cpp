// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sbvqa {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw CheckpointError("truncated checkpoint");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw CheckpointError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) {
  const std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open for writing: " + path);
  os.write("SBVQ", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    if (p.name.size() > 0xffff) throw CheckpointError("parameter name too long: " + p.name);
    put_u16(os, static_cast<std::uint16_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.value->shape;
    if (shape.size() > 0xff) throw CheckpointError("rank too large");
    os.put(static_cast<char>(shape.size()));
    for (std::size_t d : shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : p.tensor.value->data) put_f32(os, static_cast<float>(v));
  }
  if (!os) throw CheckpointError("write failure: " + path);
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SBVQ", 4) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = get_u32(is);
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint16_t name_len = get_u16(is);
    e.name.resize(name_len);
    is.read(e.name.data(), name_len);
    const int rank = is.get();
    if (rank < 0) throw CheckpointError("truncated checkpoint");
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      e.shape.push_back(get_u32(is));
      n *= e.shape.back();
    }
    e.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) e.values[j] = get_f32(is);
    entries.push_back(std::move(e));
  }
  return entries;
}

void load_checkpoint(ParameterSet& params, const std::string& path) {
  auto entries = read_checkpoint(path);
  if (entries.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(entries.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  for (const auto& e : entries) {
    TracedTensor* t = params.find(e.name);
    if (!t) throw CheckpointError("checkpoint parameter not in model: " + e.name);
    if (t->value->shape != e.shape)
      throw CheckpointError("shape mismatch for " + e.name + ": file " +
                            shape_string(e.shape) + " vs model " +
                            shape_string(t->value->shape));
    for (std::size_t j = 0; j < e.values.size(); ++j)
      t->value->data[j] = static_cast<double>(e.values[j]);
  }
}

}  // namespace sbvqa
