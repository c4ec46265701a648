// Copyright 2026 The lgcl-lab Authors. All Rights Reserved.
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

#include "lgcl/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lgcl/errors.hpp"

namespace lgcl {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'N', 'S', 'R'};
constexpr std::uint32_t kMaxRank = 16;

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& source) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError(source + ": truncated TNSR record");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tnsr(std::ostream& out, const Tensor& tensor) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError("failed writing TNSR record");
}

Tensor read_tnsr(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw IoError(source + ": bad TNSR magic");
  const std::uint32_t rank = get_u32(in, source);
  if (rank > kMaxRank) throw IoError(source + ": implausible TNSR rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_u32(in, source);
    if (d == 0) throw IoError(source + ": zero-sized TNSR dimension");
  }
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<double>(std::bit_cast<float>(get_u32(in, source)));
  return Tensor::from_data(std::move(shape), std::move(data));
}

void save_tnsr_file(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  write_tnsr(out, tensor);
}

Tensor load_tnsr_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  return read_tnsr(in, path.string());
}

std::vector<ArchiveEntry> write_tensor_archive(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  std::vector<ArchiveEntry> index;
  for (const auto& [name, t] : tensors) {
    index.push_back({name, static_cast<std::uint64_t>(out.tellp())});
    write_tnsr(out, t);
  }
  return index;
}

NamedTensors read_tensor_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  NamedTensors out;
  for (const auto& e : index) {
    in.seekg(static_cast<std::streamoff>(e.offset));
    out.emplace_back(e.name, read_tnsr(in, path.string() + " (" + e.name + ")"));
  }
  return out;
}

void round_to_f32(Tensor& tensor) {
  for (auto& v : tensor.mutable_data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace lgcl
