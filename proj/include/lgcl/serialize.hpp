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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "lgcl/tensor.hpp"

// TNSR record: "TNSR", u32 rank, u32 dims[rank], f32 payload row-major, all
// little-endian. Values are narrowed to f32 on write and widened back to f64
// on read, so a tensor round-trips bit-exactly only if every value is
// representable as f32.
namespace lgcl {

void write_tnsr(std::ostream& out, const Tensor& tensor);
// `source` names the file or stream in error messages.
Tensor read_tnsr(std::istream& in, const std::string& source);

void save_tnsr_file(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tnsr_file(const std::filesystem::path& path);

struct ArchiveEntry {
  std::string name;
  std::uint64_t offset = 0;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Concatenated TNSR records; the returned index is meant for a JSON manifest.
std::vector<ArchiveEntry> write_tensor_archive(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_tensor_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& index);

// Rounds every element to the nearest f32 so that a later save/load is exact.
void round_to_f32(Tensor& tensor);

}  // namespace lgcl
