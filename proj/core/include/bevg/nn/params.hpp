// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevg/nn/tape.hpp"

namespace bevg::nn {

/// A named float32 array as stored on disk.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

/// Little-endian record: u32 name length, name, u32 rank, i32 dims, f32 data.
void write_array(std::ostream& os, const NamedArray& a);
NamedArray read_array(std::istream& is);

std::vector<NamedArray> export_params(const ParamStore& ps);
/// Copies arrays into matching parameters. Throws on unknown names or shape
/// mismatch, and when a parameter has no array.
void import_params(ParamStore& ps, const std::vector<NamedArray>& arrays, const std::string& prefix = "");

/// File framing shared by the checkpoint formats: 8-byte magic, u32 version,
/// u64 header length, JSON header, then `header["arrays"]` array records.
struct ArchiveContents {
  nlohmann::json header;
  std::vector<NamedArray> arrays;
};

using Magic = std::array<char, 8>;

/// Writes to `path`.tmp and renames, so readers never see a partial file.
void write_archive(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                   nlohmann::json header, const std::vector<NamedArray>& arrays);
ArchiveContents read_archive(const std::filesystem::path& path, const Magic& magic, std::uint32_t version);

}  // namespace bevg::nn
