// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/nn/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

namespace bevg::nn {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated array record");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_array(std::ostream& os, const NamedArray& a) {
  if (a.data.size() != numel(a.shape)) throw std::logic_error("write_array: size mismatch for " + a.name);
  put_u32(os, static_cast<std::uint32_t>(a.name.size()));
  os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
  put_u32(os, static_cast<std::uint32_t>(a.shape.size()));
  for (int d : a.shape) put_u32(os, static_cast<std::uint32_t>(d));
  for (float f : a.data) put_u32(os, std::bit_cast<std::uint32_t>(f));
}

NamedArray read_array(std::istream& is) {
  NamedArray a;
  const std::uint32_t nlen = get_u32(is);
  if (nlen > 4096) throw std::runtime_error("checkpoint: implausible name length");
  a.name.resize(nlen);
  if (!is.read(a.name.data(), nlen)) throw std::runtime_error("checkpoint: truncated name");
  const std::uint32_t rank = get_u32(is);
  if (rank > 8) throw std::runtime_error("checkpoint: implausible rank for " + a.name);
  for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(static_cast<int>(get_u32(is)));
  const std::size_t n = numel(a.shape);
  if (n > (std::size_t{1} << 31)) throw std::runtime_error("checkpoint: implausible size for " + a.name);
  a.data.resize(n);
  for (float& f : a.data) f = std::bit_cast<float>(get_u32(is));
  return a;
}

std::vector<NamedArray> export_params(const ParamStore& ps) {
  std::vector<NamedArray> out;
  for (const Parameter* p : ps.all()) {
    NamedArray a{p->name, p->shape, {}};
    a.data.reserve(p->size());
    for (double v : p->value) a.data.push_back(static_cast<float>(v));
    out.push_back(std::move(a));
  }
  return out;
}

void import_params(ParamStore& ps, const std::vector<NamedArray>& arrays, const std::string& prefix) {
  std::set<std::string> seen;
  for (const NamedArray& a : arrays) {
    if (a.name.rfind(prefix, 0) != 0) continue;
    const std::string name = a.name.substr(prefix.size());
    if (!ps.contains(name)) throw std::runtime_error("checkpoint: unknown parameter " + name);
    Parameter& p = ps.get(name);
    if (p.shape != a.shape) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": " + shape_str(a.shape) + " vs " +
                               shape_str(p.shape));
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) p.value[i] = a.data[i];
    seen.insert(name);
  }
  for (const Parameter* p : ps.all()) {
    if (!seen.count(p->name)) throw std::runtime_error("checkpoint: missing parameter " + p->name);
  }
}

void write_archive(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                   nlohmann::json header, const std::vector<NamedArray>& arrays) {
  header["arrays"] = arrays.size();
  const std::string js = header.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    put_u32(os, version);
    put_u32(os, static_cast<std::uint32_t>(js.size() & 0xffffffffu));
    put_u32(os, static_cast<std::uint32_t>(static_cast<std::uint64_t>(js.size()) >> 32));
    os.write(js.data(), static_cast<std::streamsize>(js.size()));
    for (const auto& a : arrays) write_array(os, a);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ArchiveContents read_archive(const std::filesystem::path& path, const Magic& magic, std::uint32_t version) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  Magic got{};
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto v = get_u32(is);
  if (v != version) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
  const std::uint64_t lo = get_u32(is);
  const std::uint64_t len = lo | (static_cast<std::uint64_t>(get_u32(is)) << 32);
  if (len > (1u << 26)) throw std::runtime_error("checkpoint: implausible header length");
  std::string js(len, '\0');
  if (!is.read(js.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("checkpoint: truncated header");
  ArchiveContents out;
  try {
    out.header = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed header: ") + e.what());
  }
  const auto n = out.header.at("arrays").get<std::size_t>();
  for (std::size_t i = 0; i < n; ++i) out.arrays.push_back(read_array(is));
  return out;
}

}  // namespace bevg::nn
