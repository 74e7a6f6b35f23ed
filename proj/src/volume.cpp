/*
 *  Copyright 2026 The trexsuper Authors. All Rights Reserved.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */
#include "trex/volume.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace trex {
namespace {

constexpr std::string_view kMagic = "TREXVOL1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_volume(const Volume& v) {
  std::string out;
  out.reserve(kMagic.size() + 12 + v.voxels.size() * 4);
  out.append(kMagic);
  for (int k = 0; k < 3; ++k) put_u32(out, static_cast<std::uint32_t>(v.shape[k]));
  for (float f : v.voxels) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Volume deserialize_volume(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw ParseError("byte 0: field 'magic': expected TREXVOL1");
  if (bytes.size() < kMagic.size() + 12) throw ParseError("byte 8: field 'dims': truncated header");
  Volume v;
  std::size_t count = 1;
  for (int k = 0; k < 3; ++k) {
    const std::uint32_t d = get_u32(bytes, kMagic.size() + 4 * k);
    if (d == 0 || d > (1u << 16)) throw ParseError("byte " + std::to_string(8 + 4 * k) + ": field 'dims': invalid dimension");
    v.shape[k] = static_cast<int>(d);
    count *= d;
  }
  const std::size_t expected = kMagic.size() + 12 + count * 4;
  if (bytes.size() != expected)
    throw ParseError("byte " + std::to_string(bytes.size()) + ": field 'voxels': expected " + std::to_string(expected) +
                     " bytes in total");
  v.voxels.resize(count);
  const std::size_t base = kMagic.size() + 12;
  for (std::size_t i = 0; i < count; ++i) v.voxels[i] = std::bit_cast<float>(get_u32(bytes, base + 4 * i));
  return v;
}

void write_volume_file(const std::string& path, const Volume& v) {
  const std::string data = serialize_volume(v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Volume read_volume_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_volume(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace trex
