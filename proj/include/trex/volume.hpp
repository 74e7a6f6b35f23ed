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
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "trex/common.hpp"

namespace trex {

/// Dense scalar volume with isotropic unit spacing. Voxel (x, y, z) sits at
/// world position (x, y, z); storage is z-fastest.
struct Volume {
  std::array<int, 3> shape{0, 0, 0};
  std::vector<float> voxels;

  Volume() = default;
  explicit Volume(std::array<int, 3> s, float fill = 0.0f)
      : shape(s), voxels(static_cast<std::size_t>(s[0]) * s[1] * s[2], fill) {}

  std::size_t size() const { return voxels.size(); }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * shape[1] + y) * shape[2] + z;
  }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < shape[0] && y < shape[1] && z < shape[2];
  }
  /// True when the point lies within the voxel-center lattice [0, dim-1]^3.
  bool contains(const Vec3& p) const {
    for (int k = 0; k < 3; ++k)
      if (!(p[k] >= 0.0 && p[k] <= shape[k] - 1)) return false;
    return true;
  }
  float at(int x, int y, int z) const { return voxels[index(x, y, z)]; }
  float& at(int x, int y, int z) { return voxels[index(x, y, z)]; }

  bool operator==(const Volume&) const = default;
};

/// Binary `TREXVOL1` encoding: magic, three little-endian u32 dims, then
/// little-endian f32 voxels in z-fastest order.
std::string serialize_volume(const Volume& v);
Volume deserialize_volume(std::string_view bytes);

void write_volume_file(const std::string& path, const Volume& v);
Volume read_volume_file(const std::string& path);

}  // namespace trex
