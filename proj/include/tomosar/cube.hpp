// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

/// Dense (azimuth, range, depth) complex cube. Depth is the channel count for
/// measurement stacks and the grid size for reconstructed profile cubes.
struct ComplexCube {
  std::size_t n_azimuth = 0;
  std::size_t n_range = 0;
  std::size_t depth = 0;
  std::uint64_t geometry_hash = 0;
  std::vector<cplx> data;

  ComplexCube() = default;
  ComplexCube(std::size_t az, std::size_t rg, std::size_t d, std::uint64_t hash = 0)
      : n_azimuth(az), n_range(rg), depth(d), geometry_hash(hash), data(az * rg * d) {}

  std::size_t pixels() const { return n_azimuth * n_range; }
  std::size_t offset(std::size_t az, std::size_t rg) const { return (az * n_range + rg) * depth; }

  Eigen::Map<CVec> pixel(std::size_t az, std::size_t rg) {
    return {data.data() + offset(az, rg), static_cast<Eigen::Index>(depth)};
  }
  Eigen::Map<const CVec> pixel(std::size_t az, std::size_t rg) const {
    return {data.data() + offset(az, rg), static_cast<Eigen::Index>(depth)};
  }
  /// Pixel by flat index p = az * n_range + rg.
  Eigen::Map<CVec> pixel(std::size_t p) { return {data.data() + p * depth, static_cast<Eigen::Index>(depth)}; }
  Eigen::Map<const CVec> pixel(std::size_t p) const {
    return {data.data() + p * depth, static_cast<Eigen::Index>(depth)};
  }

  bool same_shape(const ComplexCube& o) const {
    return n_azimuth == o.n_azimuth && n_range == o.n_range && depth == o.depth;
  }
  bool operator==(const ComplexCube& o) const = default;
};

/// N-channel measurements of every range-azimuth pixel.
using MeasurementStack = ComplexCube;

/// Real-valued (azimuth, range, elevation) voxel grid.
struct VoxelGrid {
  std::size_t n_azimuth = 0;
  std::size_t n_range = 0;
  std::size_t n_elevation = 0;
  std::vector<double> values;

  VoxelGrid() = default;
  VoxelGrid(std::size_t az, std::size_t rg, std::size_t el)
      : n_azimuth(az), n_range(rg), n_elevation(el), values(az * rg * el, 0.0) {}

  std::size_t size() const { return values.size(); }
  double& at(std::size_t az, std::size_t rg, std::size_t el) {
    return values[(az * n_range + rg) * n_elevation + el];
  }
  double at(std::size_t az, std::size_t rg, std::size_t el) const {
    return values[(az * n_range + rg) * n_elevation + el];
  }
  bool same_shape(const VoxelGrid& o) const {
    return n_azimuth == o.n_azimuth && n_range == o.n_range && n_elevation == o.n_elevation;
  }
};

/// Magnitude voxels of a profile cube.
inline VoxelGrid magnitude_voxels(const ComplexCube& cube) {
  VoxelGrid v(cube.n_azimuth, cube.n_range, cube.depth);
  for (std::size_t i = 0; i < cube.data.size(); ++i) v.values[i] = std::abs(cube.data[i]);
  return v;
}

}  // namespace tomosar
