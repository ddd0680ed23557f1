#pragma once

// File formats:
//  * volumes: single-file NIfTI-1 (.nii), little-endian float32, no
//    extensions, sform affine. The domain tag is kept in intent_name.
//  * slices: binary PGM (P5), 8 bit.
//  * streamlines: "MDWISTR1" magic, u32 count, u32 point count per
//    streamline, then float32 x y z triples in world mm, all little-endian.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mdwi/volume.hpp"

namespace mdwi {

using Streamline = std::vector<Eigen::Vector3d>;

std::vector<std::uint8_t> encode_volume(const VolumeF& volume);
VolumeF decode_volume(const std::vector<std::uint8_t>& bytes);

VolumeF read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const VolumeF& volume);
/// Values are rounded to float32 on disk.
void write_volume(const std::filesystem::path& path, const VolumeD& volume);

/// Writes one slice of a scalar volume as 8-bit PGM, min-max scaled to
/// [0, 255]. Axis 0/1/2 fixes x/y/z. Rows run along the slower in-plane axis.
void export_slice_pgm(const VolumeD& volume, int axis, int index, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_streamlines(const std::vector<Streamline>& lines);
std::vector<Streamline> decode_streamlines(const std::vector<std::uint8_t>& bytes);

/// Points are rounded to float32 on disk; every streamline needs >= 2 points.
void write_streamlines(const std::filesystem::path& path, const std::vector<Streamline>& lines);
std::vector<Streamline> read_streamlines(const std::filesystem::path& path);

}  // namespace mdwi
