#pragma once

#include <string>

#include "flairsyn/volume.hpp"

namespace flairsyn::data {

/// Scalar type used on disk; volumes are doubles in memory.
enum class VoxelDType { uint8, int16, int32, float32, float64 };

/// Reads a .nii / .nii.gz / .rawvol file (dispatch on extension).
Volume load_volume(const std::string& path);

/// Writes a .nii / .nii.gz / .rawvol file (dispatch on extension).
void save_volume(const Volume& v, const std::string& path, VoxelDType dtype = VoxelDType::float32);

Volume load_nifti(const std::string& path);
void save_nifti(const Volume& v, const std::string& path, VoxelDType dtype = VoxelDType::float32);

Volume load_rawvol(const std::string& path);
void save_rawvol(const Volume& v, const std::string& path);

bool has_suffix(const std::string& s, const std::string& suffix);

}  // namespace flairsyn::data
