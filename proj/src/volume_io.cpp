#include "flairsyn/volume_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace flairsyn::data {

namespace {

// NIfTI-1 header, 348 bytes.
#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtInt32 = 8;
constexpr int16_t kDtFloat32 = 16;
constexpr int16_t kDtFloat64 = 64;

template <typename T>
void swap_bytes(T& v) {
  char* p = reinterpret_cast<char*>(&v);
  for (size_t i = 0, j = sizeof(T) - 1; i < j; ++i, --j) std::swap(p[i], p[j]);
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
  swap_bytes(h.qform_code);
  swap_bytes(h.sform_code);
}

std::vector<char> read_file_maybe_gz(const std::string& path, bool gz) {
  std::vector<char> buf;
  if (gz) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path);
    char chunk[1 << 16];
    int n;
    while ((n = gzread(f, chunk, sizeof(chunk))) > 0) buf.insert(buf.end(), chunk, chunk + n);
    int err = 0;
    gzerror(f, &err);
    gzclose(f);
    if (n < 0 || err != Z_OK) throw std::runtime_error("gzip read failure in " + path);
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.seekg(0, std::ios::end);
    buf.resize(static_cast<size_t>(f.tellg()));
    f.seekg(0);
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("read failure in " + path);
  }
  return buf;
}

void write_file_maybe_gz(const std::string& path, const std::vector<char>& buf, bool gz) {
  if (gz) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    size_t off = 0;
    while (off < buf.size()) {
      unsigned chunk = static_cast<unsigned>(std::min<size_t>(buf.size() - off, 1u << 28));
      int n = gzwrite(f, buf.data() + off, chunk);
      if (n <= 0) {
        gzclose(f);
        throw std::runtime_error("gzip write failure in " + path);
      }
      off += static_cast<size_t>(n);
    }
    if (gzclose(f) != Z_OK) throw std::runtime_error("gzip close failure in " + path);
  } else {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write failure in " + path);
  }
}

template <typename T>
void decode_voxels(const char* src, size_t count, bool swapped, double slope, double inter, std::vector<double>& out) {
  out.resize(count);
  for (size_t i = 0; i < count; ++i) {
    T v;
    std::memcpy(&v, src + i * sizeof(T), sizeof(T));
    if (swapped) swap_bytes(v);
    out[i] = slope * static_cast<double>(v) + inter;
  }
}

template <typename T>
void encode_voxels(const std::vector<double>& src, std::vector<char>& out) {
  out.resize(src.size() * sizeof(T));
  for (size_t i = 0; i < src.size(); ++i) {
    T v = static_cast<T>(src[i]);
    std::memcpy(out.data() + i * sizeof(T), &v, sizeof(T));
  }
}

}  // namespace

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Volume load_nifti(const std::string& path) {
  const bool gz = has_suffix(path, ".gz");
  std::vector<char> buf = read_file_maybe_gz(path, gz);
  if (buf.size() < sizeof(Nifti1Header)) throw std::runtime_error(path + ": truncated NIfTI header");
  Nifti1Header h;
  std::memcpy(&h, buf.data(), sizeof(h));
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swapped = true;
    if (h.sizeof_hdr != 348) throw std::runtime_error(path + ": not a NIfTI-1 file (bad sizeof_hdr)");
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0)
    throw std::runtime_error(path + ": unsupported NIfTI magic (only single-file n+1 supported)");
  if (h.dim[0] < 3) throw std::runtime_error(path + ": expected a 3-D volume");
  for (int d = 4; d <= h.dim[0]; ++d)
    if (h.dim[d] > 1) throw std::runtime_error(path + ": higher-dimensional NIfTI not supported");

  Volume v;
  v.shape = {h.dim[1], h.dim[2], h.dim[3]};
  for (int i = 0; i < 3; ++i) {
    if (v.shape[i] <= 0) throw std::runtime_error(path + ": non-positive dimension");
    v.spacing_mm[i] = h.pixdim[i + 1] > 0.0f ? static_cast<double>(h.pixdim[i + 1]) : 1.0;
  }
  const size_t count = static_cast<size_t>(v.numel());
  const size_t offset = static_cast<size_t>(h.vox_offset);
  const size_t bytes = static_cast<size_t>(h.bitpix / 8) * count;
  if (offset + bytes > buf.size()) throw std::runtime_error(path + ": truncated voxel data");

  double slope = (h.scl_slope == 0.0f) ? 1.0 : static_cast<double>(h.scl_slope);
  double inter = (h.scl_slope == 0.0f) ? 0.0 : static_cast<double>(h.scl_inter);
  const char* data = buf.data() + offset;
  switch (h.datatype) {
    case kDtUint8: decode_voxels<uint8_t>(data, count, swapped, slope, inter, v.voxels); break;
    case kDtInt16: decode_voxels<int16_t>(data, count, swapped, slope, inter, v.voxels); break;
    case kDtInt32: decode_voxels<int32_t>(data, count, swapped, slope, inter, v.voxels); break;
    case kDtFloat32: decode_voxels<float>(data, count, swapped, slope, inter, v.voxels); break;
    case kDtFloat64: decode_voxels<double>(data, count, swapped, slope, inter, v.voxels); break;
    default: throw std::runtime_error(path + ": unsupported NIfTI datatype " + std::to_string(h.datatype));
  }
  v.refresh_intensity_range();
  v.validate(path);
  return v;
}

void save_nifti(const Volume& v, const std::string& path, VoxelDType dtype) {
  v.validate(path);
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<int16_t>(v.shape[0]);
  h.dim[2] = static_cast<int16_t>(v.shape[1]);
  h.dim[3] = static_cast<int16_t>(v.shape[2]);
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.pixdim[0] = 1.0f;
  for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(v.spacing_mm[i]);
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.sform_code = 1;
  h.srow_x[0] = static_cast<float>(v.spacing_mm[0]);
  h.srow_y[1] = static_cast<float>(v.spacing_mm[1]);
  h.srow_z[2] = static_cast<float>(v.spacing_mm[2]);
  h.cal_min = static_cast<float>(v.min_intensity);
  h.cal_max = static_cast<float>(v.max_intensity);
  std::memcpy(h.magic, "n+1", 4);

  std::vector<char> payload;
  switch (dtype) {
    case VoxelDType::uint8: h.datatype = kDtUint8; h.bitpix = 8; encode_voxels<uint8_t>(v.voxels, payload); break;
    case VoxelDType::int16: h.datatype = kDtInt16; h.bitpix = 16; encode_voxels<int16_t>(v.voxels, payload); break;
    case VoxelDType::int32: h.datatype = kDtInt32; h.bitpix = 32; encode_voxels<int32_t>(v.voxels, payload); break;
    case VoxelDType::float32: h.datatype = kDtFloat32; h.bitpix = 32; encode_voxels<float>(v.voxels, payload); break;
    case VoxelDType::float64: h.datatype = kDtFloat64; h.bitpix = 64; encode_voxels<double>(v.voxels, payload); break;
  }

  std::vector<char> buf(352 + payload.size(), 0);
  std::memcpy(buf.data(), &h, sizeof(h));
  std::memcpy(buf.data() + 352, payload.data(), payload.size());
  write_file_maybe_gz(path, buf, has_suffix(path, ".gz"));
}

Volume load_rawvol(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(f, line)) throw std::runtime_error(path + ": truncated rawvol header");
    return line;
  };
  if (next_line() != "rawvol 1") throw std::runtime_error(path + ": not a rawvol file");
  Volume v;
  std::string dtype;
  {
    std::istringstream is(next_line());
    std::string tag;
    if (!(is >> tag >> v.shape[0] >> v.shape[1] >> v.shape[2]) || tag != "shape")
      throw std::runtime_error(path + ": bad rawvol shape line");
  }
  {
    std::istringstream is(next_line());
    std::string tag;
    if (!(is >> tag >> v.spacing_mm[0] >> v.spacing_mm[1] >> v.spacing_mm[2]) || tag != "spacing")
      throw std::runtime_error(path + ": bad rawvol spacing line");
  }
  {
    std::istringstream is(next_line());
    std::string tag;
    if (!(is >> tag >> dtype) || tag != "dtype") throw std::runtime_error(path + ": bad rawvol dtype line");
  }
  if (next_line() != "data") throw std::runtime_error(path + ": missing rawvol data marker");

  const size_t count = static_cast<size_t>(v.numel());
  if (dtype == "float64") {
    v.voxels.resize(count);
    f.read(reinterpret_cast<char*>(v.voxels.data()), static_cast<std::streamsize>(count * sizeof(double)));
  } else if (dtype == "float32") {
    std::vector<float> tmp(count);
    f.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(count * sizeof(float)));
    v.voxels.assign(tmp.begin(), tmp.end());
  } else {
    throw std::runtime_error(path + ": unsupported rawvol dtype " + dtype);
  }
  if (!f) throw std::runtime_error(path + ": truncated rawvol voxel data");
  v.refresh_intensity_range();
  v.validate(path);
  return v;
}

void save_rawvol(const Volume& v, const std::string& path) {
  v.validate(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "rawvol 1\n"
    << "shape " << v.shape[0] << " " << v.shape[1] << " " << v.shape[2] << "\n"
    << "spacing " << v.spacing_mm[0] << " " << v.spacing_mm[1] << " " << v.spacing_mm[2] << "\n"
    << "dtype float64\n"
    << "data\n";
  f.write(reinterpret_cast<const char*>(v.voxels.data()), static_cast<std::streamsize>(v.voxels.size() * sizeof(double)));
  if (!f) throw std::runtime_error("write failure in " + path);
}

Volume load_volume(const std::string& path) {
  if (has_suffix(path, ".nii") || has_suffix(path, ".nii.gz")) return load_nifti(path);
  if (has_suffix(path, ".rawvol")) return load_rawvol(path);
  throw std::runtime_error("unrecognized volume format: " + path);
}

void save_volume(const Volume& v, const std::string& path, VoxelDType dtype) {
  if (has_suffix(path, ".nii") || has_suffix(path, ".nii.gz")) {
    save_nifti(v, path, dtype);
    return;
  }
  if (has_suffix(path, ".rawvol")) {
    save_rawvol(v, path);
    return;
  }
  throw std::runtime_error("unrecognized volume format: " + path);
}

}  // namespace flairsyn::data
