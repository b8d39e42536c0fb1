#include "sci3d/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sci3d {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are not supported");

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  void magic(const char m[4]) { out_.write(m, 4); }
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f32_array(const float* data, std::size_t count) { raw(data, count * sizeof(float)); }
  void f32_array(const double* data, std::size_t count) {
    std::vector<float> tmp(count);
    for (std::size_t i = 0; i < count; ++i) tmp[i] = static_cast<float>(data[i]);
    raw(tmp.data(), count * sizeof(float));
  }
  void bytes(const uint8_t* data, std::size_t count) { raw(data, count); }
  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_ + "'");
    out_.close();
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }
  void expect_magic(const char m[4]) {
    char buf[4];
    raw(buf, 4);
    if (std::memcmp(buf, m, 4) != 0)
      throw IoError("'" + path_ + "': bad magic (expected " + std::string(m, 4) + ")");
  }
  uint32_t u32() { uint32_t v; raw(&v, sizeof v); return v; }
  uint64_t u64() { uint64_t v; raw(&v, sizeof v); return v; }
  float f32() { float v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  void f32_array(float* data, std::size_t count) { raw(data, count * sizeof(float)); }
  void f32_array(double* data, std::size_t count) {
    std::vector<float> tmp(count);
    raw(tmp.data(), count * sizeof(float));
    for (std::size_t i = 0; i < count; ++i) data[i] = tmp[i];
  }
  void bytes(uint8_t* data, std::size_t count) { raw(data, count); }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw IoError("'" + path_ + "': unexpected end of file");
  }
  std::string path_;
  std::ifstream in_;
};

constexpr uint32_t kFormatVersion = 1;
constexpr uint32_t kDtypeF32 = 1;

}  // namespace

void write_grid(const std::string& path, const RadianceGrid& grid) {
  grid.validate();
  Writer w(path);
  w.magic("SCGR");
  w.u32(kFormatVersion);
  for (int a = 0; a < 3; ++a) w.u32(static_cast<uint32_t>(grid.resolution[a]));
  for (int a = 0; a < 3; ++a) w.f64(grid.bbox_min[a]);
  for (int a = 0; a < 3; ++a) w.f64(grid.bbox_max[a]);
  w.u32(static_cast<uint32_t>(grid.sh_degree));
  w.f32_array(grid.density_raw.data(), grid.density_raw.size());
  w.f32_array(grid.sh_coeffs.data(), grid.sh_coeffs.size());
  w.close();
}

RadianceGrid read_grid(const std::string& path) {
  Reader r(path);
  r.expect_magic("SCGR");
  const uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw IoError("'" + path + "': unsupported grid version " + std::to_string(version));
  RadianceGrid grid;
  for (int a = 0; a < 3; ++a) grid.resolution[a] = static_cast<int>(r.u32());
  for (int a = 0; a < 3; ++a) grid.bbox_min[a] = r.f64();
  for (int a = 0; a < 3; ++a) grid.bbox_max[a] = r.f64();
  grid.sh_degree = static_cast<int>(r.u32());
  grid.density_raw.resize(grid.voxel_count());
  grid.sh_coeffs.resize(grid.voxel_count() * grid.sh_count() * 3);
  r.f32_array(grid.density_raw.data(), grid.density_raw.size());
  r.f32_array(grid.sh_coeffs.data(), grid.sh_coeffs.size());
  grid.validate();
  return grid;
}

void write_masks(const std::string& path, const MaskStack& stack) {
  Writer w(path);
  w.magic("SCMK");
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(stack.n));
  w.u32(static_cast<uint32_t>(stack.height));
  w.u32(static_cast<uint32_t>(stack.width));
  w.u64(stack.seed);
  w.f32(static_cast<float>(stack.target_or));
  w.bytes(stack.bits.data(), stack.bits.size());
  w.close();
}

MaskStack read_masks(const std::string& path) {
  Reader r(path);
  r.expect_magic("SCMK");
  const uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw IoError("'" + path + "': unsupported mask version " + std::to_string(version));
  MaskStack stack;
  stack.n = static_cast<int>(r.u32());
  stack.height = static_cast<int>(r.u32());
  stack.width = static_cast<int>(r.u32());
  stack.seed = r.u64();
  stack.target_or = r.f32();
  stack.bits.resize(static_cast<std::size_t>(stack.n) * stack.height * stack.width);
  r.bytes(stack.bits.data(), stack.bits.size());
  for (uint8_t b : stack.bits)
    if (b > 1) throw IoError("'" + path + "': mask entries must be 0 or 1");
  return stack;
}

void write_measurement(const std::string& path, const Measurement& measurement) {
  Writer w(path);
  w.magic("SCMS");
  w.u32(static_cast<uint32_t>(measurement.height));
  w.u32(static_cast<uint32_t>(measurement.width));
  w.u32(static_cast<uint32_t>(measurement.channels));
  w.f32(static_cast<float>(measurement.noise_sigma));
  w.f32_array(measurement.pixels.data(), measurement.pixels.size());
  w.close();
}

Measurement read_measurement(const std::string& path) {
  Reader r(path);
  r.expect_magic("SCMS");
  const int h = static_cast<int>(r.u32());
  const int w = static_cast<int>(r.u32());
  const int c = static_cast<int>(r.u32());
  Measurement m(h, w, c);
  m.noise_sigma = r.f32();
  r.f32_array(m.pixels.data(), m.pixels.size());
  return m;
}

void write_tensor(const std::string& path, const std::vector<uint32_t>& dims,
                  const std::vector<float>& data) {
  std::size_t count = 1;
  for (uint32_t d : dims) count *= d;
  if (count != data.size())
    throw DimensionMismatch("write_tensor: payload size does not match dims");
  Writer w(path);
  w.magic("SCTF");
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(dims.size()));
  for (uint32_t d : dims) w.u32(d);
  w.u32(kDtypeF32);
  w.f32_array(data.data(), data.size());
  w.close();
}

std::vector<float> read_tensor(const std::string& path, std::vector<uint32_t>& dims) {
  Reader r(path);
  r.expect_magic("SCTF");
  const uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw IoError("'" + path + "': unsupported tensor version " + std::to_string(version));
  const uint32_t rank = r.u32();
  if (rank > 8) throw IoError("'" + path + "': unreasonable tensor rank");
  dims.resize(rank);
  std::size_t count = 1;
  for (uint32_t& d : dims) {
    d = r.u32();
    count *= d;
  }
  const uint32_t dtype = r.u32();
  if (dtype != kDtypeF32)
    throw IoError("'" + path + "': unsupported dtype tag " + std::to_string(dtype));
  std::vector<float> data(count);
  r.f32_array(data.data(), count);
  return data;
}

void write_frames(const std::string& path, const std::vector<Image>& frames) {
  if (frames.empty()) throw Error("write_frames: no frames");
  const Image& first = frames.front();
  std::vector<float> flat;
  flat.reserve(frames.size() * first.size());
  for (const Image& f : frames) {
    require_same_shape(first, f, "write_frames");
    flat.insert(flat.end(), f.data.begin(), f.data.end());
  }
  write_tensor(path,
               {static_cast<uint32_t>(frames.size()), static_cast<uint32_t>(first.height),
                static_cast<uint32_t>(first.width), static_cast<uint32_t>(first.channels)},
               flat);
}

std::vector<Image> read_frames(const std::string& path) {
  std::vector<uint32_t> dims;
  const std::vector<float> flat = read_tensor(path, dims);
  if (dims.size() != 4) throw IoError("'" + path + "': expected a rank-4 frame tensor");
  const int n = static_cast<int>(dims[0]);
  std::vector<Image> frames;
  frames.reserve(n);
  const std::size_t stride = static_cast<std::size_t>(dims[1]) * dims[2] * dims[3];
  for (int i = 0; i < n; ++i) {
    Image img(static_cast<int>(dims[1]), static_cast<int>(dims[2]), static_cast<int>(dims[3]));
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                img.data.begin());
    frames.push_back(std::move(img));
  }
  return frames;
}

void write_poses(const std::string& path, const std::vector<Pose>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  char buf[32];
  for (const Pose& pose : poses) {
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 4; ++col) {
        const double v = col < 3 ? pose.rotation(row, col) : pose.translation(row);
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << (row == 2 && col == 3 ? "" : " ");
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<Pose> read_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<Pose> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    Pose pose;
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 4; ++col) {
        double v;
        if (!(ls >> v))
          throw IoError("'" + path + "': pose line needs 12 decimals: '" + line + "'");
        if (col < 3)
          pose.rotation(row, col) = v;
        else
          pose.translation(row) = v;
      }
    poses.push_back(pose);
  }
  return poses;
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw Error("write_png: only 1- or 3-channel images");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw IoError("png write failed for '" + path + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * image.channels);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v = std::clamp(static_cast<double>(image.at(r, c, ch)), 0.0, 1.0);
        row[static_cast<std::size_t>(c) * image.channels + ch] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace sci3d
