#include "mdwi/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace mdwi {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;
constexpr std::int16_t kFloat32 = 16;
constexpr char kStreamMagic[8] = {'M', 'D', 'W', 'I', 'S', 'T', 'R', '1'};

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

bool valid_channel_count(int c) { return c == 1 || c == 6 || c == 9 || c == 15; }

Domain default_domain(int channels) {
  switch (channels) {
    case 6:
    case 9: return Domain::tensor;
    case 15: return Domain::odf;
    default: return Domain::scalar;
  }
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const VolumeF& volume) {
  const auto& h = volume.header();
  h.validate();
  if (!valid_channel_count(h.channels))
    fail(ErrorKind::invalid_argument, "write_volume: channels must be 1, 6, 9 or 15");
  if (volume.data().size() != h.voxel_count() * static_cast<std::size_t>(h.channels))
    fail(ErrorKind::shape_mismatch, "write_volume: dimension/payload mismatch");

  const std::size_t payload = volume.data().size() * sizeof(float);
  std::vector<std::uint8_t> buf(kDataOffset + payload, 0);
  put<std::int32_t>(buf, 0, kHeaderSize);
  const std::int16_t ndim = h.channels > 1 ? 4 : 3;
  put<std::int16_t>(buf, 40, ndim);
  for (int i = 0; i < 3; ++i) put<std::int16_t>(buf, 42 + 2 * i, static_cast<std::int16_t>(h.dims[i]));
  put<std::int16_t>(buf, 48, static_cast<std::int16_t>(h.channels));
  for (int i = 5; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, 1);
  put<std::int16_t>(buf, 70, kFloat32);
  put<std::int16_t>(buf, 72, 32);
  put<float>(buf, 76, 1.0f);
  for (int i = 0; i < 3; ++i) put<float>(buf, 80 + 4 * i, static_cast<float>(h.spacing(i)));
  put<float>(buf, 92, 1.0f);
  put<float>(buf, 108, static_cast<float>(kDataOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  buf[123] = 2;  // mm
  const std::string descrip = "mdwi";
  std::memcpy(buf.data() + 148, descrip.data(), descrip.size());
  put<std::int16_t>(buf, 252, 0);
  put<std::int16_t>(buf, 254, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) put<float>(buf, 280 + 16 * r + 4 * c, static_cast<float>(h.affine(r, c)));
  const std::string intent = std::string("mdwi:") + to_string(h.domain);
  std::memcpy(buf.data() + 328, intent.data(), std::min<std::size_t>(intent.size(), 15));
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  std::memcpy(buf.data() + kDataOffset, volume.data().data(), payload);
  return buf;
}

VolumeF decode_volume(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    fail(ErrorKind::unsupported_format, "unsupported format: gzip-compressed NIfTI");
  if (bytes.size() < kDataOffset) fail(ErrorKind::unsupported_format, "malformed header: file shorter than 352 bytes");
  const auto sizeof_hdr = get<std::int32_t>(bytes, 0);
  if (sizeof_hdr != kHeaderSize) {
    const auto u = static_cast<std::uint32_t>(sizeof_hdr);
    const std::uint32_t swapped = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
    if (swapped == static_cast<std::uint32_t>(kHeaderSize))
      fail(ErrorKind::unsupported_format, "unsupported format: big-endian NIfTI");
    fail(ErrorKind::unsupported_format, "malformed header: sizeof_hdr != 348 (not NIfTI-1)");
  }
  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0)
    fail(ErrorKind::unsupported_format, "unsupported format: magic is not single-file NIfTI-1 'n+1'");
  const auto datatype = get<std::int16_t>(bytes, 70);
  if (datatype != kFloat32)
    fail(ErrorKind::unsupported_format, "unsupported format: datatype " + std::to_string(datatype) + " (float32 only)");
  const float slope = get<float>(bytes, 112);
  const float inter = get<float>(bytes, 116);
  if (!(slope == 0.0f || slope == 1.0f) || inter != 0.0f)
    fail(ErrorKind::unsupported_format, "unsupported format: intensity scaling");

  const int ndim = get<std::int16_t>(bytes, 40);
  if (ndim < 3 || ndim > 7) fail(ErrorKind::unsupported_format, "malformed header: dim[0] out of range");
  VolumeHeader h;
  for (int i = 0; i < 3; ++i) h.dims[i] = get<std::int16_t>(bytes, 42 + 2 * i);
  h.channels = 1;
  for (int i = 4; i <= ndim; ++i) h.channels *= get<std::int16_t>(bytes, 40 + 2 * i);
  if (!valid_channel_count(h.channels))
    fail(ErrorKind::unsupported_format, "unsupported format: channel count " + std::to_string(h.channels));
  for (int i = 0; i < 3; ++i) h.spacing(i) = get<float>(bytes, 80 + 4 * i);

  const auto sform = get<std::int16_t>(bytes, 254);
  h.affine.setIdentity();
  if (sform > 0) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) h.affine(r, c) = get<float>(bytes, 280 + 16 * r + 4 * c);
  } else {
    for (int i = 0; i < 3; ++i) h.affine(i, i) = h.spacing(i);
  }

  char intent[17] = {};
  std::memcpy(intent, bytes.data() + 328, 16);
  const std::string tag(intent);
  h.domain = tag.rfind("mdwi:", 0) == 0 ? domain_from_string(tag.substr(5)) : default_domain(h.channels);
  h.validate();

  const float offset_f = get<float>(bytes, 108);
  const auto offset = static_cast<std::size_t>(offset_f);
  if (offset < kDataOffset || static_cast<float>(offset) != offset_f)
    fail(ErrorKind::unsupported_format, "malformed header: vox_offset");
  const std::size_t count = h.voxel_count() * static_cast<std::size_t>(h.channels);
  if (bytes.size() < offset + count * sizeof(float))
    fail(ErrorKind::unsupported_format, "malformed file: truncated payload");
  std::vector<float> data(count);
  std::memcpy(data.data(), bytes.data() + offset, count * sizeof(float));
  return VolumeF(h, std::move(data));
}

VolumeF read_volume(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::io, "missing file '" + path.string() + "'");
  return decode_volume(slurp(path));
}

void write_volume(const std::filesystem::path& path, const VolumeF& volume) { dump(path, encode_volume(volume)); }

void write_volume(const std::filesystem::path& path, const VolumeD& volume) {
  write_volume(path, volume.cast<float>());
}

void export_slice_pgm(const VolumeD& volume, int axis, int index, const std::filesystem::path& path) {
  if (volume.channels() != 1) fail(ErrorKind::invalid_argument, "export_slice_pgm: volume is not scalar");
  if (axis < 0 || axis > 2) fail(ErrorKind::invalid_argument, "export_slice_pgm: axis must be 0, 1 or 2");
  const auto& d = volume.dims();
  if (index < 0 || index >= d[axis]) fail(ErrorKind::invalid_argument, "export_slice_pgm: slice index out of range");

  const int u_axis = axis == 0 ? 1 : 0;  // columns
  const int v_axis = axis == 2 ? 1 : 2;  // rows
  const int width = d[u_axis];
  const int height = d[v_axis];
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      int p[3];
      p[axis] = index;
      p[u_axis] = c;
      p[v_axis] = r;
      const double v = volume.at(p[0], p[1], p[2]);
      if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "export_slice_pgm: non-finite value in slice");
      values[static_cast<std::size_t>(r) * width + c] = v;
    }
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (double v : values) {
    const double scaled = range > 0.0 ? 255.0 * (v - *lo) / range : 0.0;
    bytes.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(scaled), 0L, 255L)));
  }
  dump(path, bytes);
}

std::vector<std::uint8_t> encode_streamlines(const std::vector<Streamline>& lines) {
  std::size_t total = 0;
  for (const auto& l : lines) {
    if (l.size() < 2) fail(ErrorKind::invalid_argument, "write_streamlines: streamline with fewer than 2 points");
    total += l.size();
  }
  std::vector<std::uint8_t> buf(8 + 4 + 4 * lines.size() + 12 * total);
  std::memcpy(buf.data(), kStreamMagic, 8);
  put<std::uint32_t>(buf, 8, static_cast<std::uint32_t>(lines.size()));
  std::size_t off = 12;
  for (const auto& l : lines) {
    put<std::uint32_t>(buf, off, static_cast<std::uint32_t>(l.size()));
    off += 4;
  }
  for (const auto& l : lines) {
    for (const auto& p : l) {
      for (int i = 0; i < 3; ++i) {
        put<float>(buf, off, static_cast<float>(p(i)));
        off += 4;
      }
    }
  }
  return buf;
}

std::vector<Streamline> decode_streamlines(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kStreamMagic, 8) != 0)
    fail(ErrorKind::unsupported_format, "streamlines: bad magic or truncated header");
  const auto count = get<std::uint32_t>(bytes, 8);
  if (bytes.size() < 12 + 4ull * count) fail(ErrorKind::unsupported_format, "streamlines: truncated count table");
  std::vector<std::uint32_t> sizes(count);
  std::size_t total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    sizes[i] = get<std::uint32_t>(bytes, 12 + 4ull * i);
    if (sizes[i] < 2) fail(ErrorKind::unsupported_format, "streamlines: streamline with fewer than 2 points");
    total += sizes[i];
  }
  std::size_t off = 12 + 4ull * count;
  if (bytes.size() != off + 12 * total) fail(ErrorKind::unsupported_format, "streamlines: truncated payload");
  std::vector<Streamline> lines(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    lines[i].resize(sizes[i]);
    for (auto& p : lines[i]) {
      for (int k = 0; k < 3; ++k) {
        p(k) = get<float>(bytes, off);
        off += 4;
      }
    }
  }
  return lines;
}

void write_streamlines(const std::filesystem::path& path, const std::vector<Streamline>& lines) {
  dump(path, encode_streamlines(lines));
}

std::vector<Streamline> read_streamlines(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::io, "missing file '" + path.string() + "'");
  return decode_streamlines(slurp(path));
}

}  // namespace mdwi
