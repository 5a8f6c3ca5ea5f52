#include "hef/binary_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hef {

namespace {

static_assert(std::endian::native == std::endian::little, "HEF1 I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + 4 > in.size()) throw std::runtime_error(path + ": truncated HEF1 header");
  std::uint32_t v;
  std::memcpy(&v, in.data() + pos, 4);
  pos += 4;
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_hef1(const std::string& path, const Hef1Array& a) {
  std::size_t count = 1;
  for (auto d : a.dims) count *= d;
  if (a.data.size() != count * (a.is_complex ? 2 : 1)) {
    throw std::invalid_argument("write_hef1: payload size does not match dims");
  }
  std::string out = "HEF1";
  put_u32(out, a.is_complex ? 1u : 0u);
  put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) put_u32(out, d);
  out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(double));
  atomic_write(path, out);
}

Hef1Array read_hef1(const std::string& path) {
  const std::string in = read_file(path);
  if (in.size() < 4 || in.compare(0, 4, "HEF1") != 0) throw std::runtime_error(path + ": bad magic (expected HEF1)");
  std::size_t pos = 4;
  Hef1Array a;
  const std::uint32_t kind = get_u32(in, pos, path);
  if (kind > 1) throw std::runtime_error(path + ": unknown element kind " + std::to_string(kind));
  a.is_complex = kind == 1;
  const std::uint32_t rank = get_u32(in, pos, path);
  if (rank > 8) throw std::runtime_error(path + ": implausible rank " + std::to_string(rank));
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    a.dims.push_back(get_u32(in, pos, path));
    count *= a.dims.back();
  }
  const std::size_t n = count * (a.is_complex ? 2 : 1);
  if (in.size() - pos != n * sizeof(double)) {
    throw std::runtime_error(path + ": payload has " + std::to_string(in.size() - pos) + " bytes, expected " +
                             std::to_string(n * sizeof(double)));
  }
  a.data.resize(n);
  std::memcpy(a.data.data(), in.data() + pos, n * sizeof(double));
  return a;
}

void save_grid(const DensityGrid& g, const std::string& path) {
  Hef1Array a;
  const auto& s = g.spec();
  a.dims = {static_cast<std::uint32_t>(s.nx), static_cast<std::uint32_t>(s.ny), static_cast<std::uint32_t>(s.ntheta)};
  a.data = g.values();
  write_hef1(path, a);
}

DensityGrid load_grid(const std::string& path, const GridSpec& spec) {
  Hef1Array a = read_hef1(path);
  if (a.is_complex || a.dims.size() != 3 || a.dims[0] != static_cast<std::uint32_t>(spec.nx) ||
      a.dims[1] != static_cast<std::uint32_t>(spec.ny) || a.dims[2] != static_cast<std::uint32_t>(spec.ntheta)) {
    throw std::runtime_error(path + ": array shape does not match the grid");
  }
  return DensityGrid(spec, std::move(a.data));
}

void save_spectrum(const Se2Spectrum& s, const std::string& path) {
  Hef1Array a;
  a.is_complex = true;
  a.dims = {static_cast<std::uint32_t>(s.n_lambda()), static_cast<std::uint32_t>(s.n_m()),
            static_cast<std::uint32_t>(s.n_n())};
  a.data.resize(2 * s.data().size());
  std::memcpy(a.data.data(), s.data().data(), a.data.size() * sizeof(double));
  write_hef1(path, a);
}

Se2Spectrum load_spectrum(const std::string& path, SpectrumRole role) {
  Hef1Array a = read_hef1(path);
  if (!a.is_complex || a.dims.size() != 3) throw std::runtime_error(path + ": not a 3-D complex spectrum");
  Se2Spectrum s(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), static_cast<int>(a.dims[2]), role);
  for (std::size_t i = 0; i < s.data().size(); ++i) s.data()[i] = cplx(a.data[2 * i], a.data[2 * i + 1]);
  return s;
}

}  // namespace hef
