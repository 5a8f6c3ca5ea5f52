#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hef/grid.hpp"
#include "hef/se2_fourier.hpp"

namespace hef {

// Flat array file:
//   "HEF1" | u32 kind (0 real, 1 complex) | u32 rank | u32 dims[rank] | f64 payload
// All integers and doubles little-endian, payload row-major, complex values
// interleaved (re, im).
struct Hef1Array {
  std::vector<std::uint32_t> dims;
  bool is_complex = false;
  std::vector<double> data;  // 2× element count when complex
};

void write_hef1(const std::string& path, const Hef1Array& a);
Hef1Array read_hef1(const std::string& path);

void save_grid(const DensityGrid& g, const std::string& path);
DensityGrid load_grid(const std::string& path, const GridSpec& spec);

void save_spectrum(const Se2Spectrum& s, const std::string& path);
Se2Spectrum load_spectrum(const std::string& path, SpectrumRole role);

// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace hef
