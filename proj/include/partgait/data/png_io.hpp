#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace partgait::data {

struct gray_image {
  int64_t height = 0, width = 0;
  std::vector<uint8_t> pixels;  // row-major, one byte per pixel
};

gray_image read_png_gray(const std::string& path);                   // io_error
void write_png_gray(const std::string& path, const gray_image& img); // io_error

}  // namespace partgait::data
