#include <png.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "dimal/geometry.hpp"

namespace dimal::geometry {

namespace {

struct DecodedImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<unsigned char> pixels;  // interleaved, 8-bit
};

DecodedImage decode_png(const std::filesystem::path& file, bool grayscale) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, file.string().c_str()))
    throw std::runtime_error("undecodable PNG: " + file.string() + " (" +
                             image.message + ")");
  image.format = grayscale ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  DecodedImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = grayscale ? 1 : 3;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("undecodable PNG: " + file.string() + " (" + msg +
                             ")");
  }
  return out;
}

}  // namespace

PointCloud load_image_directory(const std::filesystem::path& path,
                                bool grayscale) {
  if (!std::filesystem::exists(path))
    throw std::invalid_argument("image directory does not exist: " +
                               path.string());
  if (!std::filesystem::is_directory(path))
    throw std::invalid_argument("not a directory: " + path.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  if (files.empty())
    throw std::runtime_error("no images found in " + path.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

  PointCloud cloud;
  int width = 0, height = 0, channels = 0;
  for (std::size_t idx = 0; idx < files.size(); ++idx) {
    DecodedImage img = decode_png(files[idx], grayscale);
    if (idx == 0) {
      width = img.width;
      height = img.height;
      channels = img.channels;
      cloud.points.resize(static_cast<Eigen::Index>(files.size()),
                          static_cast<Eigen::Index>(channels) * height * width);
    } else if (img.width != width || img.height != height) {
      throw std::runtime_error(
          "inconsistent image dimensions: " + files[idx].string() + " is " +
          std::to_string(img.width) + "x" + std::to_string(img.height) +
          ", expected " + std::to_string(width) + "x" + std::to_string(height));
    }
    // Interleaved 8-bit rows -> planar (c, h, w) doubles in [0, 1].
    auto row = cloud.points.row(static_cast<Eigen::Index>(idx));
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          row(static_cast<Eigen::Index>(c) * height * width +
              static_cast<Eigen::Index>(y) * width + x) =
              img.pixels[(static_cast<std::size_t>(y) * width + x) * channels +
                         c] /
              255.0;
  }
  return cloud;
}

}  // namespace dimal::geometry
