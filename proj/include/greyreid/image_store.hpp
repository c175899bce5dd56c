#ifndef GREYREID_IMAGE_STORE_HPP_
#define GREYREID_IMAGE_STORE_HPP_

#include <filesystem>
#include <map>
#include <mutex>

#include <opencv2/core.hpp>

namespace greyreid {

// Reads an image as 8-bit RGB. Throws DataError if it cannot be decoded.
cv::Mat load_rgb(const std::filesystem::path& path);
void save_rgb(const std::filesystem::path& path, const cv::Mat& rgb);

/// Decoded-image cache shared by the training loop and batch workers.
class ImageStore {
 public:
  cv::Mat get(const std::filesystem::path& path);

 private:
  std::mutex mu_;
  std::map<std::filesystem::path, cv::Mat> cache_;
};

}  // namespace greyreid

#endif  // GREYREID_IMAGE_STORE_HPP_
