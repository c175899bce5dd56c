#ifndef GREYREID_MONTAGE_HPP_
#define GREYREID_MONTAGE_HPP_

#include <filesystem>
#include <vector>

#include <opencv2/core.hpp>

namespace greyreid {

enum class TileMark { kQuery, kMatch, kMismatch };

struct MontageTile {
  cv::Mat rgb;  // CV_8UC3, any size; resized to the tile size
  TileMark mark = TileMark::kQuery;
};

inline constexpr int kTileHeight = 128;
inline constexpr int kTileWidth = 64;
inline constexpr int kTileBorder = 4;

// Border colours in RGB order.
cv::Vec3b tile_color(TileMark mark);

// Tiles laid left to right, each framed in its border colour, separated by
// a small gap. Result is RGB.
cv::Mat render_montage(const std::vector<MontageTile>& tiles);

}  // namespace greyreid

#endif  // GREYREID_MONTAGE_HPP_
