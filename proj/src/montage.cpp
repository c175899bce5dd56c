#include "greyreid/montage.hpp"

#include <opencv2/imgproc.hpp>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {
constexpr int kGap = 2;
}

cv::Vec3b tile_color(TileMark mark) {
  switch (mark) {
    case TileMark::kMatch:
      return {0, 200, 0};
    case TileMark::kMismatch:
      return {220, 0, 0};
    case TileMark::kQuery:
      break;
  }
  return {128, 128, 128};
}

cv::Mat render_montage(const std::vector<MontageTile>& tiles) {
  if (tiles.empty()) throw ShapeError("montage needs at least one tile");
  const int cell_w = kTileWidth + 2 * kTileBorder;
  const int cell_h = kTileHeight + 2 * kTileBorder;
  const int n = static_cast<int>(tiles.size());
  cv::Mat out(cell_h, n * cell_w + (n - 1) * kGap, CV_8UC3, cv::Scalar(255, 255, 255));
  for (int i = 0; i < n; ++i) {
    const auto& t = tiles[static_cast<std::size_t>(i)];
    if (t.rgb.type() != CV_8UC3) throw ShapeError("montage tile must be 8-bit 3-channel");
    const int x0 = i * (cell_w + kGap);
    const cv::Vec3b c = tile_color(t.mark);
    out(cv::Rect(x0, 0, cell_w, cell_h)).setTo(cv::Scalar(c[0], c[1], c[2]));
    cv::Mat img;
    cv::resize(t.rgb, img, cv::Size(kTileWidth, kTileHeight), 0, 0, cv::INTER_AREA);
    img.copyTo(out(cv::Rect(x0 + kTileBorder, kTileBorder, kTileWidth, kTileHeight)));
  }
  return out;
}

}  // namespace greyreid
