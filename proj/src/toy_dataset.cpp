#include "greyreid/toy_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "greyreid/errors.hpp"
#include "greyreid/image_store.hpp"
#include "greyreid/rng.hpp"

namespace greyreid {

namespace {

const cv::Vec3b kPalette[] = {
    {200, 50, 50}, {50, 170, 60}, {50, 80, 200}, {210, 190, 50},
    {140, 60, 170}, {50, 180, 190}, {230, 130, 40}, {230, 140, 180},
};
constexpr int kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);
constexpr int kPatternCount = 8;

int grid_columns(int identities) { return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(identities)))); }

cv::Vec3b hue_color(double hue_deg) {
  // HSV with s=0.75, v=0.8.
  const double s = 0.75, v = 0.8;
  const double c = v * s;
  const double hp = std::fmod(hue_deg, 360.0) / 60.0;
  const double x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  return {static_cast<std::uint8_t>(std::lround((r + m) * 255)), static_cast<std::uint8_t>(std::lround((g + m) * 255)),
          static_cast<std::uint8_t>(std::lround((b + m) * 255))};
}

// 1 where the stripe colour is drawn. Every pattern has a 50% duty cycle.
bool pattern_on(int pattern, int u, int v, int phase) {
  switch (pattern % kPatternCount) {
    case 0: return ((v + phase) / 6) % 2 == 0;
    case 1: return ((u + phase) / 6) % 2 == 0;
    case 2: return (((u + phase) / 6) + ((v + phase) / 6)) % 2 == 0;
    case 3: return ((u + v + phase) / 8) % 2 == 0;
    case 4: return ((v + phase) / 12) % 2 == 0;
    case 5: return ((u + phase) / 12) % 2 == 0;
    case 6: return (((u + phase) / 3) + ((v + phase) / 3)) % 2 == 0;
    default: return ((u - v + 1000 + phase) / 8) % 2 == 0;
  }
}

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void ToyConfig::validate() const {
  if (cameras < 2) throw ConfigError("toy dataset needs at least 2 cameras (single-query protocol is vacuous otherwise)");
  if (identities < 4) throw ConfigError("toy dataset needs at least 4 identities");
  if (images_per_identity < 2 * cameras) {
    throw ConfigError("toy dataset needs at least 2 images per identity per camera");
  }
  if (height < 32 || width < 16) throw ConfigError("toy image size too small");
  if (color_confound && grid_columns(identities) > kPaletteSize) {
    throw ConfigError("too many identities for the colour-confound palette");
  }
}

ToyIdentity toy_identity(const ToyConfig& cfg, int identity) {
  const int cols = grid_columns(cfg.identities);
  ToyIdentity id;
  id.color = identity % cols;
  id.pattern = identity / cols;
  id.train = (id.color + id.pattern) % 2 == 0;
  if (cfg.color_confound) {
    id.shirt = kPalette[id.color];
  } else {
    id.color = identity;
    id.shirt = hue_color(360.0 * identity / cfg.identities);
  }
  id.stripe = cv::Vec3b(clamp_u8(id.shirt[0] * 0.4), clamp_u8(id.shirt[1] * 0.4), clamp_u8(id.shirt[2] * 0.4));
  return id;
}

cv::Mat render_toy_image(const ToyConfig& cfg, const ToyIdentity& id, int camera, std::mt19937_64& rng) {
  const int H = cfg.height, W = cfg.width;
  const double sy = H / 128.0, sx = W / 64.0;
  std::uniform_int_distribution<int> jitter(-3, 3);
  std::uniform_real_distribution<double> scale_d(0.92, 1.08);
  std::uniform_int_distribution<int> phase_d(0, 23);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);

  // Camera: background tint and global brightness.
  const double brightness = std::max(0.55, 1.0 - 0.15 * camera);
  const cv::Vec3d bg_base = camera % 2 == 0 ? cv::Vec3d(120, 125, 120) : cv::Vec3d(105, 100, 115);
  const cv::Vec3d skin(224, 180, 150), pants(60, 60, 70);

  const double s = scale_d(rng);
  const double cx = W / 2.0 + jitter(rng) * sx;
  const double top = 8 * sy + jitter(rng) * sy;
  const int phase = phase_d(rng);

  const double head_r = 8 * s * sy, head_cy = top + 9 * s * sy;
  const double torso_x0 = cx - 14 * s * sx, torso_x1 = cx + 14 * s * sx;
  const double torso_y0 = top + 19 * s * sy, torso_y1 = top + 64 * s * sy;
  const double leg_y1 = std::min(top + 112 * s * sy, H - 1.0);

  cv::Mat img(H, W, CV_8UC3);
  for (int y = 0; y < H; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < W; ++x) {
      cv::Vec3d c = bg_base * (0.9 + 0.2 * y / H);
      const double dx = x - cx, dy = y - head_cy;
      if (dx * dx + dy * dy <= head_r * head_r) {
        c = skin;
      } else if (x >= torso_x0 && x < torso_x1 && y >= torso_y0 && y < torso_y1) {
        const int u = static_cast<int>((x - torso_x0) / sx), v = static_cast<int>((y - torso_y0) / sy);
        const cv::Vec3b& src = pattern_on(id.pattern, u, v, phase) ? id.stripe : id.shirt;
        c = cv::Vec3d(src[0], src[1], src[2]);
      } else if (y >= torso_y1 && y < leg_y1 &&
                 ((x >= cx - 12 * s * sx && x < cx - 2 * s * sx) || (x >= cx + 2 * s * sx && x < cx + 12 * s * sx))) {
        c = pants;
      }
      for (int k = 0; k < 3; ++k) row[x][k] = clamp_u8((c[k] + noise(rng)) * brightness);
    }
  }
  return img;
}

DatasetSplit generate_toy_dataset(const ToyConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path train_dir = out_dir / "bounding_box_train";
  const fs::path query_dir = out_dir / "query";
  const fs::path gallery_dir = out_dir / "bounding_box_test";
  for (const auto& d : {train_dir, query_dir, gallery_dir}) fs::create_directories(d);

  DatasetSplit split;
  int serial = 0;
  for (int i = 0; i < cfg.identities; ++i) {
    const ToyIdentity id = toy_identity(cfg, i);
    const int pid = i + 1;
    std::vector<bool> query_taken(cfg.cameras, false);
    for (int j = 0; j < cfg.images_per_identity; ++j) {
      const int cam = j % cfg.cameras;
      auto rng = derive_rng(seed, {kTagToy, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      const cv::Mat img = render_toy_image(cfg, id, cam, rng);

      char name[64];
      std::snprintf(name, sizeof(name), "%04d_c%ds1_%06d_00.png", pid, cam + 1, serial++);
      SplitKind kind = SplitKind::kTrain;
      fs::path dir = train_dir;
      if (!id.train) {
        if (!query_taken[cam]) {
          query_taken[cam] = true;
          kind = SplitKind::kQuery;
          dir = query_dir;
        } else {
          kind = SplitKind::kGallery;
          dir = gallery_dir;
        }
      }
      const fs::path path = dir / name;
      save_rgb(path, img);
      ImageRecord rec(path, pid, cam + 1);
      switch (kind) {
        case SplitKind::kTrain: split.train.push_back(rec); break;
        case SplitKind::kQuery: split.query.push_back(rec); break;
        case SplitKind::kGallery: split.gallery.push_back(rec); break;
      }
    }
  }
  finalize_split(split);
  write_manifest(out_dir / "manifest.csv", split);
  return split;
}

}  // namespace greyreid
