#include <random>

#include "doctest.h"

#include "greyreid/errors.hpp"
#include "greyreid/greyscale.hpp"

using namespace greyreid;

TEST_CASE("grey hand values") {
  CHECK(grey_value(100, 100, 100, GreyWeights::luma()) == 100);
  CHECK(grey_value(255, 0, 0, GreyWeights::luma()) == 76);
  CHECK(grey_value(0, 255, 0, GreyWeights::average()) == 85);
  CHECK(grey_value(255, 255, 255, GreyWeights::luma()) == 255);
  CHECK(grey_value(0, 0, 0, GreyWeights::luma()) == 0);
}

TEST_CASE("grey image replicates the value across channels") {
  std::mt19937_64 rng(3);
  cv::Mat rgb(7, 5, CV_8UC3);
  for (int y = 0; y < rgb.rows; ++y) {
    for (int x = 0; x < rgb.cols; ++x) {
      rgb.at<cv::Vec3b>(y, x) = cv::Vec3b(rng() & 255, rng() & 255, rng() & 255);
    }
  }
  const cv::Mat g = to_greyscale(rgb);
  REQUIRE(g.type() == CV_8UC3);
  for (int y = 0; y < rgb.rows; ++y) {
    for (int x = 0; x < rgb.cols; ++x) {
      const auto p = rgb.at<cv::Vec3b>(y, x);
      const auto q = g.at<cv::Vec3b>(y, x);
      CHECK(q[0] == q[1]);
      CHECK(q[1] == q[2]);
      CHECK(std::abs(q[0] - grey_exact(p[0], p[1], p[2], GreyWeights::luma())) <= 0.5);
    }
  }
  CHECK_THROWS_AS(to_greyscale(cv::Mat(4, 4, CV_8UC1)), ShapeError);
}

TEST_CASE("channel order matters") {
  cv::Mat red(1, 1, CV_8UC3, cv::Scalar(255, 0, 0));
  CHECK(to_greyscale(red).at<cv::Vec3b>(0, 0)[0] == 76);
  cv::Mat blue(1, 1, CV_8UC3, cv::Scalar(0, 0, 255));
  CHECK(to_greyscale(blue).at<cv::Vec3b>(0, 0)[0] == 29);
}
