#pragma once

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "unishield/error.hpp"
#include "unishield/types.hpp"

// Fails unless `stmt` throws unishield::Error with the given code.
#define EXPECT_ERROR_CODE(stmt, expected)                                        \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected " << unishield::to_string(expected);            \
    } catch (const unishield::Error& e_) {                                       \
      EXPECT_EQ(e_.code(), expected) << e_.what();                               \
    }                                                                            \
  } while (0)

namespace testing_support {

inline unishield::ImageRecord solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b,
                                    std::string id = "solid") {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = r;
    px[i + 1] = g;
    px[i + 2] = b;
  }
  return unishield::ImageRecord::from_pixels(std::move(id), w, h, std::move(px));
}

inline unishield::Mask random_mask(std::mt19937_64& rng, int max_side, double p = -1.0) {
  std::uniform_int_distribution<int> side(1, max_side);
  const int w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double density = p < 0 ? u(rng) : p;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& b : bits) b = u(rng) < density ? 1 : 0;
  return unishield::Mask(w, h, std::move(bits));
}

}  // namespace testing_support

#include "json.hpp"
#include "unishield/protocol.hpp"

namespace testing_support {

inline std::string text_reply(const unishield::AdapterRequest& req, const std::string& text) {
  auto j = unishield::make_ok_reply(req.request_id);
  j["text"] = text;
  return j.dump();
}

inline unishield::ImageRecord checkerboard(int w, int h, int cell, std::string id = "checker") {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = ((x / cell + y / cell) % 2) ? 255 : 0;
      for (int k = 0; k < 3; ++k) px[(static_cast<std::size_t>(y) * w + x) * 3 + k] = v;
    }
  return unishield::ImageRecord::from_pixels(std::move(id), w, h, std::move(px));
}

inline unishield::ImageRecord noise_image(std::mt19937_64& rng, int w, int h, std::string id = "noise") {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  for (auto& p : px) p = static_cast<std::uint8_t>(rng());
  return unishield::ImageRecord::from_pixels(std::move(id), w, h, std::move(px));
}

}  // namespace testing_support
