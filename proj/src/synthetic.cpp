#include "unishield/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "unishield/error.hpp"
#include "unishield/image_io.hpp"

namespace unishield {

std::string_view to_string(SyntheticCue cue) {
  switch (cue) {
    case SyntheticCue::SEMANTIC: return "semantic";
    case SyntheticCue::ARTIFACT: return "artifact";
    case SyntheticCue::NONE: break;
  }
  return "none";
}

std::optional<std::string> SyntheticSample::cue_tag() const {
  if (cue == SyntheticCue::NONE) return std::nullopt;
  return std::string(to_string(cue));
}

namespace {

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 0.0) {}
  int w() const { return w_; }
  int h() const { return h_; }
  double* at(int x, int y) { return &px_[(static_cast<std::size_t>(y) * w_ + x) * 3]; }
  void put(int x, int y, double r, double g, double b) {
    auto* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  void fill_rect(int x0, int y0, int x1, int y1, double r, double g, double b) {
    for (int y = std::max(0, y0); y < std::min(h_, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(w_, x1); ++x) put(x, y, r, g, b);
  }
  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> out(px_.size());
    for (std::size_t i = 0; i < px_.size(); ++i)
      out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(px_[i]), 0L, 255L));
    return out;
  }
  std::vector<double>& raw() { return px_; }

 private:
  int w_, h_;
  std::vector<double> px_;
};

struct Rng {
  std::mt19937_64 engine;
  double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * uniform());
  }
};

struct Region {
  int x0, y0, x1, y1;
};

Region random_region(Rng& rng, int size) {
  const int rw = rng.integer(size / 4, size / 2);
  const int rh = rng.integer(size / 4, size / 2);
  const int x0 = rng.integer(1, size - rw - 1);
  const int y0 = rng.integer(1, size - rh - 1);
  return {x0, y0, x0 + rw, y0 + rh};
}

void draw_imdl(Canvas& c, Rng& rng, const std::optional<Region>& splice) {
  const int s = c.w();
  // Saturated background gradient plus a handful of coloured blobs.
  const double base[3] = {rng.uniform(40, 200), rng.uniform(40, 200), rng.uniform(40, 200)};
  const int hue = rng.integer(0, 2);
  for (int y = 0; y < c.h(); ++y)
    for (int x = 0; x < s; ++x) {
      double v[3] = {base[0], base[1], base[2]};
      v[hue] = 30 + 200.0 * x / s;
      v[(hue + 1) % 3] = 30 + 180.0 * y / c.h();
      c.put(x, y, v[0], v[1], v[2]);
    }
  const int blobs = rng.integer(3, 5);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0, s), cy = rng.uniform(0, c.h()), rad = rng.uniform(s / 8.0, s / 4.0);
    double col[3] = {rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)};
    col[rng.integer(0, 2)] = rng.uniform(0, 40);
    // Soft-edged disc: alpha falls off over a few pixels.
    for (int y = 0; y < c.h(); ++y)
      for (int x = 0; x < s; ++x) {
        const double r = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
        const double alpha = std::clamp((rad - r) / 4.0 + 0.5, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        auto* p = c.at(x, y);
        for (int k = 0; k < 3; ++k) p[k] = (1 - alpha) * p[k] + alpha * col[k];
      }
  }
  if (splice) {
    // Copy of a shifted area with a colour cast: a pasted patch.
    const int dx = rng.integer(-s / 4, s / 4), dy = rng.integer(-s / 4, s / 4);
    const double cast[3] = {rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60)};
    std::vector<double> src = c.raw();
    for (int y = splice->y0; y < splice->y1; ++y)
      for (int x = splice->x0; x < splice->x1; ++x) {
        const int sx = std::clamp(x + dx, 0, s - 1), sy = std::clamp(y + dy, 0, c.h() - 1);
        const double* p = &src[(static_cast<std::size_t>(sy) * s + sx) * 3];
        c.put(x, y, p[0] + cast[0], p[1] + cast[1], p[2] + cast[2]);
      }
  }
}

void draw_dmdl(Canvas& c, Rng& rng, const std::optional<Region>& edit) {
  const double sheet = rng.uniform(200, 220);
  const double tint = rng.uniform(-4, 4);
  for (int y = 0; y < c.h(); ++y)
    for (int x = 0; x < c.w(); ++x) c.put(x, y, sheet + tint, sheet, sheet - tint);
  const double ink = sheet - rng.uniform(36, 44);
  const int pitch = rng.integer(3, 4);
  for (int y = 2; y < c.h() - 1; y += pitch) {
    int x = rng.integer(1, 3);
    while (x < c.w() - 2) {
      const int len = rng.integer(2, 4);
      for (int k = 0; k < len && x + k < c.w() - 1; ++k) c.put(x + k, y, ink, ink, ink);
      x += len + rng.integer(2, 3);
    }
  }
  if (edit) {
    // Retyped block: blank it and lay down dashes at a different ink level.
    const double ink2 = sheet - rng.uniform(45, 55);
    c.fill_rect(edit->x0, edit->y0, edit->x1, edit->y1, sheet + tint, sheet, sheet - tint);
    for (int y = edit->y0 + 1; y < edit->y1; y += pitch) {
      for (int x = edit->x0; x < edit->x1; x += 4) {
        for (int k = 0; k < 2 && x + k < edit->x1; ++k) c.put(x + k, y, ink2, ink2, ink2);
      }
    }
  }
}

void draw_dfd(Canvas& c, Rng& rng, bool fake) {
  const int s = c.w();
  const double bg = rng.uniform(60, 120);
  const double bg_tint[3] = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 25)};
  for (int y = 0; y < c.h(); ++y)
    for (int x = 0; x < s; ++x) c.put(x, y, bg + bg_tint[0], bg + bg_tint[1], bg + bg_tint[2]);
  const double cx = s / 2.0 + rng.uniform(-2, 2), cy = c.h() / 2.0 + rng.uniform(-2, 2);
  const double ax = s * rng.uniform(0.32, 0.4), ay = c.h() * rng.uniform(0.4, 0.46);
  const double skin[3] = {rng.uniform(185, 215), rng.uniform(135, 160), rng.uniform(110, 130)};
  for (int y = 0; y < c.h(); ++y)
    for (int x = 0; x < s; ++x) {
      const double u = (x - cx) / ax, v = (y - cy) / ay;
      if (u * u + v * v <= 1.0) {
        const double shade = 1.0 - 0.12 * (u * u + v * v);
        c.put(x, y, skin[0] * shade, skin[1] * shade, skin[2] * shade);
      }
    }
  // Eyes and mouth.
  const int ey = static_cast<int>(cy - ay * 0.25), ex = static_cast<int>(ax * 0.4);
  c.fill_rect(static_cast<int>(cx) - ex - 1, ey, static_cast<int>(cx) - ex + 2, ey + 2, 40, 30, 30);
  c.fill_rect(static_cast<int>(cx) + ex - 1, ey, static_cast<int>(cx) + ex + 2, ey + 2, 40, 30, 30);
  const int my = static_cast<int>(cy + ay * 0.45);
  c.fill_rect(static_cast<int>(cx) - ex, my, static_cast<int>(cx) + ex, my + 1, 150, 70, 70);
  if (fake) {
    // Swapped face: a second, slightly off-tone skin patch with a hard seam.
    const double swap[3] = {skin[0] + rng.uniform(-15, 15), skin[1] + rng.uniform(-15, 15),
                            skin[2] + rng.uniform(-10, 10)};
    const int x0 = static_cast<int>(cx - ax * 0.6), x1 = static_cast<int>(cx + ax * 0.6);
    const int y0 = static_cast<int>(cy - ay * 0.1), y1 = static_cast<int>(cy + ay * 0.35);
    c.fill_rect(x0, y0, x1, y1, swap[0], swap[1], swap[2]);
  }
}

void draw_aigcd(Canvas& c, Rng& rng, bool fake) {
  const double a[3] = {rng.uniform(140, 180), rng.uniform(165, 195), rng.uniform(200, 225)};
  const double b[3] = {rng.uniform(155, 190), rng.uniform(195, 220), rng.uniform(170, 205)};
  const double angle = rng.uniform(0, std::numbers::pi);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double span = c.w() * (std::abs(dx) + std::abs(dy));
  for (int y = 0; y < c.h(); ++y)
    for (int x = 0; x < c.w(); ++x) {
      double t = ((x - c.w() / 2.0) * dx + (y - c.h() / 2.0) * dy) / span + 0.5;
      if (fake) t = 0.5 + 0.5 * std::sin(std::numbers::pi * (t - 0.5));  // over-smoothed ramp
      c.put(x, y, a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t);
    }
}

void add_artifacts(Canvas& c, Rng& rng) {
  constexpr double kNoiseSigma = 26.0;
  constexpr double kBlockOffset = 14.0;
  for (int by = 0; by < c.h(); by += 8)
    for (int bx = 0; bx < c.w(); bx += 8) {
      const double off = rng.uniform(-kBlockOffset, kBlockOffset);
      for (int y = by; y < std::min(c.h(), by + 8); ++y)
        for (int x = bx; x < std::min(c.w(), bx + 8); ++x) {
          auto* p = c.at(x, y);
          const double n = kNoiseSigma * rng.normal();
          for (int k = 0; k < 3; ++k) p[k] += off + n;
        }
    }
}

}  // namespace

SyntheticSample generate_sample(ForgeryDomain domain, Verdict label, SyntheticCue cue,
                                std::uint64_t seed, int size, std::string id) {
  if (size < 16) throw Error(ErrorCode::InvalidArgument, "synthetic images must be at least 16 px");
  Rng rng{std::mt19937_64(seed)};
  Canvas canvas(size, size);
  const bool fake = label == Verdict::FAKE;
  std::optional<Region> region;
  if (fake && requires_localization(domain)) region = random_region(rng, size);

  switch (domain) {
    case ForgeryDomain::IMDL: draw_imdl(canvas, rng, region); break;
    case ForgeryDomain::DMDL: draw_dmdl(canvas, rng, region); break;
    case ForgeryDomain::DFD: draw_dfd(canvas, rng, fake); break;
    case ForgeryDomain::AIGCD: draw_aigcd(canvas, rng, fake); break;
  }
  if (cue == SyntheticCue::ARTIFACT) add_artifacts(canvas, rng);

  SyntheticSample s;
  if (id.empty()) id = "synth-" + std::to_string(seed);
  s.image = ImageRecord::from_pixels(std::move(id), size, size, canvas.bytes());
  s.domain = domain;
  s.label = label;
  s.cue = cue;
  if (requires_localization(domain)) {
    Mask m(size, size);
    if (region)
      for (int y = region->y0; y < region->y1; ++y)
        for (int x = region->x0; x < region->x1; ++x) m.set(x, y, true);
    s.mask = std::move(m);
  }
  return s;
}

std::vector<SyntheticSample> generate_set(std::size_t n, std::uint64_t seed, CueMix mix, int size,
                                          const std::string& id_prefix) {
  std::vector<SyntheticSample> out;
  out.reserve(n);
  std::mt19937_64 seeds(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto domain = kAllDomains[i % kNumDomains];
    const auto label = (i / kNumDomains) % 2 == 0 ? Verdict::REAL : Verdict::FAKE;
    SyntheticCue cue = SyntheticCue::NONE;
    switch (mix) {
      case CueMix::NONE: break;
      case CueMix::SEMANTIC: cue = SyntheticCue::SEMANTIC; break;
      case CueMix::ARTIFACT: cue = SyntheticCue::ARTIFACT; break;
      case CueMix::MIXED:
        cue = (i / (2 * kNumDomains)) % 2 == 0 ? SyntheticCue::SEMANTIC : SyntheticCue::ARTIFACT;
        break;
    }
    out.push_back(generate_sample(domain, label, cue, seeds(), size, id_prefix + "-" + std::to_string(i)));
  }
  return out;
}

std::vector<ManifestEntry> write_synthetic(const std::filesystem::path& dir,
                                           const std::vector<SyntheticSample>& samples,
                                           const std::string& split, bool append) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.jsonl", append ? std::ios::app : std::ios::trunc);
  if (!manifest) throw Error(ErrorCode::IoError, "cannot write manifest in " + dir.string());

  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    std::string stem = s.image.id();
    std::replace_if(stem.begin(), stem.end(), [](char ch) { return ch == '/' || ch == ':'; }, '_');
    ManifestEntry e;
    e.image_path = "images/" + stem + ".png";
    write_file(dir / e.image_path, s.image.bytes());
    if (s.mask) {
      e.gt_mask_path = "masks/" + stem + ".png";
      write_file(dir / *e.gt_mask_path, encode_mask_png(*s.mask));
    }
    e.gt_verdict = s.label;
    e.gt_domain = s.domain;
    e.split = split;
    e.cue = s.cue_tag();
    manifest << manifest_entry_to_json(e).dump() << "\n";
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace unishield
