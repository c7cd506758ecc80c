#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unishield/evaluate.hpp"
#include "unishield/types.hpp"

namespace unishield {

// Procedural fixtures with track-typical looks:
//   IMDL  colourful blob scene, FAKE adds a spliced patch
//   DMDL  light page with rows of dark dashes, FAKE rewrites a block of text
//   DFD   skin-tone face ellipse on a muted background
//   AIGCD smooth pastel gradient
// Cue "artifact" overlays sensor noise and 8x8 block offsets; "semantic"
// (and no cue) leaves the image clean.
enum class SyntheticCue { NONE, SEMANTIC, ARTIFACT };
std::string_view to_string(SyntheticCue cue);

struct SyntheticSample {
  ImageRecord image;
  ForgeryDomain domain = ForgeryDomain::IMDL;
  Verdict label = Verdict::REAL;
  std::optional<Mask> mask;  // IMDL/DMDL only; all-zero for REAL
  SyntheticCue cue = SyntheticCue::NONE;

  std::optional<std::string> cue_tag() const;
  GroundTruthHint hint() const { return {label, mask, cue_tag()}; }
};

SyntheticSample generate_sample(ForgeryDomain domain, Verdict label, SyntheticCue cue,
                                std::uint64_t seed, int size = 32, std::string id = {});

enum class CueMix { NONE, SEMANTIC, ARTIFACT, MIXED };

/// n samples cycling through domains, labels and (for MIXED) cues so every
/// combination is equally represented. Deterministic in `seed`.
std::vector<SyntheticSample> generate_set(std::size_t n, std::uint64_t seed, CueMix mix = CueMix::NONE,
                                          int size = 32, const std::string& id_prefix = "synth");

/// Writes <dir>/images/*.png, <dir>/masks/*.png and appends entries to
/// <dir>/manifest.jsonl. Returns the manifest entries written.
std::vector<ManifestEntry> write_synthetic(const std::filesystem::path& dir,
                                           const std::vector<SyntheticSample>& samples,
                                           const std::string& split, bool append = false);

}  // namespace unishield
