#include "asgl/synth.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "asgl/error.hpp"
#include "asgl/rng.hpp"

namespace asgl {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGrid = 1048576.0;  // 2^20

// Keeps every coordinate a multiple of 2^-20, so the sums and halvings in
// keypoint reduction and root-centering never round.
double snap(double v) { return std::round(v * kGrid) / kGrid; }

void place(std::vector<Vec3>& points, std::size_t frame,
           std::initializer_list<int> raw_indices, double x, double y,
           double z) {
  const Vec3 p{snap(x), snap(y), snap(z)};
  for (int idx : raw_indices) {
    points[frame * kRawKeypoints + static_cast<std::size_t>(idx)] = p;
  }
}

void validate(const SynthSpec& spec) {
  if (spec.identities.empty()) {
    raise(ErrorCode::config, "synthesize_gait: no identities to generate");
  }
  if (spec.tracklets_per_identity == 0) {
    raise(ErrorCode::config, "synthesize_gait: tracklets_per_identity is 0");
  }
  if (spec.frames_per_tracklet == 0) {
    raise(ErrorCode::config, "synthesize_gait: frames_per_tracklet is 0");
  }
  if (spec.clothing_variants == 0) {
    raise(ErrorCode::config, "synthesize_gait: clothing_variants is 0");
  }
  if (!std::isfinite(spec.appearance_noise) || spec.appearance_noise < 0.0) {
    raise(ErrorCode::config, "synthesize_gait: appearance_noise must be a "
                             "finite non-negative value");
  }
  std::set<std::string> seen;
  for (const auto& id : spec.identities) {
    if (!seen.insert(id.person_id).second) {
      raise(ErrorCode::config,
            "synthesize_gait: duplicate person id \"" + id.person_id + "\"");
    }
    if (!std::isfinite(id.frequency) || !std::isfinite(id.phase) ||
        !std::isfinite(id.amplitude) || !std::isfinite(id.scale)) {
      raise(ErrorCode::config, "synthesize_gait: non-finite gait parameter "
                               "for person \"" + id.person_id + "\"");
    }
    if (id.amplitude < 0.0) {
      raise(ErrorCode::config, "synthesize_gait: negative amplitude for "
                               "person \"" + id.person_id + "\"");
    }
    if (id.scale <= 0.0) {
      raise(ErrorCode::config, "synthesize_gait: scale for person \"" +
                                   id.person_id + "\" must be positive");
    }
  }
}

}  // namespace

std::vector<SynthIdentity> default_identities(std::size_t count) {
  std::vector<SynthIdentity> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t =
        count <= 1 ? 0.0
                   : static_cast<double>(i) / static_cast<double>(count - 1);
    char name[32];
    std::snprintf(name, sizeof name, "p%03zu", i);
    SynthIdentity id;
    id.person_id = name;
    id.frequency = 0.18 + 0.24 * t;
    id.phase = 0.9 * static_cast<double>(i);
    id.amplitude = 0.45 - 0.20 * t;
    id.scale = 0.92 + 0.16 * t;
    out.push_back(std::move(id));
  }
  return out;
}

SynthOutput synthesize_gait(const SynthSpec& spec) {
  validate(spec);

  Rng rng(spec.seed);

  // Appearance prototypes, one per (identity, clothing) pair, drawn before
  // any per-tracklet noise so the stream layout is independent of the
  // tracklet count.
  std::vector<std::vector<std::vector<double>>> prototypes(
      spec.identities.size());
  if (spec.appearance_dim > 0) {
    for (auto& per_identity : prototypes) {
      per_identity.resize(spec.clothing_variants);
      for (auto& proto : per_identity) {
        proto.resize(spec.appearance_dim);
        for (auto& v : proto) v = rng.normal();
      }
    }
  }

  SynthOutput out;
  const std::size_t frames = spec.frames_per_tracklet;
  for (std::size_t i = 0; i < spec.identities.size(); ++i) {
    const SynthIdentity& id = spec.identities[i];
    const double s = id.scale;
    for (std::size_t r = 0; r < spec.tracklets_per_identity; ++r) {
      RawPoseSequence seq;
      seq.tracklet_id = id.person_id + "_t" + std::to_string(r);
      seq.person_id = id.person_id;
      seq.clothing_id = "c" + std::to_string(r % spec.clothing_variants);
      seq.camera_id = "cam" + std::to_string(r % 2);
      seq.frame_h = 2.0;
      seq.frame_w = 1.0;
      seq.points.assign(frames * kRawKeypoints, Vec3{0.0, 0.0, 0.0});

      // Stagger tracklets of one identity across the gait cycle, and move
      // the figure a little per tracklet; root-centering removes the shift.
      const double stagger =
          2.0 * kPi * static_cast<double>(r) /
          static_cast<double>(spec.tracklets_per_identity);
      const double cx = 1.1 + 0.05 * static_cast<double>(r % 2);
      const double cy = 0.5 + 0.03 * static_cast<double>(r % 5);
      const double cz = 0.25 + 0.02 * static_cast<double>(r % 3);

      for (std::size_t t = 0; t < frames; ++t) {
        const double theta =
            id.frequency * static_cast<double>(t) + id.phase + stagger;
        const double swing = id.amplitude * std::sin(theta);

        // x grows downward, y to the subject's left, z toward the camera.
        // Legs swing in z with arms in opposition; raws 11/12 double as the
        // neck cluster, which lands at the shoulder midpoint.
        place(seq.points, t, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
              cx - 0.72 * s, cy, cz);
        place(seq.points, t, {11}, cx - 0.50 * s, cy + 0.16 * s, cz);
        place(seq.points, t, {12}, cx - 0.50 * s, cy - 0.16 * s, cz);
        place(seq.points, t, {13}, cx - 0.28 * s, cy + 0.20 * s,
              cz - 0.4 * swing);
        place(seq.points, t, {14}, cx - 0.28 * s, cy - 0.20 * s,
              cz + 0.4 * swing);
        place(seq.points, t, {15, 17, 19, 21}, cx - 0.06 * s, cy + 0.22 * s,
              cz - 0.8 * swing);
        place(seq.points, t, {16, 18, 20, 22}, cx - 0.06 * s, cy - 0.22 * s,
              cz + 0.8 * swing);
        place(seq.points, t, {23}, cx, cy + 0.08 * s, cz);
        place(seq.points, t, {24}, cx, cy - 0.08 * s, cz);
        place(seq.points, t, {25}, cx + 0.35 * s, cy + 0.08 * s,
              cz + 0.5 * swing);
        place(seq.points, t, {26}, cx + 0.35 * s, cy - 0.08 * s,
              cz - 0.5 * swing);
        place(seq.points, t, {27, 29, 31}, cx + 0.70 * s, cy + 0.08 * s,
              cz + swing);
        place(seq.points, t, {28, 30, 32}, cx + 0.70 * s, cy - 0.08 * s,
              cz - swing);
      }

      // Tracklets 1 and 2 both land in the gallery so it covers two
      // clothing variants: every protocol keeps at least one true match.
      const Split split =
          r == 0 ? Split::query : (r <= 2 ? Split::gallery : Split::train);
      out.manifest.emplace_back(seq.tracklet_id, split);

      if (spec.appearance_dim > 0) {
        const auto& proto = prototypes[i][r % spec.clothing_variants];
        std::vector<double> vec(spec.appearance_dim);
        for (std::size_t d = 0; d < spec.appearance_dim; ++d) {
          vec[d] = proto[d] + spec.appearance_noise * rng.normal();
        }
        out.appearance.emplace_back(seq.tracklet_id, std::move(vec));
      }

      out.sequences.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace asgl
