#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/model.hpp"
#include "asgl/pose.hpp"
#include "asgl/pose_io.hpp"
#include "asgl/tensor.hpp"

namespace asgl {

// Which same-person gallery entries count as ground truth: only different
// clothing (cc), only matching clothing (sc), or both (standard).
enum class Protocol { cc, standard, sc };

const char* protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);  // config error on unknown

struct TrackletMeta {
  std::string tracklet_id;
  std::string person_id;
  std::string clothing_id;
  std::string camera_id;
};

TrackletMeta meta_of(const ProcessedTracklet& t);

// Per-gallery-entry view for one query. Invalid entries are removed from the
// ranking entirely (the query's own tracklet, and same-person entries whose
// clothing relation the protocol excludes); different-person entries always
// stay as negatives.
struct GalleryMask {
  std::vector<char> valid;
  std::vector<char> positive;  // subset of valid
};

GalleryMask protocol_filter(const TrackletMeta& query,
                            const std::vector<TrackletMeta>& gallery,
                            Protocol protocol);

struct RetrievalMetrics {
  std::vector<double> cmc;  // cmc[k] = fraction of queries with a hit in top k+1
  double mean_ap = 0.0;
  std::size_t queries_used = 0;
  std::size_t queries_dropped = 0;  // no valid positive under the protocol
};

// distances: one row per query over the full gallery; masks: parallel
// per-query filters. Ties rank by gallery order. Queries whose masks leave
// no positive are dropped; dropping every query is an evaluation error.
RetrievalMetrics cmc_map(const std::vector<std::vector<double>>& distances,
                         const std::vector<GalleryMask>& masks);

// 1 - cosine similarity, zero-norm vectors treated as orthogonal.
double cosine_distance(const std::vector<double>& a,
                       const std::vector<double>& b);

std::vector<std::vector<double>> cosine_distance_matrix(
    const std::vector<std::vector<double>>& queries,
    const std::vector<std::vector<double>>& gallery);

struct ProtocolReport {
  Protocol protocol = Protocol::cc;
  double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0;
  double mean_ap = 0.0;
  std::size_t num_queries = 0;
  std::size_t dropped = 0;
  std::vector<double> cmc;
};

ProtocolReport evaluate_retrieval(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<TrackletMeta>& query_meta,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<TrackletMeta>& gallery_meta, Protocol protocol);

// One embedding per tracklet index, deterministic center-window sampling.
template <typename T>
std::vector<std::vector<double>> embed_tracklets(
    const AsglModel<T>& model, const ClipDataset& data,
    const std::vector<std::size_t>& indices, std::size_t stride) {
  NoGradGuard guard;
  std::vector<std::vector<double>> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    const auto& tracklet = data.tracklets[idx];
    auto clip = clip_tensor<T>(
        center_clip(tracklet, model.config().clip_len, stride));
    Tensor<T> appearance;
    if (data.appearance_dim > 0) {
      const auto& vec = data.appearance.at(tracklet.tracklet_id);
      std::vector<T> vals(vec.begin(), vec.end());
      appearance = Tensor<T>::from_data({data.appearance_dim},
                                        std::move(vals));
    }
    auto fe = model.embed(clip, appearance);
    out.emplace_back(fe.f.data().begin(), fe.f.data().end());
  }
  return out;
}

}  // namespace asgl
