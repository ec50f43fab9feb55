#include "asgl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace asgl {

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::cc: return "cc";
    case Protocol::standard: return "standard";
    case Protocol::sc: return "sc";
  }
  raise(ErrorCode::config, "protocol_name: unhandled protocol");
}

Protocol parse_protocol(const std::string& name) {
  if (name == "cc") return Protocol::cc;
  if (name == "standard") return Protocol::standard;
  if (name == "sc") return Protocol::sc;
  raise(ErrorCode::config, "unknown protocol \"" + name +
                               "\" (expected cc, standard, or sc)");
}

TrackletMeta meta_of(const ProcessedTracklet& t) {
  return {t.tracklet_id, t.person_id, t.clothing_id, t.camera_id};
}

GalleryMask protocol_filter(const TrackletMeta& query,
                            const std::vector<TrackletMeta>& gallery,
                            Protocol protocol) {
  if (query.clothing_id.empty()) {
    raise(ErrorCode::data, "protocol_filter: query tracklet \"" +
                               query.tracklet_id + "\" has no clothing label");
  }
  GalleryMask mask;
  mask.valid.assign(gallery.size(), 1);
  mask.positive.assign(gallery.size(), 0);
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    const auto& entry = gallery[g];
    if (entry.clothing_id.empty()) {
      raise(ErrorCode::data, "protocol_filter: gallery tracklet \"" +
                                 entry.tracklet_id +
                                 "\" has no clothing label");
    }
    if (entry.tracklet_id == query.tracklet_id) {
      mask.valid[g] = 0;  // self-match
      continue;
    }
    if (entry.person_id != query.person_id) continue;  // negative, kept
    const bool same_clothes = entry.clothing_id == query.clothing_id;
    const bool counts = protocol == Protocol::standard ||
                        (protocol == Protocol::cc && !same_clothes) ||
                        (protocol == Protocol::sc && same_clothes);
    if (counts) {
      mask.positive[g] = 1;
    } else {
      mask.valid[g] = 0;  // true match outside the protocol: not a distractor
    }
  }
  return mask;
}

RetrievalMetrics cmc_map(const std::vector<std::vector<double>>& distances,
                         const std::vector<GalleryMask>& masks) {
  if (distances.size() != masks.size()) {
    raise(ErrorCode::dimension,
          "cmc_map: " + std::to_string(distances.size()) +
              " distance rows for " + std::to_string(masks.size()) +
              " masks");
  }
  std::size_t gallery_size = 0;
  for (const auto& row : distances) {
    gallery_size = std::max(gallery_size, row.size());
  }
  RetrievalMetrics m;
  m.cmc.assign(gallery_size, 0.0);
  double ap_sum = 0.0;
  for (std::size_t q = 0; q < distances.size(); ++q) {
    const auto& row = distances[q];
    const auto& mask = masks[q];
    if (mask.valid.size() != row.size() ||
        mask.positive.size() != row.size()) {
      raise(ErrorCode::dimension,
            "cmc_map: mask size does not match gallery size for query " +
                std::to_string(q));
    }
    std::vector<std::size_t> order;
    order.reserve(row.size());
    bool any_positive = false;
    for (std::size_t g = 0; g < row.size(); ++g) {
      if (!mask.valid[g]) continue;
      order.push_back(g);
      any_positive = any_positive || mask.positive[g];
    }
    if (!any_positive) {
      ++m.queries_dropped;
      continue;
    }
    // ties resolved by gallery order for a deterministic ranking
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) {
                if (row[a] != row[b]) return row[a] < row[b];
                return a < b;
              });
    std::size_t hits = 0;
    double ap = 0.0;
    std::size_t first_hit = order.size();
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (!mask.positive[order[rank]]) continue;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
      if (first_hit == order.size()) first_hit = rank;
    }
    ap /= static_cast<double>(hits);
    ap_sum += ap;
    for (std::size_t k = first_hit; k < gallery_size; ++k) m.cmc[k] += 1.0;
    ++m.queries_used;
  }
  if (m.queries_used == 0) {
    raise(ErrorCode::eval,
          "cmc_map: every query was dropped by the protocol filter");
  }
  for (auto& v : m.cmc) v /= static_cast<double>(m.queries_used);
  m.mean_ap = ap_sum / static_cast<double>(m.queries_used);
  return m;
}

double cosine_distance(const std::vector<double>& a,
                       const std::vector<double>& b) {
  if (a.size() != b.size()) {
    raise(ErrorCode::dimension,
          "cosine_distance: vectors of size " + std::to_string(a.size()) +
              " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<double>> cosine_distance_matrix(
    const std::vector<std::vector<double>>& queries,
    const std::vector<std::vector<double>>& gallery) {
  std::vector<std::vector<double>> dist(queries.size());
  const std::int64_t n = static_cast<std::int64_t>(queries.size());
#ifdef ASGL_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t q = 0; q < n; ++q) {
    auto& row = dist[static_cast<std::size_t>(q)];
    row.resize(gallery.size());
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      row[g] = cosine_distance(queries[static_cast<std::size_t>(q)],
                               gallery[g]);
    }
  }
  return dist;
}

ProtocolReport evaluate_retrieval(
    const std::vector<std::vector<double>>& query_embeddings,
    const std::vector<TrackletMeta>& query_meta,
    const std::vector<std::vector<double>>& gallery_embeddings,
    const std::vector<TrackletMeta>& gallery_meta, Protocol protocol) {
  if (query_embeddings.size() != query_meta.size() ||
      gallery_embeddings.size() != gallery_meta.size()) {
    raise(ErrorCode::dimension,
          "evaluate_retrieval: embedding and metadata counts differ");
  }
  auto dist = cosine_distance_matrix(query_embeddings, gallery_embeddings);
  std::vector<GalleryMask> masks;
  masks.reserve(query_meta.size());
  for (const auto& q : query_meta) {
    masks.push_back(protocol_filter(q, gallery_meta, protocol));
  }
  auto metrics = cmc_map(dist, masks);
  ProtocolReport report;
  report.protocol = protocol;
  report.cmc = metrics.cmc;
  report.mean_ap = metrics.mean_ap;
  report.num_queries = metrics.queries_used;
  report.dropped = metrics.queries_dropped;
  auto rank = [&](std::size_t k) {
    if (metrics.cmc.empty()) return 0.0;
    return metrics.cmc[std::min(k, metrics.cmc.size() - 1)];
  };
  report.rank1 = rank(0);
  report.rank5 = rank(4);
  report.rank10 = rank(9);
  return report;
}

}  // namespace asgl
