#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "asgl/eval.hpp"
#include "asgl/model.hpp"
#include "asgl/rng.hpp"
#include "doctest.h"

using namespace asgl;

namespace {

TrackletMeta meta(const std::string& tid, const std::string& pid,
                  const std::string& cid, const std::string& cam = "cam0") {
  return {tid, pid, cid, cam};
}

// Independent ranking arithmetic: the rank of a gallery entry is one plus
// the number of valid entries strictly closer (gallery order breaking ties),
// computed without sorting anything.
struct QueryOracle {
  bool dropped = true;
  std::size_t first_hit_rank = 0;  // 1-based
  double ap = 0.0;
};

QueryOracle rank_oracle(const std::vector<double>& row,
                        const GalleryMask& mask) {
  QueryOracle out;
  std::vector<std::size_t> positive_ranks;
  for (std::size_t g = 0; g < row.size(); ++g) {
    if (!mask.valid[g] || !mask.positive[g]) continue;
    std::size_t rank = 1;
    for (std::size_t h = 0; h < row.size(); ++h) {
      if (h == g || !mask.valid[h]) continue;
      if (row[h] < row[g] || (row[h] == row[g] && h < g)) ++rank;
    }
    positive_ranks.push_back(rank);
  }
  if (positive_ranks.empty()) return out;
  out.dropped = false;
  std::sort(positive_ranks.begin(), positive_ranks.end());
  out.first_hit_rank = positive_ranks.front();
  for (std::size_t i = 0; i < positive_ranks.size(); ++i) {
    out.ap += double(i + 1) / double(positive_ranks[i]);
  }
  out.ap /= double(positive_ranks.size());
  return out;
}

ProcessedTracklet walking_tracklet(const std::string& id,
                                   const std::string& person, double freq,
                                   std::size_t frames) {
  ProcessedTracklet t;
  t.tracklet_id = id;
  t.person_id = person;
  t.clothing_id = "c0";
  t.camera_id = "cam0";
  t.frames = frames;
  t.joints.resize(frames * kBodyJoints * 3);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < kBodyJoints; ++j) {
      const double phase = freq * double(f) + 0.31 * double(j);
      t.joints[(f * kBodyJoints + j) * 3 + 0] = 0.05 * double(j);
      t.joints[(f * kBodyJoints + j) * 3 + 1] = std::sin(phase);
      t.joints[(f * kBodyJoints + j) * 3 + 2] = 0.4 * std::cos(phase);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("protocol names parse both ways") {
  CHECK(parse_protocol("cc") == Protocol::cc);
  CHECK(parse_protocol("standard") == Protocol::standard);
  CHECK(parse_protocol("sc") == Protocol::sc);
  CHECK(std::string(protocol_name(Protocol::sc)) == "sc");
  try {
    parse_protocol("open-set");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("open-set") != std::string::npos);
  }
}

TEST_CASE("the protocol filter applies the clothing rules") {
  auto query = meta("q", "p1", "c1");
  std::vector<TrackletMeta> gallery{
      meta("g0", "p1", "c1"),  // same person, same clothes
      meta("g1", "p1", "c2"),  // same person, changed clothes
      meta("g2", "p2", "c1"),  // different person
      meta("q", "p1", "c3"),   // the query's own tracklet
  };

  auto cc = protocol_filter(query, gallery, Protocol::cc);
  CHECK(cc.valid[0] == 0);  // a true match the protocol excludes vanishes
  CHECK(cc.positive[1] == 1);
  CHECK((cc.valid[2] == 1 && cc.positive[2] == 0));
  CHECK(cc.valid[3] == 0);

  auto sc = protocol_filter(query, gallery, Protocol::sc);
  CHECK(sc.positive[0] == 1);
  CHECK(sc.valid[1] == 0);
  CHECK((sc.valid[2] == 1 && sc.positive[2] == 0));

  auto standard = protocol_filter(query, gallery, Protocol::standard);
  CHECK(standard.positive[0] == 1);
  CHECK(standard.positive[1] == 1);
  CHECK(standard.positive[2] == 0);
  CHECK(standard.valid[3] == 0);

  CHECK_THROWS_AS(
      protocol_filter(meta("q", "p1", ""), gallery, Protocol::cc), Error);
  std::vector<TrackletMeta> unlabeled{meta("g", "p1", "")};
  CHECK_THROWS_AS(protocol_filter(query, unlabeled, Protocol::cc), Error);
}

TEST_CASE("random label combinations match the rule oracle") {
  Rng rng(41);
  for (int round = 0; round < 100; ++round) {
    auto query = meta("q" + std::to_string(rng.index(4)),
                      "p" + std::to_string(rng.index(3)),
                      "c" + std::to_string(rng.index(3)));
    std::vector<TrackletMeta> gallery;
    const std::size_t n = 3 + rng.index(10);
    for (std::size_t g = 0; g < n; ++g) {
      gallery.push_back(meta("q" + std::to_string(rng.index(4)),
                             "p" + std::to_string(rng.index(3)),
                             "c" + std::to_string(rng.index(3))));
    }
    auto cc = protocol_filter(query, gallery, Protocol::cc);
    auto sc = protocol_filter(query, gallery, Protocol::sc);
    auto standard = protocol_filter(query, gallery, Protocol::standard);
    for (std::size_t g = 0; g < n; ++g) {
      const bool self = gallery[g].tracklet_id == query.tracklet_id;
      const bool same_person = gallery[g].person_id == query.person_id;
      const bool same_clothes = gallery[g].clothing_id == query.clothing_id;
      CHECK(cc.positive[g] ==
            char(!self && same_person && !same_clothes));
      CHECK(sc.positive[g] == char(!self && same_person && same_clothes));
      CHECK(standard.positive[g] == char(!self && same_person));
      CHECK(standard.valid[g] == char(!self));
      // the protocols partition the true matches
      CHECK((cc.positive[g] || sc.positive[g]) == standard.positive[g]);
      if (!self && !same_person) {
        CHECK(cc.valid[g] == 1);
        CHECK(sc.valid[g] == 1);
      }
    }
  }
}

TEST_CASE("cmc and mAP behave on the textbook single-query cases") {
  GalleryMask mask;
  mask.valid.assign(10, 1);
  mask.positive.assign(10, 0);

  SUBCASE("correct match ranked first") {
    mask.positive[3] = 1;
    std::vector<double> row(10, 0.9);
    row[3] = 0.1;
    auto m = cmc_map({row}, {mask});
    CHECK(m.cmc[0] == 1.0);
    CHECK(m.mean_ap == 1.0);
    CHECK(m.queries_used == 1);
  }
  SUBCASE("correct match ranked second") {
    mask.positive[5] = 1;
    std::vector<double> row(10, 0.9);
    row[2] = 0.1;   // a closer negative
    row[5] = 0.2;
    auto m = cmc_map({row}, {mask});
    CHECK(m.cmc[0] == 0.0);
    CHECK(m.cmc[1] == 1.0);
    CHECK(m.mean_ap == 0.5);
  }
  SUBCASE("ties resolve by gallery order") {
    mask.positive[4] = 1;
    std::vector<double> row(10, 0.5);  // all tied
    auto m = cmc_map({row}, {mask});
    // four entries (0..3) precede the positive at equal distance
    CHECK(m.cmc[3] == 0.0);
    CHECK(m.cmc[4] == 1.0);
    CHECK(m.mean_ap == doctest::Approx(1.0 / 5.0).epsilon(1e-15));
  }
}

TEST_CASE("metrics match the counting oracle on random instances") {
  Rng rng(43);
  for (int round = 0; round < 100; ++round) {
    const std::size_t queries = 1 + rng.index(20);
    const std::size_t gallery = 2 + rng.index(49);
    std::vector<std::vector<double>> dist(queries,
                                          std::vector<double>(gallery));
    std::vector<GalleryMask> masks(queries);
    bool some_query_kept = false;
    for (auto& mask : masks) {
      mask.valid.assign(gallery, 1);
      mask.positive.assign(gallery, 0);
    }
    for (std::size_t q = 0; q < queries; ++q) {
      for (std::size_t g = 0; g < gallery; ++g) {
        // coarse grid so ties actually occur
        dist[q][g] = double(rng.index(12)) / 8.0;
        masks[q].valid[g] = rng.index(8) != 0;
        masks[q].positive[g] =
            char(masks[q].valid[g] && rng.index(4) == 0);
        some_query_kept =
            some_query_kept || (masks[q].positive[g] != 0);
      }
    }
    if (!some_query_kept) {
      CHECK_THROWS_AS(cmc_map(dist, masks), Error);
      continue;
    }
    auto m = cmc_map(dist, masks);

    double ap_sum = 0.0;
    std::size_t used = 0, dropped = 0;
    std::vector<double> cmc(gallery, 0.0);
    for (std::size_t q = 0; q < queries; ++q) {
      auto o = rank_oracle(dist[q], masks[q]);
      if (o.dropped) {
        ++dropped;
        continue;
      }
      ++used;
      ap_sum += o.ap;
      for (std::size_t k = o.first_hit_rank - 1; k < gallery; ++k) {
        cmc[k] += 1.0;
      }
    }
    REQUIRE(used == m.queries_used);
    CHECK(dropped == m.queries_dropped);
    CHECK(m.mean_ap == doctest::Approx(ap_sum / double(used)).epsilon(1e-9));
    for (std::size_t k = 0; k < gallery; ++k) {
      CHECK(m.cmc[k] ==
            doctest::Approx(cmc[k] / double(used)).epsilon(1e-9));
    }
    // shared invariants
    CHECK(m.mean_ap >= 0.0);
    CHECK(m.mean_ap <= 1.0);
    for (std::size_t k = 0; k + 1 < gallery; ++k) {
      CHECK(m.cmc[k] <= m.cmc[k + 1]);
    }
    CHECK(m.cmc.back() == 1.0);
  }
}

TEST_CASE("a strictly increasing distance transform changes nothing") {
  Rng rng(44);
  const std::size_t queries = 6, gallery = 15;
  std::vector<std::vector<double>> dist(queries,
                                        std::vector<double>(gallery));
  std::vector<GalleryMask> masks(queries);
  for (std::size_t q = 0; q < queries; ++q) {
    masks[q].valid.assign(gallery, 1);
    masks[q].positive.assign(gallery, 0);
    masks[q].positive[rng.index(gallery)] = 1;
    for (auto& d : dist[q]) d = rng.uniform(0.0, 2.0);
  }
  auto base = cmc_map(dist, masks);
  auto warped = dist;
  for (auto& row : warped) {
    for (auto& d : row) d = std::exp(3.0 * d) - 0.5;
  }
  auto m = cmc_map(warped, masks);
  CHECK(m.mean_ap == base.mean_ap);
  CHECK(m.cmc == base.cmc);
}

TEST_CASE("a gallery entry farther than everything leaves AP alone") {
  Rng rng(45);
  const std::size_t gallery = 12;
  GalleryMask mask;
  mask.valid.assign(gallery, 1);
  mask.positive.assign(gallery, 0);
  mask.positive[2] = mask.positive[7] = 1;
  std::vector<double> row(gallery);
  for (auto& d : row) d = rng.uniform(0.0, 1.0);
  auto base = cmc_map({row}, {mask});

  auto extended = row;
  extended.push_back(99.0);
  auto wider = mask;
  wider.valid.push_back(1);
  wider.positive.push_back(0);
  auto m = cmc_map({extended}, {wider});
  CHECK(m.mean_ap == base.mean_ap);
  CHECK(m.cmc[gallery - 1] == base.cmc[gallery - 1]);
}

TEST_CASE("dropped queries are counted and an empty protocol is an error") {
  GalleryMask with_pos, without_pos;
  with_pos.valid = {1, 1};
  with_pos.positive = {0, 1};
  without_pos.valid = {1, 1};
  without_pos.positive = {0, 0};
  auto m = cmc_map({{0.1, 0.2}, {0.1, 0.2}}, {with_pos, without_pos});
  CHECK(m.queries_used == 1);
  CHECK(m.queries_dropped == 1);
  try {
    cmc_map({{0.1, 0.2}}, {without_pos});
    FAIL("expected an eval error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::eval);
  }
}

TEST_CASE("cosine distance spans identical to opposite") {
  std::vector<double> x{1.0, 0.0}, y{0.0, 2.0};
  CHECK(cosine_distance(x, x) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> nx{-3.0, 0.0};
  CHECK(cosine_distance(x, nx) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cosine_distance(x, {0.0, 0.0}) == 1.0);
  CHECK_THROWS_AS(cosine_distance(x, {1.0, 2.0, 3.0}), Error);

  Rng rng(46);
  std::vector<std::vector<double>> qs(3, std::vector<double>(4)),
      gs(5, std::vector<double>(4));
  for (auto& v : qs) {
    for (auto& d : v) d = rng.uniform(-1.0, 1.0);
  }
  for (auto& v : gs) {
    for (auto& d : v) d = rng.uniform(-1.0, 1.0);
  }
  auto matrix = cosine_distance_matrix(qs, gs);
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t g = 0; g < 5; ++g) {
      CHECK(matrix[q][g] == cosine_distance(qs[q], gs[g]));
    }
  }
}

TEST_CASE("a hand-scored three-query retrieval reproduces exactly") {
  std::vector<TrackletMeta> gallery{meta("g0", "p1", "c2"),
                                    meta("g1", "p2", "c1"),
                                    meta("g2", "p1", "c1"),
                                    meta("g3", "p3", "c1")};
  std::vector<TrackletMeta> queries{meta("q0", "p1", "c1"),
                                    meta("q1", "p2", "c2"),
                                    meta("q2", "p3", "c2")};
  std::vector<std::vector<double>> emb_q{{1.0, 0.0},
                                         {0.0, 1.0},
                                         {1.0, 1.0}};
  std::vector<std::vector<double>> emb_g{{0.6, 0.8},
                                         {0.9, 0.1},
                                         {-1.0, 0.2},
                                         {0.7, 0.7}};
  // cosine distances, worked by hand:
  //   q0: g1 0.006 < g3 0.293 < g0 0.400 < g2 1.981
  //   q1: g0 0.200 < g3 0.293 < g2 0.804 < g1 0.890
  //   q2: g3 ~0    < g0 0.010 < g1 0.219 < g2 1.555
  // CC removes q0's same-clothes match g2; positives then sit at
  // rank 3 (q0: g0), rank 4 (q1: g1), rank 1 (q2: g3)
  auto cc = evaluate_retrieval(emb_q, queries, emb_g, gallery, Protocol::cc);
  CHECK(cc.num_queries == 3);
  CHECK(cc.dropped == 0);
  CHECK(cc.rank1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(cc.mean_ap ==
        doctest::Approx((1.0 / 3.0 + 0.25 + 1.0) / 3.0).epsilon(1e-12));

  // Standard keeps g2 for q0 as a second positive at rank 4
  auto standard = evaluate_retrieval(emb_q, queries, emb_g, gallery,
                                     Protocol::standard);
  CHECK(standard.num_queries == 3);
  CHECK(standard.mean_ap ==
        doctest::Approx(((1.0 / 3.0 + 0.5) / 2.0 + 0.25 + 1.0) / 3.0)
            .epsilon(1e-12));

  SUBCASE("sc drops queries without same-clothes matches") {
    // only q0 keeps a positive (g2, ranked behind g1 and g3 once g0 is
    // removed); q1 and q2 wear clothing the gallery never shows
    auto sc = evaluate_retrieval(emb_q, queries, emb_g, gallery,
                                 Protocol::sc);
    CHECK(sc.num_queries == 1);
    CHECK(sc.dropped == 2);
    CHECK(sc.rank1 == 0.0);
    CHECK(sc.mean_ap == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sc.cmc[2] == 1.0);
  }
}

TEST_CASE("tracklet embedding is deterministic and duplicate-stable") {
  Rng rng(47);
  auto cfg = ModelConfig<double>::tiny();
  AsglModel<double> model(cfg, 3, 0, rng);
  ClipDataset data;
  data.tracklets.push_back(walking_tracklet("a", "p0", 0.7, 12));
  data.tracklets.push_back(walking_tracklet("b", "p1", 1.3, 12));
  data.tracklets.push_back(walking_tracklet("a2", "p0", 0.7, 12));
  data.splits.assign(3, Split::gallery);

  auto none = embed_tracklets(model, data, {}, 2);
  CHECK(none.empty());

  auto embs = embed_tracklets(model, data, {0, 1, 2}, 2);
  REQUIRE(embs.size() == 3);
  for (const auto& e : embs) {
    REQUIRE(e.size() == cfg.fused_dim);
    for (double v : e) CHECK(std::isfinite(v));
  }
  // "a2" duplicates "a"'s motion exactly
  CHECK(embs[0] == embs[2]);
  auto again = embed_tracklets(model, data, {0, 1, 2}, 2);
  CHECK(again == embs);
}
