#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/grad_check.hpp"
#include "asgl/graph.hpp"
#include "asgl/shape_branch.hpp"

using namespace asgl;

namespace {

ShapeBranchConfig<double> tiny_config() {
  ShapeBranchConfig<double> cfg;
  cfg.refine_dims = {4, 8, 16};
  cfg.gat_dims = {8, 8};
  return cfg;
}

double leaky(double x, double slope) { return x >= 0 ? x : slope * x; }

// Direct scalar-loop evaluation of one attention layer: transform, pairwise
// scores over neighborhoods with self-loops, row softmax, aggregate, output
// activation. Kept free of the Tensor machinery.
std::vector<std::vector<double>> dense_gat_oracle(
    const std::vector<std::vector<double>>& feats, const SkeletonGraph& g,
    const std::vector<std::vector<double>>& theta,
    const std::vector<double>& a_src, const std::vector<double>& a_dst,
    double score_slope, double act_slope) {
  const std::size_t n = g.num_nodes;
  const std::size_t din = feats[0].size();
  const std::size_t dout = theta[0].size();
  std::vector<std::vector<double>> z(n, std::vector<double>(dout, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dout; ++c) {
      for (std::size_t d = 0; d < din; ++d) z[i][c] += feats[i][d] * theta[d][c];
    }
  }
  std::vector<double> src(n, 0.0), dst(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dout; ++c) {
      src[i] += z[i][c] * a_src[c];
      dst[i] += z[i][c] * a_dst[c];
    }
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(dout, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> hood{static_cast<int>(i)};
    for (int j : g.adjacency[i]) hood.push_back(j);
    double denom = 0.0;
    std::vector<double> weights(hood.size());
    for (std::size_t h = 0; h < hood.size(); ++h) {
      weights[h] = std::exp(leaky(src[i] + dst[hood[h]], score_slope));
      denom += weights[h];
    }
    for (std::size_t h = 0; h < hood.size(); ++h) {
      for (std::size_t c = 0; c < dout; ++c) {
        out[i][c] += (weights[h] / denom) * z[hood[h]][c];
      }
    }
    for (std::size_t c = 0; c < dout; ++c) out[i][c] = leaky(out[i][c], act_slope);
  }
  return out;
}

}  // namespace

TEST_CASE("zeroed refinement maps everything to zero") {
  Rng rng(1);
  ShapeBranch<double> branch(tiny_config(), rng);
  for (auto& layer : branch.refine_net().layers()) {
    for (auto& v : layer.weight().data()) v = 0.0;
    for (auto& v : layer.bias().data()) v = 0.0;
  }
  auto x = Tensor<double>::uniform({6, 3}, -1, 1, rng);
  auto y = branch.refine(x);
  CHECK(y.dim(1) == 16);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("identical keypoints refine to identical vectors") {
  Rng rng(2);
  ShapeBranch<double> branch(tiny_config(), rng);
  auto x = Tensor<double>::uniform({4, 3}, -1, 1, rng);
  for (std::size_t a = 0; a < 3; ++a) x.data()[3 * 3 + a] = x.data()[0 * 3 + a];
  auto y = branch.refine(x);
  const std::size_t d = y.dim(1);
  for (std::size_t c = 0; c < d; ++c) {
    REQUIRE(y.data()[3 * d + c] == y.data()[0 * d + c]);
  }
}

TEST_CASE("single node with a self-loop gets attention one") {
  Rng rng(3);
  GatLayer<double> layer(5, 4, rng, 0.2, 0.01);
  auto graph = build_skeleton_graph(1, {});
  auto feats = Tensor<double>::uniform({1, 5}, -1, 1, rng);
  auto res = layer.forward_with_attention(feats, graph);
  CHECK(res.attention.data()[0] == 1.0);
  // output is the activated transform of the node's own feature
  ParamList<double> ps;
  layer.collect("l", ps);
  auto z = matmul(feats, ps[0].tensor);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(res.output.data()[c] ==
          doctest::Approx(leaky(z.data()[c], 0.01)).epsilon(1e-15));
  }
}

TEST_CASE("identical node features spread attention uniformly") {
  Rng rng(4);
  GatLayer<double> layer(3, 6, rng, 0.2, 0.01);
  const auto& graph = default_body_graph();
  auto row = Tensor<double>::uniform({1, 3}, -1, 1, rng);
  auto feats = Tensor<double>::zeros({kBodyJoints, 3});
  for (std::size_t j = 0; j < kBodyJoints; ++j) {
    for (std::size_t a = 0; a < 3; ++a) {
      feats.data()[j * 3 + a] = row.data()[a];
    }
  }
  auto res = layer.forward_with_attention(feats, graph);
  const std::size_t n = kBodyJoints;
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = 1.0 / (1.0 + graph.adjacency[i].size());
    CHECK(res.attention.data()[i * n + i] == expected);
    for (int j : graph.adjacency[i]) {
      CHECK(res.attention.data()[i * n + j] == expected);
    }
  }
}

TEST_CASE("attention layer matches the dense oracle on a 3-node path") {
  Rng rng(5);
  auto graph = build_skeleton_graph(3, {{0, 1}, {1, 2}});
  for (int round = 0; round < 100; ++round) {
    GatLayer<double> layer(4, 5, rng, 0.2, 0.01);
    auto feats = Tensor<double>::uniform({3, 4}, -2, 2, rng);
    ParamList<double> ps;
    layer.collect("l", ps);
    std::vector<std::vector<double>> fv(3, std::vector<double>(4));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t d = 0; d < 4; ++d) fv[i][d] = feats.data()[i * 4 + d];
    }
    std::vector<std::vector<double>> theta(4, std::vector<double>(5));
    for (std::size_t d = 0; d < 4; ++d) {
      for (std::size_t c = 0; c < 5; ++c) {
        theta[d][c] = ps[0].tensor.data()[d * 5 + c];
      }
    }
    std::vector<double> a_src(ps[1].tensor.data());
    std::vector<double> a_dst(ps[2].tensor.data());
    auto expected = dense_gat_oracle(fv, graph, theta, a_src, a_dst, 0.2, 0.01);
    auto got = layer.forward(feats, graph);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t c = 0; c < 5; ++c) {
        REQUIRE(got.data()[i * 5 + c] ==
                doctest::Approx(expected[i][c]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("attention rows are normalized and confined to neighborhoods") {
  Rng rng(6);
  debug_checks() = true;
  GatLayer<double> layer(3, 4, rng, 0.2, 0.01);
  const auto& graph = default_body_graph();
  auto feats = Tensor<double>::uniform({kBodyJoints, 3}, -3, 3, rng);
  auto res = layer.forward_with_attention(feats, graph);
  const std::size_t n = kBodyJoints;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = res.attention.data()[i * n + j];
      const bool neighbor =
          i == j || std::find(graph.adjacency[i].begin(),
                              graph.adjacency[i].end(),
                              static_cast<int>(j)) != graph.adjacency[i].end();
      if (!neighbor) REQUIRE(a == 0.0);
      row += a;
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
  }
  debug_checks() = false;
}

TEST_CASE("frame embedding is the channelwise max of final node features") {
  Rng rng(7);
  ShapeBranch<double> branch(tiny_config(), rng);
  const auto& graph = default_body_graph();
  auto frame = Tensor<double>::uniform({kBodyJoints, 3}, -1, 1, rng);
  auto refined = branch.refine(frame);
  Tensor<double> h = refined;
  for (auto& layer : branch.gat_layers()) h = layer.forward(h, graph);
  auto emb = branch.frame_embedding(refined, graph);
  const std::size_t d = h.dim(1);
  REQUIRE(emb.numel() == d);
  for (std::size_t c = 0; c < d; ++c) {
    double mx = h.data()[c];
    for (std::size_t j = 1; j < kBodyJoints; ++j) {
      mx = std::max(mx, h.data()[j * d + c]);
    }
    REQUIRE(emb.data()[c] == mx);
  }
}

TEST_CASE("clip embedding is the mean of per-frame embeddings") {
  Rng rng(8);
  ShapeBranch<double> branch(tiny_config(), rng);
  const auto& graph = default_body_graph();
  const std::size_t frames = 4;
  auto clip = Tensor<double>::uniform({frames, kBodyJoints, 3}, -1, 1, rng);
  auto f_s = branch.forward(clip, graph);
  const std::size_t d = f_s.numel();

  std::vector<std::vector<double>> per_frame;
  for (std::size_t t = 0; t < frames; ++t) {
    auto frame = Tensor<double>::zeros({kBodyJoints, 3});
    for (std::size_t i = 0; i < kBodyJoints * 3; ++i) {
      frame.data()[i] = clip.data()[t * kBodyJoints * 3 + i];
    }
    auto emb = branch.frame_embedding(branch.refine(frame), graph);
    per_frame.push_back(emb.data());
  }
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < frames; ++t) mean += per_frame[t][c];
    mean /= static_cast<double>(frames);
    CHECK(f_s.data()[c] == doctest::Approx(mean).epsilon(1e-12));
  }

  SUBCASE("a single-frame clip embeds as that frame") {
    auto one = Tensor<double>::zeros({1, kBodyJoints, 3});
    for (std::size_t i = 0; i < kBodyJoints * 3; ++i) {
      one.data()[i] = clip.data()[i];
    }
    auto f1 = branch.forward(one, graph);
    for (std::size_t c = 0; c < d; ++c) {
      REQUIRE(f1.data()[c] == per_frame[0][c]);
    }
  }
}

TEST_CASE("clip embedding ignores frame order exactly") {
  Rng rng(9);
  ShapeBranch<double> branch(tiny_config(), rng);
  const auto& graph = default_body_graph();
  const std::size_t frames = 6;
  auto clip = Tensor<double>::uniform({frames, kBodyJoints, 3}, -1, 1, rng);
  auto f_s = branch.forward(clip, graph);

  std::vector<std::size_t> perm(frames);
  for (std::size_t t = 0; t < frames; ++t) perm[t] = t;
  rng.shuffle(perm.begin(), perm.end());
  auto shuffled = Tensor<double>::zeros({frames, kBodyJoints, 3});
  const std::size_t stride = kBodyJoints * 3;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < stride; ++i) {
      shuffled.data()[perm[t] * stride + i] = clip.data()[t * stride + i];
    }
  }
  auto f_p = branch.forward(shuffled, graph);
  for (std::size_t c = 0; c < f_s.numel(); ++c) {
    REQUIRE(f_p.data()[c] == f_s.data()[c]);
  }
}

TEST_CASE("clip embedding ignores joint relabeling exactly") {
  Rng rng(10);
  ShapeBranch<double> branch(tiny_config(), rng);
  const auto& graph = default_body_graph();
  const std::size_t frames = 3;
  auto clip = Tensor<double>::uniform({frames, kBodyJoints, 3}, -1, 1, rng);
  auto f_s = branch.forward(clip, graph);

  std::vector<std::size_t> perm(kBodyJoints);
  for (std::size_t j = 0; j < kBodyJoints; ++j) perm[j] = j;
  rng.shuffle(perm.begin(), perm.end());
  std::vector<std::pair<int, int>> edges;
  for (auto [a, b] : graph.edges) {
    edges.emplace_back(static_cast<int>(perm[a]), static_cast<int>(perm[b]));
  }
  auto permuted_graph = build_skeleton_graph(kBodyJoints, edges);
  auto permuted = Tensor<double>::zeros({frames, kBodyJoints, 3});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < kBodyJoints; ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        permuted.data()[(t * kBodyJoints + perm[j]) * 3 + a] =
            clip.data()[(t * kBodyJoints + j) * 3 + a];
      }
    }
  }
  auto f_p = branch.forward(permuted, permuted_graph);
  for (std::size_t c = 0; c < f_s.numel(); ++c) {
    REQUIRE(f_p.data()[c] == f_s.data()[c]);
  }
}

TEST_CASE("node count mismatches raise dimension errors") {
  Rng rng(11);
  GatLayer<double> layer(3, 4, rng, 0.2, 0.01);
  auto feats = Tensor<double>::uniform({5, 3}, -1, 1, rng);
  CHECK_THROWS_AS(layer.forward(feats, default_body_graph()), Error);
  ShapeBranch<double> branch(tiny_config(), rng);
  auto bad = Tensor<double>::uniform({2, kBodyJoints, 4}, -1, 1, rng);
  CHECK_THROWS_AS(branch.forward(bad, default_body_graph()), Error);
}

TEST_CASE("the whole branch passes a finite-difference gradient check") {
  Rng rng(12);
  auto cfg = tiny_config();
  cfg.gat_dims = {8};
  ShapeBranch<double> branch(cfg, rng);
  const auto& graph = default_body_graph();
  auto clip = Tensor<double>::uniform({2, kBodyJoints, 3}, -1, 1, rng);
  auto wvec = Tensor<double>::uniform({branch.out_dim()}, -1, 1, rng);

  ParamList<double> params;
  branch.collect("shape", params);
  std::vector<Tensor<double>> inputs;
  for (auto& p : params) inputs.push_back(p.tensor);
  inputs.push_back(clip);

  auto fn = [&](const std::vector<Tensor<double>>&) {
    return sum_all(mul(branch.forward(clip, graph), wvec));
  };
  CHECK(grad_check(fn, inputs) < 1e-4);
}
