#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace asgl {

// Joint order used everywhere a 14-joint skeleton appears.
enum Joint : int {
  kHead = 0,
  kNeck = 1,
  kLeftShoulder = 2,
  kRightShoulder = 3,
  kLeftElbow = 4,
  kRightElbow = 5,
  kLeftWrist = 6,
  kRightWrist = 7,
  kLeftHip = 8,
  kRightHip = 9,
  kLeftKnee = 10,
  kRightKnee = 11,
  kLeftAnkle = 12,
  kRightAnkle = 13,
};

inline constexpr std::size_t kBodyJoints = 14;

const char* joint_name(int joint);

struct SkeletonGraph {
  std::size_t num_nodes = 0;
  // Undirected, deduplicated, each pair stored once with first < second.
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;   // sorted neighbor lists, no self
  std::vector<std::vector<int>> distances;   // hop counts, all pairs
};

// Validates indices, normalizes the edge list, and precomputes hop
// distances. The graph must be connected; a config error names the
// components otherwise.
SkeletonGraph build_skeleton_graph(
    std::size_t num_nodes, const std::vector<std::pair<int, int>>& edges);

// The 14-joint body: a tree of 13 bones through the neck.
const SkeletonGraph& default_body_graph();

// Skeleton copied across frames; consecutive frames of the same joint are
// linked. Node (t, j) lives at index t * joints + j. With circular_time the
// last frame also links back to the first, making every temporal
// neighborhood identical under cyclic frame shifts.
struct StGraph {
  std::size_t frames = 0;
  std::size_t joints = 0;
  bool circular_time = false;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;

  std::size_t num_nodes() const { return frames * joints; }
  int node(std::size_t t, std::size_t j) const {
    return static_cast<int>(t * joints + j);
  }
};

StGraph build_st_graph(const SkeletonGraph& skeleton, std::size_t frames,
                       bool circular_time = false);

// Hop distances from src over an adjacency list; unreachable nodes get -1.
std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adjacency,
                               int src);

// N_D(i): nodes within hop distance max_hops of i, i included, sorted.
// max_hops < 0 means unbounded (the whole connected component).
std::vector<std::vector<int>> partition_neighbors(const StGraph& graph,
                                                  int max_hops);

// Dense 0/1 row-major mask, mask[i * n + j] = 1 iff j is in groups[i].
std::vector<unsigned char> partition_mask(
    const std::vector<std::vector<int>>& groups, std::size_t num_nodes);

// (i, j) pairs with j in groups[i], in row-major order. The gait branch
// hangs one learned weight on each pair.
std::vector<std::pair<int, int>> group_pairs(
    const std::vector<std::vector<int>>& groups);

}  // namespace asgl
