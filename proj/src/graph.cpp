#include "asgl/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "asgl/error.hpp"

namespace asgl {

const char* joint_name(int joint) {
  static const char* names[] = {
      "head",       "neck",        "l_shoulder", "r_shoulder", "l_elbow",
      "r_elbow",    "l_wrist",     "r_wrist",    "l_hip",      "r_hip",
      "l_knee",     "r_knee",      "l_ankle",    "r_ankle",
  };
  if (joint < 0 || joint >= static_cast<int>(kBodyJoints)) return "unknown";
  return names[joint];
}

std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adjacency,
                               int src) {
  std::vector<int> dist(adjacency.size(), -1);
  std::deque<int> queue;
  dist[static_cast<std::size_t>(src)] = 0;
  queue.push_back(src);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adjacency[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

namespace {

std::vector<std::vector<int>> adjacency_from_edges(
    std::size_t num_nodes, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(num_nodes);
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

// Describes the connected components for the error message.
std::string component_report(const std::vector<std::vector<int>>& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<int> comp(n, -1);
  int count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const auto dist = bfs_distances(adjacency, static_cast<int>(s));
    for (std::size_t v = 0; v < n; ++v) {
      if (dist[v] >= 0) comp[v] = count;
    }
    ++count;
  }
  std::ostringstream os;
  os << count << " components:";
  for (int c = 0; c < count; ++c) {
    os << " {";
    bool first = true;
    for (std::size_t v = 0; v < n; ++v) {
      if (comp[v] == c) {
        if (!first) os << ", ";
        os << v;
        first = false;
      }
    }
    os << "}";
  }
  return os.str();
}

}  // namespace

SkeletonGraph build_skeleton_graph(
    std::size_t num_nodes, const std::vector<std::pair<int, int>>& edges) {
  if (num_nodes == 0) {
    raise(ErrorCode::dimension, "build_skeleton_graph: no nodes");
  }
  std::set<std::pair<int, int>> unique;
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= static_cast<int>(num_nodes) ||
        b >= static_cast<int>(num_nodes)) {
      raise(ErrorCode::dimension,
            "build_skeleton_graph: edge (" + std::to_string(a) + ", " +
                std::to_string(b) + ") outside " + std::to_string(num_nodes) +
                " nodes");
    }
    if (a == b) {
      raise(ErrorCode::dimension,
            "build_skeleton_graph: self loop on node " + std::to_string(a));
    }
    unique.emplace(std::min(a, b), std::max(a, b));
  }
  SkeletonGraph g;
  g.num_nodes = num_nodes;
  g.edges.assign(unique.begin(), unique.end());
  g.adjacency = adjacency_from_edges(num_nodes, g.edges);

  g.distances.resize(num_nodes);
  for (std::size_t s = 0; s < num_nodes; ++s) {
    g.distances[s] = bfs_distances(g.adjacency, static_cast<int>(s));
    for (int d : g.distances[s]) {
      if (d < 0) {
        raise(ErrorCode::config, "build_skeleton_graph: graph is not "
                                 "connected, " +
                                     component_report(g.adjacency));
      }
    }
  }
  return g;
}

const SkeletonGraph& default_body_graph() {
  static const SkeletonGraph graph = build_skeleton_graph(
      kBodyJoints,
      {
          {kHead, kNeck},
          {kNeck, kLeftShoulder},
          {kNeck, kRightShoulder},
          {kLeftShoulder, kLeftElbow},
          {kRightShoulder, kRightElbow},
          {kLeftElbow, kLeftWrist},
          {kRightElbow, kRightWrist},
          {kNeck, kLeftHip},
          {kNeck, kRightHip},
          {kLeftHip, kLeftKnee},
          {kRightHip, kRightKnee},
          {kLeftKnee, kLeftAnkle},
          {kRightKnee, kRightAnkle},
      });
  return graph;
}

StGraph build_st_graph(const SkeletonGraph& skeleton, std::size_t frames,
                       bool circular_time) {
  if (frames == 0) {
    raise(ErrorCode::dimension, "build_st_graph: no frames");
  }
  StGraph st;
  st.frames = frames;
  st.joints = skeleton.num_nodes;
  st.circular_time = circular_time;
  std::set<std::pair<int, int>> unique;
  for (std::size_t t = 0; t < frames; ++t) {
    for (const auto& [a, b] : skeleton.edges) {
      unique.emplace(st.node(t, static_cast<std::size_t>(a)),
                     st.node(t, static_cast<std::size_t>(b)));
    }
  }
  for (std::size_t j = 0; j < st.joints; ++j) {
    for (std::size_t t = 0; t + 1 < frames; ++t) {
      unique.emplace(st.node(t, j), st.node(t + 1, j));
    }
    if (circular_time && frames > 1) {
      const int a = st.node(0, j);
      const int b = st.node(frames - 1, j);
      unique.emplace(std::min(a, b), std::max(a, b));
    }
  }
  st.edges.assign(unique.begin(), unique.end());
  st.adjacency = adjacency_from_edges(st.num_nodes(), st.edges);
  return st;
}

std::vector<std::vector<int>> partition_neighbors(const StGraph& graph,
                                                  int max_hops) {
  const std::size_t n = graph.num_nodes();
  std::vector<std::vector<int>> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto dist = bfs_distances(graph.adjacency, static_cast<int>(i));
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[j] >= 0 && (max_hops < 0 || dist[j] <= max_hops)) {
        groups[i].push_back(static_cast<int>(j));
      }
    }
  }
  return groups;
}

std::vector<unsigned char> partition_mask(
    const std::vector<std::vector<int>>& groups, std::size_t num_nodes) {
  if (groups.size() != num_nodes) {
    raise(ErrorCode::dimension,
          "partition_mask: " + std::to_string(groups.size()) +
              " groups for " + std::to_string(num_nodes) + " nodes");
  }
  std::vector<unsigned char> mask(num_nodes * num_nodes, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    for (int j : groups[i]) {
      mask[i * num_nodes + static_cast<std::size_t>(j)] = 1;
    }
  }
  return mask;
}

std::vector<std::pair<int, int>> group_pairs(
    const std::vector<std::vector<int>>& groups) {
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (int j : groups[i]) {
      pairs.emplace_back(static_cast<int>(i), j);
    }
  }
  return pairs;
}

}  // namespace asgl
