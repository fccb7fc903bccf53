#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "polyeit/vec2.hpp"

namespace polyeit::detail {

/// Provenance of a constrained edge. Pieces of a split segment inherit the tag.
struct SegmentTag {
  int domain_side = -1;
  std::array<int, 2> poly_edge{-1, -1};
  int orig_a = -1;  // endpoints of the input segment, used to place split points on its line
  int orig_b = -1;

  void merge(const SegmentTag& o);
};

struct RefineParams {
  double min_angle_deg = 20.0;
  /// Full Ruppert refinement; when false only the size criterion is applied.
  bool quality = true;
  /// Target maximum edge length for a triangle.
  std::function<double(const Vec2&, const Vec2&, const Vec2&)> size;
  std::size_t max_vertices = 4'000'000;
};

/// Incremental constrained Delaunay triangulation with Bowyer-Watson point
/// insertion, flip-based segment recovery and Delaunay refinement.
class Cdt {
 public:
  struct Tri {
    std::array<int, 3> v{};  // counter-clockwise
    std::array<int, 3> n{};  // n[i] is across the edge opposite v[i]
    std::uint8_t con = 0;    // bit i: edge opposite v[i] is constrained
    bool alive = false;
  };

  Cdt(const Vec2& lo, const Vec2& hi);

  /// Inserts p, or returns the existing vertex at p.
  int add_vertex(const Vec2& p, bool input);
  /// Recovers segment (a, b) as a constrained edge. Collinear vertices on the
  /// way split the segment.
  void insert_segment(int a, int b, const SegmentTag& tag);
  /// Deletes the triangles outside the constrained outer boundary together
  /// with the bounding triangle.
  void remove_exterior();
  void refine(const RefineParams& params);

  const std::vector<Vec2>& points() const { return pts_; }
  const std::vector<Tri>& triangles() const { return tris_; }
  bool is_super_vertex(int v) const { return v < 3; }
  const SegmentTag* tag(int a, int b) const;
  bool is_input(int v) const { return input_[static_cast<std::size_t>(v)] != 0; }

 private:
  enum class Where { inside, on_edge, on_vertex };
  struct Location {
    int tri = -1;
    Where where = Where::inside;
    int index = -1;  // edge or vertex slot within tri
  };
  struct CavityEdge {
    int a, b;     // counter-clockwise as seen from the cavity
    int outside;  // triangle across, or -1
    bool con;
  };
  struct Cavity {
    std::vector<int> tris;
    std::vector<CavityEdge> boundary;
  };
  struct Blocked {
    int a = -1, b = -1;
  };

  static std::uint64_t key(int a, int b);
  int new_tri(int a, int b, int c);
  void kill(int t);
  int edge_slot(int t, int a, int b) const;
  void set_neighbor(int t, int i, int u);
  bool find_edge(int a, int b, int& t, int& i) const;
  Location locate(const Vec2& p, int hint);
  Blocked walk_blocked(int from, const Vec2& p, int& found);
  Cavity build_cavity(const Vec2& p, const Location& loc);
  int insert_at(const Vec2& p, const Location& loc, bool input, std::vector<int>* created = nullptr);
  int fill_cavity(int vid, const Cavity& cav, int split_a, int split_b, std::vector<int>* created);
  void flip(int t, int i);
  void legalize(std::vector<std::array<int, 2>> edges);
  bool edge_crosses(int a, int b, int x, int y) const;
  std::uint32_t next_random();

  Vec2 split_point(int a, int b, const SegmentTag& tag) const;
  int split_segment(int a, int b, std::vector<int>* created);
  bool encroached(int a, int b, const Vec2& p) const;
  bool segment_encroached(int a, int b) const;

  std::vector<Vec2> pts_;
  std::vector<std::uint8_t> input_;
  std::vector<int> vtri_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::unordered_map<std::uint64_t, SegmentTag> tags_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t stamp_gen_ = 0;
  int last_ = 0;
  std::uint32_t rng_ = 0x9e3779b9u;
};

}  // namespace polyeit::detail
