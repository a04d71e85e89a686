#include "core/raycast.hpp"

#include <cmath>
#include <vector>

#include "core/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace voxcond;

namespace {

SemanticGrid grid_with(Vec3i dims, double vs, Vec3 origin,
                       const std::vector<std::pair<Vec3i, LabelId>>& cells) {
  GridBuilder b(dims, vs, origin);
  for (const auto& [idx, label] : cells) b.labels[b.linear(idx)] = label;
  return b.freeze(default_taxonomy());
}

/* Ray parameter interval inside one cell (slab test); empty when t_out < t_in. */
std::pair<double, double> cell_chord(const SemanticGrid& g, const Ray& ray,
                                     Vec3i cell) {
  double t_in = 0.0, t_out = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    double lo = g.origin()[a] + cell[a] * g.voxel_size();
    double hi = lo + g.voxel_size();
    double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o < lo || o >= hi) return {1.0, 0.0};
      continue;
    }
    double ta = (lo - o) / d, tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t_in = std::max(t_in, ta);
    t_out = std::min(t_out, tb);
  }
  return {t_in, t_out};
}

Vec3 random_unit(Rng& rng) {
  while (true) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    double n = v.norm();
    if (n < 1e-3) continue;
    v = v / n;
    // near-axis-tangent directions graze lattice planes for long stretches
    bool tiny = false;
    for (int a = 0; a < 3; ++a)
      if (std::fabs(v[a]) < 1e-3) tiny = true;
    if (!tiny) return v;
  }
}

}  // namespace

TEST_CASE("dda agrees with the sampling oracle on random rays") {
  Rng rng(2024);
  GridBuilder b({12, 12, 8}, 0.5, {-3.0, -3.0, 0.0});
  for (auto& l : b.labels)
    if (rng.uniform() < 0.12) l = LabelId(1 + rng.uniform_index(5));
  SemanticGrid g = b.freeze(default_taxonomy());

  const double d_max = 10.0;
  const double step = g.voxel_size() / 64.0;
  const double tol = std::max(1e-5, step);
  int counted = 0, iters = 0;
  while (counted < 300 && iters < 20000) {
    ++iters;
    Ray ray{{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
             rng.uniform(-1.0, 5.0)},
            random_unit(rng)};
    auto fast = first_hit(g, ray, d_max);
    auto slow = oracle_first_hit(g, ray, d_max, step);

    // generator exclusions: grazing slivers and d_max-straddling entries
    auto sliver = [&](const std::optional<RayHit>& h) {
      if (!h) return false;
      auto [t_in, t_out] = cell_chord(g, ray, h->voxel);
      return t_out - t_in < 2.0 * step || std::fabs(h->distance - d_max) < 2.0 * step;
    };
    if (sliver(fast) || sliver(slow)) continue;

    ++counted;
    REQUIRE(fast.has_value() == slow.has_value());
    if (fast) {
      CHECK(std::fabs(fast->distance - slow->distance) <= tol);
      CHECK(fast->label == slow->label);
    }
  }
  CHECK(counted == 300);
}

TEST_CASE("diagonal corner crossings step x first and skip zero-length grazes") {
  Vec3 o{-0.5, -0.5, 0.5};
  Vec3 d = Vec3{1.0, 1.0, 0.0}.normalized();

  // both cells diagonal-adjacent to the corner path are only grazed
  SemanticGrid lower = grid_with({3, 3, 1}, 1.0, {0, 0, 0}, {{{1, 0, 0}, 2}});
  CHECK_FALSE(first_hit(lower, {o, d}, 20.0).has_value());
  SemanticGrid upper = grid_with({3, 3, 1}, 1.0, {0, 0, 0}, {{{0, 1, 0}, 2}});
  CHECK_FALSE(first_hit(upper, {o, d}, 20.0).has_value());

  SemanticGrid diag = grid_with({3, 3, 1}, 1.0, {0, 0, 0}, {{{1, 1, 0}, 3}});
  auto hit = first_hit(diag, {o, d}, 20.0);
  REQUIRE(hit.has_value());
  CHECK(hit->voxel == Vec3i{1, 1, 0});
  CHECK(hit->distance == doctest::Approx(1.5 * std::sqrt(2.0)).epsilon(1e-12));

  SemanticGrid all = grid_with({3, 3, 1}, 1.0, {0, 0, 0},
                               {{{0, 0, 0}, 1},
                                {{1, 0, 0}, 2},
                                {{0, 1, 0}, 2},
                                {{1, 1, 0}, 3},
                                {{2, 2, 0}, 4}});
  RayTrace tr = full_trace(all, {o, d}, 20.0);
  REQUIRE(tr.size() == 3);
  CHECK(tr[0].voxel == Vec3i{0, 0, 0});
  CHECK(tr[1].voxel == Vec3i{1, 1, 0});
  CHECK(tr[2].voxel == Vec3i{2, 2, 0});
  CHECK(tr[0].distance <= tr[1].distance);
  CHECK(tr[1].distance <= tr[2].distance);
}

TEST_CASE("origin inside an occupied cell reports distance zero") {
  SemanticGrid g = grid_with({3, 3, 3}, 1.0, {0, 0, 0}, {{{1, 1, 1}, 3}});
  auto hit = first_hit(g, {{1.5, 1.5, 1.5}, {1, 0, 0}}, 10.0);
  REQUIRE(hit.has_value());
  CHECK(hit->distance == 0.0);
  CHECK(hit->voxel == Vec3i{1, 1, 1});
  CHECK(hit->point == Vec3{1.5, 1.5, 1.5});
}

TEST_CASE("hits past d_max are not reported") {
  SemanticGrid g = grid_with({8, 1, 1}, 1.0, {0, 0, 0}, {{{6, 0, 0}, 2}});
  Ray ray{{-1.0, 0.5, 0.5}, {1, 0, 0}};
  CHECK_FALSE(first_hit(g, ray, 6.9).has_value());
  auto hit = first_hit(g, ray, 7.1);
  REQUIRE(hit.has_value());
  CHECK(hit->distance == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("rays on a shared face follow the half-open convention") {
  // y = 1.0 is the boundary between rows 0 and 1: points belong to row 1
  SemanticGrid low = grid_with({4, 2, 1}, 1.0, {0, 0, 0}, {{{2, 0, 0}, 2}});
  CHECK_FALSE(first_hit(low, {{-0.5, 1.0, 0.5}, {1, 0, 0}}, 10.0).has_value());
  SemanticGrid high = grid_with({4, 2, 1}, 1.0, {0, 0, 0}, {{{2, 1, 0}, 2}});
  auto hit = first_hit(high, {{-0.5, 1.0, 0.5}, {1, 0, 0}}, 10.0);
  REQUIRE(hit.has_value());
  CHECK(hit->voxel == Vec3i{2, 1, 0});
}

TEST_CASE("rays outside the grid miss") {
  SemanticGrid g = grid_with({2, 2, 2}, 1.0, {0, 0, 0}, {{{0, 0, 0}, 1}});
  CHECK_FALSE(first_hit(g, {{5, 5, 5}, {1, 0, 0}}, 100.0).has_value());
  CHECK_FALSE(first_hit(g, {{-1, 0.5, 0.5}, {-1, 0, 0}}, 100.0).has_value());
  // parallel to the slab, outside it
  CHECK_FALSE(first_hit(g, {{0.5, 0.5, 3.0}, {1, 0, 0}}, 100.0).has_value());
  // the global max face belongs to no cell
  CHECK_FALSE(first_hit(g, {{0.5, 0.5, 2.0}, {1, 0, 0}}, 100.0).has_value());
}

TEST_CASE("ray validation") {
  SemanticGrid g = grid_with({2, 2, 2}, 1.0, {0, 0, 0}, {});
  CHECK_FAILS_WITH(InvalidArgument, first_hit(g, {{0, 0, 0}, {1, 1, 0}}, 1.0));
  CHECK_FAILS_WITH(InvalidArgument, first_hit(g, {{0, 0, 0}, {1, 0, 0}}, 0.0));
  double nan = std::nan("");
  CHECK_FAILS_WITH(InvalidArgument, first_hit(g, {{nan, 0, 0}, {1, 0, 0}}, 1.0));
  CHECK_FAILS_WITH(InvalidArgument,
                   oracle_first_hit(g, {{0, 0, 0}, {1, 0, 0}}, 1.0, 0.0));
}

TEST_CASE("oracle matches an exact hand-computed entry") {
  SemanticGrid g = grid_with({4, 4, 4}, 0.5, {0, 0, 0}, {{{2, 1, 1}, 2}});
  Ray ray{{-0.3, 0.8, 0.7}, {1, 0, 0}};
  auto hit = oracle_first_hit(g, ray, 5.0, 0.5 / 64.0);
  REQUIRE(hit.has_value());
  CHECK(hit->voxel == Vec3i{2, 1, 1});
  CHECK(hit->distance == doctest::Approx(1.3).epsilon(1e-5));
}
