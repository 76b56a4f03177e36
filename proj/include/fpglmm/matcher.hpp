#ifndef FPGLMM_MATCHER_HPP
#define FPGLMM_MATCHER_HPP

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fpglmm {

// One minutia: planar location in pixels plus direction in (0, 2pi].
struct Minutia {
  double x = 0.0;
  double y = 0.0;
  double direction = 0.0;
};

using MinutiaSet = std::vector<Minutia>;

struct MatchConfig {
  double r0 = 15.0;         // pixels, strict upper bound on location distance
  double u0 = 0.2618;       // radians (15 degrees), strict bound on direction
  bool anchor_search = true;
};

// Wraps an angle into (0, 2pi].
double wrap_direction(double u);

// min(|u-v|, 2pi-|u-v|); inputs must lie in (0, 2pi].
double angular_distance(double u, double v);

// Euclidean distance < r0 AND angular distance < u0, both strict.
bool is_match(const Minutia& a, const Minutia& b, const MatchConfig& cfg);

// Number of minutia correspondences under the best anchor alignment: every
// cross pair of minutiae is tried as an anchor, the rigid transform that
// exactly aligns the anchors is applied, and a one-to-one matching is counted.
// Symmetric in its arguments and bounded by min(|a|,|b|).
int count_matches(std::span<const Minutia> a, std::span<const Minutia> b,
                  const MatchConfig& cfg);

// Minutia CSV: header finger,impression,x,y,direction (radians). A file may
// hold one impression or a whole database.
std::map<std::pair<int, int>, MinutiaSet> load_minutiae(const std::string& path);

} // namespace fpglmm

#endif
