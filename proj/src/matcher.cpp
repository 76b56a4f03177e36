#include "fpglmm/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "fpglmm/csv.hpp"
#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"

namespace fpglmm {

double wrap_direction(double u) {
  double w = std::fmod(u, kTwoPi);
  if (w <= 0.0) w += kTwoPi;
  return w;
}

double angular_distance(double u, double v) {
  if (!(u > 0.0 && u <= kTwoPi) || !(v > 0.0 && v <= kTwoPi)) {
    throw InputError("direction outside (0, 2pi]");
  }
  double d = std::fabs(u - v);
  return std::min(d, kTwoPi - d);
}

bool is_match(const Minutia& a, const Minutia& b, const MatchConfig& cfg) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  if (dx * dx + dy * dy >= cfg.r0 * cfg.r0) return false;
  return angular_distance(a.direction, b.direction) < cfg.u0;
}

namespace {

// Candidate correspondence after alignment, scored by combined closeness.
struct Candidate {
  double score;
  int i;
  int j;
};

// Transform aligning anchor (bq) in the second set onto anchor (ap) in the
// first: rotate by the direction difference about bq, translate onto ap.
MinutiaSet align_onto(std::span<const Minutia> set, const Minutia& bq, const Minutia& ap) {
  const double rot = ap.direction - bq.direction;
  const double c = std::cos(rot);
  const double s = std::sin(rot);
  MinutiaSet out;
  out.reserve(set.size());
  for (const Minutia& m : set) {
    const double dx = m.x - bq.x;
    const double dy = m.y - bq.y;
    Minutia t;
    t.x = ap.x + c * dx - s * dy;
    t.y = ap.y + s * dx + c * dy;
    t.direction = wrap_direction(m.direction + rot);
    out.push_back(t);
  }
  return out;
}

// Greedy one-to-one matching by ascending combined distance score,
// ties broken by lexicographic pair index.
int greedy_match_count(std::span<const Minutia> a, const MinutiaSet& b_aligned,
                       const MatchConfig& cfg) {
  std::vector<Candidate> cands;
  for (int i = 0; i < static_cast<int>(a.size()); ++i) {
    for (int j = 0; j < static_cast<int>(b_aligned.size()); ++j) {
      const Minutia& p = a[i];
      const Minutia& q = b_aligned[j];
      const double dx = p.x - q.x;
      const double dy = p.y - q.y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d >= cfg.r0) continue;
      const double ang = angular_distance(p.direction, q.direction);
      if (ang >= cfg.u0) continue;
      cands.push_back({d / cfg.r0 + ang / cfg.u0, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& l, const Candidate& r) {
    if (l.score != r.score) return l.score < r.score;
    if (l.i != r.i) return l.i < r.i;
    return l.j < r.j;
  });
  std::vector<char> used_a(a.size(), 0), used_b(b_aligned.size(), 0);
  int count = 0;
  for (const Candidate& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = 1;
    ++count;
  }
  return count;
}

bool lex_less(std::span<const Minutia> a, std::span<const Minutia> b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].x != b[i].x) return a[i].x < b[i].x;
    if (a[i].y != b[i].y) return a[i].y < b[i].y;
    if (a[i].direction != b[i].direction) return a[i].direction < b[i].direction;
  }
  return a.size() < b.size();
}

} // namespace

int count_matches(std::span<const Minutia> a, std::span<const Minutia> b,
                  const MatchConfig& cfg) {
  if (!(cfg.r0 > 0.0) || !(cfg.u0 > 0.0 && cfg.u0 <= kTwoPi / 2.0)) {
    throw InputError("match config requires r0 > 0 and 0 < u0 <= pi");
  }
  if (a.empty() || b.empty()) return 0;
  // Canonical argument order makes the count exactly symmetric even when
  // greedy tie-breaking would otherwise depend on which set came first.
  if (lex_less(b, a)) return count_matches(b, a, cfg);
  if (!cfg.anchor_search) return greedy_match_count(a, MinutiaSet(b.begin(), b.end()), cfg);
  int best = 0;
  for (const Minutia& ap : a) {
    for (const Minutia& bq : b) {
      MinutiaSet aligned = align_onto(b, bq, ap);
      best = std::max(best, greedy_match_count(a, aligned, cfg));
    }
  }
  return best;
}

std::map<std::pair<int, int>, MinutiaSet> load_minutiae(const std::string& path) {
  CsvTable t = read_csv(path);
  const std::size_t cf = column_index(t, "finger");
  const std::size_t ci = column_index(t, "impression");
  const std::size_t cx = column_index(t, "x");
  const std::size_t cy = column_index(t, "y");
  const std::size_t cd = column_index(t, "direction");
  std::map<std::pair<int, int>, MinutiaSet> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int f = static_cast<int>(parse_long(t, r, cf));
    const int l = static_cast<int>(parse_long(t, r, ci));
    Minutia m;
    m.x = parse_double(t, r, cx);
    m.y = parse_double(t, r, cy);
    m.direction = parse_double(t, r, cd);
    if (!std::isfinite(m.x) || !std::isfinite(m.y) || m.x < 0.0 || m.y < 0.0) {
      throw InputError(path + ":" + std::to_string(t.row_lines[r]) +
                       ": minutia coordinates must be finite and nonnegative");
    }
    if (!(m.direction > 0.0 && m.direction <= kTwoPi)) {
      throw InputError(path + ":" + std::to_string(t.row_lines[r]) +
                       ": direction must lie in (0, 2pi]");
    }
    out[{f, l}].push_back(m);
  }
  return out;
}

} // namespace fpglmm
