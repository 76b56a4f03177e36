#include "fpglmm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fpglmm/csv.hpp"
#include "fpglmm/errors.hpp"

namespace fpglmm {

PairCovariates PairObs::covariates() const {
  PairCovariates c;
  c.finger_a = finger_index_a;
  c.finger_b = finger_index_b;
  c.m_a = m_a;
  c.m_b = m_b;
  c.q_a = q_a;
  c.q_b = q_b;
  return c;
}

void MatchDataset::finalize() {
  std::map<int, int> finger_index;
  std::map<int, std::set<int>> impressions;
  for (PairObs& p : pairs) {
    if (p.finger_a == p.finger_b) {
      throw InputError("genuine pair (finger " + std::to_string(p.finger_a) +
                       " against itself) is not allowed");
    }
    if (p.m_a < 1 || p.m_b < 1) throw InputError("minutia counts must be >= 1");
    if (p.y < 0) throw InputError("match count must be >= 0");
    if (p.y > std::min(p.m_a, p.m_b)) {
      throw InputError("match count " + std::to_string(p.y) + " exceeds min(m_a,m_b)");
    }
    scheme.validate_quality(p.q_a);
    scheme.validate_quality(p.q_b);
    finger_index.emplace(p.finger_a, 0);
    finger_index.emplace(p.finger_b, 0);
    impressions[p.finger_a].insert(p.impr_a);
    impressions[p.finger_b].insert(p.impr_b);
  }
  int next = 0;
  for (auto& [finger, idx] : finger_index) idx = next++;
  for (PairObs& p : pairs) {
    p.finger_index_a = finger_index[p.finger_a];
    p.finger_index_b = finger_index[p.finger_b];
    p.log_mm = std::log(static_cast<double>(p.m_a)) + std::log(static_cast<double>(p.m_b));
  }
  finger_count = next;
  std::size_t lmin = SIZE_MAX, lmax = 0;
  for (const auto& [finger, imprs] : impressions) {
    lmin = std::min(lmin, imprs.size());
    lmax = std::max(lmax, imprs.size());
  }
  impressions_per_finger = (!impressions.empty() && lmin == lmax) ? static_cast<int>(lmax) : 0;
}

long MatchDataset::total_matches() const {
  long total = 0;
  for (const PairObs& p : pairs) total += p.y;
  return total;
}

int relabel_categorical(int q0, int qmax) {
  if (q0 < 1 || q0 > qmax) {
    throw InputError("label " + std::to_string(q0) + " outside 1.." + std::to_string(qmax));
  }
  return qmax + 1 - q0;
}

std::vector<PairIndex> enumerate_impostor_pairs(int f, int l) {
  if (f < 2 || l < 1) throw InputError("impostor enumeration needs F >= 2 and L >= 1");
  std::vector<PairIndex> out;
  out.reserve(static_cast<std::size_t>(f) * (f - 1) / 2 * l * l);
  for (int fa = 1; fa <= f; ++fa) {
    for (int fb = fa + 1; fb <= f; ++fb) {
      for (int la = 1; la <= l; ++la) {
        for (int lb = 1; lb <= l; ++lb) {
          out.push_back({fa, la, fb, lb});
        }
      }
    }
  }
  return out;
}

namespace {

// Canonical unordered-pair key: lexicographically smaller impression first.
std::array<int, 4> pair_key(const PairObs& p) {
  if (std::make_pair(p.finger_a, p.impr_a) <= std::make_pair(p.finger_b, p.impr_b)) {
    return {p.finger_a, p.impr_a, p.finger_b, p.impr_b};
  }
  return {p.finger_b, p.impr_b, p.finger_a, p.impr_a};
}

} // namespace

MatchDataset load_matches(const std::string& path, const QualityScheme& scheme) {
  CsvTable t = read_csv(path);
  const std::size_t cfa = column_index(t, "finger_a");
  const std::size_t cia = column_index(t, "impr_a");
  const std::size_t cfb = column_index(t, "finger_b");
  const std::size_t cib = column_index(t, "impr_b");
  const std::size_t cma = column_index(t, "m_a");
  const std::size_t cmb = column_index(t, "m_b");
  const std::size_t cqa = column_index(t, "q_a");
  const std::size_t cqb = column_index(t, "q_b");
  const std::size_t cy = column_index(t, "y");

  MatchDataset data;
  data.scheme = scheme;
  std::set<std::array<int, 4>> seen;
  // quality and minutia count must be consistent wherever an impression recurs
  std::map<std::pair<int, int>, std::pair<int, double>> impression_info;

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto line = std::to_string(t.row_lines[r]);
    PairObs p;
    p.finger_a = static_cast<int>(parse_long(t, r, cfa));
    p.impr_a = static_cast<int>(parse_long(t, r, cia));
    p.finger_b = static_cast<int>(parse_long(t, r, cfb));
    p.impr_b = static_cast<int>(parse_long(t, r, cib));
    p.m_a = static_cast<int>(parse_long(t, r, cma));
    p.m_b = static_cast<int>(parse_long(t, r, cmb));
    p.q_a = parse_double(t, r, cqa);
    p.q_b = parse_double(t, r, cqb);
    p.y = parse_long(t, r, cy);

    if (p.finger_a == p.finger_b) {
      throw InputError(path + ":" + line + ": genuine pair (finger_a == finger_b)");
    }
    if (p.m_a < 1 || p.m_b < 1) throw InputError(path + ":" + line + ": minutia count < 1");
    if (p.y < 0 || p.y > std::min(p.m_a, p.m_b)) {
      throw InputError(path + ":" + line + ": y outside 0..min(m_a,m_b)");
    }
    try {
      scheme.validate_quality(p.q_a);
      scheme.validate_quality(p.q_b);
    } catch (const InputError& e) {
      throw InputError(path + ":" + line + ": " + e.what());
    }
    if (!seen.insert(pair_key(p)).second) {
      throw InputError(path + ":" + line + ": duplicate unordered pair");
    }
    auto check_impression = [&](int f, int l, int m, double q) {
      auto [it, inserted] = impression_info.try_emplace({f, l}, m, q);
      if (!inserted && (it->second.first != m || it->second.second != q)) {
        throw InputError(path + ":" + line + ": impression (" + std::to_string(f) + "," +
                         std::to_string(l) + ") has inconsistent m or q across rows");
      }
    };
    check_impression(p.finger_a, p.impr_a, p.m_a, p.q_a);
    check_impression(p.finger_b, p.impr_b, p.m_b, p.q_b);
    data.pairs.push_back(p);
  }
  data.finalize();
  return data;
}

void save_matches(const MatchDataset& data, const std::string& path,
                  const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  for (const std::string& c : comments) out << "# " << c << "\n";
  out << "finger_a,impr_a,finger_b,impr_b,m_a,m_b,q_a,q_b,y\n";
  for (const PairObs& p : data.pairs) {
    out << p.finger_a << ',' << p.impr_a << ',' << p.finger_b << ',' << p.impr_b << ','
        << p.m_a << ',' << p.m_b << ',' << format_double(p.q_a) << ',' << format_double(p.q_b)
        << ',' << p.y << "\n";
  }
  if (!out) throw InputError(path + ": write failed");
}

namespace {

struct Welford {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double sd() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

} // namespace

SummaryTable summarize(const MatchDataset& data, SummaryStatistic stat, int continuous_bins) {
  if (data.pairs.empty()) throw InputError("summarize: empty dataset");
  int nlabels;
  std::vector<std::string> labels;
  auto bin_of = [&](double q) -> int {
    if (data.scheme.kind == QualityKind::categorical) return static_cast<int>(q) - 1;
    int b = static_cast<int>(q * continuous_bins);
    return std::min(b, continuous_bins - 1); // q == 1.0 joins the top bin
  };
  if (data.scheme.kind == QualityKind::categorical) {
    nlabels = data.scheme.qmax;
    for (int i = 1; i <= nlabels; ++i) labels.push_back(std::to_string(i));
  } else {
    if (continuous_bins < 1) throw InputError("summarize: need >= 1 bin");
    nlabels = continuous_bins;
    for (int i = 0; i < nlabels; ++i) {
      std::ostringstream os;
      os << "[" << static_cast<double>(i) / continuous_bins << ","
         << static_cast<double>(i + 1) / continuous_bins << (i + 1 == nlabels ? "]" : ")");
      labels.push_back(os.str());
    }
  }
  std::vector<Welford> acc(static_cast<std::size_t>(nlabels) * nlabels);
  for (const PairObs& p : data.pairs) {
    double value;
    const double mm = static_cast<double>(p.m_a) * static_cast<double>(p.m_b);
    switch (stat) {
      case SummaryStatistic::y_mean_sd: value = static_cast<double>(p.y); break;
      case SummaryStatistic::mm_mean_sd: value = mm; break;
      case SummaryStatistic::ratio_mean_sd: value = static_cast<double>(p.y) / mm; break;
      default: throw InputError("unknown summary statistic");
    }
    const int ba = bin_of(p.q_a);
    const int bb = bin_of(p.q_b);
    acc[static_cast<std::size_t>(ba) * nlabels + bb].add(value);
    if (ba != bb) acc[static_cast<std::size_t>(bb) * nlabels + ba].add(value);
  }
  SummaryTable table;
  table.labels = labels;
  table.cells.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    table.cells[i].count = acc[i].n;
    table.cells[i].mean = acc[i].n > 0 ? acc[i].mean : 0.0;
    table.cells[i].sd = acc[i].sd();
  }
  return table;
}

std::string SummaryTable::to_text(const std::string& title) const {
  std::ostringstream os;
  os << title << "\n";
  os << "q1\\q2";
  for (const auto& l : labels) os << "\t" << l;
  os << "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << labels[i];
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const SummaryCell& c = at(i, j);
      os << "\t";
      if (c.count == 0) {
        os << "-";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4g (%.4g)", c.mean, c.sd);
        os << buf;
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string SummaryTable::to_csv() const {
  std::ostringstream os;
  os << "q1,q2,mean,sd,count\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const SummaryCell& c = at(i, j);
      os << labels[i] << ',' << labels[j] << ',' << format_double(c.mean) << ','
         << format_double(c.sd) << ',' << c.count << "\n";
    }
  }
  return os.str();
}

MatchDataset build_matches_from_minutiae(const std::vector<std::string>& minutia_files,
                                         const std::string& quality_file,
                                         const MatchConfig& cfg, const QualityScheme& scheme) {
  std::map<std::pair<int, int>, MinutiaSet> sets;
  for (const std::string& f : minutia_files) {
    auto part = load_minutiae(f);
    for (auto& [key, mins] : part) {
      auto [it, inserted] = sets.emplace(key, std::move(mins));
      if (!inserted) {
        throw InputError("impression (" + std::to_string(key.first) + "," +
                         std::to_string(key.second) + ") appears in multiple minutia files");
      }
    }
  }
  if (sets.empty()) throw InputError("no minutiae loaded");

  CsvTable qt = read_csv(quality_file);
  const std::size_t cf = column_index(qt, "finger");
  const std::size_t ci = column_index(qt, "impression");
  const std::size_t cq = column_index(qt, "q");
  std::map<std::pair<int, int>, double> quality;
  for (std::size_t r = 0; r < qt.rows.size(); ++r) {
    const int f = static_cast<int>(parse_long(qt, r, cf));
    const int l = static_cast<int>(parse_long(qt, r, ci));
    quality[{f, l}] = parse_double(qt, r, cq);
  }

  struct Impression {
    int finger, impr;
  };
  std::vector<Impression> impressions;
  for (const auto& [key, mins] : sets) {
    if (!quality.count(key)) {
      throw InputError("impression (" + std::to_string(key.first) + "," +
                       std::to_string(key.second) + ") has no quality value");
    }
    if (mins.empty()) {
      throw InputError("impression (" + std::to_string(key.first) + "," +
                       std::to_string(key.second) + ") has no minutiae");
    }
    impressions.push_back({key.first, key.second});
  }

  MatchDataset data;
  data.scheme = scheme;
  for (std::size_t i = 0; i < impressions.size(); ++i) {
    for (std::size_t j = i + 1; j < impressions.size(); ++j) {
      if (impressions[i].finger == impressions[j].finger) continue;
      const auto key_a = std::make_pair(impressions[i].finger, impressions[i].impr);
      const auto key_b = std::make_pair(impressions[j].finger, impressions[j].impr);
      const MinutiaSet& sa = sets[key_a];
      const MinutiaSet& sb = sets[key_b];
      PairObs p;
      p.finger_a = key_a.first;
      p.impr_a = key_a.second;
      p.finger_b = key_b.first;
      p.impr_b = key_b.second;
      p.m_a = static_cast<int>(sa.size());
      p.m_b = static_cast<int>(sb.size());
      p.q_a = quality[key_a];
      p.q_b = quality[key_b];
      p.y = count_matches(sa, sb, cfg);
      data.pairs.push_back(p);
    }
  }
  if (data.pairs.empty()) throw InputError("minutia files span fewer than two fingers");
  data.finalize();
  return data;
}

} // namespace fpglmm
