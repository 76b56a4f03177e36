#include "fpglmm/simgen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fpglmm/csv.hpp"
#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"

namespace fpglmm {

namespace {

double assign_quality(const SimConfig& cfg, int f, int l, Rng& rng) {
  const QualityAssignment& qa = cfg.quality;
  switch (qa.kind) {
    case QualityAssignment::Kind::fixed_table: {
      const std::size_t idx =
          static_cast<std::size_t>(f - 1) * static_cast<std::size_t>(cfg.l) +
          static_cast<std::size_t>(l - 1);
      if (idx >= qa.fixed.size()) throw InputError("quality table smaller than F*L");
      return qa.fixed[idx];
    }
    case QualityAssignment::Kind::uniform_labels: {
      if (cfg.scheme.kind != QualityKind::categorical) {
        throw InputError("uniform_labels quality rule needs a categorical scheme");
      }
      const int label = 1 + static_cast<int>(rng.next_unit() * cfg.scheme.qmax);
      return static_cast<double>(std::min(label, cfg.scheme.qmax));
    }
    case QualityAssignment::Kind::label_probs: {
      if (cfg.scheme.kind != QualityKind::categorical) {
        throw InputError("label_probs quality rule needs a categorical scheme");
      }
      if (static_cast<int>(qa.probs.size()) != cfg.scheme.qmax) {
        throw InputError("label_probs needs one probability per label");
      }
      std::vector<double> cumulative(qa.probs.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < qa.probs.size(); ++i) {
        if (qa.probs[i] < 0.0) throw InputError("label probabilities must be >= 0");
        acc += qa.probs[i];
        cumulative[i] = acc;
      }
      if (acc <= 0.0) throw InputError("label probabilities sum to zero");
      for (double& c : cumulative) c /= acc;
      return static_cast<double>(rng.next_categorical(cumulative) + 1);
    }
    case QualityAssignment::Kind::uniform_continuous: {
      if (cfg.scheme.kind != QualityKind::continuous) {
        throw InputError("uniform_continuous quality rule needs a continuous scheme");
      }
      if (!(qa.lo >= 0.0 && qa.hi <= 1.0 && qa.lo <= qa.hi)) {
        throw InputError("continuous quality range must satisfy 0 <= lo <= hi <= 1");
      }
      return qa.lo + (qa.hi - qa.lo) * rng.next_unit();
    }
  }
  throw InputError("unknown quality assignment rule");
}

int assign_m(const SimConfig& cfg, double quality, Rng& rng) {
  const MAssignment& ma = cfg.m_assign;
  switch (ma.kind) {
    case MAssignment::Kind::fixed:
      if (ma.fixed_m < 1) throw InputError("fixed minutia count must be >= 1");
      return ma.fixed_m;
    case MAssignment::Kind::per_label_mean: {
      if (cfg.scheme.kind != QualityKind::categorical) {
        throw InputError("per_label_mean minutia rule needs a categorical scheme");
      }
      const int label = static_cast<int>(quality);
      if (label < 1 || label > static_cast<int>(ma.mean_by_label.size())) {
        throw InputError("per_label_mean table smaller than qmax");
      }
      const double mean = ma.mean_by_label[static_cast<std::size_t>(label - 1)];
      if (!(mean > 0.0)) throw InputError("per-label mean minutia count must be positive");
      return static_cast<int>(std::max<long>(1, rng.next_poisson(mean)));
    }
  }
  throw InputError("unknown minutia-count assignment rule");
}

} // namespace

SimOutput simulate_dataset(const SimConfig& cfg) {
  if (cfg.f < 2 || cfg.l < 1) throw InputError("simulate_dataset needs F >= 2 and L >= 1");
  if (cfg.tau_true.fixed.dim() != cfg.scheme.fixed_dim()) {
    throw InputError("tau_true does not match the quality scheme");
  }

  // Independent streams per ingredient keep the draw sequence stable when one
  // ingredient changes.
  Rng rng_q(mix_seed(cfg.seed, 1));
  Rng rng_m(mix_seed(cfg.seed, 2));
  Rng rng_b(mix_seed(cfg.seed, 3));
  Rng rng_y(mix_seed(cfg.seed, 4));

  const int n_impr = cfg.f * cfg.l;
  std::vector<double> quality(static_cast<std::size_t>(n_impr));
  std::vector<int> m_count(static_cast<std::size_t>(n_impr));
  for (int f = 1; f <= cfg.f; ++f) {
    for (int l = 1; l <= cfg.l; ++l) {
      const std::size_t idx = static_cast<std::size_t>(f - 1) * cfg.l + (l - 1);
      quality[idx] = assign_quality(cfg, f, l, rng_q);
      cfg.scheme.validate_quality(quality[idx]);
      m_count[idx] = assign_m(cfg, quality[idx], rng_m);
    }
  }

  const double sigma = std::sqrt(cfg.tau_true.sigma2());
  Eigen::VectorXd b(cfg.f);
  for (int f = 0; f < cfg.f; ++f) b[f] = sigma * rng_b.next_normal();

  EtaCalc calc(cfg.tau_true.fixed, cfg.scheme);
  SimOutput out;
  out.truth.tau_true = cfg.tau_true;
  out.truth.b = b;
  out.data.scheme = cfg.scheme;

  const auto pairs = enumerate_impostor_pairs(cfg.f, cfg.l);
  out.data.pairs.reserve(pairs.size());
  out.truth.type_counts.reserve(pairs.size());
  double e[4];
  for (const PairIndex& pi : pairs) {
    const std::size_t ia = static_cast<std::size_t>(pi.finger_a - 1) * cfg.l + (pi.impr_a - 1);
    const std::size_t ib = static_cast<std::size_t>(pi.finger_b - 1) * cfg.l + (pi.impr_b - 1);
    PairObs p;
    p.finger_a = pi.finger_a;
    p.impr_a = pi.impr_a;
    p.finger_b = pi.finger_b;
    p.impr_b = pi.impr_b;
    p.m_a = m_count[ia];
    p.m_b = m_count[ib];
    p.q_a = quality[ia];
    p.q_b = quality[ib];
    calc.etas(p.q_a, p.q_b, e);
    const double log_mm = std::log(static_cast<double>(p.m_a)) +
                          std::log(static_cast<double>(p.m_b));
    const double zb = b[pi.finger_a - 1] + b[pi.finger_b - 1];
    std::array<long, 4> counts;
    long y = 0;
    for (int ch = 0; ch < kChannels; ++ch) {
      counts[ch] = rng_y.next_poisson(std::exp(log_mm + zb + e[ch]));
      y += counts[ch];
    }
    p.y = y;
    out.data.pairs.push_back(p);
    out.truth.type_counts.push_back(counts);
  }
  out.data.finalize();
  return out;
}

void save_truth_csv(const SimTruth& truth, const QualityScheme& scheme,
                    const std::string& path, const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  for (const std::string& c : comments) out << "# " << c << "\n";
  out << "kind,key,c00,c01,c10,c11\n";
  const auto names = tau_component_names(scheme);
  const Eigen::VectorXd stacked = truth.tau_true.stacked();
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << "tau," << names[i] << ',' << format_double(stacked[static_cast<int>(i)]) << ",,,\n";
  }
  for (int f = 0; f < truth.b.size(); ++f) {
    out << "b," << (f + 1) << ',' << format_double(truth.b[f]) << ",,,\n";
  }
  for (std::size_t i = 0; i < truth.type_counts.size(); ++i) {
    const auto& c = truth.type_counts[i];
    out << "counts," << i << ',' << c[0] << ',' << c[1] << ',' << c[2] << ',' << c[3] << "\n";
  }
  if (!out) throw InputError(path + ": write failed");
}

double CoverageReport::average_coverage() const {
  if (items.empty()) return 0.0;
  double acc = 0.0;
  for (const Item& item : items) acc += item.fraction();
  return acc / static_cast<double>(items.size());
}

std::string CoverageReport::to_text() const {
  std::ostringstream os;
  os << "coverage over " << runs_completed << "/" << runs_requested << " runs\n";
  for (const Item& item : items) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %-24s truth=%- 12.6g coverage=%d/%d (%.3f)\n",
                  item.name.c_str(), item.truth, item.covered, item.total, item.fraction());
    os << buf;
  }
  char avg[64];
  std::snprintf(avg, sizeof(avg), "  average coverage: %.4f\n", average_coverage());
  os << avg;
  for (const std::string& f : failures) os << "  failed run: " << f << "\n";
  return os.str();
}

std::string CoverageReport::to_csv() const {
  std::ostringstream os;
  os << "name,truth,covered,total,fraction\n";
  for (const Item& item : items) {
    os << item.name << ',' << format_double(item.truth) << ',' << item.covered << ','
       << item.total << ',' << format_double(item.fraction()) << "\n";
  }
  return os.str();
}

CoverageReport run_coverage(const SimConfig& cfg, int runs, double alpha,
                            std::span<const PrcQuery> queries, const EmControls& controls,
                            int h_proposals, int r_samples, long prc_mc, long truth_mc,
                            bool init_at_truth) {
  if (runs < 2) throw InputError("run_coverage needs at least 2 runs");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("run_coverage: alpha must be in (0,1)");

  CoverageReport report;
  report.runs_requested = runs;
  const auto names = tau_component_names(cfg.scheme);
  const Eigen::VectorXd truth_stacked = cfg.tau_true.stacked();
  for (std::size_t i = 0; i < names.size(); ++i) {
    report.items.push_back({names[i], truth_stacked[static_cast<int>(i)], 0, 0});
  }
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const PrcQuery& q = queries[qi];
    double truth;
    if (cfg.tau_true.sigma2() == 0.0) {
      truth = prc_exact_sigma_zero(q, cfg.tau_true);
    } else {
      truth = prc_unconditional(q, cfg.tau_true, truth_mc, mix_seed(cfg.seed, 900 + qi));
    }
    std::ostringstream name;
    name << "prc(w=" << q.w << "|m=" << q.m1 << "," << q.m2 << ";q=" << q.q1 << "," << q.q2
         << ")";
    report.items.push_back({name.str(), truth, 0, 0});
  }

  const double z = normal_quantile(1.0 - alpha / 2.0);
  for (int run = 0; run < runs; ++run) {
    try {
      SimConfig run_cfg = cfg;
      run_cfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(run) + 1);
      const SimOutput sim = simulate_dataset(run_cfg);
      const std::optional<Tau> init =
          init_at_truth ? std::optional<Tau>(cfg.tau_true) : std::nullopt;
      const FitResult fr = fit(sim.data, init, controls);
      std::vector<std::string> prop_warnings;
      const ProposalSpec proposal = build_proposal(fr, &prop_warnings);
      const PosteriorSamples samples = importance_resample(
          sim.data, proposal, h_proposals, r_samples, mix_seed(run_cfg.seed, 555));

      const int dim = static_cast<int>(names.size());
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
      for (const auto& d : samples.draws) mean += d;
      mean /= static_cast<double>(samples.draws.size());
      Eigen::VectorXd sd = Eigen::VectorXd::Zero(dim);
      for (const auto& d : samples.draws) sd += (d - mean).cwiseAbs2();
      sd = (sd / std::max<double>(1.0, static_cast<double>(samples.draws.size() - 1)))
               .cwiseSqrt();

      for (int i = 0; i < dim; ++i) {
        const double lo = mean[i] - z * sd[i];
        const double hi = mean[i] + z * sd[i];
        report.items[static_cast<std::size_t>(i)].total += 1;
        if (truth_stacked[i] >= lo && truth_stacked[i] <= hi) {
          report.items[static_cast<std::size_t>(i)].covered += 1;
        }
      }
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const PrcReport pr = prc_posterior(queries[qi], samples, prc_mc, alpha,
                                           mix_seed(run_cfg.seed, 600 + qi));
        auto& item = report.items[names.size() + qi];
        item.total += 1;
        if (item.truth >= pr.ci_low && item.truth <= pr.ci_high) item.covered += 1;
      }
      report.runs_completed += 1;
    } catch (const Error& err) {
      report.failures.push_back("run " + std::to_string(run) + ": " + err.what());
    }
  }
  return report;
}

} // namespace fpglmm
