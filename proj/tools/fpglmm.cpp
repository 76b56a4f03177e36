// Command-line front end: summarize, fit, posterior, prc, design-w, match,
// simulate, validate. Every command that writes artifacts also writes a
// manifest (<output>.manifest.json) recording the invocation, seeds, and
// input digests; outputs name the manifest that produced them.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fpglmm/bayes.hpp"
#include "fpglmm/csv.hpp"
#include "fpglmm/dataset.hpp"
#include "fpglmm/em.hpp"
#include "fpglmm/errors.hpp"
#include "fpglmm/matcher.hpp"
#include "fpglmm/parallel.hpp"
#include "fpglmm/prc.hpp"
#include "fpglmm/simgen.hpp"

using json = nlohmann::ordered_json;
using namespace fpglmm;

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

// FNV-1a over the file bytes; enough to pin inputs in the manifest.
std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> inputs; // path, digest
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  std::string path() const { return outputs.empty() ? command + ".manifest.json" : outputs.front() + ".manifest.json"; }

  void write() const {
    json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["invocation"] = argv;
    if (has_seed) j["seed"] = seed;
    json in = json::object();
    for (const auto& [p, d] : inputs) in[p] = d;
    j["inputs"] = in;
    j["outputs"] = outputs;
    j["elapsed_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream out(path());
    if (!out) throw InputError(path() + ": cannot write manifest");
    out << j.dump(2) << "\n";
  }
};

QualityScheme scheme_from_flags(const std::string& scheme, int qmax) {
  if (scheme == "continuous") return QualityScheme::make_continuous();
  if (scheme == "categorical") return QualityScheme::make_categorical(qmax);
  throw InputError("unknown scheme '" + scheme + "' (use continuous or categorical)");
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

json tau_to_json(const Tau& tau) {
  json j;
  j["theta"] = std::vector<double>(tau.fixed.theta.data(),
                                   tau.fixed.theta.data() + tau.fixed.theta.size());
  j["beta0"] = tau.fixed.beta0;
  j["log_sigma2"] = tau.log_sigma2;
  return j;
}

Tau tau_from_json(const json& j) {
  Tau tau;
  const auto theta = j.at("theta").get<std::vector<double>>();
  tau.fixed.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  tau.fixed.beta0 = j.at("beta0").get<double>();
  tau.log_sigma2 = j.at("log_sigma2").get<double>();
  return tau;
}

json scheme_to_json(const QualityScheme& scheme) {
  json j;
  j["kind"] = scheme.kind == QualityKind::continuous ? "continuous" : "categorical";
  if (scheme.kind == QualityKind::categorical) j["qmax"] = scheme.qmax;
  return j;
}

QualityScheme scheme_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "continuous") return QualityScheme::make_continuous();
  return QualityScheme::make_categorical(j.at("qmax").get<int>());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << content;
  if (!out) throw InputError(path + ": write failed");
}

// CSV outputs carry a comment naming the manifest that produced them.
void write_csv_output(const std::string& path, const std::string& content,
                      const std::string& manifest_path) {
  write_text_file(path, "# manifest: " + manifest_path + "\n" + content);
}

// ---- subcommand payloads ----------------------------------------------------

struct SummarizeArgs {
  std::string input;
  std::string scheme = "categorical";
  int qmax = 3;
  int bins = 10;
  std::string out_prefix;
};

int cmd_summarize(const SummarizeArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "summarize";
  manifest.argv = argv;
  manifest.inputs.push_back({a.input, file_digest(a.input)});
  const auto data = load_matches(a.input, scheme_from_flags(a.scheme, a.qmax));
  const auto y_table = summarize(data, SummaryStatistic::y_mean_sd, a.bins);
  const auto mm_table = summarize(data, SummaryStatistic::mm_mean_sd, a.bins);
  const auto ratio_table = summarize(data, SummaryStatistic::ratio_mean_sd, a.bins);
  std::cout << y_table.to_text("mean (sd) of y per quality pair");
  std::cout << mm_table.to_text("mean (sd) of m1*m2 per quality pair");
  std::cout << ratio_table.to_text("mean (sd) of y/(m1*m2) per quality pair");
  if (!a.out_prefix.empty()) {
    manifest.outputs = {a.out_prefix + "_y.csv", a.out_prefix + "_mm.csv",
                        a.out_prefix + "_ratio.csv"};
    write_csv_output(a.out_prefix + "_y.csv", y_table.to_csv(), manifest.path());
    write_csv_output(a.out_prefix + "_mm.csv", mm_table.to_csv(), manifest.path());
    write_csv_output(a.out_prefix + "_ratio.csv", ratio_table.to_csv(), manifest.path());
    manifest.write();
  }
  return 0;
}

struct FitArgs {
  std::string input;
  std::string scheme = "categorical";
  int qmax = 3;
  std::string init; // comma list theta...,beta0,log_sigma2
  std::string out = "model.json";
  int max_em_iters = 200;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "fit";
  manifest.argv = argv;
  manifest.inputs.push_back({a.input, file_digest(a.input)});
  manifest.outputs = {a.out};
  const QualityScheme scheme = scheme_from_flags(a.scheme, a.qmax);
  const auto data = load_matches(a.input, scheme);
  std::optional<Tau> init;
  if (!a.init.empty()) {
    const auto values = parse_list(a.init);
    init = Tau::from_stacked(
        Eigen::Map<const Eigen::VectorXd>(values.data(), values.size()), scheme);
  }
  EmControls controls;
  controls.max_em_iters = a.max_em_iters;
  const FitResult result = fit(data, init, controls);

  json j;
  j["artifact_version"] = kArtifactVersion;
  j["manifest"] = manifest.path();
  j["scheme"] = scheme_to_json(scheme);
  j["tau_hat"] = tau_to_json(result.tau_hat);
  std::vector<std::vector<double>> hess;
  for (int r = 0; r < result.tau_hessian.rows(); ++r) {
    hess.emplace_back(result.tau_hessian.row(r).data(),
                      result.tau_hessian.row(r).data() + result.tau_hessian.cols());
  }
  j["tau_hessian"] = hess;
  j["em_iterations"] = result.em_iterations;
  j["converged"] = result.converged;
  j["objective_trace"] = result.objective_trace;
  j["warnings"] = result.warnings;
  write_text_file(a.out, j.dump(2) + "\n");
  manifest.write();
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "fit: " << (result.converged ? "converged" : "not converged") << " after "
            << result.em_iterations << " EM iterations; model written to " << a.out << "\n";
  return 0;
}

FitResult load_model(const std::string& path, QualityScheme* scheme_out) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open model file");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InputError(path + ": invalid model JSON (" + e.what() + ")");
  }
  FitResult result;
  const QualityScheme scheme = scheme_from_json(j.at("scheme"));
  result.scheme = scheme;
  result.tau_hat = tau_from_json(j.at("tau_hat"));
  const auto hess = j.at("tau_hessian").get<std::vector<std::vector<double>>>();
  result.tau_hessian.resize(hess.size(), hess.size());
  for (std::size_t r = 0; r < hess.size(); ++r) {
    if (hess[r].size() != hess.size()) throw InputError(path + ": curvature matrix not square");
    for (std::size_t c = 0; c < hess[r].size(); ++c) {
      result.tau_hessian(static_cast<int>(r), static_cast<int>(c)) = hess[r][c];
    }
  }
  result.converged = j.value("converged", true);
  result.em_iterations = j.value("em_iterations", 0);
  if (scheme_out) *scheme_out = scheme;
  return result;
}

struct PosteriorArgs {
  std::string model = "model.json";
  std::string input;
  int h = 2000;
  int r = 200;
  std::uint64_t seed = 1;
  std::string out = "samples.csv";
};

int cmd_posterior(const PosteriorArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "posterior";
  manifest.argv = argv;
  manifest.seed = a.seed;
  manifest.has_seed = true;
  manifest.inputs.push_back({a.model, file_digest(a.model)});
  manifest.inputs.push_back({a.input, file_digest(a.input)});
  manifest.outputs = {a.out};
  QualityScheme scheme;
  const FitResult fr = load_model(a.model, &scheme);
  const auto data = load_matches(a.input, scheme);
  std::vector<std::string> warnings;
  const ProposalSpec proposal = build_proposal(fr, &warnings);
  PosteriorSamples samples = importance_resample(data, proposal, a.h, a.r, a.seed);
  for (const auto& w : warnings) samples.warnings.insert(samples.warnings.begin(), w);
  save_samples_csv(samples, a.out, manifest.path());
  manifest.write();
  for (const auto& w : samples.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("posterior: H=%d R=%d ESS=%.1f (%.1f%% of H); samples written to %s\n", a.h, a.r,
              samples.ess, 100.0 * samples.ess / a.h, a.out.c_str());
  return 0;
}

struct PrcArgs {
  std::string samples;
  long w = 12;
  int m1 = 38;
  int m2 = 38;
  double q1 = 3;
  double q2 = 3;
  double alpha = 0.001;
  long mc = 100000;
  std::uint64_t seed = 1;
  bool grid = false;
  std::string q_values;
  std::string out;
};

int cmd_prc(const PrcArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "prc";
  manifest.argv = argv;
  manifest.seed = a.seed;
  manifest.has_seed = true;
  manifest.inputs.push_back({a.samples, file_digest(a.samples)});
  const PosteriorSamples samples = load_samples_csv(a.samples);
  if (a.grid) {
    std::vector<double> qs;
    if (!a.q_values.empty()) {
      qs = parse_list(a.q_values);
    } else if (samples.scheme.kind == QualityKind::categorical) {
      for (int q = 1; q <= samples.scheme.qmax; ++q) qs.push_back(q);
    } else {
      throw InputError("--grid with a continuous scheme needs --q-values");
    }
    const PrcGrid grid = prc_grid(a.w, a.m1, a.m2, qs, samples, a.mc, a.alpha, a.seed);
    std::ostringstream title;
    title << "PRC(" << a.w << " | " << a.m1 << "," << a.m2 << "), mean ["
          << 100.0 * (1.0 - a.alpha) << "% CI]";
    std::cout << grid.to_text(title.str());
    if (!a.out.empty()) {
      manifest.outputs = {a.out};
      write_csv_output(a.out, grid.to_csv(), manifest.path());
      manifest.write();
    }
    return 0;
  }
  PrcQuery query;
  query.w = a.w;
  query.m1 = a.m1;
  query.m2 = a.m2;
  query.q1 = a.q1;
  query.q2 = a.q2;
  query.scheme = samples.scheme;
  const PrcReport r = prc_posterior(query, samples, a.mc, a.alpha, a.seed);
  std::printf("PRC(%ld | %d,%d; q=%g,%g) = %.6g  sd %.3g  %.4g%% CI [%.6g, %.6g]\n", a.w, a.m1,
              a.m2, a.q1, a.q2, r.mean, r.sd, 100.0 * (1.0 - a.alpha), r.ci_low, r.ci_high);
  if (!a.out.empty()) {
    std::ostringstream os;
    os << "w,m1,m2,q1,q2,mean,sd,ci_low,ci_high,alpha,mc_draws,r_samples\n"
       << a.w << ',' << a.m1 << ',' << a.m2 << ',' << a.q1 << ',' << a.q2 << ','
       << format_double(r.mean) << ',' << format_double(r.sd) << ',' << format_double(r.ci_low)
       << ',' << format_double(r.ci_high) << ',' << a.alpha << ',' << a.mc << ','
       << r.r_samples << "\n";
    manifest.outputs = {a.out};
    write_csv_output(a.out, os.str(), manifest.path());
    manifest.write();
  }
  return 0;
}

struct DesignArgs {
  std::string samples;
  int m1 = 35;
  int m2 = 49;
  double target = 0.01;
  long mc = 20000;
  std::uint64_t seed = 1;
  std::string q_values;
  std::string out;
};

int cmd_design_w(const DesignArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "design-w";
  manifest.argv = argv;
  manifest.seed = a.seed;
  manifest.has_seed = true;
  manifest.inputs.push_back({a.samples, file_digest(a.samples)});
  const PosteriorSamples samples = load_samples_csv(a.samples);
  std::vector<double> qs;
  if (!a.q_values.empty()) {
    qs = parse_list(a.q_values);
  } else if (samples.scheme.kind == QualityKind::categorical) {
    for (int q = 1; q <= samples.scheme.qmax; ++q) qs.push_back(q);
  } else {
    throw InputError("design-w with a continuous scheme needs --q-values");
  }
  const DesignGrid grid = design_grid(a.m1, a.m2, qs, samples, a.target, a.mc, a.seed);
  std::ostringstream title;
  title << "smallest w with PRC(w | " << a.m1 << "," << a.m2 << ") <= " << a.target
        << " ('*' = none exists)";
  std::cout << grid.to_text(title.str());
  if (!a.out.empty()) {
    manifest.outputs = {a.out};
    write_csv_output(a.out, grid.to_csv(), manifest.path());
    manifest.write();
  }
  return 0;
}

struct MatchArgs {
  std::string file_a;
  std::string file_b;
  double r0 = 15.0;
  double u0 = 0.2618;
  int finger_a = -1, impr_a = -1, finger_b = -1, impr_b = -1;
};

int cmd_match(const MatchArgs& a, const std::vector<std::string>& argv) {
  (void)argv;
  auto pick = [](const std::string& path, int finger, int impr) {
    auto sets = load_minutiae(path);
    if (finger >= 0 && impr >= 0) {
      auto it = sets.find({finger, impr});
      if (it == sets.end()) {
        throw InputError(path + ": no impression (" + std::to_string(finger) + "," +
                         std::to_string(impr) + ")");
      }
      return it->second;
    }
    if (sets.size() != 1) {
      throw InputError(path + " holds " + std::to_string(sets.size()) +
                       " impressions; select one with --finger-a/--impr-a (or -b)");
    }
    return sets.begin()->second;
  };
  const MinutiaSet set_a = pick(a.file_a, a.finger_a, a.impr_a);
  const MinutiaSet set_b = pick(a.file_b, a.finger_b, a.impr_b);
  MatchConfig cfg;
  cfg.r0 = a.r0;
  cfg.u0 = a.u0;
  const int w = count_matches(set_a, set_b, cfg);
  std::printf("w = %d  (m1 = %zu, m2 = %zu, r0 = %g, u0 = %g)\n", w, set_a.size(), set_b.size(),
              a.r0, a.u0);
  return 0;
}

struct SimArgs {
  std::string scheme = "categorical";
  int qmax = 3;
  int f = 50;
  int l = 4;
  std::uint64_t seed = 1;
  std::string theta = "-3.4857,-0.7429,-1.6144";
  double beta0 = -2.7297;
  double log_sigma2 = -4.9537;
  int m = 38;
  std::string m_by_label;
  std::string q_probs;
  double q_lo = 0.35, q_hi = 0.9;
  std::string out = "matches.csv";
  std::string truth = "truth.csv";
};

SimConfig sim_config_from_args(const SimArgs& a) {
  SimConfig cfg;
  cfg.scheme = scheme_from_flags(a.scheme, a.qmax);
  cfg.f = a.f;
  cfg.l = a.l;
  cfg.seed = a.seed;
  const auto theta = parse_list(a.theta);
  cfg.tau_true.fixed.theta =
      Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  cfg.tau_true.fixed.beta0 = a.beta0;
  cfg.tau_true.log_sigma2 = a.log_sigma2;
  if (cfg.tau_true.fixed.dim() != cfg.scheme.fixed_dim()) {
    throw InputError("--theta length does not match the scheme");
  }
  if (cfg.scheme.kind == QualityKind::categorical) {
    if (!a.q_probs.empty()) {
      cfg.quality.kind = QualityAssignment::Kind::label_probs;
      cfg.quality.probs = parse_list(a.q_probs);
    } else {
      cfg.quality.kind = QualityAssignment::Kind::uniform_labels;
    }
  } else {
    cfg.quality.kind = QualityAssignment::Kind::uniform_continuous;
    cfg.quality.lo = a.q_lo;
    cfg.quality.hi = a.q_hi;
  }
  if (!a.m_by_label.empty()) {
    cfg.m_assign.kind = MAssignment::Kind::per_label_mean;
    cfg.m_assign.mean_by_label = parse_list(a.m_by_label);
  } else {
    cfg.m_assign.kind = MAssignment::Kind::fixed;
    cfg.m_assign.fixed_m = a.m;
  }
  return cfg;
}

int cmd_simulate(const SimArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "simulate";
  manifest.argv = argv;
  manifest.seed = a.seed;
  manifest.has_seed = true;
  manifest.outputs = {a.out, a.truth};
  const SimConfig cfg = sim_config_from_args(a);
  const SimOutput sim = simulate_dataset(cfg);
  save_matches(sim.data, a.out,
               {"simulated dataset (seed " + std::to_string(a.seed) + ")",
                "manifest: " + manifest.path()});
  save_truth_csv(sim.truth, cfg.scheme, a.truth, {"manifest: " + manifest.path()});
  manifest.write();
  std::printf("simulated %zu impostor pairs over F=%d fingers, L=%d impressions -> %s\n",
              sim.data.pairs.size(), a.f, a.l, a.out.c_str());
  return 0;
}

struct ValidateArgs {
  SimArgs sim;
  int runs = 50;
  double alpha = 0.001;
  int h = 2000;
  int r = 200;
  long prc_mc = 20000;
  long truth_mc = 1000000;
  std::vector<std::string> queries; // "w,m1,m2,q1,q2"
  bool init_default = false;
  std::string out = "coverage.csv";
};

int cmd_validate(const ValidateArgs& a, const std::vector<std::string>& argv) {
  Manifest manifest;
  manifest.command = "validate";
  manifest.argv = argv;
  manifest.seed = a.sim.seed;
  manifest.has_seed = true;
  manifest.outputs = {a.out};
  const SimConfig cfg = sim_config_from_args(a.sim);
  std::vector<PrcQuery> queries;
  for (const std::string& q : a.queries) {
    const auto parts = parse_list(q);
    if (parts.size() != 5) throw InputError("--prc-query needs w,m1,m2,q1,q2");
    PrcQuery query;
    query.w = static_cast<long>(parts[0]);
    query.m1 = static_cast<int>(parts[1]);
    query.m2 = static_cast<int>(parts[2]);
    query.q1 = parts[3];
    query.q2 = parts[4];
    query.scheme = cfg.scheme;
    queries.push_back(query);
  }
  const CoverageReport report =
      run_coverage(cfg, a.runs, a.alpha, queries, {}, a.h, a.r, a.prc_mc, a.truth_mc,
                   !a.init_default);
  std::cout << report.to_text();
  write_csv_output(a.out, report.to_csv(), manifest.path());
  manifest.write();
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"GLMM-based fingerprint individuality: fitting, posterior sampling, and PRC "
               "reports"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker-thread cap (0 = machine parallelism)")
      ->envname("FPGLMM_THREADS");

  SummarizeArgs sa;
  auto* sum = app.add_subcommand("summarize", "empirical quality-pair tables from a match file");
  sum->add_option("--input", sa.input, "match-count CSV")->required();
  sum->add_option("--scheme", sa.scheme, "continuous | categorical");
  sum->add_option("--qmax", sa.qmax, "largest categorical label");
  sum->add_option("--bins", sa.bins, "bins over [0,1] for continuous quality");
  sum->add_option("--out-prefix", sa.out_prefix, "write <prefix>_{y,mm,ratio}.csv");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "maximum-likelihood fit of the GLMM by EM");
  fitc->add_option("--input", fa.input, "match-count CSV")->required();
  fitc->add_option("--scheme", fa.scheme, "continuous | categorical");
  fitc->add_option("--qmax", fa.qmax, "largest categorical label");
  fitc->add_option("--init", fa.init, "start point: theta...,beta0,log_sigma2");
  fitc->add_option("--max-em-iters", fa.max_em_iters, "EM iteration cap");
  fitc->add_option("--out", fa.out, "model JSON path");

  PosteriorArgs pa;
  auto* post = app.add_subcommand("posterior", "importance-resampled posterior draws of tau");
  post->add_option("--model", pa.model, "model JSON from fit")->required();
  post->add_option("--input", pa.input, "match-count CSV")->required();
  post->add_option("--H", pa.h, "proposal draws");
  post->add_option("--R", pa.r, "resampled posterior draws");
  post->add_option("--seed", pa.seed, "RNG seed");
  post->add_option("--out", pa.out, "samples CSV path");

  PrcArgs pra;
  auto* prc = app.add_subcommand("prc", "posterior PRC report for one query or a quality grid");
  prc->add_option("--samples", pra.samples, "posterior samples CSV")->required();
  prc->add_option("--w", pra.w, "observed match count");
  prc->add_option("--m1", pra.m1, "minutiae in print 1");
  prc->add_option("--m2", pra.m2, "minutiae in print 2");
  prc->add_option("--q1", pra.q1, "quality of print 1");
  prc->add_option("--q2", pra.q2, "quality of print 2");
  prc->add_option("--alpha", pra.alpha, "credible level is 1-alpha");
  prc->add_option("--mc", pra.mc, "Monte Carlo draws per posterior sample");
  prc->add_option("--seed", pra.seed, "RNG seed");
  prc->add_flag("--grid", pra.grid, "emit the full quality-pair matrix");
  prc->add_option("--q-values", pra.q_values, "grid quality values (comma list)");
  prc->add_option("--out", pra.out, "write the report as CSV");

  DesignArgs da;
  auto* design = app.add_subcommand("design-w", "smallest w meeting a PRC target per quality pair");
  design->add_option("--samples", da.samples, "posterior samples CSV")->required();
  design->add_option("--m1", da.m1, "minutiae in print 1");
  design->add_option("--m2", da.m2, "minutiae in print 2");
  design->add_option("--target", da.target, "PRC target in (0,1]");
  design->add_option("--mc", da.mc, "Monte Carlo draws per posterior sample");
  design->add_option("--seed", da.seed, "RNG seed");
  design->add_option("--q-values", da.q_values, "grid quality values (comma list)");
  design->add_option("--out", da.out, "write the table as CSV");

  MatchArgs ma;
  auto* match = app.add_subcommand("match", "count minutia correspondences between two prints");
  match->add_option("--a", ma.file_a, "minutia CSV for print 1")->required();
  match->add_option("--b", ma.file_b, "minutia CSV for print 2")->required();
  match->add_option("--r0", ma.r0, "location threshold (pixels)");
  match->add_option("--u0", ma.u0, "direction threshold (radians)");
  match->add_option("--finger-a", ma.finger_a, "finger id to select in --a");
  match->add_option("--impr-a", ma.impr_a, "impression id to select in --a");
  match->add_option("--finger-b", ma.finger_b, "finger id to select in --b");
  match->add_option("--impr-b", ma.impr_b, "impression id to select in --b");

  SimArgs sia;
  auto* sim = app.add_subcommand("simulate", "draw a synthetic match-count dataset from the GLMM");
  sim->add_option("--scheme", sia.scheme, "continuous | categorical");
  sim->add_option("--qmax", sia.qmax, "largest categorical label");
  sim->add_option("--f", sia.f, "fingers");
  sim->add_option("--l", sia.l, "impressions per finger");
  sim->add_option("--seed", sia.seed, "RNG seed");
  sim->add_option("--theta", sia.theta, "theta components (comma list)");
  sim->add_option("--beta0", sia.beta0, "genuine-pairing intercept");
  sim->add_option("--log-sigma2", sia.log_sigma2, "log variance of the finger effects");
  sim->add_option("--m", sia.m, "fixed minutia count per impression");
  sim->add_option("--m-by-label", sia.m_by_label, "mean minutia count per label (comma list)");
  sim->add_option("--q-probs", sia.q_probs, "label probabilities (comma list)");
  sim->add_option("--q-lo", sia.q_lo, "continuous quality lower bound");
  sim->add_option("--q-hi", sia.q_hi, "continuous quality upper bound");
  sim->add_option("--out", sia.out, "match-count CSV path");
  sim->add_option("--truth", sia.truth, "hidden-truth CSV path");

  ValidateArgs va;
  auto* val = app.add_subcommand("validate", "simulation-based coverage study of the pipeline");
  val->add_option("--scheme", va.sim.scheme, "continuous | categorical");
  val->add_option("--qmax", va.sim.qmax, "largest categorical label");
  val->add_option("--f", va.sim.f, "fingers");
  val->add_option("--l", va.sim.l, "impressions per finger");
  val->add_option("--seed", va.sim.seed, "RNG seed");
  val->add_option("--theta", va.sim.theta, "true theta components");
  val->add_option("--beta0", va.sim.beta0, "true intercept");
  val->add_option("--log-sigma2", va.sim.log_sigma2, "true log variance");
  val->add_option("--m", va.sim.m, "fixed minutia count");
  val->add_option("--m-by-label", va.sim.m_by_label, "mean minutia count per label");
  val->add_option("--q-probs", va.sim.q_probs, "label probabilities");
  val->add_option("--runs", va.runs, "simulation replicates");
  val->add_option("--alpha", va.alpha, "credible level is 1-alpha");
  val->add_option("--H", va.h, "proposal draws per run");
  val->add_option("--R", va.r, "posterior draws per run");
  val->add_option("--prc-mc", va.prc_mc, "MC draws per posterior sample for PRC intervals");
  val->add_option("--truth-mc", va.truth_mc, "MC draws for the true PRC");
  val->add_option("--prc-query", va.queries, "PRC query w,m1,m2,q1,q2 (repeatable)");
  val->add_flag("--init-default", va.init_default,
                "start re-fits from the moment init instead of the generating truth");
  val->add_option("--out", va.out, "coverage CSV path");

  std::vector<std::string> argv_copy(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) set_max_threads(threads);
  try {
    if (*sum) return cmd_summarize(sa, argv_copy);
    if (*fitc) return cmd_fit(fa, argv_copy);
    if (*post) return cmd_posterior(pa, argv_copy);
    if (*prc) return cmd_prc(pra, argv_copy);
    if (*design) return cmd_design_w(da, argv_copy);
    if (*match) return cmd_match(ma, argv_copy);
    if (*sim) return cmd_simulate(sia, argv_copy);
    if (*val) return cmd_validate(va, argv_copy);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
