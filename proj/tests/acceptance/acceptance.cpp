// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion.
//
//   acceptance [--only N] [--work-dir DIR]
//
// Exit status: 0 when every selected criterion passes, 1 on any failure, 77
// when every selected criterion was skipped (missing user-supplied data).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "onshap/artifacts.hpp"
#include "onshap/experiments.hpp"
#include "onshap/generators.hpp"
#include "onshap/metrics.hpp"
#include "onshap/model_io.hpp"
#include "onshap/shapley.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace onshap;
using onshap::testing::TableGame;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome = Outcome::pass;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && outcome != Outcome::skip) outcome = Outcome::fail;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [violated]");
  }
  void skip(const std::string& why) {
    outcome = Outcome::skip;
    detail << why;
  }
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

std::optional<fs::path> env_path(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return fs::path(v);
}

// ---------------------------------------------------------------- 1

void axioms(Verdict& v, const fs::path&) {
  Rng rng(101);
  double worst_axiom = 0.0, worst_oracle = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const TableGame g = onshap::testing::random_game(n, rng);
    const Attribution a = shapley_exact(g.vf());
    const std::vector<double> oracle = onshap::testing::brute_force_shapley(g);
    for (std::size_t i = 0; i < n; ++i) worst_oracle = std::max(worst_oracle, std::abs(a.values[i] - oracle[i]));
    worst_axiom = std::max(worst_axiom, std::abs(a.total() - (g.values.back() - g.values.front())));

    const std::size_t i = trial % n, j = (trial + 3) % n;
    const TableGame d = onshap::testing::random_game_with_dummy(n, i, rng);
    worst_axiom = std::max(worst_axiom, std::abs(shapley_exact(d.vf()).values[i]));
    if (i != j) {
      const Attribution s = shapley_exact(onshap::testing::random_game_with_symmetry(n, i, j, rng).vf());
      worst_axiom = std::max(worst_axiom, std::abs(s.values[i] - s.values[j]));
    }
    const TableGame h = onshap::testing::random_game(n, rng);
    TableGame mix{n, g.values};
    for (std::size_t k = 0; k < mix.values.size(); ++k) mix.values[k] = 1.7 * g.values[k] + -0.4 * h.values[k];
    const Attribution am = shapley_exact(mix.vf()), ah = shapley_exact(h.vf());
    for (std::size_t k = 0; k < n; ++k) {
      worst_axiom = std::max(worst_axiom, std::abs(am.values[k] - (1.7 * a.values[k] - 0.4 * ah.values[k])));
    }
  }
  v.require(worst_axiom <= 1e-9, "200 games n<=8, worst axiom violation " + num(worst_axiom) + " (tol 1e-9)");
  v.require(worst_oracle <= 1e-12, "worst deviation from permutation oracle " + num(worst_oracle) + " (tol 1e-12)");
}

// ---------------------------------------------------------------- 2

void mc_consistency(Verdict& v, const fs::path&) {
  Rng rng(202);
  const std::vector<std::size_t> budgets = {1000, 10000, 100000};
  std::vector<double> sq_error(budgets.size(), 0.0);
  std::size_t outside = 0, checked = 0;
  for (int game = 0; game < 20; ++game) {
    const TableGame g = onshap::testing::random_game(6, rng);
    const Attribution exact = shapley_exact(g.vf());
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      McOptions mc;
      mc.n_samples = budgets[b];
      mc.seed = derive_seed(2, static_cast<std::uint64_t>(game), b);
      const Attribution a = shapley_mc(g.vf(), mc);
      for (std::size_t i = 0; i < 6; ++i) {
        const double err = a.values[i] - exact.values[i];
        sq_error[b] += err * err / 120.0;
        if (budgets[b] == 100000) {
          ++checked;
          outside += std::abs(err) > 4 * a.std_errors[i];
        }
      }
    }
  }
  v.require(outside == 0, std::to_string(checked - outside) + "/" + std::to_string(checked) +
                              " features within 4 std errors at 1e5 permutations");
  // RMS error against N should fall with slope -1/2 on log-log axes.
  const double slope = (std::log(std::sqrt(sq_error[2])) - std::log(std::sqrt(sq_error[0]))) / std::log(100.0);
  const double r1 = std::sqrt(sq_error[0] / sq_error[1]), r2 = std::sqrt(sq_error[1] / sq_error[2]);
  v.require(slope > -0.65 && slope < -0.35, "log-log slope of RMS error " + num(slope) + " (expect -0.5)");
  v.require(r1 > 2.0 && r1 < 5.0 && r2 > 2.0 && r2 < 5.0,
            "RMS error ratios per decade " + num(r1) + ", " + num(r2) + " (expect ~3.16)");
}

// ---------------------------------------------------------------- 3

void outlier_error_rates(Verdict& v, const fs::path& work) {
  StageRunner stages(work / "outlier_error_rates");
  const OutlierStudyResult r = run_outlier_study(stages, OutlierStudyConfig{});
  bool all_accurate = true, on_below_half = true;
  std::ostringstream rates;
  for (const auto& s : r.per_sigma) {
    all_accurate = all_accurate && s.forest_accuracy == 1.0;
    on_below_half = on_below_half && (s.on_error_rate < 0.5 * s.off_error_rate || (s.off_error_rate == 0.0 && s.on_error_rate == 0.0));
    rates << " s=" << s.sigma << ":" << num(s.off_error_rate) << "/" << num(s.on_error_rate) << "/acc" << num(s.forest_accuracy);
  }
  const auto& lo = r.per_sigma.front();
  const auto& hi = r.per_sigma.back();
  v.require(all_accurate, "isolation forest accuracy 1 at every sigma;" + rates.str() + " (off/on/accuracy)");
  v.require(lo.off_error_rate >= 0.15 && lo.off_error_rate <= 0.45,
            "off-manifold error at sigma 0.01 = " + num(lo.off_error_rate) + " in [0.15, 0.45]");
  v.require(hi.off_error_rate >= 0.5 && hi.off_error_rate <= 0.85,
            "off-manifold error at sigma 0.15 = " + num(hi.off_error_rate) + " in [0.5, 0.85]");
  v.require(on_below_half, "on-manifold error below half the off-manifold error at every sigma");
}

// ---------------------------------------------------------------- 4

void two_feature(Verdict& v, const fs::path& work) {
  StageRunner stages(work / "two_feature_globals");
  const TwoFeatureResult r = run_two_feature_globals(stages, TwoFeatureConfig{});
  const auto z = [](const Attribution& a, std::size_t i) { return a.values[i] / a.std_errors[i]; };
  v.require(z(r.off_manifold, 1) <= -3.0, "off-manifold phi(x1) = " + num(r.off_manifold.values[1]) + " (" +
                                              num(z(r.off_manifold, 1)) + " std errors)");
  v.require(z(r.on_manifold, 0) >= 3.0 && z(r.on_manifold, 1) >= 3.0,
            "on-manifold phi = " + num(r.on_manifold.values[0]) + ", " + num(r.on_manifold.values[1]) + " (" +
                num(z(r.on_manifold, 0)) + ", " + num(z(r.on_manifold, 1)) + " std errors)");
}

// ---------------------------------------------------------------- 5, 6

DataSource drug_source() {
  DataSource s{"drug", std::nullopt, std::nullopt, false, 0, 0};
  s.path = env_path("DRUG_CSV");
  return s;
}

void drug_mse(Verdict& v, const fs::path& work) {
  const DataSource source = drug_source();
  if (!source.path) {
    v.skip("needs the UCI drug consumption file: set DRUG_CSV=/path/to/drug_consumption.data");
    return;
  }
  MseTableConfig cfg;
  cfg.datasets = {source};
  cfg.pipeline_overrides = {{"drug", {{"grid_search", true}}}};
  StageRunner stages(work / "drug_mse");
  const MseTableResult r = run_mse_table(stages, cfg);
  std::map<std::string, MseReport> rows;
  for (const auto& row : r.rows) rows[row.method_id] = row;
  const MseReport off = rows.at("off-manifold"), emp = rows.at("empirical"), sup = rows.at("supervised"),
                  uns = rows.at("unsupervised");
  v.require(std::abs(off.mse - 0.0634) <= 0.005, "off-manifold " + num(off.mse) + " (0.0634 +- 0.005)");
  v.require(std::abs(emp.mse - 0.0436) <= 0.003, "empirical " + num(emp.mse) + " (0.0436 +- 0.003)");
  v.require(sup.mse <= 0.050 && sup.mse >= emp.mse - 0.002, "supervised " + num(sup.mse) + " (<= 0.050, >= empirical - 0.002)");
  v.require(uns.mse <= 0.060, "unsupervised " + num(uns.mse) + " (<= 0.060)");
  const auto leq = [](const MseReport& a, const MseReport& b) {
    return a.mse <= b.mse + std::hypot(a.std_error, b.std_error);
  };
  v.require(leq(emp, sup) && leq(sup, uns) && leq(uns, off),
            "ordering empirical <= supervised <= unsupervised <= off-manifold within combined std errors");
}

void drug_agreement(Verdict& v, const fs::path& work) {
  const DataSource source = drug_source();
  if (!source.path) {
    v.skip("needs the UCI drug consumption file: set DRUG_CSV=/path/to/drug_consumption.data");
    return;
  }
  DrugConfig cfg;
  cfg.source = source;
  StageRunner stages(work / "drug");
  const DrugRetrainingResult retrain = run_drug_retraining(stages, cfg);
  const DrugValidationResult globals = run_drug_validation(stages, cfg);
  const auto rho = [](const Attribution& a, const Attribution& b) { return spearman(a.values, b.values); };
  const double r_ret = rho(retrain.empirical, retrain.retraining);
  v.require(r_ret >= 0.8, "rho(empirical, retraining) = " + num(r_ret));
  const double r_es = rho(globals.empirical, globals.supervised), r_eu = rho(globals.empirical, globals.unsupervised),
               r_su = rho(globals.supervised, globals.unsupervised);
  v.require(r_es >= 0.8 && r_eu >= 0.8 && r_su >= 0.8,
            "pairwise rho empirical/supervised " + num(r_es) + ", empirical/unsupervised " + num(r_eu) +
                ", supervised/unsupervised " + num(r_su));
}

// ---------------------------------------------------------------- 7

void suppression(Verdict& v, const fs::path& work) {
  CensusConfig cfg;
  if (auto path = env_path("CENSUS_CSV")) cfg.source.path = path;
  StageRunner stages(work / "census_suppression");
  const CensusResult r = run_census_suppression(stages, cfg);
  const std::size_t s = r.sensitive_index;
  const double off_before = std::abs(r.original_off.values[s]), off_after = std::abs(r.suppressed_off.values[s]);
  const double on_before = r.original_on.values[s], on_after = r.suppressed_on.values[s];
  v.require(r.agreement >= 0.95, "data " + r.data_provenance + "; prediction agreement " + num(r.agreement));
  v.require(off_after <= 0.2 * off_before,
            "off-manifold |phi(sex)| " + num(off_before) + " -> " + num(off_after) + " (shrink >= 80%)");
  v.require(std::abs(on_after - on_before) < 0.5 * std::abs(on_before),
            "on-manifold phi(sex) " + num(on_before) + " -> " + num(on_after) + " (change < 50%)");
}

// ---------------------------------------------------------------- 8

MnistConfig mnist_config() {
  MnistConfig cfg;
  const auto images = env_path("MNIST_IMAGES"), labels = env_path("MNIST_LABELS");
  if (images && labels) {
    cfg.source.path = images;
    cfg.source.labels_path = labels;
  } else {
    const fs::path data = ONSHAP_TEST_DATA;
    cfg.source.path = data / "digits-images-idx3-ubyte";
    cfg.source.labels_path = data / "digits-labels-idx1-ubyte";
    // The preset budget is sized for 60k images; ~1.2k train rows need more epochs.
    cfg.pipeline.surrogate.train.learning_rate = 1e-3;
    cfg.pipeline.surrogate.train.max_epochs = 1500;
    cfg.pipeline.surrogate.train.patience = 100;
  }
  return cfg;
}

void mnist(Verdict& v, const fs::path& work) {
  const MnistConfig cfg = mnist_config();
  StageRunner stages(work / "mnist");
  const MnistLocalResult local = run_mnist_local(stages, cfg);
  std::size_t sum_ok = 0, concentrated = 0;
  for (const auto& d : local.digits) {
    sum_ok += d.off_sum_rule.within(3.0) + d.on_sum_rule.within(3.0);
    concentrated += d.on_gini > d.off_gini;
  }
  const std::size_t n = local.digits.size();
  v.require(n == 10, "images " + std::to_string(local.image_rows) + "x" + std::to_string(local.image_cols) + " (" +
                         cfg.source.path->filename().string() + "), model accuracy " + num(local.test_accuracy) +
                         ", " + std::to_string(n) + " digits");
  v.require(sum_ok == 2 * n, std::to_string(sum_ok) + "/" + std::to_string(2 * n) +
                                 " local attributions satisfy the sum rule within 3 std errors");
  v.require(concentrated >= 8, "on-manifold Gini above off-manifold for " + std::to_string(concentrated) + "/10");
  const MnistSummandResult summand = run_mnist_summand(stages, cfg);
  v.require(summand.on_small_mass > summand.off_small_mass, "mass at |S| < n/2: on " + num(summand.on_small_mass) +
                                                                 " vs off " + num(summand.off_small_mass));
}

// ---------------------------------------------------------------- 9

double worst_net_gradient_error(DenseNet net, const Matrix& x, const Matrix& t, OutputLoss loss) {
  const GradientResult g = compute_gradients(net, x, t, loss);
  double worst = 0.0;
  for (std::size_t k = 0; k < net.parameter_count(); ++k) {
    double& p = net.parameter(k);
    const double saved = p;
    p = saved + 1e-6;
    const double up = loss(net.forward(x), t).mean();
    p = saved - 1e-6;
    const double down = loss(net.forward(x), t).mean();
    p = saved;
    const double numeric = (up - down) / 2e-6, analytic = DenseNet::gradient_at(g.grads, k);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-4, std::abs(numeric) + std::abs(analytic)));
  }
  return worst;
}

double worst_elbo_gradient_error(Imputer imp, const Matrix& x, const Matrix& masked, const Matrix& eps, Rng& rng) {
  // Zero-initialised biases can leave a ReLU exactly on its kink; move off it.
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (DenseNet* net : imp.networks())
    for (std::size_t k = 0; k < net->parameter_count(); ++k) net->parameter(k) += jitter(rng);
  std::vector<Gradients> grads;
  for (DenseNet* net : imp.networks()) grads.push_back(net->zero_gradients());
  imp.elbo(x, masked, eps, &grads);
  double worst = 0.0;
  const auto nets = imp.networks();
  for (std::size_t n = 0; n < nets.size(); ++n) {
    for (std::size_t k = 0; k < nets[n]->parameter_count(); ++k) {
      double& p = nets[n]->parameter(k);
      const double saved = p;
      p = saved + 1e-6;
      const double up = imp.elbo(x, masked, eps).mean_loss();
      p = saved - 1e-6;
      const double down = imp.elbo(x, masked, eps).mean_loss();
      p = saved;
      const double numeric = (up - down) / 2e-6, analytic = DenseNet::gradient_at(grads[n], k);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-4, std::abs(numeric) + std::abs(analytic)));
    }
  }
  return worst;
}

void hygiene(Verdict& v, const fs::path& work) {
  Rng rng(909);
  // Gradient checks.
  const Matrix x = onshap::testing::random_matrix(6, 5, rng);
  Matrix onehot = Matrix::Zero(6, 3);
  for (Eigen::Index r = 0; r < 6; ++r) onehot(r, r % 3) = 1.0;
  double worst_net = worst_net_gradient_error(DenseNet({5, 8, 6, 3}, Activation::softmax, 1), x, onehot, cross_entropy_loss);
  worst_net = std::max(worst_net, worst_net_gradient_error(DenseNet({5, 7, 3}, Activation::identity, 2), x,
                                                           onshap::testing::random_matrix(6, 3, rng), squared_error_loss));
  worst_net = std::max(worst_net, worst_net_gradient_error(DenseNet({5, 4, 3}, Activation::sigmoid, 3), x,
                                                           onshap::testing::random_matrix(6, 3, rng, 0, 1), squared_error_loss));
  v.require(worst_net < 1e-5, "dense net gradient check worst relative error " + num(worst_net) + " (tol 1e-5)");

  std::vector<ColumnSchema> schema(4);
  schema[0] = {"b", FeatureKind::binary, 2, {}, 0.0, 1.0};
  schema[1] = {"c", FeatureKind::categorical, 3, {}, 0.0, 1.0};
  schema[2] = {"x", FeatureKind::continuous, 0, {}, 0.0, 1.0};
  schema[3] = {"y", FeatureKind::continuous, 0, {}, 0.0, 1.0};
  Matrix rows(5, 4);
  rows << 0, 2, 0.3, 0.1, 1, 0, 0.9, 0.5, 1, 1, 0.2, 0.7, 0, 0, 0.5, 0.5, 1, 2, 0.1, 0.0;
  std::vector<Coalition> coalitions;
  for (std::uint64_t b : {0u, 1u, 6u, 11u, 15u}) coalitions.push_back(Coalition::from_bits(4, b));
  double worst_elbo = 0.0;
  for (std::size_t modes : {1, 2}) {
    ImputerHyper h;
    h.hidden = 5;
    h.latent_dim = 2;
    h.n_modes = modes;
    const Matrix eps = onshap::testing::random_matrix(5, 2, rng);
    worst_elbo = std::max(worst_elbo, worst_elbo_gradient_error(Imputer(schema, h, modes), rows,
                                                                masked_rows(rows, coalitions), eps, rng));
  }
  v.require(worst_elbo < 1e-4, "imputer ELBO gradient check worst relative error " + num(worst_elbo) + " (tol 1e-4)");

  // Serialisation round trips.
  const Dataset data = gen_census_like(400, 3);
  bool lossless = true;
  ForestConfig fc;
  fc.n_trees = 5;
  const RandomForest forest = fit_random_forest(data.features, *data.labels, 2, fc, 1);
  MlpConfig mc;
  mc.hidden = {8};
  mc.train.max_epochs = 3;
  const MlpFit mlp = fit_mlp(data.features, *data.labels, 2, data.features, *data.labels, mc);
  IsolationForest iso = fit_isolation_forest(data.features, {10, 64, 2});
  iso.calibrate_offset(data.features, 0.05);
  for (const Model* m : std::initializer_list<const Model*>{&forest, &mlp.model, &iso}) {
    const ModelPtr back = model_from_json(nlohmann::json::parse(m->to_json().dump()));
    lossless = lossless && back->to_json() == m->to_json() && back->predict(data.features) == m->predict(data.features);
  }
  const Imputer imp(data.schema, ImputerHyper{}, 4);
  lossless = lossless && Imputer::from_json(nlohmann::json::parse(imp.to_json().dump())).to_json() == imp.to_json();
  save_dataset(data, work / "hygiene" / "data.json");
  lossless = lossless && load_dataset(work / "hygiene" / "data.json").fingerprint() == data.fingerprint();
  const TableGame g = onshap::testing::random_game(5, rng);
  McOptions opts;
  opts.n_samples = 300;
  opts.seed = 4;
  const Attribution a = shapley_mc(g.vf(), opts);
  lossless = lossless && Attribution::from_json(nlohmann::json::parse(a.to_json().dump())).to_json() == a.to_json();
  v.require(lossless, "model, imputer, dataset and attribution round trips lossless");

  // Determinism contracts.
  bool deterministic = shapley_mc(g.vf(), opts).to_json() == a.to_json();
  deterministic = deterministic && fit_random_forest(data.features, *data.labels, 2, fc, 1).to_json() == forest.to_json();
  deterministic = deterministic &&
                  fit_mlp(data.features, *data.labels, 2, data.features, *data.labels, mc).model.to_json() == mlp.model.to_json();
  const nlohmann::json small = {{"n_points", 2000}, {"n_global_samples", 2000}};
  run_recipe("two_feature_globals", work / "hygiene" / "run_a", 9, small, false);
  run_recipe("two_feature_globals", work / "hygiene" / "run_b", 9, small, false);
  deterministic = deterministic && read_file(work / "hygiene" / "run_a" / "result.json") ==
                                       read_file(work / "hygiene" / "run_b" / "result.json");
  v.require(deterministic, "monte carlo, model fits and recipe results identical across two runs");
}

struct Criterion {
  int number;
  const char* title;
  std::function<void(Verdict&, const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::optional<int> only;
  fs::path work = fs::temp_directory_path() / "onshap-acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::stoi(argv[++i]);
    } else if (arg == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only N] [--work-dir DIR]\n";
      return 2;
    }
  }
  fs::create_directories(work);
  set_warning_sink([](std::string_view) {});

  const std::vector<Criterion> criteria = {
      {1, "Shapley axioms and brute-force oracle", axioms},
      {2, "Monte Carlo consistency", mc_consistency},
      {3, "outlier explanation error rates", outlier_error_rates},
      {4, "two-feature global sign pattern", two_feature},
      {5, "Drug MSE row", drug_mse},
      {6, "Drug attribution agreement", drug_agreement},
      {7, "suppression attack", suppression},
      {8, "MNIST properties", mnist},
      {9, "numerical hygiene", hygiene},
  };
  std::size_t ran = 0, failed = 0, skipped = 0;
  for (const auto& c : criteria) {
    if (only && *only != c.number) continue;
    ++ran;
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(v, work);
    } catch (const std::exception& e) {
      v.outcome = Outcome::fail;
      v.detail << (v.detail.tellp() > 0 ? "; " : "") << "error: " << e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* label = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
    failed += v.outcome == Outcome::fail;
    skipped += v.outcome == Outcome::skip;
    std::cout << "criterion " << c.number << " [PRIMARY] " << c.title << ": " << label << " (" << num(seconds)
              << " s) " << v.detail.str() << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion " << only.value_or(0) << "\n";
    return 2;
  }
  if (failed) return 1;
  return skipped == ran ? 77 : 0;
}
