#include "onshap/imputer.hpp"

#include <algorithm>
#include <cmath>

namespace onshap {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kScaleFloor = 1e-4;

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

std::size_t n_levels(const ColumnSchema& c) {
  if (c.kind == FeatureKind::binary) return 2;
  if (c.kind == FeatureKind::categorical) return std::max<std::size_t>(c.n_categories, 2);
  return 1;
}

double log_sum_exp(const double* v, std::size_t n) {
  const double m = *std::max_element(v, v + n);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(v[k] - m);
  return m + std::log(s);
}

std::size_t sample_index(const double* probs, std::size_t n, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    u -= probs[k];
    if (u < 0.0) return k;
  }
  return n - 1;
}

}  // namespace

double positive_scale(double raw) {
  const double sp = raw > 0.0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return sp + kScaleFloor;
}

double positive_scale_grad(double raw) { return sigmoid(raw); }

double kl_diag_normals(const RowVector& mu1, const RowVector& s1, const RowVector& mu2,
                       const RowVector& s2) {
  double kl = 0.0;
  for (Eigen::Index d = 0; d < mu1.size(); ++d) {
    const double diff = mu1[d] - mu2[d];
    kl += std::log(s2[d] / s1[d]) + (s1[d] * s1[d] + diff * diff) / (2.0 * s2[d] * s2[d]) - 0.5;
  }
  return kl;
}

double kl_to_standard_normal(const RowVector& mu, const RowVector& s) {
  double kl = 0.0;
  for (Eigen::Index d = 0; d < mu.size(); ++d) {
    kl += 0.5 * (mu[d] * mu[d] + s[d] * s[d] - 1.0) - std::log(s[d]);
  }
  return kl;
}

double GaussianMixture::log_density(const RowVector& z) const {
  std::vector<double> terms(static_cast<std::size_t>(weights.size()));
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    const auto& mu = means[static_cast<std::size_t>(j)];
    const auto& s = scales[static_cast<std::size_t>(j)];
    double l = std::log(weights[j]);
    for (Eigen::Index d = 0; d < z.size(); ++d) {
      const double u = (z[d] - mu[d]) / s[d];
      l += -0.5 * u * u - std::log(s[d]) - 0.5 * kLog2Pi;
    }
    terms[static_cast<std::size_t>(j)] = l;
  }
  return log_sum_exp(terms.data(), terms.size());
}

void ImputerHyper::validate() const {
  if (hidden == 0 || latent_dim == 0 || n_modes == 0) {
    throw UsageError("imputer sizes must be positive");
  }
  if (beta < 0.0) throw UsageError("beta must be nonnegative");
  if (!(continuous_variance > 0.0)) throw UsageError("decoder variance must be positive");
  train.validate();
}

nlohmann::json ImputerHyper::to_json() const {
  return {{"hidden", hidden},
          {"latent_dim", latent_dim},
          {"n_modes", n_modes},
          {"beta", beta},
          {"continuous_variance", continuous_variance},
          {"sample_continuous", sample_continuous},
          {"train", train.to_json()}};
}

ImputerHyper ImputerHyper::from_json(const nlohmann::json& doc) {
  return from_json(doc, ImputerHyper{});
}

ImputerHyper ImputerHyper::from_json(const nlohmann::json& doc, const ImputerHyper& defaults) {
  ImputerHyper h = defaults;
  h.hidden = doc.value("hidden", h.hidden);
  h.latent_dim = doc.value("latent_dim", h.latent_dim);
  h.n_modes = doc.value("n_modes", h.n_modes);
  h.beta = doc.value("beta", h.beta);
  h.continuous_variance = doc.value("continuous_variance", h.continuous_variance);
  h.sample_continuous = doc.value("sample_continuous", h.sample_continuous);
  if (doc.contains("train")) h.train = TrainConfig::from_json(doc.at("train"), h.train);
  return h;
}

Imputer::Imputer(std::vector<ColumnSchema> schema, const ImputerHyper& hyper, std::uint64_t seed)
    : schema_(std::move(schema)), hyper_(hyper) {
  hyper_.validate();
  const std::size_t n = schema_.size();
  const std::size_t h = hyper_.hidden, d = hyper_.latent_dim, k = hyper_.n_modes;
  encoder_ = DenseNet({n, h, h, 2 * d}, Activation::identity, derive_seed(seed, 1));
  decoder_ = DenseNet({d, h, h, decoder_width()}, Activation::identity, derive_seed(seed, 2));
  masked_encoder_ = DenseNet({n, h, h, k * (1 + 2 * d)}, Activation::identity, derive_seed(seed, 3));
  std::size_t offset = 0;
  for (const auto& c : schema_) {
    offsets_.push_back(offset);
    offset += n_levels(c);
  }
}

Imputer::Imputer(std::vector<ColumnSchema> schema, const ImputerHyper& hyper, DenseNet encoder,
                 DenseNet decoder, DenseNet masked_encoder)
    : schema_(std::move(schema)),
      hyper_(hyper),
      encoder_(std::move(encoder)),
      decoder_(std::move(decoder)),
      masked_encoder_(std::move(masked_encoder)) {
  const std::size_t n = schema_.size(), d = hyper_.latent_dim, k = hyper_.n_modes;
  if (encoder_.input_size() != n || encoder_.output_size() != 2 * d ||
      decoder_.input_size() != d || decoder_.output_size() != decoder_width() ||
      masked_encoder_.input_size() != n || masked_encoder_.output_size() != k * (1 + 2 * d)) {
    throw ShapeError("imputer networks do not match the schema and hyperparameters");
  }
  std::size_t offset = 0;
  for (const auto& c : schema_) {
    offsets_.push_back(offset);
    offset += n_levels(c);
  }
}

std::size_t Imputer::decoder_width() const {
  std::size_t width = 0;
  for (const auto& c : schema_) width += n_levels(c);
  return width;
}

std::vector<GaussianMixture> Imputer::masked_posterior(const Matrix& masked) const {
  const Matrix out = masked_encoder_.forward(masked);
  const std::size_t d = hyper_.latent_dim, k = hyper_.n_modes;
  std::vector<GaussianMixture> mixtures;
  mixtures.reserve(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    GaussianMixture m;
    const double* row = out.row(r).data();
    const double lse = log_sum_exp(row, k);
    m.weights.resize(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      m.weights[static_cast<Eigen::Index>(j)] = std::exp(row[j] - lse);
      RowVector mu(static_cast<Eigen::Index>(d)), s(static_cast<Eigen::Index>(d));
      for (std::size_t t = 0; t < d; ++t) {
        mu[static_cast<Eigen::Index>(t)] = row[k + j * d + t];
        s[static_cast<Eigen::Index>(t)] = positive_scale(row[k + k * d + j * d + t]);
      }
      m.means.push_back(std::move(mu));
      m.scales.push_back(std::move(s));
    }
    mixtures.push_back(std::move(m));
  }
  return mixtures;
}

ElboTerms Imputer::elbo(const Matrix& x, const Matrix& masked, const Matrix& eps,
                        std::vector<Gradients>* grads) const {
  const Eigen::Index b = x.rows();
  const auto d = static_cast<Eigen::Index>(hyper_.latent_dim);
  const auto k = static_cast<Eigen::Index>(hyper_.n_modes);
  if (x.cols() != static_cast<Eigen::Index>(n_features()) || masked.rows() != b ||
      masked.cols() != x.cols() || eps.rows() != b || eps.cols() != d) {
    throw ShapeError("imputer loss inputs have inconsistent shapes");
  }
  const double inv_b = b > 0 ? 1.0 / static_cast<double>(b) : 0.0;
  const double beta = hyper_.beta, var = hyper_.continuous_variance;

  const ForwardTape enc = encoder_.forward_tape(x);
  const Matrix& a = enc.output();
  Matrix mu_q = a.leftCols(d);
  Matrix s_q = a.rightCols(d).unaryExpr([](double v) { return positive_scale(v); });
  Matrix z = mu_q + s_q.cwiseProduct(eps);
  const ForwardTape dec = decoder_.forward_tape(z);
  const Matrix& out = dec.output();
  const ForwardTape menc = masked_encoder_.forward_tape(masked);
  const Matrix& ro = menc.output();

  ElboTerms terms;
  terms.loss.resize(b);
  terms.reconstruction.resize(b);
  terms.kl_masked.resize(b);
  terms.kl_prior.resize(b);

  const bool want = grads != nullptr;
  Matrix d_out, d_mu, d_s, d_z, d_ro;
  if (want) {
    d_out = Matrix::Zero(b, out.cols());
    d_mu = Matrix::Zero(b, d);
    d_s = Matrix::Zero(b, d);
    d_z = Matrix::Zero(b, d);
    d_ro = Matrix::Zero(b, ro.cols());
  }

  std::vector<double> ell(static_cast<std::size_t>(k)), gamma(static_cast<std::size_t>(k));
  for (Eigen::Index r = 0; r < b; ++r) {
    // Reconstruction log-likelihood, factorised over features.
    double rec = 0.0;
    for (std::size_t i = 0; i < schema_.size(); ++i) {
      const auto o = static_cast<Eigen::Index>(offsets_[i]);
      const double xi = x(r, static_cast<Eigen::Index>(i));
      if (schema_[i].kind == FeatureKind::continuous) {
        const double diff = xi - out(r, o);
        rec += -0.5 * diff * diff / var - 0.5 * (kLog2Pi + std::log(var));
        if (want) d_out(r, o) = -diff / var * inv_b;
      } else {
        const auto levels = static_cast<Eigen::Index>(n_levels(schema_[i]));
        const auto code = static_cast<Eigen::Index>(std::llround(xi));
        if (code < 0 || code >= levels) {
          throw DataError("feature " + std::to_string(i) + " value " + std::to_string(xi) +
                          " is not a valid category");
        }
        const double* logits = out.row(r).data() + o;
        const double lse = log_sum_exp(logits, static_cast<std::size_t>(levels));
        rec += logits[code] - lse;
        if (want) {
          for (Eigen::Index c = 0; c < levels; ++c) {
            d_out(r, o + c) = (std::exp(logits[c] - lse) - (c == code ? 1.0 : 0.0)) * inv_b;
          }
        }
      }
    }

    const RowVector mq = mu_q.row(r), sq = s_q.row(r);
    const double klp = kl_to_standard_normal(mq, sq);
    if (want) {
      for (Eigen::Index t = 0; t < d; ++t) {
        d_mu(r, t) += beta * mq[t] * inv_b;
        d_s(r, t) += beta * (sq[t] - 1.0 / sq[t]) * inv_b;
      }
    }

    // KL(q || r): closed form with one mode, single-sample estimate otherwise.
    const double* row = ro.row(r).data();
    double klr = 0.0;
    if (k == 1) {
      for (Eigen::Index t = 0; t < d; ++t) {
        const double mr = row[1 + t];
        const double raw = row[1 + d + t];
        const double sr = positive_scale(raw);
        const double diff = mq[t] - mr;
        klr += std::log(sr / sq[t]) + (sq[t] * sq[t] + diff * diff) / (2.0 * sr * sr) - 0.5;
        if (want) {
          d_mu(r, t) += diff / (sr * sr) * inv_b;
          d_s(r, t) += (-1.0 / sq[t] + sq[t] / (sr * sr)) * inv_b;
          d_ro(r, 1 + t) += -diff / (sr * sr) * inv_b;
          const double d_sr = 1.0 / sr - (sq[t] * sq[t] + diff * diff) / (sr * sr * sr);
          d_ro(r, 1 + d + t) += d_sr * positive_scale_grad(raw) * inv_b;
        }
      }
    } else {
      double log_q = 0.0;
      for (Eigen::Index t = 0; t < d; ++t) {
        log_q += -0.5 * eps(r, t) * eps(r, t) - std::log(sq[t]) - 0.5 * kLog2Pi;
      }
      const double lse_w = log_sum_exp(row, static_cast<std::size_t>(k));
      for (Eigen::Index j = 0; j < k; ++j) {
        double l = row[j] - lse_w;
        for (Eigen::Index t = 0; t < d; ++t) {
          const double sr = positive_scale(row[k + k * d + j * d + t]);
          const double u = (z(r, t) - row[k + j * d + t]) / sr;
          l += -0.5 * u * u - std::log(sr) - 0.5 * kLog2Pi;
        }
        ell[static_cast<std::size_t>(j)] = l;
      }
      const double log_r = log_sum_exp(ell.data(), ell.size());
      klr = log_q - log_r;
      if (want) {
        for (Eigen::Index t = 0; t < d; ++t) d_s(r, t) += -1.0 / sq[t] * inv_b;
        for (Eigen::Index j = 0; j < k; ++j) {
          const double g = std::exp(ell[static_cast<std::size_t>(j)] - log_r);
          d_ro(r, j) += -(g - std::exp(row[j] - lse_w)) * inv_b;
          for (Eigen::Index t = 0; t < d; ++t) {
            const Eigen::Index raw_at = k + k * d + j * d + t;
            const double sr = positive_scale(row[raw_at]);
            const double diff = z(r, t) - row[k + j * d + t];
            d_z(r, t) += g * diff / (sr * sr) * inv_b;
            d_ro(r, k + j * d + t) += -g * diff / (sr * sr) * inv_b;
            const double d_sr = -g * (diff * diff / (sr * sr * sr) - 1.0 / sr);
            d_ro(r, raw_at) += d_sr * positive_scale_grad(row[raw_at]) * inv_b;
          }
        }
      }
    }

    terms.reconstruction[r] = rec;
    terms.kl_prior[r] = klp;
    terms.kl_masked[r] = klr;
    terms.loss[r] = -rec + klr + beta * klp;
    if (!std::isfinite(terms.loss[r])) {
      std::size_t known = 0;
      for (Eigen::Index c = 0; c < masked.cols(); ++c) known += masked(r, c) != kMaskSentinel;
      throw NumericError("non-finite imputer loss at batch row " + std::to_string(r) + " (" +
                         std::to_string(known) + " of " + std::to_string(masked.cols()) +
                         " features in the coalition)");
    }
  }

  if (want) {
    d_z += decoder_.backward(dec, d_out, (*grads)[1]);
    d_mu += d_z;
    d_s += d_z.cwiseProduct(eps);
    Matrix d_a(b, 2 * d);
    d_a.leftCols(d) = d_mu;
    d_a.rightCols(d) = d_s.cwiseProduct(
        a.rightCols(d).unaryExpr([](double v) { return positive_scale_grad(v); }));
    encoder_.backward(enc, d_a, (*grads)[0]);
    masked_encoder_.backward(menc, d_ro, (*grads)[2]);
  }
  return terms;
}

ElboTerms Imputer::elbo(const Matrix& x, const std::vector<Coalition>& coalitions,
                        Rng& rng) const {
  const Matrix masked = masked_rows(x, coalitions);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(x.rows(), static_cast<Eigen::Index>(hyper_.latent_dim));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
  return elbo(x, masked, eps);
}

Matrix Imputer::sample(const Vector& x, std::span<const Coalition> coalitions,
                       std::size_t n_draws, Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(n_features());
  if (x.size() != n) throw ShapeError("imputer expects " + std::to_string(n) + " features");
  const auto c = static_cast<Eigen::Index>(coalitions.size());
  Matrix masked(c, n);
  for (Eigen::Index k = 0; k < c; ++k) {
    if (coalitions[static_cast<std::size_t>(k)].n() != n_features()) {
      throw ShapeError("coalition width does not match the imputer");
    }
    apply_mask(x.data(), coalitions[static_cast<std::size_t>(k)], masked.row(k).data());
  }
  const std::vector<GaussianMixture> mixtures = masked_posterior(masked);
  const auto d = static_cast<Eigen::Index>(hyper_.latent_dim);
  const auto draws = static_cast<Eigen::Index>(n_draws);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(c * draws, d);
  for (Eigen::Index k = 0; k < c; ++k) {
    const GaussianMixture& m = mixtures[static_cast<std::size_t>(k)];
    for (Eigen::Index t = 0; t < draws; ++t) {
      const std::size_t j = sample_index(m.weights.data(), static_cast<std::size_t>(m.weights.size()), rng);
      for (Eigen::Index q = 0; q < d; ++q) {
        z(k * draws + t, q) = m.means[j][q] + m.scales[j][q] * normal(rng);
      }
    }
  }
  const Matrix out = decoder_.forward(z);
  Matrix result(c * draws, n);
  const double sd = std::sqrt(hyper_.continuous_variance);
  std::vector<double> probs;
  for (Eigen::Index r = 0; r < result.rows(); ++r) {
    const Coalition& s = coalitions[static_cast<std::size_t>(r / draws)];
    for (std::size_t i = 0; i < schema_.size(); ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      const auto o = static_cast<Eigen::Index>(offsets_[i]);
      if (s.contains(i)) {
        result(r, col) = x[col];
      } else if (schema_[i].kind == FeatureKind::continuous) {
        result(r, col) = out(r, o) + (hyper_.sample_continuous ? sd * normal(rng) : 0.0);
      } else {
        const std::size_t levels = n_levels(schema_[i]);
        const double* logits = out.row(r).data() + o;
        const double lse = log_sum_exp(logits, levels);
        probs.resize(levels);
        for (std::size_t l = 0; l < levels; ++l) probs[l] = std::exp(logits[l] - lse);
        result(r, col) = static_cast<double>(sample_index(probs.data(), levels, rng));
      }
    }
  }
  return result;
}

Matrix Imputer::sample_conditional(const Vector& x, const Coalition& s, std::size_t n,
                                   Rng& rng) const {
  return sample(x, std::span<const Coalition>(&s, 1), n, rng);
}

nlohmann::json Imputer::to_json() const {
  return {{"format", "onshap-imputer"},
          {"version", 1},
          {"schema", schema_to_json(schema_)},
          {"hyper", hyper_.to_json()},
          {"encoder", encoder_.to_json()},
          {"decoder", decoder_.to_json()},
          {"masked_encoder", masked_encoder_.to_json()}};
}

Imputer Imputer::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "onshap-imputer" || doc.value("version", 0) != 1) {
    throw DataError("not a version-1 imputer document");
  }
  return Imputer(schema_from_json(doc.at("schema")), ImputerHyper::from_json(doc.at("hyper")),
                 DenseNet::from_json(doc.at("encoder")), DenseNet::from_json(doc.at("decoder")),
                 DenseNet::from_json(doc.at("masked_encoder")));
}

ImputerFit train_imputer(const Matrix& train_x, const Matrix& val_x,
                         const std::vector<ColumnSchema>& schema, const ImputerHyper& hyper) {
  if (train_x.rows() == 0) throw DataError("imputer training needs data");
  if (static_cast<std::size_t>(train_x.cols()) != schema.size()) {
    throw ShapeError("training data does not match the schema");
  }
  auto imputer = std::make_shared<Imputer>(schema, hyper, derive_seed(hyper.train.seed, 0x1a9));
  const std::size_t n = schema.size();
  const auto d = static_cast<Eigen::Index>(hyper.latent_dim);

  auto objective = [&](std::span<const std::size_t> rows, Rng& rng, std::vector<Gradients>& grads) {
    const Matrix x = gather_rows(train_x, rows);
    std::vector<Coalition> coalitions;
    coalitions.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) coalitions.push_back(sample_shapley_coalition(n, rng));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix eps(x.rows(), d);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
    return imputer->elbo(x, masked_rows(x, coalitions), eps, &grads).mean_loss();
  };

  Matrix val_masked, val_eps;
  ValidationObjective validation;
  if (val_x.rows() > 0) {
    Rng rng = make_rng(hyper.train.seed, 0xa11da7e);
    std::vector<Coalition> coalitions;
    for (Eigen::Index r = 0; r < val_x.rows(); ++r) coalitions.push_back(sample_shapley_coalition(n, rng));
    val_masked = masked_rows(val_x, coalitions);
    std::normal_distribution<double> normal(0.0, 1.0);
    val_eps.resize(val_x.rows(), d);
    for (Eigen::Index i = 0; i < val_eps.size(); ++i) val_eps.data()[i] = normal(rng);
    validation = [&] { return imputer->elbo(val_x, val_masked, val_eps).mean_loss(); };
  }
  TrainHistory history = train_networks(imputer->networks(), static_cast<std::size_t>(train_x.rows()),
                                        objective, validation, hyper.train);
  return {std::move(imputer), std::move(history)};
}

}  // namespace onshap
