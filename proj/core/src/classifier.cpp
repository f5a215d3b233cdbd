#include "racewalk/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "racewalk/error.hpp"

namespace racewalk {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_shapes(std::span<const double> params, const FeatureMatrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw Error("shape mismatch: rows vs labels");
  if (params.size() != x.cols() + 1) throw Error("shape mismatch: params vs columns + bias");
  if (x.rows() == 0) throw Error("shape mismatch: empty sample set");
}

// Linear scores z_i = w . x_i + b.
std::vector<double> scores(std::span<const double> params, const FeatureMatrix& x) {
  const std::size_t p = x.cols();
  const auto w = params.first(p);
  std::vector<double> z(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) z[i] = dot_span(w, x.row(i)) + params[p];
  return z;
}

double objective(std::span<const double> params, const FeatureMatrix& x, std::span<const int> y,
                 double lambda) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const auto z = scores(params, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss += softplus(z[i]) - y[i] * z[i];
  const auto w = params.first(p);
  return loss / static_cast<double>(n) + lambda / (2.0 * static_cast<double>(n)) * dot_span(w, w);
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (const double e : v) m = std::max(m, std::abs(e));
  return m;
}

}  // namespace

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

void FeatureMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && data_.empty()) cols_ = values.size();
  if (values.size() != cols_) throw Error("shape mismatch: row length");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw Error("shape mismatch: standardizer width");
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / std[j];
  return z;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& x) const {
  FeatureMatrix z(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = apply(x.row(i));
    std::copy(r.begin(), r.end(), z.row(i).begin());
  }
  return z;
}

Standardizer fit_standardizer(const FeatureMatrix& x) {
  if (x.rows() < 2) throw Error("fit_standardizer: need at least 2 rows");
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  Standardizer s;
  s.mean.assign(p, 0.0);
  s.std.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) s.mean[j] += x(i, j);
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double d = x(i, j) - s.mean[j];
      s.std[j] += d * d;
    }
  }
  for (auto& v : s.std) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v == 0.0) v = 1.0;
  }
  return s;
}

std::string_view to_string(FaultType f) { return f == FaultType::kBentKnee ? "BK" : "LC"; }

FaultType parse_fault_type(std::string_view text) {
  if (text == "BK" || text == "bk") return FaultType::kBentKnee;
  if (text == "LC" || text == "lc") return FaultType::kLossOfContact;
  throw Error("unknown fault type '" + std::string(text) + "' (expected BK or LC)");
}

FaultLabel positive_label(FaultType f) {
  return f == FaultType::kBentKnee ? FaultLabel::kBentKnee : FaultLabel::kLossOfContact;
}

LossGradient loss_and_gradient(std::span<const double> params, const FeatureMatrix& x,
                               std::span<const int> y, double lambda) {
  check_shapes(params, x, y);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto z = scores(params, x);

  LossGradient out;
  out.gradient.assign(p + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    const double r = sigmoid(z[i]) - y[i];
    const auto row = x.row(i);
    for (std::size_t j = 0; j < p; ++j) out.gradient[j] += r * row[j];
    out.gradient[p] += r;
  }
  double wsq = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    out.gradient[j] = out.gradient[j] * inv_n + lambda * inv_n * params[j];
    wsq += params[j] * params[j];
  }
  out.gradient[p] *= inv_n;
  out.loss = loss * inv_n + lambda * inv_n * 0.5 * wsq;
  return out;
}

SolverResult minimize_logistic(const FeatureMatrix& z, std::span<const int> y,
                               const TrainOptions& options,
                               std::optional<std::span<const double>> initial) {
  const std::size_t n = z.rows();
  const std::size_t p = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  SolverResult result;
  result.params.assign(p + 1, 0.0);
  if (initial) {
    if (initial->size() != p + 1) throw Error("shape mismatch: initial parameters");
    std::copy(initial->begin(), initial->end(), result.params.begin());
  }

  std::vector<double> curvature(n);
  std::vector<double> a(n);
  // H v for the weights-then-bias layout, at the curvature weights above.
  const auto hess_vec = [&](std::span<const double> v, std::span<double> out) {
    const auto vw = v.first(p);
    for (std::size_t i = 0; i < n; ++i) a[i] = (dot_span(vw, z.row(i)) + v[p]) * curvature[i];
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = z.row(i);
      for (std::size_t j = 0; j < p; ++j) out[j] += a[i] * row[j];
      out[p] += a[i];
    }
    for (std::size_t j = 0; j < p; ++j) out[j] = out[j] * inv_n + options.lambda * inv_n * v[j];
    out[p] *= inv_n;
  };

  std::vector<double> step(p + 1), r(p + 1), dir(p + 1), hd(p + 1), trial(p + 1);
  const std::size_t max_cg = std::max<std::size_t>(p + 1, 10);

  for (int iter = 0;; ++iter) {
    const auto lg = loss_and_gradient(result.params, z, y, options.lambda);
    result.gradient_inf_norm = inf_norm(lg.gradient);
    result.iterations = iter;
    if (result.gradient_inf_norm <= options.tol) {
      result.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;

    const auto sc = scores(result.params, z);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigmoid(sc[i]);
      curvature[i] = s * (1.0 - s);
    }

    // Truncated conjugate gradient on H step = -g.
    const double gnorm = std::sqrt(dot_span(lg.gradient, lg.gradient));
    const double cg_tol = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    std::fill(step.begin(), step.end(), 0.0);
    for (std::size_t j = 0; j <= p; ++j) r[j] = -lg.gradient[j];
    dir = r;
    double rs = dot_span(r, r);
    for (std::size_t k = 0; k < max_cg; ++k) {
      hess_vec(dir, hd);
      const double curv = dot_span(dir, hd);
      if (!(curv > 0.0)) {
        if (k == 0) step = r;
        break;
      }
      const double alpha = rs / curv;
      for (std::size_t j = 0; j <= p; ++j) {
        step[j] += alpha * dir[j];
        r[j] -= alpha * hd[j];
      }
      const double rs_next = dot_span(r, r);
      if (std::sqrt(rs_next) <= cg_tol) break;
      const double beta = rs_next / rs;
      for (std::size_t j = 0; j <= p; ++j) dir[j] = r[j] + beta * dir[j];
      rs = rs_next;
    }

    const double slope = dot_span(lg.gradient, step);
    const double f0 = objective(result.params, z, y, options.lambda);

    // Below the objective's rounding level Armijo cannot tell steps apart;
    // judge the full Newton step by the gradient instead.
    if (-slope <= 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0))) {
      for (std::size_t j = 0; j <= p; ++j) trial[j] = result.params[j] + step[j];
      if (inf_norm(loss_and_gradient(trial, z, y, options.lambda).gradient) >= result.gradient_inf_norm) {
        break;  // no further progress representable
      }
      result.params = trial;
      continue;
    }

    // Backtracking (Armijo) line search.
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      for (std::size_t j = 0; j <= p; ++j) trial[j] = result.params[j] + t * step[j];
      if (objective(trial, z, y, options.lambda) <= f0 + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further decrease representable
    result.params = trial;
  }
  return result;
}

LogisticModel train(const FeatureMatrix& x, std::span<const int> y, const TrainOptions& options,
                    FaultType fault, std::string fold_id,
                    std::optional<std::span<const double>> initial) {
  if (x.rows() != y.size()) throw Error("shape mismatch: rows vs labels");
  if (x.rows() < 2) throw Error("train: need at least 2 samples");
  if (!(options.lambda >= 0.0)) throw Error("train: lambda must be non-negative");
  bool has_pos = false;
  bool has_neg = false;
  for (const int v : y) {
    if (v != 0 && v != 1) throw Error("train: labels must be 0 or 1");
    (v == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw Error("single-class input: both classes are required");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (const double v : x.row(i)) {
      if (!std::isfinite(v)) throw Error("non-finite features");
    }
  }

  LogisticModel model;
  model.standardizer = fit_standardizer(x);
  const auto solved = minimize_logistic(model.standardizer.apply(x), y, options, initial);
  model.weights.assign(solved.params.begin(), solved.params.end() - 1);
  model.bias = solved.params.back();
  model.fault_type = fault;
  model.hyperparameters = options;
  model.training_fold_id = std::move(fold_id);
  model.converged = solved.converged;
  model.iterations = solved.iterations;
  return model;
}

double predict_proba(const LogisticModel& model, std::span<const double> raw) {
  if (raw.size() != model.weights.size()) throw Error("layout mismatch: feature count");
  const auto z = model.standardizer.apply(raw);
  return sigmoid(dot_span(model.weights, z) + model.bias);
}

double predict_proba(const LogisticModel& model, const FeatureVector& x) {
  if (x.layout_version != model.layout_version) {
    throw Error("layout mismatch: model " + model.layout_version + " vs features " +
                x.layout_version);
  }
  return predict_proba(model, std::span<const double>(x.values));
}

bool predict(const LogisticModel& model, const FeatureVector& x, double threshold) {
  return predict_proba(model, x) >= threshold;
}

FeatureCategory ImportanceReport::top_category() const {
  const auto it = std::max_element(category_importance.begin(), category_importance.end());
  return static_cast<FeatureCategory>(it - category_importance.begin());
}

ImportanceReport feature_importance(std::span<const LogisticModel> models) {
  if (models.empty()) throw Error("feature_importance: empty model list");
  for (const auto& m : models) {
    if (m.layout_version != models.front().layout_version) {
      throw Error("feature_importance: mixed layouts");
    }
    if (m.fault_type != models.front().fault_type) {
      throw Error("feature_importance: mixed fault types");
    }
    if (m.weights.size() != kNumFeatures) {
      throw Error("feature_importance: model does not use the 1530-feature layout");
    }
  }

  std::vector<double> per_feature(kNumFeatures, 0.0);
  for (const auto& m : models) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) per_feature[i] += std::abs(m.weights[i]);
  }
  for (auto& v : per_feature) v /= static_cast<double>(models.size());

  ImportanceReport report;
  report.n_models_averaged = models.size();
  std::array<std::size_t, kNumCategories> counts{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const auto c = static_cast<std::size_t>(category_of_feature(i));
    report.category_importance[c] += per_feature[i];
    ++counts[c];
  }
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    report.category_importance[c] /= static_cast<double>(counts[c]);
  }
  for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
    for (std::size_t b = 0; b < ImportanceReport::kNumBins; ++b) {
      double s = 0.0;
      for (std::size_t f = 0; f < ImportanceReport::kBinWidth; ++f) {
        s += per_feature[feature_index(ch, b * ImportanceReport::kBinWidth + f)];
      }
      report.frame_importance[ch][b] = s / static_cast<double>(ImportanceReport::kBinWidth);
    }
  }
  return report;
}

void write_model_json(std::ostream& out, const LogisticModel& model,
                      std::string_view run_config_json) {
  nlohmann::ordered_json doc;
  doc["layout_version"] = model.layout_version;
  doc["fault_type"] = std::string(to_string(model.fault_type));
  doc["hyperparameters"] = {{"lambda", model.hyperparameters.lambda},
                            {"tol", model.hyperparameters.tol},
                            {"max_iter", model.hyperparameters.max_iterations}};
  doc["standardizer"] = {{"mean", model.standardizer.mean}, {"std", model.standardizer.std}};
  doc["weights"] = model.weights;
  doc["bias"] = model.bias;
  doc["training_fold_id"] = model.training_fold_id;
  doc["converged"] = model.converged;
  doc["iterations"] = model.iterations;
  doc["train_video_ids"] = model.train_video_ids;
  if (!run_config_json.empty()) doc["run_config"] = nlohmann::ordered_json::parse(run_config_json);
  out << doc.dump(1) << '\n';
}

LogisticModel read_model_json(std::istream& in) {
  LogisticModel m;
  try {
    const auto doc = nlohmann::json::parse(in);
    m.layout_version = doc.at("layout_version").get<std::string>();
    m.fault_type = parse_fault_type(doc.at("fault_type").get<std::string>());
    const auto& hp = doc.at("hyperparameters");
    m.hyperparameters.lambda = hp.at("lambda").get<double>();
    m.hyperparameters.tol = hp.at("tol").get<double>();
    m.hyperparameters.max_iterations = hp.at("max_iter").get<int>();
    m.standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.std = doc.at("standardizer").at("std").get<std::vector<double>>();
    m.weights = doc.at("weights").get<std::vector<double>>();
    m.bias = doc.at("bias").get<double>();
    m.training_fold_id = doc.at("training_fold_id").get<std::string>();
    m.converged = doc.at("converged").get<bool>();
    if (doc.contains("iterations")) m.iterations = doc.at("iterations").get<int>();
    if (doc.contains("train_video_ids")) {
      m.train_video_ids = doc.at("train_video_ids").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  if (m.layout_version != kLayoutVersion) {
    throw Error("layout mismatch: model file uses " + m.layout_version);
  }
  if (m.weights.size() != m.standardizer.mean.size() ||
      m.weights.size() != m.standardizer.std.size()) {
    throw Error("malformed model file: inconsistent vector lengths");
  }
  return m;
}

}  // namespace racewalk
