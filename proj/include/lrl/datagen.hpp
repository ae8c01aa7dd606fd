#pragma once

// Synthetic task streams with a planted shared representation, per-task
// sample tapes, Bayes-risk oracles and the pure-noise / planted-signal
// instances used to illustrate the hardness of property testing.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "lrl/core.hpp"
#include "lrl/errors.hpp"
#include "lrl/linalg.hpp"
#include "lrl/random.hpp"

namespace lrl {

enum class InputLaw { UnitBallUniform, StandardGaussian };

inline std::string_view to_string(InputLaw law) {
  return law == InputLaw::UnitBallUniform ? "unit_ball" : "gaussian";
}

inline InputLaw input_law_from_string(std::string_view name) {
  if (name == "unit_ball") return InputLaw::UnitBallUniform;
  if (name == "gaussian") return InputLaw::StandardGaussian;
  throw InvalidInput("unknown input law '" + std::string(name) + "'");
}

/// Label noise model.
///
/// AdditiveBounded: y = <x, theta> + eta with E[eta] = 0, Var[eta] = variance and
/// eta supported in [-1/2, 1/2]. Realised either as uniform on [-a, a] with
/// a = sqrt(3 variance) (needs variance <= 1/12) or as the symmetric two-point
/// law +-sqrt(variance) (needs variance <= 1/4).
///
/// LogisticLabel: y ~ Bernoulli(sigmoid(<x, theta>)), y in {0, 1}.
struct NoiseSpec {
  enum class Kind { AdditiveBounded, LogisticLabel };
  enum class Shape { Uniform, TwoPoint };

  Kind kind = Kind::AdditiveBounded;
  double variance = 0.0;
  Shape shape = Shape::Uniform;

  static NoiseSpec noiseless() { return additive(0.0); }

  static NoiseSpec additive(double variance, Shape shape = Shape::Uniform) {
    detail::require(variance >= 0.0, "noise variance must be non-negative");
    if (shape == Shape::Uniform)
      detail::require(variance <= 1.0 / 12.0 + 1e-15, "uniform additive noise needs variance <= 1/12");
    else
      detail::require(variance <= 0.25 + 1e-15, "two-point additive noise needs variance <= 1/4");
    return {Kind::AdditiveBounded, variance, shape};
  }

  static NoiseSpec logistic() { return {Kind::LogisticLabel, 0.0, Shape::Uniform}; }

  double half_width() const {
    if (kind != Kind::AdditiveBounded) return 0.0;
    return shape == Shape::Uniform ? std::sqrt(3.0 * variance) : std::sqrt(variance);
  }

  double label(double score, Rng& rng) const {
    if (kind == Kind::LogisticLabel) return rng.uniform() < sigmoid(score) ? 1.0 : 0.0;
    if (variance == 0.0) return score;
    const double a = half_width();
    if (shape == Shape::Uniform) return score + a * (2.0 * rng.uniform() - 1.0);
    return score + (rng.uniform() < 0.5 ? -a : a);
  }
};

/// One task's data law P_t: x from input_law, y from noise around <x, B* w*>.
struct TaskDistribution {
  SemiOrthogonalMatrix b_star;
  Eigen::VectorXd w_star;
  NoiseSpec noise;
  InputLaw input_law = InputLaw::StandardGaussian;
  LossKind loss = LossKind::BinaryCrossEntropy;

  TaskDistribution(SemiOrthogonalMatrix b, Eigen::VectorXd w, NoiseSpec n, InputLaw law, LossKind l)
      : b_star(std::move(b)), w_star(std::move(w)), noise(n), input_law(law), loss(l) {
    detail::require(w_star.size() == b_star.rep_dim(), "task head dimension must equal k");
    const bool additive = noise.kind == NoiseSpec::Kind::AdditiveBounded;
    detail::require(additive == (loss == LossKind::ScaledSquared),
                    "ScaledSquared tasks need additive noise; classification tasks need logistic labels");
    theta_ = b_star.matrix() * w_star;
  }

  Eigen::Index dim() const noexcept { return b_star.ambient_dim(); }
  const Eigen::VectorXd& theta() const noexcept { return theta_; }

  /// Example number `index` of the stream keyed by `key`. Counter based, so any
  /// range of a tape can be regenerated independently.
  void example(std::uint64_t key, std::uint64_t index, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> x,
               double& y) const {
    Rng rng(derive_seed(key, {index}));
    const Eigen::Index d = dim();
    if (input_law == InputLaw::StandardGaussian) {
      for (Eigen::Index j = 0; j < d; ++j) x[j] = rng.normal();
    } else {
      x = rng.in_unit_ball(d).transpose();
    }
    y = noise.label(x.dot(theta_.transpose()), rng);
  }

  /// Examples [first, first + m) of the stream keyed by `key`.
  Dataset sample_range(std::uint64_t key, std::uint64_t first, Eigen::Index m, int task_id = 0) const {
    detail::require(m >= 1, "sample size must be >= 1");
    Dataset data{Eigen::MatrixXd(m, dim()), Eigen::VectorXd(m), task_id};
    for (Eigen::Index i = 0; i < m; ++i) example(key, first + static_cast<std::uint64_t>(i), data.inputs.row(i), data.targets[i]);
    return data;
  }

  /// A fresh i.i.d. sample, deterministic given seed.
  Dataset sample(Eigen::Index m, std::uint64_t seed) const { return sample_range(seed, 0, m); }

  Predictor bayes_predictor() const {
    return Predictor{b_star, PredictionHead(w_star, std::numeric_limits<double>::infinity()), loss};
  }

  /// Variance of the additive noise; 0 for classification tasks.
  double noise_variance() const { return noise.kind == NoiseSpec::Kind::AdditiveBounded ? noise.variance : 0.0; }

 private:
  Eigen::VectorXd theta_;
};

namespace detail {

/// E_{z ~ N(0,1)} [g(z)] by adaptive Gauss-Kronrod on [-12, 12].
template <class F>
double gaussian_expectation(F&& g) {
  const auto integrand = [&](double z) { return std::exp(-0.5 * z * z) * g(z); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 15, 1e-14);
  return integral / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace detail

/// Bayes risk of a logistic-label task under BCE when x ~ N(0, I) and ||theta|| = beta:
/// E_{s ~ N(0, beta^2)} [H(sigmoid(s))], H the binary entropy in nats.
inline double logistic_gaussian_bayes_risk(double beta) {
  detail::require(beta >= 0.0, "beta must be non-negative");
  return detail::gaussian_expectation([beta](double z) {
    const double s = beta * z;
    const double p = sigmoid(s);
    // H(sigmoid(s)) = softplus(s) - s sigmoid(s)
    return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))) - s * p;
  });
}

/// Bayes 0-1 risk of a logistic-label task with x ~ N(0, I): E[sigmoid(-|s|)].
inline double logistic_gaussian_bayes_error(double beta) {
  detail::require(beta >= 0.0, "beta must be non-negative");
  return detail::gaussian_expectation([beta](double z) { return sigmoid(-std::abs(beta * z)); });
}

/// Closed-form Bayes risk where one exists.
inline std::optional<double> exact_bayes_risk(const TaskDistribution& task) {
  if (task.loss == LossKind::ScaledSquared) return task.noise.variance / 4.0;
  if (task.input_law == InputLaw::StandardGaussian) {
    const double beta = task.theta().norm();
    if (task.loss == LossKind::BinaryCrossEntropy) return logistic_gaussian_bayes_risk(beta);
    return logistic_gaussian_bayes_error(beta);
  }
  return std::nullopt;
}

struct BayesRisk {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::optional<double> exact;

  /// Closed form when available, otherwise the Monte-Carlo estimate.
  double value() const { return exact.value_or(estimate); }
};

/// Monte-Carlo estimate of L_{P_t}(f*_t o h*). When a closed form exists it is
/// returned alongside, and the two must agree within five standard errors.
inline BayesRisk bayes_risk(const TaskDistribution& task, Eigen::Index mc_samples, std::uint64_t seed) {
  detail::require(mc_samples >= 1, "bayes_risk: mc_samples must be >= 1");
  const RiskEstimate mc = population_risk_estimate(task.bayes_predictor(), task, mc_samples, seed);
  BayesRisk out{mc.mean, mc.standard_error, exact_bayes_risk(task)};
  if (out.exact && mc_samples > 1) {
    const double slack = 5.0 * mc.standard_error + 1e-12;
    if (std::abs(*out.exact - mc.mean) > slack)
      throw std::logic_error("bayes_risk: Monte-Carlo estimate disagrees with closed form");
  }
  return out;
}

/// Planted-representation task sequence with one sample tape per task.
///
/// Tape t is the counter-based stream keyed by derive_seed(seed, {2, t}); draw()
/// advances a cursor, so drawing m then m' examples equals drawing m + m'.
class TaskStream {
 public:
  struct Config {
    Eigen::Index d = 10;
    Eigen::Index k = 3;
    int T = 50;
    double beta = 1.0;
    NoiseSpec noise = NoiseSpec::logistic();
    InputLaw input_law = InputLaw::StandardGaussian;
    LossKind loss = LossKind::BinaryCrossEntropy;
    std::uint64_t seed = 0;
  };

  /// Stream with explicitly supplied ground truth (heads need not share a norm).
  TaskStream(Config config, SemiOrthogonalMatrix b_star, const std::vector<Eigen::VectorXd>& heads)
      : config_(std::move(config)), custom_heads_(true) {
    detail::require(!heads.empty(), "task stream needs at least one task");
    config_.T = static_cast<int>(heads.size());
    config_.d = b_star.ambient_dim();
    config_.k = b_star.rep_dim();
    for (const auto& w : heads) tasks_.emplace_back(b_star, w, config_.noise, config_.input_law, config_.loss);
    cursors_.assign(heads.size(), 0);
  }

  const Config& config() const noexcept { return config_; }
  int num_tasks() const noexcept { return static_cast<int>(tasks_.size()); }
  Eigen::Index dim() const noexcept { return config_.d; }
  Eigen::Index rep_dim() const noexcept { return config_.k; }
  double beta() const noexcept { return config_.beta; }
  LossKind loss() const noexcept { return config_.loss; }
  const SemiOrthogonalMatrix& b_star() const { return tasks_.front().b_star; }

  /// 1-based task access.
  const TaskDistribution& task(int task_id) const {
    check_id(task_id);
    return tasks_[static_cast<std::size_t>(task_id - 1)];
  }

  std::uint64_t tape_key(int task_id) const {
    check_id(task_id);
    return derive_seed(config_.seed, {2, static_cast<std::uint64_t>(task_id)});
  }

  std::uint64_t cursor(int task_id) const {
    check_id(task_id);
    return cursors_[static_cast<std::size_t>(task_id - 1)];
  }

  /// Next m examples from task `task_id`'s tape.
  Dataset draw(int task_id, Eigen::Index m) {
    check_id(task_id);
    detail::require(m >= 1, "draw: m must be >= 1");
    auto& cur = cursors_[static_cast<std::size_t>(task_id - 1)];
    Dataset data = task(task_id).sample_range(tape_key(task_id), cur, m, task_id);
    cur += static_cast<std::uint64_t>(m);
    return data;
  }

  /// Configuration, ground truth seed and tape cursors; never raw samples.
  std::string snapshot() const {
    nlohmann::ordered_json j;
    j["d"] = config_.d;
    j["k"] = config_.k;
    j["T"] = config_.T;
    j["beta"] = config_.beta;
    j["noise"] = config_.noise.kind == NoiseSpec::Kind::LogisticLabel ? "logistic" : "additive";
    j["noise_variance"] = config_.noise.variance;
    j["noise_shape"] = config_.noise.shape == NoiseSpec::Shape::Uniform ? "uniform" : "two_point";
    j["input_law"] = std::string(to_string(config_.input_law));
    j["loss"] = std::string(to_string(config_.loss));
    j["seed"] = config_.seed;
    j["cursors"] = cursors_;
    if (custom_heads_) {
      const auto& b = b_star().matrix();
      j["b_star"] = std::vector<double>(b.data(), b.data() + b.size());
      std::vector<std::vector<double>> heads;
      for (const auto& t : tasks_) heads.emplace_back(t.w_star.data(), t.w_star.data() + t.w_star.size());
      j["heads"] = heads;
    }
    return j.dump(2);
  }

  static TaskStream from_snapshot(const std::string& text);

  friend TaskStream make_task_stream(const Config& config);

 private:
  explicit TaskStream(Config config) : config_(std::move(config)) {}

  void check_id(int task_id) const {
    if (task_id < 1 || task_id > num_tasks())
      throw InvalidInput("task id " + std::to_string(task_id) + " outside [1, " + std::to_string(num_tasks()) + "]");
  }

  Config config_;
  bool custom_heads_ = false;
  std::vector<TaskDistribution> tasks_;
  std::vector<std::uint64_t> cursors_;
};

/// B* from random_semi_orthogonal, each w*_t uniform on the radius-beta sphere in R^k.
inline TaskStream make_task_stream(const TaskStream::Config& config) {
  detail::require(config.k >= 1 && config.k <= config.d, "make_task_stream: need 1 <= k <= d");
  detail::require(config.T >= 1, "make_task_stream: need T >= 1");
  detail::require(config.beta > 0.0, "make_task_stream: need beta > 0");
  TaskStream stream(config);
  const SemiOrthogonalMatrix b_star = random_semi_orthogonal(config.d, config.k, derive_seed(config.seed, {0}));
  stream.tasks_.reserve(static_cast<std::size_t>(config.T));
  for (int t = 1; t <= config.T; ++t) {
    Rng rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(t)}));
    stream.tasks_.emplace_back(b_star, rng.on_sphere(config.k, config.beta), config.noise, config.input_law, config.loss);
  }
  stream.cursors_.assign(static_cast<std::size_t>(config.T), 0);
  return stream;
}

inline TaskStream make_task_stream(Eigen::Index d, Eigen::Index k, int T, double beta, NoiseSpec noise,
                                   InputLaw input_law, LossKind loss, std::uint64_t seed) {
  return make_task_stream(TaskStream::Config{d, k, T, beta, noise, input_law, loss, seed});
}

inline TaskStream TaskStream::from_snapshot(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("stream snapshot: ") + e.what());
  }
  Config c;
  c.d = j.at("d").get<Eigen::Index>();
  c.k = j.at("k").get<Eigen::Index>();
  c.T = j.at("T").get<int>();
  c.beta = j.at("beta").get<double>();
  if (j.at("noise").get<std::string>() == "logistic") {
    c.noise = NoiseSpec::logistic();
  } else {
    const auto shape = j.at("noise_shape").get<std::string>() == "uniform" ? NoiseSpec::Shape::Uniform : NoiseSpec::Shape::TwoPoint;
    c.noise = NoiseSpec::additive(j.at("noise_variance").get<double>(), shape);
  }
  c.input_law = input_law_from_string(j.at("input_law").get<std::string>());
  c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();

  auto restore = [&](TaskStream s) {
    const auto cursors = j.at("cursors").get<std::vector<std::uint64_t>>();
    detail::require(cursors.size() == s.cursors_.size(), "stream snapshot: cursor count mismatch");
    s.cursors_ = cursors;
    return s;
  };
  if (!j.contains("heads")) return restore(make_task_stream(c));

  const auto flat = j.at("b_star").get<std::vector<double>>();
  detail::require(static_cast<Eigen::Index>(flat.size()) == c.d * c.k, "stream snapshot: bad b_star size");
  SemiOrthogonalMatrix b(Eigen::Map<const Eigen::MatrixXd>(flat.data(), c.d, c.k));
  std::vector<Eigen::VectorXd> heads;
  for (const auto& h : j.at("heads").get<std::vector<std::vector<double>>>())
    heads.emplace_back(Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size())));
  return restore(TaskStream(c, std::move(b), heads));
}

// ---------------------------------------------------------------------------
// Property-testing hardness instances.

enum class Hypothesis { PureNoise, PlantedSignal };

/// H0: x ~ N(0, I_d), y ~ N(0, 1) independent.
/// H1: y = <w*, x> + N(0, 0.01), w* uniform on the radius-sqrt(0.99) sphere of U^perp.
/// U is the span of the first r standard basis vectors.
struct HardnessInstance {
  Hypothesis hypothesis = Hypothesis::PureNoise;
  Eigen::Index d = 0;
  Eigen::Index subspace_dim = 0;
  Eigen::Index n = 0;
  Eigen::VectorXd w_star;  ///< zero under H0
  double noise_var = 1.0;
};

inline constexpr double kPlantedSignalEnergy = 0.99;
inline constexpr double kPlantedNoiseVariance = 0.01;

inline HardnessInstance make_hardness_instance(Hypothesis hypothesis, Eigen::Index d, Eigen::Index r, Eigen::Index n,
                                               std::uint64_t seed) {
  detail::require(d >= 2 && r >= 0 && 2 * r <= d, "hardness instance: need r <= d/2");
  detail::require(n >= 0, "hardness instance: n must be non-negative");
  HardnessInstance inst{hypothesis, d, r, n, Eigen::VectorXd::Zero(d), 1.0};
  if (hypothesis == Hypothesis::PlantedSignal) {
    Rng rng(derive_seed(seed, {0x5157}));
    inst.w_star.tail(d - r) = rng.on_sphere(d - r, std::sqrt(kPlantedSignalEnergy));
    inst.noise_var = kPlantedNoiseVariance;
  }
  return inst;
}

inline Dataset make_hardness_sample(const HardnessInstance& inst, std::uint64_t seed) {
  detail::require(2 * inst.subspace_dim <= inst.d, "hardness sample: need r <= d/2");
  Rng rng(seed);
  Dataset data{Eigen::MatrixXd(inst.n, inst.d), Eigen::VectorXd(inst.n), 0};
  const double noise_sd = std::sqrt(inst.noise_var);
  for (Eigen::Index i = 0; i < inst.n; ++i) {
    for (Eigen::Index j = 0; j < inst.d; ++j) data.inputs(i, j) = rng.normal();
    const double signal = inst.hypothesis == Hypothesis::PlantedSignal ? data.inputs.row(i).dot(inst.w_star.transpose()) : 0.0;
    data.targets[i] = signal + noise_sd * rng.normal();
  }
  return data;
}

}  // namespace lrl
