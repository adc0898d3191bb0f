#include "hsi/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace hsi::decoder {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::MatrixXd safe_log(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double x) { return x > 0.0 ? std::log(x) : kNegInf; });
}

/// Emission log-likelihoods, frames x states.
Eigen::MatrixXd emission_table(const GestureHmm& model, const std::vector<EmgFrame>& frames) {
  Eigen::MatrixXd b(static_cast<Eigen::Index>(frames.size()), model.states());
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (int k = 0; k < model.states(); ++k)
      b(static_cast<Eigen::Index>(t), k) = model.emissions[static_cast<std::size_t>(k)].log_pdf(frames[t].feature);
  return b;
}

struct Posteriors {
  Eigen::MatrixXd gamma;  // frames x states
  Eigen::MatrixXd xi;     // states x states, summed over t
  double log_likelihood = 0.0;
};

Posteriors forward_backward(const GestureHmm& model, const Eigen::MatrixXd& b) {
  const Eigen::Index n = b.rows(), k = b.cols();
  const Eigen::MatrixXd log_t = safe_log(model.transition);
  const Eigen::VectorXd log_pi = safe_log(model.initial);

  Eigen::MatrixXd la(n, k), lb(n, k);
  la.row(0) = (log_pi + b.row(0).transpose()).transpose();
  Eigen::VectorXd tmp(k);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      tmp = la.row(t - 1).transpose() + log_t.col(j);
      la(t, j) = b(t, j) + log_sum_exp(tmp);
    }
  }
  lb.row(n - 1).setZero();
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    for (Eigen::Index i = 0; i < k; ++i) {
      tmp = log_t.row(i).transpose() + b.row(t + 1).transpose() + lb.row(t + 1).transpose();
      lb(t, i) = log_sum_exp(tmp);
    }
  }

  Posteriors out;
  out.log_likelihood = log_sum_exp(la.row(n - 1).transpose());
  out.gamma = (la + lb).array() - out.log_likelihood;
  out.gamma = out.gamma.array().exp();
  out.xi = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index t = 0; t + 1 < n; ++t)
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        if (log_t(i, j) == kNegInf) continue;
        out.xi(i, j) += std::exp(la(t, i) + log_t(i, j) + b(t + 1, j) + lb(t + 1, j) - out.log_likelihood);
      }
  return out;
}

GaussianEmission fit_emission(const std::vector<EmgFrame>& frames, const Eigen::VectorXd& weights,
                              const TrainOptions& options, const Eigen::VectorXd& floor) {
  const double total = weights.sum();
  GaussianEmission e;
  e.diagonal = !options.full_covariance;
  e.mean = Eigen::VectorXd::Zero(kFeatureDim);
  for (std::size_t t = 0; t < frames.size(); ++t) e.mean += weights(static_cast<Eigen::Index>(t)) * frames[t].feature;
  e.mean /= total;
  e.covariance = Eigen::MatrixXd::Zero(kFeatureDim, kFeatureDim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Eigen::VectorXd d = frames[t].feature - e.mean;
    const double w = weights(static_cast<Eigen::Index>(t));
    if (e.diagonal)
      e.covariance.diagonal() += w * d.cwiseAbs2();
    else
      e.covariance += w * d * d.transpose();
  }
  e.covariance /= total;
  for (int i = 0; i < kFeatureDim; ++i)
    e.covariance(i, i) = std::max(e.covariance(i, i), floor(i));
  if (!e.diagonal) e.covariance.diagonal() += floor;
  return e;
}

// Per-dimension floor: a fraction of the label-pooled within-gesture
// variance, never below the absolute floor.
Eigen::VectorXd variance_floor(const std::vector<EmgFrame>& frames, const std::vector<int>& state,
                               int states, const TrainOptions& options) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(kFeatureDim, states);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(states);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    sum.col(state[t]) += frames[t].feature;
    count(state[t]) += 1.0;
  }
  Eigen::VectorXd var = Eigen::VectorXd::Zero(kFeatureDim);
  for (std::size_t t = 0; t < frames.size(); ++t)
    var += (frames[t].feature - sum.col(state[t]) / count(state[t])).cwiseAbs2();
  var /= static_cast<double>(frames.size());
  return (options.relative_variance_floor * var).cwiseMax(options.variance_floor);
}

void m_step(GestureHmm& model, const std::vector<EmgFrame>& frames, const Posteriors& post,
            const TrainOptions& options, const Eigen::VectorXd& floor) {
  const int k = model.states();
  model.initial = post.gamma.row(0).transpose();
  model.initial /= model.initial.sum();
  for (int i = 0; i < k; ++i) {
    const double row = post.xi.row(i).sum();
    if (row > 0.0) model.transition.row(i) = post.xi.row(i) / row;
    const Eigen::VectorXd w = post.gamma.col(i);
    if (w.sum() > 0.0) model.emissions[static_cast<std::size_t>(i)] = fit_emission(frames, w, options, floor);
  }
}

}  // namespace

std::string_view to_string(Gesture g) {
  switch (g) {
    case Gesture::normal: return "normal";
    case Gesture::fist: return "fist";
    case Gesture::spread: return "spread";
    case Gesture::wave_up: return "wave_up";
    case Gesture::wave_down: return "wave_down";
  }
  return "normal";
}

Gesture gesture_from_string(std::string_view name) {
  for (int g = 0; g < kGestureCount; ++g)
    if (to_string(static_cast<Gesture>(g)) == name) return static_cast<Gesture>(g);
  throw InvalidInput("unknown gesture '" + std::string(name) + "'");
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::move: return "move";
    case EventKind::left_click: return "left_click";
    case EventKind::right_click: return "right_click";
    case EventKind::scroll_up: return "scroll_up";
    case EventKind::scroll_down: return "scroll_down";
    case EventKind::none: return "none";
  }
  return "none";
}

std::vector<EmgFrame> emg_features(const EmgSamples& raw, double rate_hz, double window_s, double shift_s) {
  if (!(rate_hz > 0.0)) throw InvalidInput("sample rate must be positive");
  if (!(shift_s > 0.0) || window_s < shift_s) throw InvalidInput("need window >= shift > 0");
  const auto window = static_cast<Eigen::Index>(std::llround(window_s * rate_hz));
  const auto shift = static_cast<Eigen::Index>(std::llround(shift_s * rate_hz));
  if (window < 1 || shift < 1) throw InvalidInput("window and shift must cover at least one sample");

  std::vector<EmgFrame> frames;
  for (Eigen::Index start = 0; start + window <= raw.rows(); start += shift) {
    const auto block = raw.middleRows(start, window);
    const Eigen::Matrix<double, 1, kEmgChannels> mean = block.colwise().mean();
    const Eigen::Matrix<double, 1, kEmgChannels> var =
        (block.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(window);
    EmgFrame f;
    f.feature.head<kEmgChannels>() = mean.transpose();
    f.feature.tail<kEmgChannels>() = var.cwiseMax(0.0).cwiseSqrt().transpose();
    f.timestamp = start;
    frames.push_back(f);
  }
  return frames;
}

double GaussianEmission::log_pdf(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd d = x - mean;
  const auto dim = static_cast<double>(mean.size());
  if (diagonal) {
    const Eigen::VectorXd var = covariance.diagonal();
    return -0.5 * (dim * kLog2Pi + var.array().log().sum() + (d.array().square() / var.array()).sum());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericError("emission covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Eigen::VectorXd y = llt.matrixL().solve(d);
  return -0.5 * (dim * kLog2Pi + log_det + y.squaredNorm());
}

double log_likelihood(const GestureHmm& model, const std::vector<EmgFrame>& frames) {
  if (frames.empty()) return 0.0;
  return forward_backward(model, emission_table(model, frames)).log_likelihood;
}

TrainResult baum_welch_train(const std::vector<EmgFrame>& frames, const std::vector<Gesture>& labels,
                             const TrainOptions& options) {
  if (frames.empty()) throw InvalidInput("no training frames");
  if (frames.size() != labels.size()) throw InvalidInput("one label per frame is required");

  TrainResult result;
  GestureHmm& model = result.model;
  std::map<Gesture, int> index;
  for (Gesture g : labels) index.emplace(g, 0);
  for (auto& [g, i] : index) {
    i = static_cast<int>(model.gestures.size());
    model.gestures.push_back(g);
  }
  const int k = model.states();
  const auto n = static_cast<Eigen::Index>(frames.size());

  Eigen::MatrixXd counts = Eigen::MatrixXd::Constant(k, k, options.transition_pseudocount);
  Eigen::VectorXd first = Eigen::VectorXd::Constant(k, options.transition_pseudocount);
  first(index[labels.front()]) += 1.0;
  for (std::size_t t = 0; t + 1 < labels.size(); ++t) counts(index[labels[t]], index[labels[t + 1]]) += 1.0;
  model.initial = first / first.sum();
  model.transition = counts.array().colwise() / counts.rowwise().sum().array();
  std::vector<int> state(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) state[t] = index[labels[t]];
  const Eigen::VectorXd floor = variance_floor(frames, state, k, options);

  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t) w(t) = index[labels[static_cast<std::size_t>(t)]] == i ? 1.0 : 0.0;
    if (w.sum() < 2.0) {
      std::ostringstream os;
      os << "gesture '" << to_string(model.gestures[static_cast<std::size_t>(i)])
         << "' has a single training frame; covariance regularised to the variance floor";
      result.warnings.push_back(os.str());
    }
    model.emissions.push_back(fit_emission(frames, w, options, floor));
  }

  Posteriors post = forward_backward(model, emission_table(model, frames));
  result.log_likelihoods.push_back(post.log_likelihood);
  for (int it = 0; it < options.max_iterations; ++it) {
    GestureHmm candidate = model;
    m_step(candidate, frames, post, options, floor);
    Posteriors next = forward_backward(candidate, emission_table(candidate, frames));
    model = std::move(candidate);
    post = std::move(next);
    result.log_likelihoods.push_back(post.log_likelihood);
    result.iterations = it + 1;
    const auto sz = result.log_likelihoods.size();
    if (std::abs(result.log_likelihoods[sz - 1] - result.log_likelihoods[sz - 2]) < options.tolerance) break;
  }
  return result;
}

DecodeResult forward_decode(const GestureHmm& model, const std::vector<EmgFrame>& frames,
                            const DecodeOptions& options) {
  const int k = model.states();
  const double eps = options.transition_floor;
  const Eigen::MatrixXd log_t =
      safe_log((1.0 - eps) * model.transition + Eigen::MatrixXd::Constant(k, k, eps / k));
  const Eigen::VectorXd log_pi = safe_log((1.0 - eps) * model.initial + Eigen::VectorXd::Constant(k, eps / k));

  DecodeResult out;
  Eigen::VectorXd alpha;  // normalised log filtering distribution
  Eigen::VectorXd tmp(k), emit(k);
  for (const auto& f : frames) {
    if (!f.feature.allFinite()) {
      out.warnings.push_back("skipped non-finite frame at sample " + std::to_string(f.timestamp));
      continue;
    }
    for (int j = 0; j < k; ++j) emit(j) = model.emissions[static_cast<std::size_t>(j)].log_pdf(f.feature);
    Eigen::VectorXd next(k);
    if (alpha.size() == 0) {
      next = log_pi + emit;
    } else {
      for (int j = 0; j < k; ++j) {
        tmp = alpha + log_t.col(j);
        next(j) = emit(j) + log_sum_exp(tmp);
      }
    }
    alpha = next.array() - log_sum_exp(next);
    DecodedFrame d;
    d.timestamp = f.timestamp;
    d.posterior = alpha.array().exp();
    Eigen::Index best = 0;
    alpha.maxCoeff(&best);
    d.gesture = model.gestures[static_cast<std::size_t>(best)];
    out.frames.push_back(std::move(d));
  }
  return out;
}

Eigen::Matrix4d transition_matrix(double eta) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f.topRightCorner<2, 2>() = eta * Eigen::Matrix2d::Identity();
  return f;
}

Eigen::Matrix<double, 4, 2> control_matrix(double eta) {
  Eigen::Matrix<double, 4, 2> g;
  g.topRows<2>() = 0.5 * eta * eta * Eigen::Matrix2d::Identity();
  g.bottomRows<2>() = eta * Eigen::Matrix2d::Identity();
  return g;
}

KalmanState kalman_predict(const KalmanState& state, const Point2& accel, const Eigen::Matrix4d& process_noise) {
  const Eigen::Matrix4d f = transition_matrix(state.eta);
  KalmanState out = state;
  out.mean = f * state.mean + control_matrix(state.eta) * accel;
  const Eigen::Matrix4d p = f * state.covariance * f.transpose() + process_noise;
  out.covariance = 0.5 * (p + p.transpose());
  return out;
}

KalmanState kalman_update(const KalmanState& state, const Eigen::Vector4d& imu,
                          const Eigen::Matrix4d& measurement_noise) {
  const Eigen::Vector4d y = state.arm_length * imu;
  const Eigen::Matrix4d s = state.covariance + measurement_noise;
  Eigen::LLT<Eigen::Matrix4d> llt(s);
  if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-300)
    throw NumericError("innovation covariance is singular");
  const Eigen::Matrix4d gain = llt.solve(state.covariance).transpose();  // P S^-1
  KalmanState out = state;
  out.mean = state.mean + gain * (y - state.mean);
  const Eigen::Matrix4d i_k = Eigen::Matrix4d::Identity() - gain;
  const Eigen::Matrix4d p = i_k * state.covariance * i_k.transpose() + gain * measurement_noise * gain.transpose();
  out.covariance = 0.5 * (p + p.transpose());
  return out;
}

KalmanState kalman_step(const KalmanState& state, const Point2& accel, const std::optional<Eigen::Vector4d>& imu,
                        const KalmanNoise& noise) {
  KalmanState predicted = kalman_predict(state, accel, noise.process);
  if (!imu) return predicted;
  return kalman_update(predicted, *imu, noise.measurement);
}

std::vector<PointerEvent> gestures_to_events(const std::vector<TimedGesture>& gestures,
                                             const std::vector<TimedPointer>& pointer, const EventOptions& options) {
  const int hold = std::max(1, options.min_hold_frames);
  std::vector<PointerEvent> events;
  Gesture current = Gesture::normal;
  int run = 0;
  bool fired = false;
  for (const auto& g : gestures) {
    Point2 pos = Point2::Zero();
    if (!pointer.empty()) {
      auto it = std::lower_bound(pointer.begin(), pointer.end(), g.time,
                                 [](const TimedPointer& p, double t) { return p.time < t; });
      if (it == pointer.end()) {
        --it;
      } else if (it != pointer.begin() && (g.time - std::prev(it)->time) <= (it->time - g.time)) {
        --it;
      }
      pos = it->position;
    }
    if (run > 0 && g.gesture == current) {
      ++run;
    } else {
      current = g.gesture;
      run = 1;
      fired = false;
    }
    EventKind kind = EventKind::move;
    if (current != Gesture::normal && run >= hold && !fired) {
      fired = true;
      switch (current) {
        case Gesture::fist: kind = EventKind::left_click; break;
        case Gesture::spread: kind = EventKind::right_click; break;
        case Gesture::wave_up: kind = EventKind::scroll_up; break;
        case Gesture::wave_down: kind = EventKind::scroll_down; break;
        case Gesture::normal: break;
      }
    }
    events.push_back({kind, pos, g.time});
  }
  return events;
}

Eigen::Matrix<double, kGestureCount, kEmgChannels> gesture_profiles(double separation) {
  // Baseline activity plus one dedicated channel per gesture; any two
  // profiles are exactly `separation` apart.
  Eigen::Matrix<double, kGestureCount, kEmgChannels> m =
      Eigen::Matrix<double, kGestureCount, kEmgChannels>::Constant(2.0);
  for (int g = 0; g < kGestureCount; ++g) m(g, g) += separation / std::sqrt(2.0);
  return m;
}

std::vector<ScriptSegment> training_protocol(double seconds_per_gesture) {
  std::vector<ScriptSegment> s;
  for (int g = 0; g < kGestureCount; ++g) s.push_back({static_cast<Gesture>(g), seconds_per_gesture});
  return s;
}

SyntheticSession synth_session(std::uint64_t seed, const std::vector<ScriptSegment>& script,
                               const PointerScript& pointer, const SynthConfig& config) {
  if (!(config.emg_rate_hz > 0) || !(config.imu_rate_hz > 0)) throw InvalidInput("sample rates must be positive");
  if (!(config.arm_length > 0)) throw InvalidInput("arm length must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  SyntheticSession s;
  s.config = config;
  const auto profiles = gesture_profiles(config.mean_separation);
  double total = 0.0;
  Eigen::Index count = 0;
  for (const auto& seg : script) {
    if (!(seg.duration_s >= 0.0)) throw InvalidInput("script durations must be non-negative");
    count += std::llround(seg.duration_s * config.emg_rate_hz);
    total += seg.duration_s;
  }
  s.emg.resize(count, kEmgChannels);
  Eigen::Index row = 0;
  for (const auto& seg : script) {
    const auto n = std::llround(seg.duration_s * config.emg_rate_hz);
    for (long long i = 0; i < n; ++i, ++row) {
      for (int c = 0; c < kEmgChannels; ++c)
        s.emg(row, c) = profiles(static_cast<int>(seg.gesture), c) + config.emg_noise * unit(rng);
      s.emg_labels.push_back(seg.gesture);
    }
  }

  const double eta = 1.0 / config.imu_rate_hz;
  const auto imu_count = static_cast<Eigen::Index>(std::llround(total * config.imu_rate_hz));
  const Eigen::Matrix4d f = transition_matrix(eta);
  const auto g = control_matrix(eta);
  Eigen::Vector4d x;
  x << pointer.start, pointer.start_velocity;
  s.imu.resize(imu_count, 4);
  std::size_t seg = 0;
  double seg_left = pointer.accelerations.empty() ? 0.0 : pointer.accelerations.front().second;
  for (Eigen::Index k = 0; k < imu_count; ++k) {
    while (seg < pointer.accelerations.size() && seg_left <= 1e-12) {
      ++seg;
      if (seg < pointer.accelerations.size()) seg_left = pointer.accelerations[seg].second;
    }
    const Point2 a = seg < pointer.accelerations.size() ? pointer.accelerations[seg].first : Point2::Zero();
    seg_left -= eta;
    x = f * x + g * a;
    s.accel.push_back(a);
    s.pointer_truth.push_back(x);
    for (int c = 0; c < 4; ++c) s.imu(k, c) = x(c) / config.arm_length + config.imu_noise * unit(rng);
  }
  return s;
}

std::vector<Gesture> frame_labels(const std::vector<EmgFrame>& frames, const std::vector<Gesture>& sample_labels,
                                  double rate_hz, double window_s) {
  const auto half = std::llround(window_s * rate_hz) / 2;
  std::vector<Gesture> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    const auto idx = std::min<long long>(f.timestamp + half, static_cast<long long>(sample_labels.size()) - 1);
    out.push_back(sample_labels[static_cast<std::size_t>(idx)]);
  }
  return out;
}

}  // namespace hsi::decoder
