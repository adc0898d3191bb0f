#pragma once

#include "hsi/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hsi::decoder {

inline constexpr int kEmgChannels = 8;
inline constexpr int kFeatureDim = 2 * kEmgChannels;
inline constexpr int kGestureCount = 5;

enum class Gesture : int { normal = 0, fist = 1, spread = 2, wave_up = 3, wave_down = 4 };

std::string_view to_string(Gesture g);
Gesture gesture_from_string(std::string_view name);

using EmgSamples = Eigen::Matrix<double, Eigen::Dynamic, kEmgChannels, Eigen::RowMajor>;
using ImuSamples = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;
using Feature = Eigen::Matrix<double, kFeatureDim, 1>;

/// Per-channel mean and standard deviation over one sliding window.
struct EmgFrame {
  Feature feature;
  std::int64_t timestamp = 0;  ///< index of the first sample in the window
};

/// Frame k covers samples [k*shift, k*shift + window). A stream shorter than
/// one window yields no frames.
std::vector<EmgFrame> emg_features(const EmgSamples& raw, double rate_hz, double window_s = 1.0,
                                   double shift_s = 0.2);

struct GaussianEmission {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  bool diagonal = true;

  double log_pdf(const Eigen::VectorXd& x) const;
};

/// Hidden Markov model whose states are gestures.
struct GestureHmm {
  std::vector<Gesture> gestures;  ///< gesture emitted by each state
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;     ///< row stochastic
  std::vector<GaussianEmission> emissions;

  int states() const { return static_cast<int>(gestures.size()); }
};

struct TrainOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;
  double variance_floor = 1e-6;            ///< absolute lower bound on each emission variance
  double relative_variance_floor = 1.0;    ///< fraction of the within-gesture pooled variance
  bool full_covariance = false;
  double transition_pseudocount = 1.0;  ///< added when initialising T from labels
};

struct TrainResult {
  GestureHmm model;
  std::vector<double> log_likelihoods;  ///< one per E-step, starting at the labelled initialisation
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// Initialises one state per distinct label from the labelled frames, then
/// refines all parameters with Baum-Welch.
TrainResult baum_welch_train(const std::vector<EmgFrame>& frames, const std::vector<Gesture>& labels,
                             const TrainOptions& options = {});

/// Log-likelihood of a frame sequence under the model (scaled forward pass).
double log_likelihood(const GestureHmm& model, const std::vector<EmgFrame>& frames);

struct DecodeOptions {
  /// Mixes the transition and initial distributions with a uniform one so
  /// that transitions never seen in training stay reachable.
  double transition_floor = 1e-6;
};

struct DecodedFrame {
  std::int64_t timestamp = 0;
  Gesture gesture = Gesture::normal;
  Eigen::VectorXd posterior;  ///< filtering distribution over states
};

struct DecodeResult {
  std::vector<DecodedFrame> frames;
  std::vector<std::string> warnings;  ///< one per skipped non-finite frame
};

/// Causal forward filtering in the log domain; each frame is labelled with
/// the argmax of the normalised forward distribution.
DecodeResult forward_decode(const GestureHmm& model, const std::vector<EmgFrame>& frames,
                            const DecodeOptions& options = {});

/// Pointer position and velocity, state = [px, py, vx, vy].
struct KalmanState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double eta = 0.02;        ///< update time constant
  double arm_length = 1.0;  ///< scales IMU observations into pointer state

  Point2 position() const { return mean.head<2>(); }
  Point2 velocity() const { return mean.tail<2>(); }
};

struct KalmanNoise {
  Eigen::Matrix4d process = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d measurement = Eigen::Matrix4d::Zero();
};

Eigen::Matrix4d transition_matrix(double eta);
Eigen::Matrix<double, 4, 2> control_matrix(double eta);

/// Double-integrator prediction driven by `accel`.
KalmanState kalman_predict(const KalmanState& state, const Point2& accel, const Eigen::Matrix4d& process_noise);

/// Update with y = arm_length * imu observing the full state. Throws
/// NumericError when the innovation covariance is singular.
KalmanState kalman_update(const KalmanState& state, const Eigen::Vector4d& imu,
                          const Eigen::Matrix4d& measurement_noise);

/// Predict, then update when an observation is present.
KalmanState kalman_step(const KalmanState& state, const Point2& accel, const std::optional<Eigen::Vector4d>& imu,
                        const KalmanNoise& noise);

enum class EventKind { move, left_click, right_click, scroll_up, scroll_down, none };

std::string_view to_string(EventKind k);

struct PointerEvent {
  EventKind kind = EventKind::none;
  Point2 position = Point2::Zero();
  double time = 0.0;
};

struct TimedGesture {
  double time = 0.0;
  Gesture gesture = Gesture::normal;
};

struct TimedPointer {
  double time = 0.0;
  Point2 position = Point2::Zero();
};

struct EventOptions {
  int min_hold_frames = 3;  ///< frames a gesture must persist before it fires
};

/// fist -> left click, spread -> right click, wave up/down -> scroll; every
/// frame also yields a move at the nearest pointer sample. Actions fire once
/// when a gesture has been held for `min_hold_frames` consecutive frames.
std::vector<PointerEvent> gestures_to_events(const std::vector<TimedGesture>& gestures,
                                             const std::vector<TimedPointer>& pointer,
                                             const EventOptions& options = {});

struct ScriptSegment {
  Gesture gesture = Gesture::normal;
  double duration_s = 1.0;
};

struct SynthConfig {
  double emg_rate_hz = 200.0;
  double imu_rate_hz = 50.0;
  double emg_noise = 1.0;       ///< per-sample EMG standard deviation
  double mean_separation = 5.0; ///< distance between gesture channel means
  double imu_noise = 0.0;
  double arm_length = 0.6;
};

struct PointerScript {
  Point2 start = Point2::Zero();
  Point2 start_velocity = Point2::Zero();
  /// Piecewise-constant accelerations, each held for `duration_s`.
  std::vector<std::pair<Point2, double>> accelerations;
};

struct SyntheticSession {
  SynthConfig config;
  EmgSamples emg;
  std::vector<Gesture> emg_labels;  ///< ground-truth gesture per EMG sample
  ImuSamples imu;                   ///< o_imu per IMU sample
  std::vector<Point2> accel;        ///< control input per IMU sample
  std::vector<Eigen::Vector4d> pointer_truth;
};

/// Channel-mean profile of each gesture used by the generator.
Eigen::Matrix<double, kGestureCount, kEmgChannels> gesture_profiles(double separation);

/// The fixed-order training protocol: every gesture once, `seconds` each.
std::vector<ScriptSegment> training_protocol(double seconds_per_gesture = 12.0);

SyntheticSession synth_session(std::uint64_t seed, const std::vector<ScriptSegment>& script,
                               const PointerScript& pointer = {}, const SynthConfig& config = {});

/// Ground-truth label of each frame: the gesture at the window centre.
std::vector<Gesture> frame_labels(const std::vector<EmgFrame>& frames, const std::vector<Gesture>& sample_labels,
                                  double rate_hz, double window_s = 1.0);

}  // namespace hsi::decoder
