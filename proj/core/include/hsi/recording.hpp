#pragma once

#include "hsi/decoder.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace hsi::decoder {

/// A replayable armband recording: a labelled fixed-order training part and
/// a live part with EMG, IMU and the arm-orientation control input.
struct Recording {
  double emg_rate_hz = 200.0;
  double imu_rate_hz = 50.0;
  double arm_length = 0.6;
  double window_s = 1.0;
  double shift_s = 0.2;
  EmgSamples training_emg;
  std::vector<Gesture> training_labels;  ///< per sample
  EmgSamples live_emg;
  std::vector<Gesture> live_labels;      ///< per sample; may be empty
  ImuSamples live_imu;
  std::vector<Point2> live_accel;
};

nlohmann::json to_json(const Recording& r);
Recording recording_from_json(const nlohmann::json& j);
Recording load_recording(const std::filesystem::path& path);

/// Training protocol plus a live session, both synthetic.
Recording synth_recording(std::uint64_t seed, const std::vector<ScriptSegment>& live_script,
                          const PointerScript& pointer = {}, const SynthConfig& config = {});

struct DecodeReport {
  TrainResult training;
  DecodeResult decoded;
  std::vector<KalmanState> pointer;  ///< one per IMU sample
  std::vector<PointerEvent> events;
  std::optional<double> accuracy;    ///< when live labels are present
};

/// Small isotropic process and measurement noise suited to the synthetic IMU.
KalmanNoise default_pointer_noise();

/// features -> Baum-Welch on the training part -> forward decoding of the
/// live part, Kalman pointer tracking, gesture -> pointer events.
DecodeReport decode_recording(const Recording& r, const KalmanNoise& noise = default_pointer_noise(),
                              const TrainOptions& train = {},
                              const EventOptions& events = {});

}  // namespace hsi::decoder
