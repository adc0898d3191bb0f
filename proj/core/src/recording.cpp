#include "hsi/recording.hpp"

#include <fstream>

namespace hsi::decoder {

using nlohmann::json;

namespace {

template <int Cols>
json rows_to_json(const Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor>& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + Cols));
  return out;
}

template <int Cols>
Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> rows_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw InvalidInput(std::string(field) + ": expected an array of samples");
  Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> m(static_cast<Eigen::Index>(j.size()), Cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != Cols)
      throw InvalidInput(std::string(field) + ": sample " + std::to_string(i) + " must have " + std::to_string(Cols) +
                         " values");
    for (int c = 0; c < Cols; ++c) m(static_cast<Eigen::Index>(i), c) = j[i][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json labels_to_json(const std::vector<Gesture>& labels) {
  json out = json::array();
  for (Gesture g : labels) out.push_back(std::string(to_string(g)));
  return out;
}

std::vector<Gesture> labels_from_json(const json& j) {
  std::vector<Gesture> out;
  for (const auto& v : j) out.push_back(gesture_from_string(v.get<std::string>()));
  return out;
}

}  // namespace

json to_json(const Recording& r) {
  json accel = json::array();
  for (const auto& a : r.live_accel) accel.push_back({a.x(), a.y()});
  json live{{"emg", rows_to_json(r.live_emg)}, {"imu", rows_to_json(r.live_imu)}, {"accel", accel}};
  if (!r.live_labels.empty()) live["labels"] = labels_to_json(r.live_labels);
  return {{"format", "hsi-recording/1"},
          {"emg_rate", r.emg_rate_hz},
          {"imu_rate", r.imu_rate_hz},
          {"arm_length", r.arm_length},
          {"window", r.window_s},
          {"shift", r.shift_s},
          {"training", {{"emg", rows_to_json(r.training_emg)}, {"labels", labels_to_json(r.training_labels)}}},
          {"live", live}};
}

Recording recording_from_json(const json& j) {
  Recording r;
  if (j.value("format", "") != "hsi-recording/1") throw InvalidInput("format: expected hsi-recording/1");
  r.emg_rate_hz = j.at("emg_rate").get<double>();
  r.imu_rate_hz = j.at("imu_rate").get<double>();
  r.arm_length = j.value("arm_length", r.arm_length);
  r.window_s = j.value("window", r.window_s);
  r.shift_s = j.value("shift", r.shift_s);
  const json& training = j.at("training");
  r.training_emg = rows_from_json<kEmgChannels>(training.at("emg"), "training.emg");
  r.training_labels = labels_from_json(training.at("labels"));
  if (r.training_labels.size() != static_cast<std::size_t>(r.training_emg.rows()))
    throw InvalidInput("training.labels: one label per EMG sample is required");
  const json& live = j.at("live");
  r.live_emg = rows_from_json<kEmgChannels>(live.at("emg"), "live.emg");
  r.live_imu = rows_from_json<4>(live.at("imu"), "live.imu");
  if (live.contains("accel")) {
    for (const auto& a : live.at("accel")) r.live_accel.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
  }
  if (live.contains("labels")) r.live_labels = labels_from_json(live.at("labels"));
  return r;
}

Recording load_recording(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open recording " + path.string());
  return recording_from_json(json::parse(in));
}

Recording synth_recording(std::uint64_t seed, const std::vector<ScriptSegment>& live_script,
                          const PointerScript& pointer, const SynthConfig& config) {
  const SyntheticSession train = synth_session(seed, training_protocol(), {}, config);
  const SyntheticSession live = synth_session(seed + 1, live_script, pointer, config);
  Recording r;
  r.emg_rate_hz = config.emg_rate_hz;
  r.imu_rate_hz = config.imu_rate_hz;
  r.arm_length = config.arm_length;
  r.training_emg = train.emg;
  r.training_labels = train.emg_labels;
  r.live_emg = live.emg;
  r.live_labels = live.emg_labels;
  r.live_imu = live.imu;
  r.live_accel = live.accel;
  return r;
}

KalmanNoise default_pointer_noise() {
  KalmanNoise n;
  n.process = 1e-4 * Eigen::Matrix4d::Identity();
  n.measurement = 1e-3 * Eigen::Matrix4d::Identity();
  return n;
}

DecodeReport decode_recording(const Recording& r, const KalmanNoise& noise, const TrainOptions& train,
                              const EventOptions& event_options) {
  DecodeReport report;
  const auto train_frames = emg_features(r.training_emg, r.emg_rate_hz, r.window_s, r.shift_s);
  report.training = baum_welch_train(train_frames, frame_labels(train_frames, r.training_labels, r.emg_rate_hz, r.window_s), train);

  const auto live_frames = emg_features(r.live_emg, r.emg_rate_hz, r.window_s, r.shift_s);
  report.decoded = forward_decode(report.training.model, live_frames);

  if (!r.live_labels.empty() && !report.decoded.frames.empty()) {
    const auto truth = frame_labels(live_frames, r.live_labels, r.emg_rate_hz, r.window_s);
    std::size_t hits = 0, k = 0;
    for (std::size_t i = 0; i < live_frames.size() && k < report.decoded.frames.size(); ++i) {
      if (live_frames[i].timestamp != report.decoded.frames[k].timestamp) continue;
      hits += truth[i] == report.decoded.frames[k].gesture ? 1 : 0;
      ++k;
    }
    report.accuracy = static_cast<double>(hits) / static_cast<double>(report.decoded.frames.size());
  }

  KalmanState state;
  state.eta = 1.0 / r.imu_rate_hz;
  state.arm_length = r.arm_length;
  if (r.live_imu.rows() > 0) state.mean = r.arm_length * r.live_imu.row(0).transpose();
  std::vector<TimedPointer> pointer;
  for (Eigen::Index k = 0; k < r.live_imu.rows(); ++k) {
    const Point2 a = static_cast<std::size_t>(k) < r.live_accel.size() ? r.live_accel[static_cast<std::size_t>(k)]
                                                                       : Point2::Zero();
    state = kalman_step(state, a, Eigen::Vector4d(r.live_imu.row(k).transpose()), noise);
    report.pointer.push_back(state);
    pointer.push_back({static_cast<double>(k + 1) / r.imu_rate_hz, state.position()});
  }

  std::vector<TimedGesture> gestures;
  const double window_samples = std::round(r.window_s * r.emg_rate_hz);
  for (const auto& f : report.decoded.frames)
    gestures.push_back({(static_cast<double>(f.timestamp) + window_samples) / r.emg_rate_hz, f.gesture});
  report.events = gestures_to_events(gestures, pointer, event_options);
  return report;
}

}  // namespace hsi::decoder
