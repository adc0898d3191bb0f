#pragma once

#include "hsi/harness/episode.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string_view>
#include <thread>

namespace hsi::harness {

struct SessionOptions {
  int update_every = 10;                      ///< rounds between StateUpdate messages
  std::chrono::microseconds round_delay{0};   ///< pacing for live viewers
};

/// One operator session of the newline-delimited JSON protocol.
///
/// Client -> server: AddVertex{x,y}, ClearShape, SetRotation{rad},
/// SetScale{s}, SetCentroid{x,y}, Commit, PointerEvent{kind,x,y}.
/// Server -> client: Ack{for}, PlanPreview{shapes,modes}, StateUpdate{t,
/// positions, e_f, e_c, segment, mode}, Done, Error{msg}.
///
/// Planning and execution run on a worker thread; a Commit while executing
/// cancels the run and replans from the swarm's current state.
class Session {
 public:
  using Sink = std::function<void(const nlohmann::json&)>;

  Session(Scenario base, Sink sink, SessionOptions options = {});
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Parses and handles one framed message. Malformed input produces an
  /// Error reply; the session stays open.
  void handle_line(std::string_view line);
  void handle(const nlohmann::json& message);

  /// Blocks until the current execution (if any) has finished.
  void wait_idle();
  bool executing() const { return running_.load(); }

  controller::SwarmState swarm() const;

 private:
  void send(const nlohmann::json& message);
  void error(const std::string& msg);
  void commit();
  void cancel_worker();
  void work(geom::Intention intention, controller::SwarmState state, planner::HidState current);

  Scenario base_;
  Sink sink_;
  SessionOptions options_;

  std::mutex send_mutex_;
  mutable std::mutex state_mutex_;
  std::vector<Point2> draft_vertices_;
  double draft_rotation_ = 0.0;
  double draft_scale_ = 1.0;
  Point2 draft_centroid_ = Point2::Zero();
  controller::SwarmState swarm_;
  planner::HidState hid_;

  std::thread worker_;
  std::atomic<bool> cancel_{false};
  std::atomic<bool> running_{false};
  long long rounds_ = 0;
};

}  // namespace hsi::harness
