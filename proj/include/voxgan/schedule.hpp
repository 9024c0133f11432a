#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace voxgan {

enum class Phase : std::uint32_t { fade_in = 0, stabilize = 1 };

std::string to_string(Phase phase);

// Lower rate applied during the last `fraction` of the target stage's
// stabilize phase.
struct LateLearningRate {
  double rate = 1e-4;
  double fraction = 0.25;
};

enum class ScheduleEvent {
  none,
  phase_completed,  // fade_in -> stabilize
  stage_started,    // stabilize -> next stage's fade_in
  finished,         // target stage's stabilize completed
};

// Progressive-growing state machine. Stage 0 only stabilizes; every later
// stage fades in and then stabilizes, each phase lasting reals_per_phase
// real volumes.
struct TrainSchedule {
  int stage = 0;
  int target_stage = 3;
  Phase phase = Phase::stabilize;
  std::int64_t reals_shown_in_phase = 0;
  std::int64_t reals_per_phase = 1'000'000;
  // Indexed by stage; the last entry covers higher stages.
  std::vector<double> lr_table{3e-4, 3e-4, 6e-4, 6e-4};
  std::optional<LateLearningRate> late_lr = LateLearningRate{};
  // Indexed by stage; the last entry covers higher stages.
  std::vector<int> batch_sizes{16, 16, 8, 4};
  bool finished = false;

  float alpha() const;
  double learning_rate() const;
  int batch_size() const;
  int resolution() const;

  // Counts n_reals more real volumes; crossing the end of a phase moves to
  // the next phase (the overshoot is discarded).
  ScheduleEvent advance(std::int64_t n_reals);

  // Lists every violated constraint; empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;
};

}  // namespace voxgan
