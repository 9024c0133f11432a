#include "voxgan/schedule.hpp"

#include <algorithm>

#include "voxgan/error.hpp"
#include "voxgan/nets.hpp"

namespace voxgan {

std::string to_string(Phase phase) {
  return phase == Phase::fade_in ? "fade_in" : "stabilize";
}

float TrainSchedule::alpha() const {
  if (phase == Phase::stabilize) return 1.0f;
  const double a = static_cast<double>(reals_shown_in_phase) /
                   static_cast<double>(reals_per_phase);
  return static_cast<float>(std::min(1.0, a));
}

double TrainSchedule::learning_rate() const {
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(stage),
                                         lr_table.size() - 1);
  if (late_lr && stage == target_stage && phase == Phase::stabilize) {
    const double boundary =
        (1.0 - late_lr->fraction) * static_cast<double>(reals_per_phase);
    if (static_cast<double>(reals_shown_in_phase) >= boundary) {
      return late_lr->rate;
    }
  }
  return lr_table[idx];
}

int TrainSchedule::batch_size() const {
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(stage),
                                         batch_sizes.size() - 1);
  return batch_sizes[idx];
}

int TrainSchedule::resolution() const {
  return StageConfig::resolution_of(stage);
}

ScheduleEvent TrainSchedule::advance(std::int64_t n_reals) {
  if (finished) throw ValueError("advance: schedule already finished");
  if (n_reals <= 0) throw ValueError("advance: n_reals must be positive");
  reals_shown_in_phase += n_reals;
  if (reals_shown_in_phase < reals_per_phase) return ScheduleEvent::none;
  reals_shown_in_phase = 0;
  if (phase == Phase::fade_in) {
    phase = Phase::stabilize;
    return ScheduleEvent::phase_completed;
  }
  if (stage >= target_stage) {
    finished = true;
    return ScheduleEvent::finished;
  }
  ++stage;
  phase = Phase::fade_in;
  return ScheduleEvent::stage_started;
}

std::vector<std::string> TrainSchedule::problems() const {
  std::vector<std::string> out;
  if (target_stage < 0) out.push_back("target_stage must be >= 0");
  if (stage < 0 || stage > target_stage) {
    out.push_back("stage must lie in [0, target_stage]");
  }
  if (stage == 0 && phase == Phase::fade_in) {
    out.push_back("stage 0 has no fade_in phase");
  }
  if (reals_per_phase <= 0) out.push_back("reals_per_phase must be positive");
  if (reals_shown_in_phase < 0 || reals_shown_in_phase >= reals_per_phase) {
    if (reals_per_phase > 0) {
      out.push_back("reals_shown_in_phase must lie in [0, reals_per_phase)");
    }
  }
  if (lr_table.empty()) out.push_back("lr_table must not be empty");
  for (double lr : lr_table) {
    if (!(lr > 0.0)) {
      out.push_back("lr_table entries must be positive");
      break;
    }
  }
  if (late_lr) {
    if (!(late_lr->rate > 0.0)) out.push_back("late_lr rate must be positive");
    if (!(late_lr->fraction > 0.0 && late_lr->fraction <= 1.0)) {
      out.push_back("late_lr fraction must lie in (0, 1]");
    }
  }
  if (batch_sizes.empty()) out.push_back("batch_sizes must not be empty");
  for (int b : batch_sizes) {
    if (b < 1) {
      out.push_back("batch sizes must be >= 1");
      break;
    }
  }
  return out;
}

void TrainSchedule::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid schedule:";
  for (const auto& s : p) msg += "\n  " + s;
  throw ValueError(msg);
}

}  // namespace voxgan
