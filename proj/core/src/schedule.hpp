#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace cmil::detail {

// Shared stopping rule of the trainers. A window of `patience` epochs whose
// best loss improved by less than `tolerance` (relative) counts as a stall.
// Each stall cuts the step size by `decay` until `max_cuts` is used up; the
// next stall ends training.
class PlateauSchedule {
 public:
  PlateauSchedule(double rate, double decay, int max_cuts, int patience, double tolerance, double initial_loss)
      : rate_(rate), decay_(decay), cuts_left_(max_cuts), patience_(patience), tolerance_(tolerance),
        best_(initial_loss), window_start_(initial_loss) {}

  double rate() const { return rate_; }

  /// Records one epoch's loss; true means stop.
  bool update(double loss) {
    best_ = std::min(best_, loss);
    if (++epochs_in_window_ < patience_) return false;
    const double rel = (window_start_ - best_) / std::max(std::abs(window_start_), 1.0);
    window_start_ = best_;
    epochs_in_window_ = 0;
    if (rel >= tolerance_) return false;
    if (cuts_left_ == 0) return true;
    --cuts_left_;
    rate_ *= decay_;
    return false;
  }

 private:
  double rate_;
  double decay_;
  int cuts_left_;
  int patience_;
  double tolerance_;
  double best_;
  double window_start_;
  int epochs_in_window_ = 0;
};

}  // namespace cmil::detail
