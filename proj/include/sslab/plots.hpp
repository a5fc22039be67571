#pragma once

#include <span>
#include <string>
#include <vector>

#include "sslab/ensemble.hpp"
#include "sslab/train.hpp"

namespace sslab {

/// Six panels (accuracy, BCE, AUC for train and val) against epoch, with a
/// dashed vertical line at `best_epoch` (0: none).
std::string training_curves_svg(std::span<const EpochRecord> records, std::size_t best_epoch,
                                const std::string& title);

struct ScatterPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
  std::size_t n = 0;  ///< marker area is proportional to n
};

std::string scatter_svg(std::span<const ScatterPoint> points, const std::string& x_label, const std::string& y_label,
                        const std::string& title);

/// Mean test AUC against ensemble size with interval bars.
std::string sweep_svg(std::span<const SweepPoint> points, const std::string& title);

}  // namespace sslab
