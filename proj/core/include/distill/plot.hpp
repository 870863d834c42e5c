#pragma once

#include "distill/metrics.hpp"
#include "distill/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace distill {

// Bird's-eye view: map polylines, current agent boxes, expert plan in green and
// the prediction (if any) in red.
std::string render_bev_svg(const Scene& scene, const Trajectory* predicted);

// First two principal components of the exported mode features, one point per mode.
std::string render_modes_svg(const std::vector<ModeFeatures>& features);

// One curve per loss term over epochs.
std::string render_losses_svg(const std::vector<LossReport>& history);

// Projects rows onto their first two principal components (rows x 2).
Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace distill
