#include "distill/plot.hpp"

#include "distill/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace distill {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 640;

// Ego frame to image: +x points up, +y points left.
struct BevFrame {
  double scale = 4.0;  // px per meter
  double ox = kWidth / 2.0;
  double oy = kHeight * 0.75;
  std::pair<double, double> operator()(const Vec2& p) const { return {ox - p.y() * scale, oy - p.x() * scale}; }
};

std::string points_attr(const std::vector<Vec2>& pts, const BevFrame& f) {
  std::ostringstream out;
  char buf[64];
  for (const Vec2& p : pts) {
    const auto [x, y] = f(p);
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
    out << buf;
  }
  return out.str();
}

const char* label_color(PolylineLabel l) {
  switch (l) {
    case PolylineLabel::LaneCenter: return "#9e9e9e";
    case PolylineLabel::LaneBoundary: return "#616161";
    case PolylineLabel::RoadEdge: return "#212121";
  }
  return "#000000";
}

std::string header(int w, int h) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out.str();
}

}  // namespace

std::string render_bev_svg(const Scene& scene, const Trajectory* predicted) {
  const BevFrame f;
  std::ostringstream out;
  out << header(kWidth, kHeight);
  for (const MapPolyline& pl : scene.map) {
    if (!pl.valid) continue;
    out << "<polyline class=\"map " << to_string(pl.label) << "\" fill=\"none\" stroke=\"" << label_color(pl.label)
        << "\" stroke-width=\"1\" points=\"" << points_attr(pl.points, f) << "\"/>\n";
  }
  for (const AgentTrack& t : scene.agent_tracks) {
    if (!t.valid()) continue;
    const AgentState& s = t.current();
    const Vec2 fwd(std::cos(s.yaw), std::sin(s.yaw));
    const Vec2 left(-fwd.y(), fwd.x());
    const Vec2 hl = 0.5 * s.dims.x() * fwd;
    const Vec2 hw = 0.5 * s.dims.y() * left;
    out << "<polygon class=\"agent\" fill=\"#90caf9\" stroke=\"#1565c0\" points=\""
        << points_attr({s.position + hl + hw, s.position + hl - hw, s.position - hl - hw, s.position - hl + hw}, f)
        << "\"/>\n";
  }
  std::vector<Vec2> expert{Vec2::Zero()};
  expert.insert(expert.end(), scene.expert.future_traj.begin(), scene.expert.future_traj.end());
  out << "<polyline class=\"trajectory expert\" fill=\"none\" stroke=\"green\" stroke-width=\"2\" points=\""
      << points_attr(expert, f) << "\"/>\n";
  if (predicted != nullptr) {
    std::vector<Vec2> pred{Vec2::Zero()};
    pred.insert(pred.end(), predicted->begin(), predicted->end());
    out << "<polyline class=\"trajectory predicted\" fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\""
        << points_attr(pred, f) << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) return Eigen::MatrixXd(0, 2);
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<Eigen::Index>(1, rows.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index d = cov.rows();
  Eigen::MatrixXd basis(d, 2);
  basis.col(0) = eig.eigenvectors().col(d - 1);
  basis.col(1) = d > 1 ? Eigen::VectorXd(eig.eigenvectors().col(d - 2)) : Eigen::VectorXd::Zero(d);
  // Fix the sign so the projection is reproducible.
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
  return centered * basis;
}

std::string render_modes_svg(const std::vector<ModeFeatures>& features) {
  Eigen::Index total = 0, dim = 0;
  for (const auto& f : features) {
    total += f.features.rows();
    dim = f.features.cols();
  }
  Eigen::MatrixXd all(total, dim);
  Eigen::Index at = 0;
  for (const auto& f : features) {
    all.middleRows(at, f.features.rows()) = f.features;
    at += f.features.rows();
  }
  const Eigen::MatrixXd proj = pca_2d(all);
  const double lo_x = total ? proj.col(0).minCoeff() : 0.0, hi_x = total ? proj.col(0).maxCoeff() : 1.0;
  const double lo_y = total ? proj.col(1).minCoeff() : 0.0, hi_y = total ? proj.col(1).maxCoeff() : 1.0;
  auto sx = [&](double v) { return 40.0 + (kWidth - 80.0) * (v - lo_x) / std::max(1e-12, hi_x - lo_x); };
  auto sy = [&](double v) { return kHeight - 40.0 - (kHeight - 80.0) * (v - lo_y) / std::max(1e-12, hi_y - lo_y); };

  std::ostringstream out;
  out << header(kWidth, kHeight);
  at = 0;
  char buf[160];
  for (std::size_t s = 0; s < features.size(); ++s) {
    const double hue = std::fmod(137.508 * static_cast<double>(s), 360.0);
    out << "<g class=\"scene\" data-scene=\"" << features[s].scene_id << "\">\n";
    for (Eigen::Index m = 0; m < features[s].features.rows(); ++m, ++at) {
      std::snprintf(buf, sizeof buf, "<circle class=\"mode\" cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"hsl(%.0f,70%%,45%%)\"/>\n",
                    sx(proj(at, 0)), sy(proj(at, 1)), hue);
      out << buf;
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_losses_svg(const std::vector<LossReport>& history) {
  const std::vector<std::pair<const char*, double LossReport::*>> terms{
      {"l_reg", &LossReport::l_reg},   {"l_status", &LossReport::l_status}, {"l_cls", &LossReport::l_cls},
      {"l_il", &LossReport::l_il},     {"l_rl", &LossReport::l_rl},         {"l_ds", &LossReport::l_ds},
      {"l_en", &LossReport::l_en},     {"l_de", &LossReport::l_de},         {"l_cls_kd", &LossReport::l_cls_kd},
      {"l_reg_kd", &LossReport::l_reg_kd}, {"l_kd", &LossReport::l_kd},     {"l_t", &LossReport::l_t}};
  double hi = 1e-12;
  for (const auto& r : history)
    for (const auto& [name, field] : terms) hi = std::max(hi, r.*field);
  const double n = static_cast<double>(std::max<std::size_t>(2, history.size()));
  auto sx = [&](std::size_t i) { return 60.0 + (kWidth - 100.0) * static_cast<double>(i) / (n - 1.0); };
  auto sy = [&](double v) { return kHeight - 40.0 - (kHeight - 80.0) * std::max(0.0, v) / hi; };

  std::ostringstream out;
  out << header(kWidth, kHeight);
  char buf[96];
  int k = 0;
  for (const auto& [name, field] : terms) {
    const double hue = 30.0 * k++;
    out << "<polyline class=\"loss\" data-term=\"" << name << "\" fill=\"none\" stroke=\"hsl(" << hue
        << ",70%,40%)\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < history.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(i), sy(history[i].*field));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" font-size=\"11\" fill=\"hsl(%.0f,70%%,40%%)\">", kWidth - 90,
                  20 + 14 * (k - 1), hue);
    out << buf << name << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace distill
