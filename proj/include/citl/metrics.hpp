#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "citl/nav_graph.hpp"

namespace citl {

inline constexpr double kDefaultSuccessRadius = 3.0;

/// Per-episode navigation metrics. TL and NE are meters; the rest lie in [0, 1].
struct MetricReport {
  double tl = 0.0;    // trajectory length
  double ne = 0.0;    // navigation error: geodesic distance from final node to goal
  double sr = 0.0;    // success
  double spl = 0.0;   // success weighted by path length
  double ndtw = 0.0;  // normalized dynamic time warping
  double cls = 0.0;   // coverage weighted by length score
  double sdtw = 0.0;  // success weighted nDTW
};

/// DTW between two node sequences using geodesic distance as the local cost.
double dtw_distance(const NavGraph& graph, std::span<const NodeId> reference, std::span<const NodeId> query);

MetricReport evaluate_episode(const NavGraph& graph, const Trajectory& predicted, const Trajectory& reference,
                              double success_radius_m = kDefaultSuccessRadius);

/// Arithmetic mean of every field.
MetricReport aggregate(std::span<const MetricReport> reports);

void write_metric_csv_header(std::ostream& out);
void write_metric_csv_row(std::ostream& out, const MetricReport& r);

}  // namespace citl
