#include "citl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace citl {

double dtw_distance(const NavGraph& graph, std::span<const NodeId> reference, std::span<const NodeId> query) {
  const std::size_t n = reference.size(), m = query.size();
  const double inf = std::numeric_limits<double>::infinity();
  // Two rolling rows of the (n+1) x (m+1) table.
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = graph.geodesic(reference[i - 1], query[j - 1]);
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

MetricReport evaluate_episode(const NavGraph& graph, const Trajectory& predicted, const Trajectory& reference,
                              double success_radius_m) {
  MetricReport r;
  const NodeId goal = reference.end();
  r.tl = predicted.length_m;
  r.ne = graph.geodesic(predicted.end(), goal);
  r.sr = r.ne <= success_radius_m ? 1.0 : 0.0;

  const double ref_len = reference.length_m;
  const double denom = std::max(predicted.length_m, ref_len);
  r.spl = denom > 0.0 ? r.sr * ref_len / denom : r.sr;

  const double dtw = dtw_distance(graph, reference.nodes, predicted.nodes);
  r.ndtw = std::exp(-dtw / (static_cast<double>(reference.nodes.size()) * success_radius_m));
  r.sdtw = r.sr * r.ndtw;

  // Path coverage of the reference by the prediction, then the length score.
  double pc = 0.0;
  for (NodeId ref_node : reference.nodes) {
    double nearest = std::numeric_limits<double>::infinity();
    for (NodeId p : predicted.nodes) nearest = std::min(nearest, graph.geodesic(ref_node, p));
    pc += std::exp(-nearest / success_radius_m);
  }
  pc /= static_cast<double>(reference.nodes.size());
  const double expected_len = pc * ref_len;
  const double ls_denom = expected_len + std::abs(expected_len - predicted.length_m);
  const double ls = ls_denom > 0.0 ? expected_len / ls_denom : 1.0;
  r.cls = pc * ls;
  return r;
}

MetricReport aggregate(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.tl += r.tl;
    m.ne += r.ne;
    m.sr += r.sr;
    m.spl += r.spl;
    m.ndtw += r.ndtw;
    m.cls += r.cls;
    m.sdtw += r.sdtw;
  }
  const double k = 1.0 / static_cast<double>(reports.size());
  m.tl *= k;
  m.ne *= k;
  m.sr *= k;
  m.spl *= k;
  m.ndtw *= k;
  m.cls *= k;
  m.sdtw *= k;
  return m;
}

void write_metric_csv_header(std::ostream& out) { out << "TL,NE,SR,SPL,nDTW,CLS,SDTW\n"; }

void write_metric_csv_row(std::ostream& out, const MetricReport& r) {
  out << r.tl << ',' << r.ne << ',' << r.sr << ',' << r.spl << ',' << r.ndtw << ',' << r.cls << ',' << r.sdtw << '\n';
}

}  // namespace citl
