#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "citl/contrast.hpp"
#include "citl/errors.hpp"
#include "citl/harness.hpp"
#include "citl/metrics.hpp"
#include "citl/nav_graph.hpp"
#include "citl/run_config.hpp"

namespace py = pybind11;
using namespace citl;

namespace {

RunConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return RunConfig::from_json(j);
}

py::dict metrics_dict(const MetricReport& r) {
  py::dict d;
  d["TL"] = r.tl;
  d["NE"] = r.ne;
  d["SR"] = r.sr;
  d["SPL"] = r.spl;
  d["nDTW"] = r.ndtw;
  d["CLS"] = r.cls;
  d["SDTW"] = r.sdtw;
  return d;
}

std::vector<std::vector<NodeId>> node_lists(const std::vector<Trajectory>& ts) {
  std::vector<std::vector<NodeId>> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(t.nodes);
  return out;
}

}  // namespace

PYBIND11_MODULE(_citl, m) {
  m.doc() = "Contrastive instruction-trajectory learning core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "circle_loss",
      [](const std::vector<double>& sim_p, const std::vector<double>& sim_n, double margin, double gamma) {
        ad::Tape tape;
        std::vector<ad::Var> p, n;
        for (double s : sim_p) p.push_back(tape.scalar_constant(s));
        for (double s : sim_n) n.push_back(tape.scalar_constant(s));
        return circle_loss(tape, p, n, MarginConfig{margin, gamma}).scalar();
      },
      py::arg("sim_p"), py::arg("sim_n"), py::arg("margin") = 0.25, py::arg("gamma") = 32.0);

  m.def(
      "info_nce",
      [](const std::vector<double>& sim_p, const std::vector<double>& sim_n, double temperature) {
        ad::Tape tape;
        std::vector<ad::Var> p, n;
        for (double s : sim_p) p.push_back(tape.scalar_constant(s));
        for (double s : sim_n) n.push_back(tape.scalar_constant(s));
        return info_nce_multi(tape, p, n, temperature).scalar();
      },
      py::arg("sim_p"), py::arg("sim_n"), py::arg("temperature") = 0.1);

  m.def(
      "pair_mining",
      [](const std::vector<double>& sim_p, const std::vector<double>& sim_n, double margin) {
        const MinedPairs r = pair_mining(sim_p, sim_n, margin);
        py::dict d;
        d["positives"] = r.kept_positives;
        d["negatives"] = r.kept_negatives;
        d["false_negatives"] = r.discarded_false_negatives;
        d["easy_negatives"] = r.discarded_easy_negatives;
        d["easy_positives"] = r.discarded_easy_positives;
        d["skipped"] = r.anchor_skipped;
        return d;
      },
      py::arg("sim_p"), py::arg("sim_n"), py::arg("margin") = 0.25);

  py::class_<NavGraph>(m, "NavGraph")
      .def_static("from_json", [](const std::string& s) { return NavGraph::from_json(nlohmann::json::parse(s)); })
      .def_static("load", [](const std::string& path) { return NavGraph::load(path); })
      .def("to_json", [](const NavGraph& g) { return g.to_json().dump(); })
      .def("__len__", &NavGraph::size)
      .def("neighbors",
           [](const NavGraph& g, NodeId id) {
             const auto n = g.neighbors(id);
             return std::vector<NodeId>(n.begin(), n.end());
           })
      .def("edge_length", &NavGraph::edge_length)
      .def("geodesic", &NavGraph::geodesic)
      .def("hop_distance", &NavGraph::hop_distance)
      .def("shortest_path", [](const NavGraph& g, NodeId s, NodeId t) { return shortest_path(g, s, t).nodes; })
      .def(
          "alternatives",
          [](const NavGraph& g, NodeId s, NodeId t, int hop_cap, std::size_t max_count, std::uint64_t seed) {
            return node_lists(enumerate_alternatives(g, s, t, hop_cap, max_count, seed));
          },
          py::arg("start"), py::arg("goal"), py::arg("hop_cap"), py::arg("max_count") = 256, py::arg("seed") = 0)
      .def(
          "partition",
          [](const NavGraph& g, NodeId s, NodeId t, double alpha_p, double alpha_n, std::size_t max_count) {
            const int h = g.hop_distance(s, t);
            const auto alts = enumerate_alternatives(g, s, t, default_hop_cap(h, alpha_n), max_count, 0);
            const auto part = partition_trajectories(alts, h, alpha_p, alpha_n);
            py::dict d;
            d["positives"] = node_lists(part.positives);
            d["intra_negatives"] = node_lists(part.intra_negatives);
            d["discarded"] = node_lists(part.discarded);
            return d;
          },
          py::arg("start"), py::arg("goal"), py::arg("alpha_p") = 1.2, py::arg("alpha_n") = 1.4,
          py::arg("max_count") = 256)
      .def(
          "evaluate",
          [](const NavGraph& g, std::vector<NodeId> predicted, std::vector<NodeId> reference, double radius) {
            return metrics_dict(evaluate_episode(g, make_trajectory(g, std::move(predicted)),
                                                 make_trajectory(g, std::move(reference)), radius));
          },
          py::arg("predicted"), py::arg("reference"), py::arg("success_radius") = kDefaultSuccessRadius);

  m.def("_resolve_config", [](const std::string& cfg) { return parse_config(cfg).to_json().dump(); });

  m.def(
      "_gen",
      [](const std::string& cfg, const std::string& out) {
        const auto r = cmd_gen(parse_config(cfg), out);
        py::dict d;
        d["dir"] = r.dir.string();
        d["graphs"] = r.graphs;
        d["episodes"] = r.episodes;
        return d;
      },
      py::arg("config"), py::arg("out") = "");

  m.def("_train", [](const std::string& cfg) {
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = cmd_train(parse_config(cfg));
    }
    py::dict d;
    d["seen"] = metrics_dict(r.seen.mean);
    d["unseen"] = metrics_dict(r.unseen.mean);
    d["checkpoint"] = r.checkpoint.string();
    d["config_hash"] = r.config_hash;
    return d;
  });

  m.def("_eval", [](const std::string& cfg, const std::string& split) {
    EvalResult r;
    {
      py::gil_scoped_release release;
      r = cmd_eval(parse_config(cfg), split);
    }
    return metrics_dict(r.mean);
  });

  m.def("_ablate", [](const std::string& cfg) {
    const RunConfig rc = parse_config(cfg);
    AblationReport r;
    {
      py::gil_scoped_release release;
      r = cmd_ablate(rc, default_ablation_matrix(rc.train.lambda1_traj, rc.train.lambda2_instr,
                                                 rc.train.lambda3_subinstr));
    }
    py::list rows;
    for (const auto& row : r.rows) {
      py::dict d;
      d["table"] = row.row.table;
      d["name"] = row.row.name;
      d["sr_mean"] = row.sr_mean;
      d["sr_std"] = row.sr_std;
      d["spl_mean"] = row.spl_mean;
      d["spl_std"] = row.spl_std;
      rows.append(d);
    }
    return rows;
  });

  m.def(
      "check",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& item : cmd_check(seed)) out.append(py::make_tuple(item.name, item.passed, item.detail));
        return out;
      },
      py::arg("seed") = 1);
}
