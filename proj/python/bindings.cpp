#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kadmap/analytics.hpp"
#include "kadmap/crawler.hpp"
#include "kadmap/preimage.hpp"
#include "kadmap/scenario.hpp"
#include "kadmap/sim/world.hpp"

namespace py = pybind11;
using namespace kadmap;

namespace {

std::span<const std::uint8_t> as_span(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

py::dict snapshot_sessions(const crawler::SessionTable& t) {
  py::dict out;
  for (const auto& [id, sessions] : t) {
    py::list l;
    for (const auto& s : sessions) l.append(py::make_tuple(s.start, s.end));
    out[py::str(id.hex())] = l;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_kadmap, m) {
  m.doc() = "IPFS-style Kademlia simulator, crawler and analytics";

  m.def("sha256_hex", [](py::bytes data) { return Id::hash_of(as_span(data)).hex(); });
  m.def("common_prefix_length", [](const std::string& a, const std::string& b) {
    return common_prefix_length(Id::from_hex(a), Id::from_hex(b));
  });
  m.def("required_prefix_bits", &required_prefix_bits, py::arg("population"),
        py::arg("margin") = 4);
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("subsystem"));
  m.def("expected_bucket_entries", &analytics::expected_bucket_entries, py::arg("n"),
        py::arg("k") = 20.0);

  py::class_<PreimageTable>(m, "PreimageTable")
      .def_static(
          "build", [](int bits, unsigned threads) { return PreimageTable::build(bits, threads); },
          py::arg("prefix_bits"), py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>())
      .def_static("load", &PreimageTable::load)
      .def("save", &PreimageTable::save)
      .def_property_readonly("prefix_bits", &PreimageTable::prefix_bits)
      .def("__len__", &PreimageTable::size)
      .def("preimage", [](const PreimageTable& t, std::uint32_t p) {
        const auto s = t.preimage(p);
        return py::bytes(reinterpret_cast<const char*>(s.data()), s.size());
      })
      .def("target_for_cpl", [](const PreimageTable& t, const std::string& node, int cpl) {
        const auto s = t.target_for_cpl(Id::from_hex(node), cpl);
        return py::bytes(reinterpret_cast<const char*>(s.data()), s.size());
      })
      .def("count_invalid", &PreimageTable::count_invalid);

  py::class_<sim::ChurnModel>(m, "ChurnModel")
      .def(py::init<>())
      .def_readwrite("enabled", &sim::ChurnModel::enabled)
      .def_readwrite("session_log_mean", &sim::ChurnModel::session_log_mean)
      .def_readwrite("session_log_sd", &sim::ChurnModel::session_log_sd)
      .def_readwrite("intersession_mean", &sim::ChurnModel::intersession_mean)
      .def_readwrite("arrival_window", &sim::ChurnModel::arrival_window)
      .def("session_survival", &sim::ChurnModel::session_survival);

  py::class_<sim::SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("seed", &sim::SimConfig::seed)
      .def_readwrite("n_servers", &sim::SimConfig::n_servers)
      .def_readwrite("n_clients", &sim::SimConfig::n_clients)
      .def_readwrite("nat_fraction", &sim::SimConfig::nat_fraction)
      .def_readwrite("bootstrap_count", &sim::SimConfig::bootstrap_count)
      .def_readwrite("k", &sim::SimConfig::k)
      .def_readwrite("alpha", &sim::SimConfig::alpha)
      .def_readwrite("connection_limit", &sim::SimConfig::connection_limit)
      .def_readwrite("grace_seconds", &sim::SimConfig::grace_seconds)
      .def_readwrite("join_interval", &sim::SimConfig::join_interval)
      .def_readwrite("churn", &sim::SimConfig::churn)
      .def("validate", &sim::SimConfig::validate);

  py::class_<sim::World>(m, "World")
      .def(py::init<sim::SimConfig>())
      .def("populate", &sim::World::populate)
      .def("run", &sim::World::run, py::call_guard<py::gil_scoped_release>())
      .def("run_until", &sim::World::run_until, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("now", &sim::World::now)
      .def("__len__", &sim::World::size)
      .def("online_count", [](const sim::World& w) { return w.online_count(); })
      .def("live_connections", &sim::World::live_connections)
      .def("check_invariants", &sim::World::check_invariants)
      .def("node_id", [](const sim::World& w, sim::NodeIndex i) { return w.node(i).id.hex(); })
      .def("bucket_edges", [](const sim::World& w) {
        const auto gt = w.ground_truth();
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [a, b] : gt.bucket_edges()) out.emplace_back(gt.nodes[a].id.hex(), gt.nodes[b].id.hex());
        return out;
      })
      .def("write_ground_truth", [](const sim::World& w, const std::filesystem::path& dir) {
        w.ground_truth().write(dir);
      });

  m.def("mean_bucket_entries",
        [](const sim::World& w) { return analytics::mean_bucket_entries(w.ground_truth()); });
  m.def("bucket_coverage",
        [](const sim::World& w) { return analytics::bucket_coverage(w.ground_truth()); });

  py::class_<crawler::CrawlSnapshot>(m, "CrawlSnapshot")
      .def_readonly("crawl_id", &crawler::CrawlSnapshot::crawl_id)
      .def_readonly("started_at", &crawler::CrawlSnapshot::started_at)
      .def_readonly("finished_at", &crawler::CrawlSnapshot::finished_at)
      .def_readonly("failed", &crawler::CrawlSnapshot::failed)
      .def_property_readonly("nodes", [](const crawler::CrawlSnapshot& s) {
        std::vector<std::pair<std::string, bool>> out;
        for (const auto& n : s.nodes) out.emplace_back(n.id.hex(), n.reachable);
        return out;
      })
      .def_property_readonly("edges", [](const crawler::CrawlSnapshot& s) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [a, b] : s.edge_ids()) out.emplace_back(a.hex(), b.hex());
        return out;
      })
      .def("reachable_count", &crawler::CrawlSnapshot::reachable_count)
      .def("same_graph", &crawler::CrawlSnapshot::same_graph)
      .def("write", &crawler::CrawlSnapshot::write)
      .def_static("read", &crawler::CrawlSnapshot::read);

  m.def(
      "run_crawl",
      [](sim::World& w, const PreimageTable& table, std::size_t count, double interval,
         std::uint64_t seed) {
        crawler::CrawlRunConfig c;
        c.preimages = &table;
        c.seed = seed;
        py::gil_scoped_release release;
        return crawler::repeated_crawls(w, c, count, interval);
      },
      py::arg("world"), py::arg("preimages"), py::arg("count") = 1, py::arg("interval") = 0.0,
      py::arg("seed") = 1, "Crawls the world `count` times; returns the snapshots.");
  m.def("build_session_table", [](const std::vector<crawler::CrawlSnapshot>& snaps) {
    return snapshot_sessions(crawler::build_session_table(snaps));
  });

  py::class_<analytics::Summary>(m, "Summary")
      .def_readonly("min", &analytics::Summary::min)
      .def_readonly("mean", &analytics::Summary::mean)
      .def_readonly("median", &analytics::Summary::median)
      .def_readonly("max", &analytics::Summary::max);
  py::class_<analytics::DegreeStats>(m, "DegreeStats")
      .def_readonly("indegree", &analytics::DegreeStats::in)
      .def_readonly("outdegree", &analytics::DegreeStats::out)
      .def_readonly("total", &analytics::DegreeStats::total);
  m.def("degree_stats", [](const crawler::CrawlSnapshot& s) { return analytics::degree_stats(s); });
  m.def(
      "inverse_cumulative_sessions",
      [](const std::vector<double>& lengths, const std::vector<double>& thresholds) {
        std::vector<std::tuple<double, std::size_t, double>> out;
        for (const auto& r : analytics::inverse_cumulative_sessions(lengths, thresholds)) {
          out.emplace_back(r.threshold, r.count, r.percent);
        }
        return out;
      },
      py::arg("lengths"), py::arg("thresholds") = analytics::default_session_thresholds());

  py::class_<Scenario>(m, "Scenario")
      .def_static("parse", &Scenario::parse, py::arg("text"), py::arg("source") = "<config>")
      .def_static("load", &Scenario::load)
      .def_readonly("name", &Scenario::name)
      .def_readonly("seed", &Scenario::seed)
      .def_readonly("server_sweep", &Scenario::server_sweep)
      .def("sim_config", &Scenario::sim_config)
      .def("run_length", &Scenario::run_length)
      .def("build_world", [](const Scenario& s, std::size_t n) { return build_world(s, n); });

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
