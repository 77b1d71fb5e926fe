#include "cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "kadmap/analytics.hpp"
#include "kadmap/crawler.hpp"
#include "kadmap/preimage.hpp"
#include "kadmap/scenario.hpp"
#include "kadmap/text.hpp"

namespace kadmap::cli {

namespace fs = std::filesystem;

const char* category_name(ExitCode code) {
  switch (code) {
    case kOk: return "ok";
    case kInternal: return "internal";
    case kUsage: return "usage";
    case kConfig: return "config";
    case kIo: return "io";
    case kPreimageDepth: return "preimage-depth";
    case kInput: return "input";
  }
  return "internal";
}

namespace {

struct Failure : std::runtime_error {
  Failure(ExitCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  ExitCode code;
};

void setup_logging() {
  auto logger = spdlog::get("kadmap");
  if (!logger) {
    logger = spdlog::stderr_logger_st("kadmap");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  const char* env = std::getenv("KADMAP_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Failure(kIo, "cannot create directory " + dir.string());
  }
}

std::ofstream open_file(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Failure(kIo, "cannot write " + p.string());
  return out;
}

struct Manifest {
  std::string command;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config;
  fs::path out;
  std::vector<fs::path> artifacts;

  void add(const fs::path& p) { artifacts.push_back(p); }

  // No wall-clock fields, so a rerun reproduces the file byte for byte.
  void write() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["config"] = config;
    j["out"] = out.string();
    nlohmann::ordered_json sums = nlohmann::ordered_json::object();
    std::vector<fs::path> sorted = artifacts;
    std::sort(sorted.begin(), sorted.end());
    for (const fs::path& p : sorted) {
      sums[fs::relative(p, out).generic_string()] = to_hex(sha256_file(p.string()));
    }
    j["artifacts"] = sums;
    auto f = open_file(out / "manifest.json");
    f << j.dump(2) << '\n';
  }
};

Scenario load_scenario(const std::string& config, std::optional<std::uint64_t> seed) {
  Scenario s;
  if (!config.empty()) {
    try {
      s = Scenario::load(config);
    } catch (const ConfigError& e) {
      throw Failure(kConfig, e.what());
    } catch (const std::runtime_error& e) {
      throw Failure(kIo, e.what());
    }
  }
  if (seed) s.seed = *seed;
  return s;
}

// --- preimage-gen ----------------------------------------------------------

int cmd_preimage_gen(int bits, const fs::path& out, unsigned threads) {
  if (bits < 1 || bits > PreimageTable::kMaxPrefixBits) {
    throw Failure(kUsage, "--bits must be in [1, 24], got " + std::to_string(bits));
  }
  spdlog::info("building pre-image table with {} prefix bits", bits);
  PreimageTable::BuildStats stats;
  const PreimageTable table = PreimageTable::build(bits, threads, &stats);
  const std::size_t bad = table.count_invalid();
  if (bad != 0) throw Failure(kInternal, std::to_string(bad) + " entries failed verification");
  try {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    table.save(out);
  } catch (const std::exception& e) {
    throw Failure(kIo, e.what());
  }
  std::cout << "entries " << table.size() << "\n"
            << "candidates_hashed " << stats.candidates_hashed << "\n"
            << "seconds " << format_number(stats.seconds) << "\n"
            << "verified " << table.size() << "/" << table.size() << "\n"
            << "file " << out.string() << "\n";
  return kOk;
}

// --- simulate --------------------------------------------------------------

const char* event_name(sim::WorldEvent::Type t) {
  switch (t) {
    case sim::WorldEvent::Type::kArrive: return "arrive";
    case sim::WorldEvent::Type::kDepart: return "depart";
    case sim::WorldEvent::Type::kConnect: return "connect";
    case sim::WorldEvent::Type::kDisconnect: return "disconnect";
    case sim::WorldEvent::Type::kEvict: return "evict";
  }
  return "?";
}

int cmd_simulate(const std::string& config, std::optional<std::uint64_t> seed,
                 const fs::path& out, bool event_log) {
  const Scenario sc = load_scenario(config, seed);
  ensure_dir(out);
  Manifest m{"simulate", sc.name, sc.seed, config, out, {}};
  for (std::size_t n : sc.server_sweep) {
    const fs::path dir = sc.server_sweep.size() > 1 ? out / ("n" + std::to_string(n)) : out;
    ensure_dir(dir);
    spdlog::info("simulating {} servers for {} s", n, format_number(sc.run_length(n)));
    sim::World world(sc.sim_config(n));
    std::ofstream events;
    if (event_log) {
      events = open_file(dir / "events.log");
      world.set_event_sink([&](const sim::WorldEvent& e) {
        events << format_number(e.time) << ' ' << event_name(e.type) << ' '
               << world.node(e.a).id.hex();
        if (e.b != e.a) events << ' ' << world.node(e.b).id.hex();
        events << '\n';
      });
    }
    world.populate();
    world.run(sc.run_length(n));
    world.set_event_sink(nullptr);
    if (const auto bad = world.check_invariants()) {
      throw Failure(kInternal, "world invariant violated: " + *bad);
    }
    const sim::GroundTruth gt = world.ground_truth();
    try {
      gt.write(dir);
    } catch (const std::exception& e) {
      throw Failure(kIo, e.what());
    }
    for (const char* f : {"nodes.txt", "overlay.edges", "servers.edges", "buckets.edges"}) {
      m.add(dir / f);
    }
    if (event_log) {
      events.close();
      m.add(dir / "events.log");
    }

    const std::size_t servers = gt.server_count();
    std::vector<std::vector<std::string>> rows{{"quantity", "value"}};
    rows.push_back({"time", format_fixed(gt.time, 1)});
    rows.push_back({"online_nodes", std::to_string(gt.nodes.size())});
    rows.push_back({"online_servers", std::to_string(servers)});
    rows.push_back({"links", std::to_string(gt.links.size())});
    rows.push_back({"server_links", std::to_string(gt.server_links().size())});
    rows.push_back({"bucket_edges", std::to_string(gt.bucket_edges().size())});
    if (servers > 0) {
      const double mean = analytics::mean_bucket_entries(gt);
      const double expected = analytics::expected_bucket_entries(double(servers));
      rows.push_back({"mean_bucket_entries", format_fixed(mean, 3)});
      rows.push_back({"expected_bucket_entries", format_fixed(expected, 3)});
      rows.push_back({"ratio", format_fixed(mean / expected, 4)});
    }
    if (!gt.server_links().empty()) {
      rows.push_back({"bucket_coverage", format_fixed(analytics::bucket_coverage(gt), 4)});
    }
    auto summary = open_file(dir / "summary.txt");
    analytics::write_table(summary, rows);
    summary.close();
    m.add(dir / "summary.txt");
    std::cout << "[n=" << n << "]\n";
    analytics::write_table(std::cout, rows);
  }
  m.write();
  return kOk;
}

// --- crawl -----------------------------------------------------------------

struct CrawlOptions {
  std::string world_dir;
  std::string live_sim;
  std::string config;
  std::string preimages;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::optional<double> interval;
  fs::path out;
};

int cmd_crawl(const CrawlOptions& o) {
  const std::string& cfg = o.live_sim.empty() ? o.config : o.live_sim;
  const Scenario sc = load_scenario(cfg, o.seed);

  PreimageTable table;
  try {
    table = PreimageTable::load(o.preimages);
  } catch (const std::exception& e) {
    throw Failure(kIo, e.what());
  }

  std::optional<sim::World> world;
  std::size_t population = 0;
  if (!o.world_dir.empty()) {
    sim::GroundTruth gt;
    try {
      gt = sim::GroundTruth::read(o.world_dir);
    } catch (const std::exception& e) {
      throw Failure(kInput, e.what());
    }
    population = gt.server_count();
    world.emplace(sim::World::from_ground_truth(gt, sc.sim_config(population)));
  } else {
    population = sc.server_sweep.front();
    spdlog::info("simulating {} servers before crawling", population);
    world.emplace(build_world(sc, population));
  }

  const int need = required_prefix_bits(population);
  if (table.prefix_bits() < need) {
    throw Failure(kPreimageDepth,
                  "pre-image table has " + std::to_string(table.prefix_bits()) +
                      " prefix bits; crawling " + std::to_string(population) +
                      " servers needs at least " + std::to_string(need) +
                      " (kadmap preimage-gen --bits " + std::to_string(need) + ")");
  }

  crawler::CrawlRunConfig cc;
  cc.preimages = &table;
  cc.max_parallel_rpcs = sc.crawl.max_parallel_rpcs;
  cc.per_node_timeout = sc.crawl.per_node_timeout;
  cc.idle_sweeps_to_stop = sc.crawl.idle_sweeps_to_stop;
  cc.seed = derive_seed(sc.seed, "crawler");
  const std::size_t count = o.count.value_or(sc.crawl.count);
  if (count == 0) throw Failure(kUsage, "--count must be >= 1");
  const double interval = o.interval.value_or(sc.crawl.interval);

  ensure_dir(o.out);
  Manifest m{"crawl", sc.name, sc.seed, cfg, o.out, {}};
  crawler::Crawler crawler(cc);
  std::cout << "crawl  start  end  nodes  reachable  edges\n";
  for (std::size_t c = 0; c < count; ++c) {
    const double start = world->now();
    crawler::CrawlSnapshot snap;
    try {
      snap = crawler.run(*world);
    } catch (const std::out_of_range& e) {
      throw Failure(kPreimageDepth, e.what());
    }
    char name[32];
    std::snprintf(name, sizeof name, "crawl_%04zu.snap", c + 1);
    try {
      snap.write(o.out / name);
    } catch (const std::exception& e) {
      throw Failure(kIo, e.what());
    }
    m.add(o.out / name);
    std::cout << snap.crawl_id << "  " << format_fixed(snap.started_at, 1) << "  "
              << format_fixed(snap.finished_at, 1) << "  " << snap.nodes.size() << "  "
              << snap.reachable_count() << "  " << snap.edges.size()
              << (snap.failed ? "  failed" : "") << '\n';
    spdlog::info("crawl {} found {} nodes", snap.crawl_id, snap.nodes.size());
    if (interval > 0.0 && c + 1 < count && world->now() < start + interval) {
      world->run_until(start + interval);
    }
  }
  m.write();
  return kOk;
}

// --- analyze ---------------------------------------------------------------

analytics::Summary average(const std::vector<analytics::Summary>& v) {
  analytics::Summary s;
  for (const auto& x : v) {
    s.min += x.min; s.mean += x.mean; s.median += x.median; s.max += x.max;
  }
  const double n = double(v.size());
  s.min /= n; s.mean /= n; s.median /= n; s.max /= n;
  return s;
}

void write_pairs(const fs::path& p, const analytics::Histogram& h) {
  auto out = open_file(p);
  out << "# degree nodes\n";
  for (const auto& [d, c] : h) out << d << ' ' << c << '\n';
}

int cmd_analyze(const fs::path& in, const fs::path& out) {
  if (!fs::is_directory(in)) throw Failure(kInput, "not a directory: " + in.string());
  std::vector<fs::path> snap_files;
  std::vector<fs::path> gt_dirs;
  if (fs::exists(in / "nodes.txt")) gt_dirs.push_back(in);
  for (const auto& e : fs::directory_iterator(in)) {
    if (e.is_regular_file() && e.path().extension() == ".snap") snap_files.push_back(e.path());
    if (e.is_directory() && fs::exists(e.path() / "nodes.txt")) gt_dirs.push_back(e.path());
  }
  if (snap_files.empty() && gt_dirs.empty()) {
    throw Failure(kInput, "no snapshots (*.snap) or ground truth (nodes.txt) in " + in.string());
  }
  std::sort(snap_files.begin(), snap_files.end());
  std::sort(gt_dirs.begin(), gt_dirs.end());

  ensure_dir(out);
  Manifest m{"analyze", "", 0, "", out, {}};
  auto report = open_file(out / "report.txt");
  const auto emit = [&](const std::string& title,
                        const std::vector<std::vector<std::string>>& rows,
                        const std::string& csv) {
    report << "== " << title << " ==\n";
    analytics::write_table(report, rows);
    report << '\n';
    auto f = open_file(out / csv);
    analytics::write_csv(f, rows);
    f.close();
    m.add(out / csv);
  };

  if (!snap_files.empty()) {
    std::vector<crawler::CrawlSnapshot> snaps;
    for (const auto& f : snap_files) {
      try {
        snaps.push_back(crawler::CrawlSnapshot::read(f));
      } catch (const std::exception& e) {
        throw Failure(kInput, e.what());
      }
    }
    std::stable_sort(snaps.begin(), snaps.end(), [](const auto& a, const auto& b) {
      return a.started_at < b.started_at;
    });
    std::vector<const crawler::CrawlSnapshot*> ok;
    for (const auto& s : snaps) {
      if (!s.failed && !s.nodes.empty()) ok.push_back(&s);
    }
    if (ok.empty()) throw Failure(kInput, "every snapshot in " + in.string() + " is empty");

    const auto first = analytics::Digraph::from_snapshot(*ok.front());
    emit("degree statistics, first crawl",
         analytics::degree_stats_rows(analytics::degree_stats(first)),
         "degree_stats_first.csv");
    std::vector<analytics::Summary> in_s, out_s, tot_s;
    for (const auto* s : ok) {
      const auto st = analytics::degree_stats(*s);
      in_s.push_back(st.in); out_s.push_back(st.out); tot_s.push_back(st.total);
    }
    emit("average degree statistics over " + std::to_string(ok.size()) + " crawls",
         analytics::degree_stats_rows({average(in_s), average(out_s), average(tot_s)}),
         "degree_stats_average.csv");

    using analytics::DegreeKind;
    for (DegreeKind k : {DegreeKind::kIn, DegreeKind::kOut, DegreeKind::kTotal}) {
      const std::string base = analytics::to_string(k) + "degree";
      const auto all = analytics::degree_distribution(first, k, false);
      const auto reach = analytics::degree_distribution(first, k, true);
      write_pairs(out / (base + ".dat"), all);
      write_pairs(out / (base + "_reachable.dat"), reach);
      m.add(out / (base + ".dat"));
      m.add(out / (base + "_reachable.dat"));
      report << analytics::to_string(k) << "-degree log-log slope (reachable): "
             << format_fixed(analytics::loglog_slope(reach), 3) << '\n';
    }
    report << '\n';

    std::vector<std::vector<std::string>> series{{"time", "all", "reachable"}};
    for (const auto& p : analytics::nodes_over_time(snaps)) {
      series.push_back({format_fixed(p.time, 1), std::to_string(p.all), std::to_string(p.reachable)});
    }
    emit("nodes over time", series, "nodes_over_time.csv");

    if (ok.size() >= 2) {
      const auto table = crawler::build_session_table(snaps);
      const auto rows = analytics::inverse_cumulative_sessions(crawler::session_lengths(table));
      emit("inverse cumulative session lengths", analytics::session_rows(rows), "sessions.csv");
    }

    const auto pers = analytics::top_degree_persistence(snaps);
    auto ecdf = open_file(out / "persistence_ecdf.dat");
    ecdf << "# share_of_crawls F\n";
    for (const auto& [x, y] : pers.ecdf) ecdf << format_number(x) << ' ' << format_number(y) << '\n';
    ecdf.close();
    m.add(out / "persistence_ecdf.dat");
    report << "top-degree nodes ever selected: " << pers.share.size() << "\n\n";
  }

  if (!gt_dirs.empty()) {
    std::vector<std::vector<std::string>> rows{
        {"servers", "measured", "expected", "ratio", "coverage"}};
    for (const auto& d : gt_dirs) {
      sim::GroundTruth gt;
      try {
        gt = sim::GroundTruth::read(d);
      } catch (const std::exception& e) {
        throw Failure(kInput, e.what());
      }
      const std::size_t n = gt.server_count();
      if (n == 0) continue;
      const double mean = analytics::mean_bucket_entries(gt);
      const double expected = analytics::expected_bucket_entries(double(n));
      const std::string cov = gt.server_links().empty()
                                  ? "n/a"
                                  : format_fixed(analytics::bucket_coverage(gt), 4);
      rows.push_back({std::to_string(n), format_fixed(mean, 3), format_fixed(expected, 3),
                      format_fixed(mean / expected, 4), cov});
    }
    std::sort(rows.begin() + 1, rows.end(), [](const auto& a, const auto& b) {
      return std::stoull(a[0]) < std::stoull(b[0]);
    });
    emit("bucket entries vs prediction", rows, "bucket_entries.csv");
  }
  report.close();
  m.add(out / "report.txt");
  m.write();
  std::ifstream back(out / "report.txt");
  std::cout << back.rdbuf();
  return kOk;
}

// --- scenario-sybil --------------------------------------------------------

int cmd_sybil(const std::string& config, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> keys, const fs::path& out) {
  Scenario sc = load_scenario(config, seed);
  if (keys) sc.sybil.keys = *keys;
  const std::size_t n = sc.server_sweep.front();
  spdlog::info("simulating {} servers for the Sybil scenario", n);
  sim::World world = build_world(sc, n);
  std::vector<SybilTrial> trials;
  try {
    trials = run_sybil_scenario(world, sc.sybil, derive_seed(sc.seed, "sybil"));
  } catch (const std::invalid_argument& e) {
    throw Failure(kConfig, e.what());
  }

  ensure_dir(out);
  Manifest m{"scenario-sybil", sc.name, sc.seed, config, out, {}};
  std::vector<std::vector<std::string>> rows{{"key", "connected", "before_dht",
                                              "before_combined", "after_dht",
                                              "after_combined"}};
  std::size_t dht_fail = 0, combined_ok_connected = 0, connected = 0;
  const auto yn = [](bool b) { return std::string(b ? "yes" : "no"); };
  for (const auto& t : trials) {
    rows.push_back({t.key.hex().substr(0, 16), yn(t.requester_connected), yn(t.before_dht),
                    yn(t.before_combined), yn(t.after_dht), yn(t.after_combined)});
    dht_fail += t.after_dht ? 0 : 1;
    connected += t.requester_connected ? 1 : 0;
    combined_ok_connected += (t.requester_connected && t.after_combined) ? 1 : 0;
  }
  auto csv = open_file(out / "sybil.csv");
  analytics::write_csv(csv, rows);
  csv.close();
  m.add(out / "sybil.csv");

  std::ostringstream rep;
  analytics::write_table(rep, rows);
  rep << "\nkeys " << trials.size() << "\n"
      << "dht_only_failed_after_overwrite " << dht_fail << "/" << trials.size() << "\n"
      << "combined_succeeded_when_connected " << combined_ok_connected << "/" << connected
      << "\n";
  auto report = open_file(out / "report.txt");
  report << rep.str();
  report.close();
  m.add(out / "report.txt");
  m.write();
  std::cout << rep.str();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  setup_logging();
  CLI::App app{"IPFS Kademlia overlay simulator, crawler and analysis toolkit", "kadmap"};
  app.require_subcommand(1);

  int bits = 16;
  unsigned threads = 0;
  std::string pre_out;
  auto* pre = app.add_subcommand("preimage-gen", "build a hash pre-image table");
  pre->add_option("--bits", bits, "prefix bits (1-24)")->capture_default_str();
  pre->add_option("--out", pre_out, "output table file")->required();
  pre->add_option("--threads", threads, "worker threads, 0 for all cores");

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool event_log = false;
  auto* simc = app.add_subcommand("simulate", "run a scenario and export ground truth");
  simc->add_option("--config", config, "scenario file");
  simc->add_option("--seed", seed, "override the scenario seed");
  simc->add_option("--out", out, "output directory")->required();
  simc->add_flag("--event-log", event_log, "also write every world event");

  CrawlOptions co;
  auto* crawl = app.add_subcommand("crawl", "crawl a simulated overlay");
  auto* wopt = crawl->add_option("--world", co.world_dir, "ground truth directory from simulate");
  auto* lopt = crawl->add_option("--live-sim", co.live_sim, "scenario file to simulate and crawl");
  wopt->excludes(lopt);
  crawl->add_option("--config", co.config, "scenario file for world and crawl settings");
  crawl->add_option("--preimages", co.preimages, "pre-image table file")->required();
  crawl->add_option("--count", co.count, "number of back-to-back crawls");
  crawl->add_option("--interval", co.interval, "minimum seconds between crawl starts");
  crawl->add_option("--seed", co.seed, "override the scenario seed");
  crawl->add_option("--out", out, "output directory")->required();

  std::string analyze_in;
  auto* ana = app.add_subcommand("analyze", "statistics from snapshots or ground truth");
  ana->add_option("--in", analyze_in, "snapshot or ground truth directory")->required();
  ana->add_option("--out", out, "report directory")->required();
  ana->add_option("--seed", seed, "unused; accepted for a uniform interface");
  ana->add_option("--config", config, "unused; accepted for a uniform interface");

  std::optional<std::size_t> keys;
  auto* syb = app.add_subcommand("scenario-sybil", "provider-record Sybil experiment");
  syb->add_option("--config", config, "scenario file");
  syb->add_option("--seed", seed, "override the scenario seed");
  syb->add_option("--keys", keys, "number of target keys");
  syb->add_option("--out", out, "output directory")->required();

  std::vector<std::string> argv_store{"kadmap"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "kadmap: error[" << category_name(kUsage) << "]: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*pre) return cmd_preimage_gen(bits, pre_out, threads);
    if (*simc) return cmd_simulate(config, seed, out, event_log);
    if (*crawl) {
      if (co.world_dir.empty() && co.live_sim.empty()) {
        throw Failure(kUsage, "crawl needs --world DIR or --live-sim CONFIG");
      }
      co.out = out;
      return cmd_crawl(co);
    }
    if (*ana) return cmd_analyze(analyze_in, out);
    if (*syb) return cmd_sybil(config, seed, keys, out);
  } catch (const Failure& f) {
    std::cerr << "kadmap: error[" << category_name(f.code) << "]: " << f.what() << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "kadmap: error[" << category_name(kInternal) << "]: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace kadmap::cli
