// sarsim command-line front end.
//
//   sarsim simulate SCENARIO --out DIR [--seed N] [--cell-size M] [--set key=value]...
//   sarsim validate SCENARIO --out DIR [--targets M] [--seed N] [--seeds a,b,..] [--set ...]
//   sarsim tile MANIFEST --out DIR [--labels DIR] [--tile-size 512] [--overlap 100] [--keep 0.3]
//   sarsim recall MANIFEST --labels DIR --detections DIR --out DIR [--conf 0.5] [--iou 0.7]
//   sarsim table [--in FILE] [--out FILE]
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage or input error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sarsim/export.hpp"
#include "sarsim/scenario.hpp"
#include "sarsim/tiling.hpp"

namespace fs = std::filesystem;
using namespace sarsim;

namespace {

/// Raised for bad inputs discovered before any simulation work starts.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioArgs {
  std::string scenario;
  std::string out;
  std::optional<long long> seed;
  std::optional<double> cell_size;
  std::vector<std::string> sets;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("scenario", a.scenario, "Scenario JSON file")->required();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--seed", a.seed, "Override the scenario seed");
  cmd->add_option("--cell-size", a.cell_size, "Override grid.cell_size (m)");
  cmd->add_option("--set", a.sets, "Scenario override key=value (dotted key)");
}

Scenario load(const ScenarioArgs& a) {
  std::vector<std::string> sets = a.sets;
  if (a.seed) sets.push_back("seed=" + std::to_string(*a.seed));
  if (a.cell_size) sets.push_back("grid.cell_size=" + fmt(*a.cell_size));
  try {
    Scenario sc = load_scenario(a.scenario, sets);
    prepare_mission(sc.mission);  // surface configuration errors before running
    return sc;
  } catch (const Error& e) {
    throw InputError(e.what());
  }
}

fs::path make_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InputError("cannot create output directory '" + out + "': " + ec.message());
  return fs::path(out);
}

bool eta_monotone(const std::vector<double>& eta) {
  for (std::size_t i = 1; i < eta.size(); ++i)
    if (eta[i] < eta[i - 1]) return false;
  return true;
}

Json summary_of(const MissionReport& rep, const MissionConfig& cfg) {
  Json s;
  s["id"] = rep.id;
  s["seed"] = rep.seed;
  s["final_eta"] = rep.final_eta;
  s["violations"] = rep.violations;
  s["eta_monotone"] = eta_monotone(rep.curve_eta);
  s["curve_samples"] = rep.curve_t.size();
  const GridSpec& g = rep.domain.grid;
  s["grid"] = {{"x_origin", g.x_origin}, {"y_origin", g.y_origin}, {"cell_size", g.cell_size},
               {"ncols", g.ncols}, {"nrows", g.nrows}};
  s["flights"] = Json::array();
  for (std::size_t i = 0; i < rep.flights.size(); ++i) {
    const auto& log = rep.flights[i];
    const auto& f = cfg.flights[i];
    s["flights"].push_back({{"index", i + 1},
                            {"uav", f.uav},
                            {"camera", f.camera},
                            {"min_altitude", f.min_altitude},
                            {"goal_altitude", f.goal_altitude},
                            {"duration", f.duration},
                            {"samples", log.samples.size()},
                            {"violations", log.violations()},
                            {"final_eta", log.samples.empty() ? 0.0 : log.samples.back().eta}});
  }
  return s;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void write_timing(const fs::path& dir, std::chrono::steady_clock::time_point t0) {
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(dir / "timing.json", Json{{"runtime_s", secs}});
}

int cmd_simulate(const ScenarioArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load(a);
  const fs::path dir = make_out_dir(a.out);
  const MissionReport rep = run_mission(sc.mission);
  for (std::size_t i = 0; i < rep.flights.size(); ++i)
    write_flight_log_csv(dir / ("flight_" + std::to_string(i + 1) + ".csv"), rep.flights[i]);
  write_eta_csv(dir / "eta.csv", rep.curve_t, rep.curve_eta);
  write_fields(dir, rep.field);
  write_json(dir / "summary.json", summary_of(rep, sc.mission));
  write_timing(dir, t0);
  std::cout << rep.id << ": final eta " << fmt(rep.final_eta) << ", " << rep.violations
            << " constraint violations, seed " << rep.seed << '\n';
  return 0;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      throw InputError("--seeds: '" + tok + "' is not a non-negative integer");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("--seeds: empty list");
  return out;
}

int cmd_validate(const ScenarioArgs& a, std::optional<long long> targets, const std::string& seeds_text,
                 bool all_seeds) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load(a);
  const std::size_t M = targets ? static_cast<std::size_t>(std::max(0LL, *targets)) : sc.monte_carlo.targets;
  if (targets && *targets < 1) throw InputError("--targets must be >= 1");
  std::vector<std::uint64_t> seeds;
  if (!seeds_text.empty()) seeds = parse_seed_list(seeds_text);
  else if (all_seeds && !sc.monte_carlo.seeds.empty()) seeds = sc.monte_carlo.seeds;
  else seeds = {sc.mission.seed};
  const fs::path dir = make_out_dir(a.out);

  const MonteCarloResult res = monte_carlo_validate(sc.mission, M, std::span<const std::uint64_t>(seeds));
  write_eta_csv(dir / "eta.csv", res.mission.curve_t, res.mission.curve_eta);
  Json s = summary_of(res.mission, sc.mission);
  s["targets"] = M;
  s["seeds"] = Json::array();
  std::size_t within = 0;
  for (const auto& v : res.validations) {
    const std::string tag = seeds.size() == 1 ? "" : "_seed" + std::to_string(v.seed);
    write_validation_csv(dir / ("validation" + tag + ".csv"), v);
    write_targets_csv(dir / ("targets" + tag + ".csv"), v.targets);
    within += v.within_band() ? 1 : 0;
    s["seeds"].push_back({{"seed", v.seed},
                          {"detected", v.detected},
                          {"empirical_final", static_cast<double>(v.detected) / static_cast<double>(M)},
                          {"samples_outside_band", v.outside},
                          {"verdict", v.within_band() ? "within band" : "outside band"}});
  }
  s["seeds_within_band"] = within;
  s["verdict"] = within == seeds.size() ? "within band" : "outside band";
  write_json(dir / "summary.json", s);
  write_timing(dir, t0);
  std::cout << res.mission.id << ": predicted final eta " << fmt(res.mission.final_eta) << ", " << within << "/"
            << seeds.size() << " seeds within band, verdict " << s["verdict"].get<std::string>() << '\n';
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t\r");
    const auto e = tok.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : tok.substr(b, e - b + 1));
  }
  return out;
}

/// Manifest CSV with header `id,width,height,camera,relative_height`.
std::vector<ImageMeta> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path + "'");
  std::vector<ImageMeta> metas;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv_line(line);
    if (header.empty()) {
      header = f;
      if (header != std::vector<std::string>{"id", "width", "height", "camera", "relative_height"})
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": manifest header must be id,width,height,camera,relative_height");
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 5) throw InputError(where + ": expected 5 fields");
    ImageMeta m;
    m.id = f[0];
    double w = 0, h = 0;
    if (m.id.empty()) throw InputError(where + ": empty image id");
    if (!detail::parse_double(f[1], w) || !detail::parse_double(f[2], h) || w < 1 || h < 1 ||
        w != std::floor(w) || h != std::floor(h))
      throw InputError(where + ": width and height must be positive integers");
    m.width = static_cast<int>(w);
    m.height = static_cast<int>(h);
    m.camera = f[3];
    if (!cameras::by_name(m.camera)) throw InputError(where + ": unknown camera '" + m.camera + "'");
    if (!detail::parse_double(f[4], m.relative_height) || !(m.relative_height > 0.0))
      throw InputError(where + ": relative_height must be > 0");
    for (const auto& o : metas)
      if (o.id == m.id) throw InputError(where + ": duplicate image id '" + m.id + "'");
    metas.push_back(m);
  }
  if (header.empty()) throw InputError("manifest '" + path + "' is empty");
  return metas;
}

/// Reads `<dir>/<id>.txt` for every image; files naming no manifest image are
/// all listed in one error.
std::map<std::string, std::vector<Detection>> read_label_dir(const std::string& dir,
                                                             const std::vector<ImageMeta>& metas,
                                                             bool with_confidence) {
  if (!fs::is_directory(dir)) throw InputError("label directory '" + dir + "' does not exist");
  std::map<std::string, std::vector<Detection>> out;
  std::vector<std::string> orphans;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const std::string id = p.stem().string();
    const bool known = std::any_of(metas.begin(), metas.end(), [&](const ImageMeta& m) { return m.id == id; });
    if (!known) {
      orphans.push_back(p.filename().string());
      continue;
    }
    std::ifstream in(p);
    try {
      out[id] = parse_labels(in, with_confidence);
    } catch (const ParseError& e) {
      throw InputError(p.string() + ": " + e.what());
    }
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o;
    throw InputError("label files with no manifest entry in '" + dir + "': " + list);
  }
  return out;
}

int cmd_tile(const std::string& manifest, const std::string& labels, const std::string& out_dir, int tile_size,
             int overlap, double keep) {
  const auto metas = read_manifest(manifest);
  std::map<std::string, std::vector<Detection>> labs;
  if (!labels.empty()) labs = read_label_dir(labels, metas, false);
  std::vector<std::pair<const ImageMeta*, TilePlan>> plans;
  for (const auto& m : metas) {
    try {
      plans.emplace_back(&m, plan_tiles(m.width, m.height, tile_size, overlap));
    } catch (const ConfigError& e) {
      throw InputError("image '" + m.id + "': " + e.what());
    }
  }
  const fs::path dir = make_out_dir(out_dir);
  if (!labels.empty()) fs::create_directories(dir / "labels");
  std::ofstream man(dir / "tiles.csv");
  if (!man) throw Error("cannot write tile manifest");
  man << "image,tile,row,col,x0,y0,size,labels\n";
  std::size_t total = 0;
  for (const auto& [meta, plan] : plans) {
    std::vector<BoxLabel> boxes;
    if (auto it = labs.find(meta->id); it != labs.end())
      for (const auto& d : it->second) boxes.push_back(d.box);
    for (const auto& t : plan.tiles) {
      const auto kept = remap_labels(boxes, meta->width, meta->height, t, keep);
      man << meta->id << ',' << t.name(meta->id) << ',' << t.row << ',' << t.col << ',' << t.x0 << ',' << t.y0
          << ',' << t.size << ',' << kept.size() << '\n';
      if (!labels.empty()) {
        std::ofstream lf(dir / "labels" / (t.name(meta->id) + ".txt"));
        for (const auto& b : kept) lf << format_label(b) << '\n';
      }
      ++total;
    }
  }
  std::cout << metas.size() << " images, " << total << " tiles\n";
  return 0;
}

int cmd_recall(const std::string& manifest, const std::string& labels, const std::string& dets,
               const std::string& out_dir, double conf, double iou_min) {
  const auto metas = read_manifest(manifest);
  const auto gt_raw = read_label_dir(labels, metas, false);
  const auto det = read_label_dir(dets, metas, true);
  std::map<std::string, std::vector<BoxLabel>> gt;
  for (const auto& [id, v] : gt_raw)
    for (const auto& d : v) gt[id].push_back(d.box);
  const auto rows = recall_per_bin(metas, gt, det, conf, iou_min);
  const fs::path dir = make_out_dir(out_dir);
  write_recall_csv(dir / "recall.csv", rows);
  for (const auto& r : rows)
    std::cout << fmt(r.low) << "-" << fmt(r.high) << " cm/px: recall " << fmt(r.recall()) << " (" << r.matched
              << "/" << r.support << ")\n";
  return 0;
}

int cmd_table(const std::string& in_path, const std::string& out_path) {
  RecallTable table = RecallTable::initial_experiment();
  if (!in_path.empty()) {
    try {
      table = RecallTable::load(in_path);
    } catch (const Error& e) {
      throw InputError(e.what());
    }
  }
  if (out_path.empty()) {
    std::cout << table.format();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + out_path + "'");
    out << table.format();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Terrain-aware UAV search-and-rescue coverage simulator"};
  app.require_subcommand(1);

  ScenarioArgs sim_args, val_args;
  auto* sim = app.add_subcommand("simulate", "Run a mission and write logs, curves and fields");
  add_scenario_options(sim, sim_args);

  auto* val = app.add_subcommand("validate", "Monte Carlo check of predicted search accomplishment");
  add_scenario_options(val, val_args);
  std::optional<long long> targets;
  std::string seeds_text;
  bool all_seeds = false;
  val->add_option("--targets", targets, "Synthetic target count M");
  val->add_option("--seeds", seeds_text, "Comma-separated target seeds");
  val->add_flag("--all-seeds", all_seeds, "Use the scenario's monte_carlo.seeds list");

  std::string manifest, labels, dets, out_dir;
  int tile_size = 512, overlap = 100;
  double keep = 0.3, conf = 0.5, iou_min = 0.7;
  auto* tile = app.add_subcommand("tile", "Plan 512 px tiles and remap labels");
  tile->add_option("manifest", manifest, "Image manifest CSV")->required();
  tile->add_option("--labels", labels, "Directory of per-image label files");
  tile->add_option("--out", out_dir, "Output directory")->required();
  tile->add_option("--tile-size", tile_size, "Tile edge in pixels");
  tile->add_option("--overlap", overlap, "Minimum overlap in pixels");
  tile->add_option("--keep", keep, "Minimum clipped area fraction to keep a box");

  std::string rec_manifest, rec_labels, rec_dets, rec_out;
  auto* rec = app.add_subcommand("recall", "Recall per GSD bin");
  rec->add_option("manifest", rec_manifest, "Image manifest CSV")->required();
  rec->add_option("--labels", rec_labels, "Ground-truth label directory")->required();
  rec->add_option("--detections", rec_dets, "Detection directory")->required();
  rec->add_option("--out", rec_out, "Output directory")->required();
  rec->add_option("--conf", conf, "Minimum detection confidence");
  rec->add_option("--iou", iou_min, "Minimum IoU for a match");

  std::string table_in, table_out;
  auto* tab = app.add_subcommand("table", "Print or round-trip a GSD recall table");
  tab->add_option("--in", table_in, "Table file to read (default: built-in)");
  tab->add_option("--out", table_out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(sim_args);
    if (*val) return cmd_validate(val_args, targets, seeds_text, all_seeds);
    if (*tile) return cmd_tile(manifest, labels, out_dir, tile_size, overlap, keep);
    if (*rec) return cmd_recall(rec_manifest, rec_labels, rec_dets, rec_out, conf, iou_min);
    if (*tab) return cmd_table(table_in, table_out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
