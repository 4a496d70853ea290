// SPDX-License-Identifier: Apache-2.0

#include "rankdist/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankdist/dataset.hpp"
#include "rankdist/distortion.hpp"
#include "rankdist/error.hpp"
#include "rankdist/model.hpp"
#include "rankdist/ranking.hpp"
#include "rankdist/report.hpp"

namespace rankdist {

namespace fs = std::filesystem;

namespace {

// Expands `--config file.json` into ordinary flags placed before the
// command-line flags, so explicit flags win (options keep their last value).
// Keys are long option names without the leading dashes.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> rest;
  std::string config_path;
  bool found = false;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      config_path = args[++i];
      found = true;
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      found = true;
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!found) return args;
  std::ifstream in(config_path);
  if (!in) throw CLI::FileError::Missing(config_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
  }
  if (!doc.is_object()) throw CLI::ConversionError("JSON config must be an object");
  auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  std::vector<std::string> out{args.front()};
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) throw CLI::ConversionError("nested config value for '" + key + "'");
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back("--" + key);
      continue;
    }
    out.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) out.push_back(scalar(v));
    } else {
      out.push_back(scalar(value));
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pnm";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::FileNotFound, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw Error(ErrorCode::InvalidArgument, "not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void add_config_option(CLI::App& app) {
  // Consumed by expand_config before parsing; registered for --help.
  static std::string unused;
  app.add_option("--config", unused, "JSON file of option values; explicit flags override it");
}

// ---------------------------------------------------------------- gen-dataset

struct GenDatasetArgs {
  std::string kind = "moire";
  std::string sources = "synthetic";
  std::size_t count = 200;
  std::size_t pairs_per_source = 8;
  std::size_t max_rois = 8;
  int size = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_dataset(const GenDatasetArgs& a, std::ostream& out) {
  const DistortionKind kind = parse_distortion_kind(a.kind);
  const int size = a.size > 0 ? a.size : (kind == DistortionKind::Moire ? 384 : 256);
  std::vector<CorpusSource> sources;
  if (a.sources == "synthetic") {
    char id[32];
    for (std::size_t i = 0; i < a.count; ++i) {
      if (kind == DistortionKind::Moire) {
        std::snprintf(id, sizeof id, "chart_%05zu", i);
        Rng rng(derive_seed(a.seed, id));
        sources.push_back({id, sample_pattern_spec(size, rng)});
      } else {
        std::snprintf(id, sizeof id, "scene_%05zu", i);
        sources.push_back({id, generate_scene(size, derive_seed(a.seed, id), kLcaSceneSaturation)});
      }
    }
  } else {
    for (const auto& p : list_images(a.sources)) sources.push_back({p.stem().string(), load_image(p)});
    if (sources.empty()) throw Error(ErrorCode::EmptyInput, "no source images in " + a.sources);
  }
  if (sources.empty()) throw Error(ErrorCode::EmptyInput, "no source images");

  CorpusOptions opts;
  opts.kind = kind;
  opts.pairs_per_source = a.pairs_per_source;
  opts.max_rois = a.max_rois;
  opts.seed = a.seed;

  const fs::path out_dir = a.out;
  std::error_code ec;
  const bool created = !fs::exists(out_dir, ec);
  try {
    const CorpusManifest m = build_corpus(sources, opts, out_dir);
    out << "seed: " << a.seed << "\n"
        << "sources: " << sources.size() << "\n"
        << "pairs: train " << m.counts.train << ", val " << m.counts.val << ", test " << m.counts.test
        << "\n"
        << "skipped sources: " << m.counts.skipped << "\n"
        << "manifest: " << (out_dir / kManifestName).string() << "\n";
  } catch (...) {
    if (created) fs::remove_all(out_dir, ec);
    throw;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string history;
  std::string arch{kSmallV1};
  TrainConfig cfg;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const CorpusManifest manifest = read_manifest(a.manifest);
  ScorerModel model = init_model(a.arch, a.cfg.seed);
  out << "seed: " << a.cfg.seed << "\n";
  const TrainResult result = train(std::move(model), manifest, a.cfg);
  if (!a.history.empty()) {
    CsvWriter csv(a.history);
    csv.row({"batch", "train_loss", "val_tp"});
    for (const auto& r : result.history) {
      csv.row({std::to_string(r.batch), format_number(r.train_loss), format_number(r.val_tp)});
    }
    csv.close();
  }
  save_checkpoint(result.model, a.out);
  if (result.history.empty()) {
    out << "no training steps; checkpoint holds the initialization\n";
  } else {
    const auto best = std::max_element(result.history.begin(), result.history.end(),
                                       [](const EvalRecord& x, const EvalRecord& y) { return x.val_tp < y.val_tp; });
    out << "final val TP: " << format_number(best->val_tp) << "% (batch " << best->batch << ")\n";
  }
  out << "checkpoint: " << a.out << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- eval-pairs

struct EvalPairsArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string images;
  std::size_t trials = 150;
  int crop = 150;
  std::size_t max_rois = 8;
  std::uint64_t seed = 0;
  std::string csv;
  std::string svg;
};

struct NamedImage {
  std::string scene;
  LevelledImage image;
};

std::vector<SceneSet> load_scenes(const fs::path& dir) {
  static const std::regex pattern(R"(^(.*)_level([0-9]+(?:\.[0-9]+)?)$)");
  std::map<std::string, SceneSet> by_name;
  for (const auto& p : list_images(dir)) {
    const std::string stem = p.stem().string();
    const auto level = parse_level_from_name(stem);
    if (!level) throw Error(ErrorCode::InvalidArgument, "no _level<k> suffix in " + p.filename().string());
    std::smatch m;
    std::regex_match(stem, m, pattern);
    by_name[m[1].str()].push_back({load_image(p), *level});
  }
  if (by_name.empty()) throw Error(ErrorCode::InsufficientImages, "no images in " + dir.string());
  std::vector<SceneSet> scenes;
  for (auto& [name, set] : by_name) scenes.push_back(std::move(set));
  return scenes;
}

// Mean score over a coarse grid of patches, for the score-vs-level plot.
double mean_image_score(const PatchScorer& scorer, const ImageRGB& img) {
  const int step = std::max(kPatchSize, std::min(img.width(), img.height()) / 8);
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y + kPatchSize <= img.height(); y += step) {
    for (int x = 0; x + kPatchSize <= img.width(); x += step) {
      sum += scorer(extract_patch(img, {x, y, kPatchSize, kPatchSize}));
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

int eval_manifest(const EvalPairsArgs& a, const ScorerModel& model, std::ostream& out) {
  const CorpusManifest manifest = read_manifest(a.manifest);
  const Split split = parse_split(a.split);
  const auto pairs = load_pairs(manifest, split);
  if (pairs.empty()) throw Error(ErrorCode::EmptySplit, std::string(to_string(split)) + " split is empty");
  const PatchScorer scorer = model_scorer(model);

  TpBreakdown b;
  std::vector<ScatterPoint> points;
  std::unique_ptr<CsvWriter> csv;
  if (!a.csv.empty()) {
    csv = std::make_unique<CsvWriter>(a.csv);
    csv->row({"index", "source_id", "level_a", "level_b", "score_a", "score_b", "outcome"});
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const double sa = scorer(p.patch_a);
    const double sb = scorer(p.patch_b);
    const PatchOrder order = compare_scores(sa, sb);
    const char* outcome = order == PatchOrder::FirstLess ? "correct" : order == PatchOrder::Tie ? "tie" : "wrong";
    if (order == PatchOrder::FirstLess) ++b.correct;
    else if (order == PatchOrder::Tie) ++b.ties;
    else ++b.wrong;
    if (csv) {
      csv->row({std::to_string(i), p.source_id, format_number(p.spec_a.level), format_number(p.spec_b.level),
                format_number(sa), format_number(sb), outcome});
    }
    points.push_back({p.spec_a.level, sa, {}});
    points.push_back({p.spec_b.level, sb, {}});
  }
  if (csv) {
    csv->row({"summary", "tp_percent", "", "", "", "", format_number(b.tp_percent())});
    csv->close();
  }
  if (!a.svg.empty()) {
    write_scatter_svg(points, {"Score vs. distortion level", "level", "score", false}, a.svg);
  }
  out << "pairs: " << b.total() << " (" << to_string(split) << " split)\n"
      << "TP: " << format_number(b.tp_percent()) << "%\n"
      << "ties: " << format_number(b.tie_percent()) << "%\n";
  return kExitOk;
}

int eval_images(const EvalPairsArgs& a, const ScorerModel& model, std::ostream& out) {
  const auto scenes = load_scenes(a.images);
  const PatchScorer scorer = model_scorer(model);
  MonteCarloOptions opts;
  opts.trials = a.trials;
  opts.crop_size = a.crop;
  opts.max_rois = a.max_rois;
  opts.seed = a.seed;
  const MonteCarloReport report = monte_carlo_pairs(scenes, scorer, opts);
  if (!a.csv.empty()) write_report_csv(report, a.csv);
  if (!a.svg.empty()) {
    std::vector<ScatterPoint> points;
    for (const auto& scene : scenes) {
      for (const auto& li : scene) points.push_back({li.level, mean_image_score(scorer, li.image), {}});
    }
    write_scatter_svg(points, {"Mean score vs. distortion level", "level", "score", false}, a.svg);
  }
  out << "seed: " << a.seed << "\n"
      << "trials: " << report.trials_run << " run, " << report.skipped << " skipped\n"
      << "TP: " << format_number(report.summary) << "%\n";
  return kExitOk;
}

int cmd_eval_pairs(const EvalPairsArgs& a, std::ostream& out) {
  const ScorerModel model = load_checkpoint(a.checkpoint);
  return a.manifest.empty() ? eval_images(a, model, out) : eval_manifest(a, model, out);
}

// ------------------------------------------------------------------- rank-set

struct RankSetArgs {
  std::string checkpoint;
  std::vector<std::string> images;
  std::size_t max_rois = 8;
  std::string csv;
  std::string svg;
  std::string expected;
};

int cmd_rank_set(const RankSetArgs& a, std::ostream& out) {
  const ScorerModel model = load_checkpoint(a.checkpoint);
  std::vector<ImageRGB> images;
  for (const auto& p : a.images) images.push_back(load_image(p));
  std::vector<double> expected;
  if (!a.expected.empty()) {
    expected = parse_number_list(a.expected);
    if (expected.size() != images.size()) {
      throw Error(ErrorCode::LengthMismatch, "--expected needs one rank per image");
    }
  }
  const ImageRGB med = median_image(images);

  RankVector ranks;
  std::vector<Rect> rois;
  const bool identical = std::all_of(images.begin(), images.end(), [&](const ImageRGB& i) { return i == images.front(); });
  if (identical) {
    ranks.assign(images.size(), 0.5 * static_cast<double>(images.size() + 1));
    out << "tie: all images are identical\n";
  } else {
    rois = select_set_rois(images, a.max_rois);
    const ScoreMatrix m = score_matrix(model_scorer(model), images, rois);
    try {
      ranks = rank_image_set(m).image_ranks;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMatrix) throw;
      ranks.assign(images.size(), 0.5 * static_cast<double>(images.size() + 1));
      out << "tie: every ROI scores all images equally\n";
    }
  }

  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return ranks[x] < ranks[y]; });
  out << "ROIs: " << rois.size() << "\n"
      << "order (least distorted first):\n";
  for (std::size_t i : order) out << "  " << format_number(ranks[i]) << "  " << a.images[i] << "\n";

  if (!expected.empty()) {
    try {
      out << "spearman rho vs expected: " << format_number(spearman(ranks, average_ranks(expected))) << "\n";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateInput) throw;
      out << "spearman rho vs expected: undefined (constant ranks)\n";
    }
  }
  if (!a.csv.empty()) {
    CsvWriter csv(a.csv);
    csv.row({"image", "rank", "expected_rank"});
    const RankVector exp_ranks = expected.empty() ? RankVector{} : average_ranks(expected);
    for (std::size_t i = 0; i < images.size(); ++i) {
      csv.row({a.images[i], format_number(ranks[i]), exp_ranks.empty() ? "" : format_number(exp_ranks[i])});
    }
    csv.close();
  }
  if (!a.svg.empty()) {
    if (expected.empty()) throw Error(ErrorCode::InvalidArgument, "--svg needs --expected ranks");
    const RankVector exp_ranks = average_ranks(expected);
    std::vector<ScatterPoint> points;
    for (std::size_t i = 0; i < images.size(); ++i) {
      points.push_back({exp_ranks[i], ranks[i], fs::path(a.images[i]).filename().string()});
    }
    write_scatter_svg(points, {"Predicted vs. expected rank", "expected rank", "predicted rank", true}, a.svg);
  }
  return kExitOk;
}

// -------------------------------------------------------------------- gen-set

struct GenSetArgs {
  std::string kind = "lca";
  std::string levels = "1,2,3,4";
  std::string name = "scene";
  std::string chart;
  int size = 0;
  std::uint64_t seed = 0;
  std::string direction = "main";
  std::string out;
};

int cmd_gen_set(const GenSetArgs& a, std::ostream& out) {
  const DistortionKind kind = parse_distortion_kind(a.kind);
  const auto levels = parse_number_list(a.levels);
  if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "no levels given");
  ImageRGB base;
  if (!a.chart.empty()) {
    base = load_image(a.chart);
  } else if (kind == DistortionKind::Moire) {
    Rng rng(derive_seed(a.seed, "chart"));
    base = generate_pattern(sample_pattern_spec(a.size > 0 ? a.size : 384, rng), derive_seed(a.seed, "pattern"));
  } else {
    base = generate_scene(a.size > 0 ? a.size : 256, a.seed, kLcaSceneSaturation);
  }
  const Diagonal dir = parse_diagonal(a.direction);
  std::vector<std::pair<fs::path, ImageRGB>> outputs;
  for (double level : levels) {
    const ImageRGB img = apply({kind, level, dir}, base);
    outputs.emplace_back(fs::path(a.out) / (a.name + "_level" + format_number(level) + ".png"), img);
  }
  fs::create_directories(a.out);
  for (const auto& [path, img] : outputs) {
    save_image(img, path);
    out << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

std::optional<double> parse_level_from_name(std::string_view stem) {
  static const std::regex pattern(R"(^.*_level([0-9]+(?:\.[0-9]+)?)$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(stem.begin(), stem.end(), m, pattern)) return std::nullopt;
  const std::string digits = m[1].str();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return v;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned distortion ranking for lateral chromatic aberration and Moire", "rankdist"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenDatasetArgs gd;
  auto* gen = app.add_subcommand("gen-dataset", "Simulate ordered patch pairs and write a manifest");
  add_config_option(*gen);
  gen->add_option("--kind", gd.kind, "lca or moire")->check(CLI::IsMember({"lca", "moire"}))->capture_default_str();
  gen->add_option("--sources", gd.sources, "'synthetic' or a directory of base images")->capture_default_str();
  gen->add_option("--count", gd.count, "Number of synthetic sources")->capture_default_str();
  gen->add_option("--pairs-per-source", gd.pairs_per_source, "Image pairs simulated per source")->capture_default_str();
  gen->add_option("--max-rois", gd.max_rois, "ROIs kept per image pair")->capture_default_str();
  gen->add_option("--size", gd.size, "Synthetic source size in pixels (0: 384 charts, 256 scenes)")->capture_default_str();
  gen->add_option("--seed", gd.seed, "Corpus seed")->capture_default_str();
  gen->add_option("--out", gd.out, "Output directory")->required();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a scorer on a manifest's train split");
  add_config_option(*trn);
  trn->add_option("--manifest", tr.manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
  trn->add_option("--out", tr.out, "Checkpoint path")->required();
  trn->add_option("--history", tr.history, "CSV of periodic evaluations");
  trn->add_option("--arch", tr.arch, "Architecture id")->capture_default_str();
  trn->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  trn->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  trn->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->capture_default_str();
  trn->add_option("--momentum", tr.cfg.momentum)->capture_default_str();
  trn->add_option("--weight-decay", tr.cfg.weight_decay)->capture_default_str();
  trn->add_option("--epsilon", tr.cfg.epsilon, "Loss margin")->capture_default_str();
  trn->add_option("--seed", tr.cfg.seed)->capture_default_str();
  trn->add_option("--eval-every", tr.cfg.eval_every, "Batches between validation passes")->capture_default_str();

  EvalPairsArgs ev;
  auto* evp = app.add_subcommand("eval-pairs", "Pairwise TP rate on a manifest split or a directory of images");
  add_config_option(*evp);
  evp->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  auto* ev_manifest = evp->add_option("--manifest", ev.manifest, "Labeled manifest")->check(CLI::ExistingFile);
  auto* ev_images = evp->add_option("--images", ev.images, "Directory of <name>_level<k> images")
                        ->check(CLI::ExistingDirectory);
  ev_manifest->excludes(ev_images);
  evp->add_option("--split", ev.split, "Manifest split")->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  evp->add_option("--trials", ev.trials, "Monte Carlo trials (image mode)")->capture_default_str();
  evp->add_option("--crop", ev.crop, "Crop size (image mode)")->capture_default_str();
  evp->add_option("--max-rois", ev.max_rois)->capture_default_str();
  evp->add_option("--seed", ev.seed)->capture_default_str();
  evp->add_option("--csv", ev.csv, "Per-pair or per-trial CSV");
  evp->add_option("--svg", ev.svg, "Score vs. level scatter plot");

  RankSetArgs rs;
  auto* rks = app.add_subcommand("rank-set", "Rank registered images by distortion");
  add_config_option(*rks);
  rks->add_option("--checkpoint", rs.checkpoint)->required()->check(CLI::ExistingFile);
  rks->add_option("images", rs.images, "Registered images")->required()->check(CLI::ExistingFile);
  rks->add_option("--max-rois", rs.max_rois)->capture_default_str();
  rks->add_option("--csv", rs.csv);
  rks->add_option("--svg", rs.svg, "Predicted vs. expected rank scatter (needs --expected)");
  rks->add_option("--expected", rs.expected, "Comma-separated expected ranks, one per image");

  GenSetArgs gs;
  auto* gst = app.add_subcommand("gen-set", "Write one source at several distortion levels as <name>_level<k>.png");
  add_config_option(*gst);
  gst->add_option("--kind", gs.kind)->check(CLI::IsMember({"lca", "moire"}))->capture_default_str();
  gst->add_option("--levels", gs.levels, "Comma-separated levels")->capture_default_str();
  gst->add_option("--name", gs.name)->capture_default_str();
  gst->add_option("--chart", gs.chart, "Base image (default: synthetic)")->check(CLI::ExistingFile);
  gst->add_option("--size", gs.size)->capture_default_str();
  gst->add_option("--seed", gs.seed)->capture_default_str();
  gst->add_option("--direction", gs.direction, "LCA diagonal: main or anti")->check(CLI::IsMember({"main", "anti"}))->capture_default_str();
  gst->add_option("--out", gs.out)->required();

  std::vector<std::string> argv_storage{"rankdist"};
  std::vector<const char*> argv;
  try {
    const auto expanded = expand_config(args);
    argv_storage.insert(argv_storage.end(), expanded.begin(), expanded.end());
    for (const auto& s : argv_storage) argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (evp->parsed() && ev.manifest.empty() && ev.images.empty()) {
      throw CLI::RequiredError("eval-pairs needs --manifest or --images");
    }
    if (rks->parsed() && rs.images.size() < 2) {
      throw CLI::ArgumentMismatch("rank-set needs at least two images");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_dataset(gd, out);
    if (trn->parsed()) return cmd_train(tr, out);
    if (evp->parsed()) return cmd_eval_pairs(ev, out);
    if (rks->parsed()) return cmd_rank_set(rs, out);
    if (gst->parsed()) return cmd_gen_set(gs, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace rankdist
