// Command-line toolkit: synthetic scene generation, LiDAR-driven lane
// annotation, two-stage metric evaluation, 3D-consistent augmentation,
// dataset statistics and row-anchor fitting over JSONL lane datasets.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lane3d/annotate.hpp"
#include "lane3d/augment.hpp"
#include "lane3d/io.hpp"
#include "lane3d/metric.hpp"
#include "lane3d/parallel.hpp"
#include "lane3d/synthetic.hpp"

using namespace lane3d;

namespace {

namespace fs = std::filesystem;

/// Map fn over [0, n) on `jobs` workers in ordered chunks; consume(i, result)
/// runs sequentially in index order, so outputs are byte-stable for any job
/// count.
template <typename R, typename Fn, typename Consume>
void process_ordered(std::size_t n, int jobs, Fn&& fn, Consume&& consume) {
    const std::size_t chunk = std::max<std::size_t>(16, static_cast<std::size_t>(std::max(jobs, 1)) * 8);
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        std::vector<R> results(count);
        parallel_for(count, jobs, [&](std::size_t i) { results[i] = fn(start + i); });
        for (std::size_t i = 0; i < count; ++i) consume(start + i, std::move(results[i]));
    }
}

std::string frame_name(std::size_t index) {
    std::ostringstream ss;
    ss << "scene_" << std::setw(6) << std::setfill('0') << index;
    return ss.str();
}

MatchConfig load_match_config(const std::string& path) {
    MatchConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw lane3d::ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    auto get = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = j[key].get<double>();
    };
    get("iou_threshold", cfg.iou_threshold);
    get("tau_cd", cfg.tau_cd);
    get("sample_step", cfg.sample_step);
    get("topview_halfwidth", cfg.topview_halfwidth);
    get("raster_cell", cfg.raster_cell);
    if (j.contains("min_samples")) cfg.min_samples = j["min_samples"].get<int>();
    if (j.contains("roi")) {
        const auto& r = j["roi"];
        auto getr = [&](const char* key, double& slot) {
            if (r.contains(key)) slot = r[key].get<double>();
        };
        getr("x_min", cfg.roi.x_min);
        getr("x_max", cfg.roi.x_max);
        getr("z_min", cfg.roi.z_min);
        getr("z_max", cfg.roi.z_max);
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
    std::string output;
    std::string cloud_dir;
    std::string terrain = "mix";
    int count = 10;
    std::uint64_t seed = 0;
    int jobs = 1;
    int beams = 64;
    double azimuth_step = 0.2;
};

int run_generate(const GenerateOptions& opt) {
    const fs::path out_path(opt.output);
    const fs::path cloud_dir =
        opt.cloud_dir.empty() ? out_path.parent_path() / "clouds" : fs::path(opt.cloud_dir);
    fs::create_directories(cloud_dir.empty() ? fs::path(".") : cloud_dir);

    SceneParams base;
    base.beam_count = opt.beams;
    base.azimuth_step_deg = opt.azimuth_step;
    save_extrinsics(base.lidar_extrinsics, opt.output + ".extrinsics.json");

    DatasetWriter writer(opt.output);
    process_ordered<std::string>(
        static_cast<std::size_t>(opt.count), opt.jobs,
        [&](std::size_t i) {
            SceneParams params = base;
            if (opt.terrain == "mix") {
                params = scene_params_for_index(i, base);
            } else if (opt.terrain == "flat") {
                params.terrain.kind = TerrainKind::Flat;
            } else if (opt.terrain == "ramp") {
                params.terrain.kind = TerrainKind::Ramp;
            } else if (opt.terrain == "hills") {
                params.terrain.kind = TerrainKind::Hills;
            } else {
                throw InvalidParams("unknown terrain kind: " + opt.terrain);
            }
            const SyntheticScene scene = make_scene(Rng::derive_seed(opt.seed, i), params);

            const std::string cloud_name = frame_name(i) + ".bin";
            write_pointcloud(scene.sweep, (cloud_dir / cloud_name).string());

            FrameRecord rec;
            rec.frame_id = frame_name(i);
            rec.intrinsics = scene.intrinsics;
            rec.lanes = scene.lanes;
            rec.labels2d = scene.labels2d;
            rec.has_labels2d = true;
            rec.pointcloud_path = (fs::path(cloud_dir.filename()) / cloud_name).string();
            rec.has_pointcloud = true;
            return frame_to_line(rec);
        },
        [&](std::size_t, std::string&& line) { writer.append_line(line); });
    writer.flush();
    std::cerr << "wrote " << opt.count << " scenes to " << opt.output << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

struct AnnotateOptions {
    std::string input;
    std::string output;
    std::string extrinsics;
    std::string config;
    int width = 1280;
    int height = 720;
    double base_width = 0.4;
    double interpolate = 0.0;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Ground-segmentation overrides: all fields optional.
GroundSegConfig load_ground_config(const std::string& path) {
    GroundSegConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw lane3d::ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (j.contains("height_min")) cfg.height_min = j["height_min"].get<double>();
    if (j.contains("height_max")) cfg.height_max = j["height_max"].get<double>();
    if (j.contains("seed_count")) cfg.seed_count = j["seed_count"].get<int>();
    if (j.contains("growth_normal_tol_deg")) cfg.growth_normal_tol_deg = j["growth_normal_tol_deg"].get<double>();
    if (j.contains("growth_radius")) cfg.growth_radius = j["growth_radius"].get<double>();
    if (j.contains("seed_z_min")) cfg.seed_z_min = j["seed_z_min"].get<double>();
    if (j.contains("seed_z_max")) cfg.seed_z_max = j["seed_z_max"].get<double>();
    if (j.contains("seed_x_max")) cfg.seed_x_max = j["seed_x_max"].get<double>();
    cfg.validate();
    return cfg;
}

int run_annotate(const AnnotateOptions& opt) {
    const std::vector<FrameRecord> frames = load_dataset(opt.input);
    const fs::path input_dir = fs::path(opt.input).parent_path();

    RigidTransform extrinsics = RigidTransform::identity();
    std::string extr_path = opt.extrinsics;
    if (extr_path.empty() && fs::exists(opt.input + ".extrinsics.json"))
        extr_path = opt.input + ".extrinsics.json";
    if (!extr_path.empty()) extrinsics = load_extrinsics(extr_path);

    AnnotateConfig cfg;
    cfg.ground = load_ground_config(opt.config);
    cfg.base_width_m = opt.base_width;
    cfg.interpolate_step = opt.interpolate;
    if (opt.seed != 0) cfg.ground.rng_seed = opt.seed;

    DatasetWriter writer(opt.output);
    process_ordered<std::string>(
        frames.size(), opt.jobs,
        [&](std::size_t i) {
            const FrameRecord& rec = frames[i];
            if (!rec.has_pointcloud)
                throw lane3d::ParseError("frame '" + rec.frame_id + "' carries no point cloud path");
            if (!rec.has_labels2d || rec.labels2d.empty())
                throw EmptyLabels("frame '" + rec.frame_id + "' carries no 2D labels");
            const LidarSweep sweep = read_pointcloud((input_dir / rec.pointcloud_path).string());
            FrameRecord out = rec;
            out.lanes = annotate_frame(sweep, rec.labels2d, extrinsics, rec.intrinsics,
                                       {opt.width, opt.height}, cfg);
            return frame_to_line(out);
        },
        [&](std::size_t, std::string&& line) { writer.append_line(line); });
    writer.flush();
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
    std::string pred;
    std::string gt;
    std::string output;
    std::string config;
    std::string per_frame_csv;
    std::string gt_mode = "interpolated";
    int jobs = 1;
};

int run_evaluate(const EvaluateOptions& opt) {
    const MatchConfig cfg = load_match_config(opt.config);
    if (opt.gt_mode != "interpolated" && opt.gt_mode != "raw")
        throw InvalidParams("--gt-mode must be 'interpolated' or 'raw'");

    const std::vector<FrameRecord> gt_frames = load_dataset(opt.gt);
    const std::vector<FrameRecord> pred_frames = load_dataset(opt.pred);
    std::map<std::string, const FrameRecord*> pred_by_id;
    for (const FrameRecord& rec : pred_frames) {
        if (!pred_by_id.emplace(rec.frame_id, &rec).second)
            throw lane3d::ParseError("duplicate prediction frame '" + rec.frame_id + "'");
    }

    struct FramePair {
        std::string frame_id;
        const FrameRecord* pred = nullptr;
        const FrameRecord* gt = nullptr;
    };
    std::vector<FramePair> pairs;
    std::map<std::string, bool> gt_seen;
    for (const FrameRecord& rec : gt_frames) {
        if (!gt_seen.emplace(rec.frame_id, true).second)
            throw lane3d::ParseError("duplicate ground-truth frame '" + rec.frame_id + "'");
        const auto it = pred_by_id.find(rec.frame_id);
        pairs.push_back({rec.frame_id, it == pred_by_id.end() ? nullptr : it->second, &rec});
    }
    for (const FrameRecord& rec : pred_frames)
        if (!gt_seen.count(rec.frame_id)) pairs.push_back({rec.frame_id, &rec, nullptr});

    std::ofstream csv;
    if (!opt.per_frame_csv.empty()) {
        csv.open(opt.per_frame_csv, std::ios::trunc);
        if (!csv) throw IoError("cannot open per-frame CSV: " + opt.per_frame_csv);
        csv << "frame_id,tp,fp,fn,mean_cd\n" << std::setprecision(17);
    }

    EvalAccumulator acc;
    process_ordered<FrameMatchResult>(
        pairs.size(), opt.jobs,
        [&](std::size_t i) {
            const FramePair& pair = pairs[i];
            const std::vector<Lane3D> empty;
            const std::vector<Lane3D>& preds = pair.pred ? pair.pred->lanes : empty;
            std::vector<Lane3D> gts = pair.gt ? pair.gt->lanes : empty;
            if (opt.gt_mode == "interpolated")
                for (Lane3D& lane : gts) lane = interpolate_lane(lane, cfg.sample_step);
            return match_frame(preds, gts, cfg);
        },
        [&](std::size_t i, FrameMatchResult&& frame) {
            acc.add(frame);
            if (csv.is_open()) {
                double cd_sum = 0.0;
                for (const LaneMatch& m : frame.matches) cd_sum += m.cd;
                csv << pairs[i].frame_id << ',' << frame.matches.size() << ','
                    << frame.fp_pred_indices.size() << ',' << frame.fn_gt_indices.size() << ','
                    << (frame.matches.empty() ? 0.0 : cd_sum / static_cast<double>(frame.matches.size()))
                    << '\n';
            }
        });

    const EvalResult result = acc.result();
    std::ofstream out(opt.output, std::ios::trunc);
    if (!out) throw IoError("cannot open report file: " + opt.output);
    out << eval_report_json(result).dump(2) << '\n';
    std::cerr << "f1 " << result.f1 << "  precision " << result.precision << "  recall " << result.recall
              << "  cd_error " << result.cd_error << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentOptions {
    std::string input;
    std::string output;
    double scale = 1.0;
    double crop = 0.0;
    bool flip = false;
    bool random = false;
    int width = 1280;
    int height = 720;
    int target_height = 320;
    std::uint64_t seed = 0;
    int jobs = 1;
};

int run_augment(const AugmentOptions& opt) {
    const std::vector<FrameRecord> frames = load_dataset(opt.input);
    DatasetWriter writer(opt.output);
    process_ordered<std::string>(
        frames.size(), opt.jobs,
        [&](std::size_t i) {
            const FrameRecord& rec = frames[i];
            AugmentParams params;
            if (opt.random) {
                Rng rng(Rng::derive_seed(opt.seed, i));
                params = random_augment_params(rng, opt.height, 0.8, 1.2, opt.target_height);
            } else {
                params.scale = opt.scale;
                params.crop_top = opt.crop;
                params.flip = opt.flip;
            }
            const AugmentedFrame aug =
                augment_frame(rec.lanes, rec.labels2d, rec.intrinsics, {opt.width, opt.height}, params);
            FrameRecord out = rec;
            out.intrinsics = aug.intrinsics;
            out.lanes = aug.lanes;
            out.labels2d = aug.labels2d;
            return frame_to_line(out);
        },
        [&](std::size_t, std::string&& line) { writer.append_line(line); });
    writer.flush();
    return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int run_stats(const std::string& input, const std::string& output) {
    DatasetReader reader(input);
    SlopeStats stats;
    std::size_t frames = 0;
    while (auto rec = reader.next()) {
        stats.add(*rec);
        ++frames;
    }

    double mean = 0.0, lo = 0.0, hi = 0.0;
    if (!stats.per_scene_slope.empty()) {
        lo = hi = stats.per_scene_slope.front();
        for (double s : stats.per_scene_slope) {
            mean += s;
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        mean /= static_cast<double>(stats.per_scene_slope.size());
    }

    nlohmann::json j;
    j["frames"] = frames;
    j["frames_with_slope"] = stats.scene_count();
    j["frames_skipped"] = stats.scenes_skipped;
    j["slope_histogram"] = {{"bins", SlopeStats::kBins},
                            {"range", SlopeStats::kRange},
                            {"counts", stats.histogram}};
    j["lanes_per_image"] = stats.lanes_per_image;
    j["mean_slope"] = mean;
    j["min_slope"] = lo;
    j["max_slope"] = hi;

    std::ofstream out(output, std::ios::trunc);
    if (!out) throw IoError("cannot open stats output: " + output);
    out << j.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// fit-anchors
// ---------------------------------------------------------------------------

struct FitAnchorsOptions {
    std::string input;
    std::string output;
    int width = 1280;
    int height = 720;
    int jobs = 1;
};

int run_fit_anchors(const FitAnchorsOptions& opt) {
    const std::vector<FrameRecord> frames = load_dataset(opt.input);
    RowAnchorAccumulator acc(opt.height);
    process_ordered<RowAnchorAccumulator>(
        frames.size(), opt.jobs,
        [&](std::size_t i) {
            RowAnchorAccumulator frame_acc(opt.height);
            const RenderedFrame rendered =
                render_frame(frames[i].lanes, frames[i].intrinsics, {opt.width, opt.height});
            frame_acc.add(rendered.depth);
            return frame_acc;
        },
        [&](std::size_t, RowAnchorAccumulator&& frame_acc) { acc.merge(frame_acc); });
    write_anchors_csv(acc.finalize(), opt.output);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D lane dataset toolkit: synthetic scenes, LiDAR-driven annotation, "
                 "top-view IoU + chamfer evaluation, 3D-consistent augmentation"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* cmd_gen = app.add_subcommand("generate", "Generate synthetic scenes (JSONL + point-cloud sidecars)");
    cmd_gen->add_option("--count", gen.count, "number of scenes")->check(CLI::PositiveNumber);
    cmd_gen->add_option("--seed", gen.seed, "master seed");
    cmd_gen->add_option("--jobs", gen.jobs, "worker threads");
    cmd_gen->add_option("--output", gen.output, "output JSONL path")->required();
    cmd_gen->add_option("--cloud-dir", gen.cloud_dir, "directory for point-cloud files");
    cmd_gen->add_option("--terrain", gen.terrain, "terrain kind: mix|flat|ramp|hills");
    cmd_gen->add_option("--beams", gen.beams, "LiDAR beam count")->check(CLI::PositiveNumber);
    cmd_gen->add_option("--azimuth-step", gen.azimuth_step, "LiDAR azimuth step (degrees)");

    AnnotateOptions ann;
    auto* cmd_ann = app.add_subcommand("annotate", "Recover 3D lanes from point clouds and 2D labels");
    cmd_ann->add_option("--input", ann.input, "input JSONL (needs labels2d and pointcloud)")->required();
    cmd_ann->add_option("--output", ann.output, "output JSONL path")->required();
    cmd_ann->add_option("--extrinsics", ann.extrinsics, "LiDAR-to-camera extrinsics JSON");
    cmd_ann->add_option("--config", ann.config, "ground-segmentation config JSON");
    cmd_ann->add_option("--width", ann.width, "image width (pixels)");
    cmd_ann->add_option("--height", ann.height, "image height (pixels)");
    cmd_ann->add_option("--base-width", ann.base_width, "blended lane width in meters");
    cmd_ann->add_option("--interpolate", ann.interpolate, "spline resample step (0 = raw centers)");
    cmd_ann->add_option("--seed", ann.seed, "ground-segmentation seed");
    cmd_ann->add_option("--jobs", ann.jobs, "worker threads");

    EvaluateOptions ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "Two-stage IoU + chamfer evaluation of predictions");
    cmd_ev->add_option("--pred", ev.pred, "predictions JSONL")->required();
    cmd_ev->add_option("--gt", ev.gt, "ground-truth JSONL")->required();
    cmd_ev->add_option("--output", ev.output, "report JSON path")->required();
    cmd_ev->add_option("--config", ev.config, "metric config JSON");
    cmd_ev->add_option("--per-frame", ev.per_frame_csv, "optional per-frame CSV");
    cmd_ev->add_option("--gt-mode", ev.gt_mode, "evaluate against 'interpolated' or 'raw' gt lanes");
    cmd_ev->add_option("--jobs", ev.jobs, "worker threads");

    AugmentOptions aug;
    auto* cmd_aug = app.add_subcommand("augment", "Apply the 3D-consistent flip / crop-scale transform");
    cmd_aug->add_option("--input", aug.input, "input JSONL")->required();
    cmd_aug->add_option("--output", aug.output, "output JSONL path")->required();
    cmd_aug->add_option("--scale", aug.scale, "image scale factor s");
    cmd_aug->add_option("--crop", aug.crop, "rows cropped from the top (c)");
    cmd_aug->add_flag("--flip", aug.flip, "horizontal mirror");
    cmd_aug->add_flag("--random", aug.random, "draw per-frame parameters from the seed");
    cmd_aug->add_option("--width", aug.width, "image width (pixels)");
    cmd_aug->add_option("--height", aug.height, "image height (pixels)");
    cmd_aug->add_option("--target-height", aug.target_height, "target rows for --random crops");
    cmd_aug->add_option("--seed", aug.seed, "seed for --random");
    cmd_aug->add_option("--jobs", aug.jobs, "worker threads");

    std::string stats_input, stats_output;
    auto* cmd_stats = app.add_subcommand("stats", "Slope and lane-count statistics of a dataset");
    cmd_stats->add_option("--input", stats_input, "input JSONL")->required();
    cmd_stats->add_option("--output", stats_output, "stats JSON path")->required();

    FitAnchorsOptions fit;
    auto* cmd_fit = app.add_subcommand("fit-anchors", "Fit per-row depth anchors from a dataset");
    cmd_fit->add_option("--input", fit.input, "input JSONL")->required();
    cmd_fit->add_option("--output", fit.output, "anchor CSV path")->required();
    cmd_fit->add_option("--width", fit.width, "image width (pixels)");
    cmd_fit->add_option("--height", fit.height, "image height (pixels)");
    cmd_fit->add_option("--jobs", fit.jobs, "worker threads");

    try {
        app.parse(argc, argv);
        if (cmd_gen->parsed()) return run_generate(gen);
        if (cmd_ann->parsed()) return run_annotate(ann);
        if (cmd_ev->parsed()) return run_evaluate(ev);
        if (cmd_aug->parsed()) return run_augment(aug);
        if (cmd_stats->parsed()) return run_stats(stats_input, stats_output);
        if (cmd_fit->parsed()) return run_fit_anchors(fit);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
