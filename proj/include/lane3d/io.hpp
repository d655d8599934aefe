#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lane3d/metric.hpp"
#include "lane3d/polyline.hpp"
#include "lane3d/reconstruct.hpp"
#include "lane3d/sweep.hpp"
#include "lane3d/types.hpp"

namespace lane3d {

/// File-system failures (open/short read/truncation), as opposed to
/// validation failures, which derive from Error.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Frame records (JSONL, one frame per line)
// ---------------------------------------------------------------------------

struct FrameRecord {
    std::string frame_id;
    CameraIntrinsics intrinsics;
    std::vector<Lane3D> lanes;
    std::vector<Lane2D> labels2d;   // optional, empty when absent
    std::string pointcloud_path;    // optional, empty when absent

    bool has_labels2d = false;
    bool has_pointcloud = false;
};

namespace detail {

inline void require(bool ok, std::size_t line, const std::string& msg) {
    if (!ok) throw ParseError(line, msg);
}

inline double as_finite(const nlohmann::json& j, std::size_t line, const char* what) {
    require(j.is_number(), line, std::string(what) + " must be a number");
    const double v = j.get<double>();
    require(std::isfinite(v), line, std::string(what) + " must be finite");
    return v;
}

}  // namespace detail

/// Parse one JSONL line into a validated record. Lanes are normalized to run
/// near-to-far (a whole lane is reversed when its endpoints arrive far-first;
/// this is the loader's only silent repair). Any other invariant violation is
/// rejected with the line number.
inline FrameRecord parse_frame_line(const std::string& line, std::size_t line_number) {
    using detail::require;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_number, std::string("not valid JSON: ") + e.what());
    }
    require(j.is_object(), line_number, "frame record must be a JSON object");
    require(j.contains("frame_id") && j["frame_id"].is_string(), line_number, "missing string field 'frame_id'");
    FrameRecord rec;
    rec.frame_id = j["frame_id"].get<std::string>();

    require(j.contains("intrinsics") && j["intrinsics"].is_object(), line_number,
            "frame '" + rec.frame_id + "': missing object field 'intrinsics'");
    const auto& ji = j["intrinsics"];
    for (const char* key : {"fx", "fy", "cx", "cy"})
        require(ji.contains(key), line_number, "frame '" + rec.frame_id + "': intrinsics missing '" + key + "'");
    rec.intrinsics.fx = detail::as_finite(ji["fx"], line_number, "fx");
    rec.intrinsics.fy = detail::as_finite(ji["fy"], line_number, "fy");
    rec.intrinsics.cx = detail::as_finite(ji["cx"], line_number, "cx");
    rec.intrinsics.cy = detail::as_finite(ji["cy"], line_number, "cy");
    rec.intrinsics.skew = ji.contains("skew") ? detail::as_finite(ji["skew"], line_number, "skew") : 0.0;
    require(rec.intrinsics.fx > 0.0 && rec.intrinsics.fy > 0.0, line_number,
            "frame '" + rec.frame_id + "': focal lengths must be positive");

    require(j.contains("lanes") && j["lanes"].is_array(), line_number,
            "frame '" + rec.frame_id + "': missing array field 'lanes'");
    std::size_t lane_index = 0;
    for (const auto& jl : j["lanes"]) {
        require(jl.is_array() && jl.size() >= 2, line_number,
                "frame '" + rec.frame_id + "': lane " + std::to_string(lane_index) + " needs >= 2 points");
        Lane3D lane;
        lane.lane_id = rec.frame_id + "/" + std::to_string(lane_index);
        for (const auto& jp : jl) {
            require(jp.is_array() && jp.size() == 3, line_number,
                    "frame '" + rec.frame_id + "': lane points must be [x, y, z] triplets");
            Point3 p{detail::as_finite(jp[0], line_number, "x"), detail::as_finite(jp[1], line_number, "y"),
                     detail::as_finite(jp[2], line_number, "z")};
            require(p.z > 0.0, line_number,
                    "frame '" + rec.frame_id + "': lane " + std::to_string(lane_index) + " has a point with z <= 0");
            lane.points.push_back(p);
        }
        if (lane.points.front().z > lane.points.back().z)
            std::reverse(lane.points.begin(), lane.points.end());
        for (std::size_t i = 1; i < lane.points.size(); ++i)
            require(distance(lane.points[i], lane.points[i - 1]) > 0.0, line_number,
                    "frame '" + rec.frame_id + "': lane " + std::to_string(lane_index) +
                        " has duplicate consecutive points");
        rec.lanes.push_back(std::move(lane));
        ++lane_index;
    }

    if (j.contains("labels2d") && !j["labels2d"].is_null()) {
        require(j["labels2d"].is_array(), line_number, "frame '" + rec.frame_id + "': labels2d must be an array");
        rec.has_labels2d = true;
        std::size_t li = 0;
        for (const auto& jl : j["labels2d"]) {
            require(jl.is_array() && jl.size() >= 2, line_number,
                    "frame '" + rec.frame_id + "': 2D label " + std::to_string(li) + " needs >= 2 points");
            Lane2D lane;
            lane.lane_id = rec.frame_id + "/2d/" + std::to_string(li);
            for (const auto& jp : jl) {
                require(jp.is_array() && jp.size() == 2, line_number,
                        "frame '" + rec.frame_id + "': 2D label points must be [u, v] pairs");
                lane.points.push_back({detail::as_finite(jp[0], line_number, "u"),
                                       detail::as_finite(jp[1], line_number, "v")});
            }
            rec.labels2d.push_back(std::move(lane));
            ++li;
        }
    }
    if (j.contains("pointcloud") && !j["pointcloud"].is_null()) {
        require(j["pointcloud"].is_string(), line_number, "frame '" + rec.frame_id + "': pointcloud must be a path");
        rec.pointcloud_path = j["pointcloud"].get<std::string>();
        rec.has_pointcloud = true;
    }
    return rec;
}

inline std::string frame_to_line(const FrameRecord& rec) {
    nlohmann::json j;
    j["frame_id"] = rec.frame_id;
    j["intrinsics"] = {{"fx", rec.intrinsics.fx},
                       {"fy", rec.intrinsics.fy},
                       {"cx", rec.intrinsics.cx},
                       {"cy", rec.intrinsics.cy},
                       {"skew", rec.intrinsics.skew}};
    nlohmann::json lanes = nlohmann::json::array();
    for (const Lane3D& lane : rec.lanes) {
        nlohmann::json pts = nlohmann::json::array();
        for (const Point3& p : lane.points) pts.push_back({p.x, p.y, p.z});
        lanes.push_back(std::move(pts));
    }
    j["lanes"] = std::move(lanes);
    if (rec.has_labels2d) {
        nlohmann::json labels = nlohmann::json::array();
        for (const Lane2D& lane : rec.labels2d) {
            nlohmann::json pts = nlohmann::json::array();
            for (const Pixel& p : lane.points) pts.push_back({p.u, p.v});
            labels.push_back(std::move(pts));
        }
        j["labels2d"] = std::move(labels);
    }
    if (rec.has_pointcloud) j["pointcloud"] = rec.pointcloud_path;
    return j.dump();
}

/// Streaming reader: one validated FrameRecord per non-empty line.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& path) : in_(path) {
        if (!in_) throw IoError("cannot open dataset file: " + path);
    }

    std::optional<FrameRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_number_;
            if (line.empty()) continue;
            return parse_frame_line(line, line_number_);
        }
        if (in_.bad()) throw IoError("read failure after line " + std::to_string(line_number_));
        return std::nullopt;
    }

    std::size_t line_number() const { return line_number_; }

private:
    std::ifstream in_;
    std::size_t line_number_ = 0;
};

inline std::vector<FrameRecord> load_dataset(const std::string& path) {
    DatasetReader reader(path);
    std::vector<FrameRecord> records;
    while (auto rec = reader.next()) records.push_back(std::move(*rec));
    return records;
}

class DatasetWriter {
public:
    explicit DatasetWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot open output file: " + path);
    }

    void append(const FrameRecord& rec) { out_ << frame_to_line(rec) << '\n'; }

    void append_line(const std::string& line) { out_ << line << '\n'; }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

inline void write_dataset(std::span<const FrameRecord> records, const std::string& path) {
    DatasetWriter writer(path);
    for (const FrameRecord& rec : records) writer.append(rec);
}

// ---------------------------------------------------------------------------
// Slope statistics (dataset analysis)
// ---------------------------------------------------------------------------

/// Forward slope of a lane from its endpoints: (y_end - y_start) / (z_end - z_start).
inline double lane_slope(const Lane3D& lane) {
    if (lane.points.size() < 2) throw DegenerateLane("lane '" + lane.lane_id + "' has fewer than 2 points");
    const Point3& a = lane.points.front();
    const Point3& b = lane.points.back();
    if (b.z == a.z) throw ZeroForwardExtent("lane '" + lane.lane_id + "' endpoints share the same z");
    return (b.y - a.y) / (b.z - a.z);
}

struct SceneSlope {
    double slope = 0.0;
    std::size_t skipped_lanes = 0;  // lanes with no forward extent
};

/// Mean per-lane slope of a frame; purely lateral lanes are excluded and
/// counted.
inline SceneSlope scene_slope(const FrameRecord& frame) {
    SceneSlope result;
    double sum = 0.0;
    std::size_t used = 0;
    for (const Lane3D& lane : frame.lanes) {
        try {
            sum += lane_slope(lane);
            ++used;
        } catch (const ZeroForwardExtent&) {
            ++result.skipped_lanes;
        }
    }
    if (used == 0) throw NoValidLanes("frame '" + frame.frame_id + "' has no lane with a valid slope");
    result.slope = sum / static_cast<double>(used);
    return result;
}

/// Histogram of per-scene mean slopes: 41 bins across [-0.1, 0.1] plus
/// two overflow bins, and a lanes-per-image histogram.
struct SlopeStats {
    static constexpr int kBins = 41;
    static constexpr double kRange = 0.1;

    std::vector<double> per_scene_slope;
    std::vector<std::size_t> histogram = std::vector<std::size_t>(kBins + 2, 0);  // [under, bins..., over]
    std::vector<std::size_t> lanes_per_image;
    std::size_t scenes_skipped = 0;  // frames with no slope-bearing lane

    void add(const FrameRecord& frame) {
        if (frame.lanes.size() >= lanes_per_image.size()) lanes_per_image.resize(frame.lanes.size() + 1, 0);
        ++lanes_per_image[frame.lanes.size()];
        SceneSlope s;
        try {
            s = scene_slope(frame);
        } catch (const NoValidLanes&) {
            ++scenes_skipped;
            return;
        }
        per_scene_slope.push_back(s.slope);
        if (s.slope < -kRange) {
            ++histogram.front();
        } else if (s.slope > kRange) {
            ++histogram.back();
        } else {
            const int bin = std::min(kBins - 1, static_cast<int>((s.slope + kRange) / (2.0 * kRange) * kBins));
            ++histogram[1 + bin];
        }
    }

    std::size_t scene_count() const { return per_scene_slope.size(); }
};

// ---------------------------------------------------------------------------
// Dataset splits
// ---------------------------------------------------------------------------

enum class Split { Train, Val, Test, Unassigned };

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;

    void validate() const {
        if (train < 0.0 || val < 0.0 || test < 0.0) throw InvalidSpec("split fractions must be >= 0");
        if (train + val + test > 1.0 + 1e-12) throw InvalidSpec("split fractions must sum to <= 1");
    }
};

/// Deterministic split by hash of the frame id (FNV-1a with a splitmix64
/// finalizer for well-mixed high bits).
inline Split split_of(const std::string& frame_id, const SplitSpec& spec) {
    spec.validate();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : frame_id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    if (u < spec.train) return Split::Train;
    if (u < spec.train + spec.val) return Split::Val;
    if (u < spec.train + spec.val + spec.test) return Split::Test;
    return Split::Unassigned;
}

struct DatasetSplits {
    std::vector<FrameRecord> train;
    std::vector<FrameRecord> val;
    std::vector<FrameRecord> test;
};

/// Partition records into disjoint train/val/test streams; frames falling
/// outside the fractions (when they sum below 1) are left out.
inline DatasetSplits split_dataset(std::span<const FrameRecord> records, const SplitSpec& spec) {
    DatasetSplits splits;
    for (const FrameRecord& rec : records) {
        switch (split_of(rec.frame_id, spec)) {
            case Split::Train: splits.train.push_back(rec); break;
            case Split::Val: splits.val.push_back(rec); break;
            case Split::Test: splits.test.push_back(rec); break;
            case Split::Unassigned: break;
        }
    }
    return splits;
}

// ---------------------------------------------------------------------------
// Binary point-cloud sidecar
// ---------------------------------------------------------------------------

// Record layout: float32 x, y, z + uint16 beam_id, little endian, preceded by
// a uint64 point count.
static_assert(std::endian::native == std::endian::little, "sidecar format assumes a little-endian host");

inline void write_pointcloud(const LidarSweep& sweep, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open point cloud file for writing: " + path);
    const std::uint64_t count = sweep.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const LidarPoint& p : sweep.points) {
        const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
        out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
        out.write(reinterpret_cast<const char*>(&p.beam_id), sizeof p.beam_id);
    }
    if (!out) throw IoError("short write on point cloud file: " + path);
}

inline LidarSweep read_pointcloud(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open point cloud file: " + path);
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in) throw IoError("truncated point cloud header: " + path);
    LidarSweep sweep;
    sweep.points.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        float xyz[3];
        std::uint16_t beam;
        in.read(reinterpret_cast<char*>(xyz), sizeof xyz);
        in.read(reinterpret_cast<char*>(&beam), sizeof beam);
        if (!in) throw IoError("truncated point cloud record in " + path);
        sweep.points.push_back({xyz[0], xyz[1], xyz[2], beam});
    }
    return sweep;
}

// ---------------------------------------------------------------------------
// Row-anchor CSV
// ---------------------------------------------------------------------------

inline void write_anchors_csv(const RowAnchors& anchors, const std::string& path) {
    anchors.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open anchor file for writing: " + path);
    out << "row,alpha,beta\n" << std::setprecision(17);
    for (std::size_t r = 0; r < anchors.rows(); ++r)
        out << r << ',' << anchors.alpha[r] << ',' << anchors.beta[r] << '\n';
}

inline RowAnchors read_anchors_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open anchor file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty anchor file: " + path);
    if (line != "row,alpha,beta") throw ParseError(1, "anchor CSV must start with the header 'row,alpha,beta'");
    RowAnchors anchors;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        long row = -1;
        double alpha = 0.0, beta = 0.0;
        try {
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument("row");
            row = std::stol(cell);
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument("alpha");
            alpha = std::stod(cell);
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument("beta");
            beta = std::stod(cell);
        } catch (const std::exception&) {
            throw ParseError(line_number, "malformed anchor row");
        }
        if (row != static_cast<long>(anchors.rows()))
            throw ParseError(line_number, "anchor rows must be consecutive from 0");
        anchors.alpha.push_back(alpha);
        anchors.beta.push_back(beta);
    }
    anchors.validate();
    return anchors;
}

// ---------------------------------------------------------------------------
// Extrinsics sidecar (the frame schema itself carries no extrinsics)
// ---------------------------------------------------------------------------

inline nlohmann::json extrinsics_to_json(const RigidTransform& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
    return nlohmann::json{{"rotation", rows},
                          {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

inline RigidTransform extrinsics_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("rotation") || !j.contains("translation"))
        throw ParseError("extrinsics need 'rotation' (3x3) and 'translation' (3) fields");
    RigidTransform t;
    const auto& rot = j["rotation"];
    if (!rot.is_array() || rot.size() != 3) throw ParseError("rotation must be a 3x3 array");
    for (int r = 0; r < 3; ++r) {
        if (!rot[r].is_array() || rot[r].size() != 3) throw ParseError("rotation must be a 3x3 array");
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[r][c].get<double>();
    }
    const auto& tr = j["translation"];
    if (!tr.is_array() || tr.size() != 3) throw ParseError("translation must have 3 entries");
    for (int i = 0; i < 3; ++i) t.translation(i) = tr[i].get<double>();
    t.validate();
    return t;
}

inline void save_extrinsics(const RigidTransform& t, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open extrinsics file for writing: " + path);
    out << extrinsics_to_json(t).dump(2) << '\n';
}

inline RigidTransform load_extrinsics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open extrinsics file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("extrinsics file is not valid JSON: ") + e.what());
    }
    return extrinsics_from_json(j);
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

inline nlohmann::json eval_report_json(const EvalResult& result) {
    // cd_error averages over true positives only.
    return nlohmann::json{{"tp", result.tp},          {"fp", result.fp},
                          {"fn", result.fn},          {"precision", result.precision},
                          {"recall", result.recall},  {"f1", result.f1},
                          {"cd_error", result.cd_error}};
}

}  // namespace lane3d
