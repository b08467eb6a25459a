#pragma once

// Full inference: heat peaks -> per-object codes -> dense field decode ->
// marching-cubes mesh + grasp extraction at the zero iso-surface -> rigid
// transform into the camera frame, with optional ICP pose refinement.

#include <future>
#include <map>
#include <thread>
#include <vector>

#include "mc_tables.hpp"
#include "percept.hpp"
#include "sgdf.hpp"

namespace artgrasp {

struct SgdfGrid {
    int resolution = 48;
    double lo = -1.1, hi = 1.1;
    std::vector<float> sdf;  // canonical units, resolution^3, x fastest
    std::vector<float> cp;   // resolution^3 * 15

    std::size_t idx(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * resolution + y) * resolution + x;
    }

    double coord(int i) const {
        return lo + (hi - lo) * i / (resolution - 1);
    }

    double spacing() const { return (hi - lo) / (resolution - 1); }
    double voxel_diagonal() const { return spacing() * std::sqrt(3.0); }
};

inline SgdfGrid decode_grid(const MlpSpec& spec, const MlpParams& params,
                            const ShapeCode& z_s, double z_j, int resolution,
                            double delta, int threads = 0) {
    if (resolution < 8) throw std::invalid_argument("grid resolution must be >= 8");
    if (z_j < 0.0 || z_j > 1.0) throw std::invalid_argument("joint code outside [0,1]");
    SgdfGrid grid;
    grid.resolution = resolution;
    std::size_t n = static_cast<std::size_t>(resolution) * resolution * resolution;
    grid.sdf.resize(n);
    grid.cp.resize(n * 15);

    if (threads <= 0)
        threads = std::max(1u, std::thread::hardware_concurrency());

    auto run_slab = [&](int z0, int z1) {
        std::vector<double> input = pack_decoder_input(z_s, z_j, {0, 0, 0});
        Rng rng(0);
        for (int z = z0; z < z1; ++z)
            for (int y = 0; y < resolution; ++y)
                for (int x = 0; x < resolution; ++x) {
                    input[kShapeCodeDim + 1] = grid.coord(x);
                    input[kShapeCodeDim + 2] = grid.coord(y);
                    input[kShapeCodeDim + 3] = grid.coord(z);
                    auto out = forward(spec, params, input, NetMode::eval, rng);
                    std::size_t i = grid.idx(x, y, z);
                    grid.sdf[i] = static_cast<float>(out[0] * delta);
                    for (int k = 0; k < 15; ++k)
                        grid.cp[i * 15 + k] = static_cast<float>(out[1 + k]);
                }
    };

    if (threads == 1) {
        run_slab(0, resolution);
    } else {
        std::vector<std::future<void>> futs;
        int per = (resolution + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            int z0 = t * per, z1 = std::min(resolution, z0 + per);
            if (z0 >= z1) break;
            futs.push_back(std::async(std::launch::async, run_slab, z0, z1));
        }
        for (auto& f : futs) f.get();
    }
    return grid;
}

// ---- marching cubes ----

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }

    void transform(const Pose& pose, double scale_divisor = 1.0) {
        for (auto& v : vertices) v = pose.apply(v / scale_divisor);
    }
};

// standard 256-case marching cubes with linear edge interpolation and
// welded vertices; triangles wind so normals point toward positive values
inline Mesh marching_cubes(const std::vector<float>& values, int resolution,
                           double lo, double hi, double iso = 0.0) {
    if (resolution < 2) throw std::invalid_argument("marching cubes needs resolution >= 2");
    Mesh mesh;
    std::map<std::pair<std::size_t, std::size_t>, int> edge_vertex;
    auto node_index = [&](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * resolution + y) * resolution + x;
    };
    auto node_coord = [&](int i) { return lo + (hi - lo) * i / (resolution - 1); };

    for (int z = 0; z + 1 < resolution; ++z)
        for (int y = 0; y + 1 < resolution; ++y)
            for (int x = 0; x + 1 < resolution; ++x) {
                double val[8];
                std::size_t nid[8];
                for (int c = 0; c < 8; ++c) {
                    int cx = x + mc::kVertexOffset[c][0];
                    int cy = y + mc::kVertexOffset[c][1];
                    int cz = z + mc::kVertexOffset[c][2];
                    nid[c] = node_index(cx, cy, cz);
                    val[c] = values[nid[c]];
                }
                int cube = 0;
                for (int c = 0; c < 8; ++c)
                    if (val[c] < iso) cube |= 1 << c;
                int edges = mc::kEdgeTable[cube];
                if (edges == 0) continue;

                int edge_vid[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    int a = mc::kEdgeVertices[e][0], b = mc::kEdgeVertices[e][1];
                    std::size_t ia = nid[a], ib = nid[b];
                    auto key = ia < ib ? std::make_pair(ia, ib) : std::make_pair(ib, ia);
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) {
                        edge_vid[e] = it->second;
                        continue;
                    }
                    double va = val[a], vb = val[b];
                    double t = std::fabs(vb - va) < 1e-12 ? 0.5 : (iso - va) / (vb - va);
                    t = std::clamp(t, 0.0, 1.0);
                    Vec3 pa{node_coord(x + mc::kVertexOffset[a][0]),
                            node_coord(y + mc::kVertexOffset[a][1]),
                            node_coord(z + mc::kVertexOffset[a][2])};
                    Vec3 pb{node_coord(x + mc::kVertexOffset[b][0]),
                            node_coord(y + mc::kVertexOffset[b][1]),
                            node_coord(z + mc::kVertexOffset[b][2])};
                    int vid = static_cast<int>(mesh.vertices.size());
                    mesh.vertices.push_back(pa + (pb - pa) * t);
                    edge_vertex[key] = vid;
                    edge_vid[e] = vid;
                }
                for (int t = 0; mc::kTriTable[cube][t] != -1; t += 3) {
                    int a = edge_vid[mc::kTriTable[cube][t]];
                    int b = edge_vid[mc::kTriTable[cube][t + 1]];
                    int c = edge_vid[mc::kTriTable[cube][t + 2]];
                    if (a == b || b == c || a == c) continue;  // degenerate sliver
                    // table order winds toward the negative side; flip so
                    // normals face the positive-outside direction
                    mesh.triangles.push_back({a, c, b});
                }
            }
    return mesh;
}

inline std::string mesh_to_obj(const Mesh& mesh) {
    std::string out;
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", v.x, v.y, v.z);
        out += buf;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(buf, sizeof(buf), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out += buf;
    }
    return out;
}

// ---- grasp extraction from the field ----

struct ExtractedGrasp {
    Pose pose;     // canonical frame; translation is the palm point
    double score;  // |sdf| at the source voxel, lower is better
};

struct ExtractStats {
    int near_surface_voxels = 0;
    int degenerate_skipped = 0;
};

inline std::vector<ExtractedGrasp> extract_grasps(const SgdfGrid& grid, double epsilon,
                                                  double dedup_pos = 0.02,
                                                  double dedup_angle_deg = 10.0,
                                                  ExtractStats* stats = nullptr) {
    if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
    std::vector<ExtractedGrasp> raw;
    ExtractStats local;
    int res = grid.resolution;
    for (int z = 0; z < res; ++z)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                std::size_t i = grid.idx(x, y, z);
                double s = std::fabs(grid.sdf[i]);
                if (s >= epsilon) continue;
                ++local.near_surface_voxels;
                const float* c = &grid.cp[i * 15];
                Vec3 palm{c[0], c[1], c[2]};
                Vec3 lb{c[3], c[4], c[5]}, rb{c[6], c[7], c[8]};
                Vec3 lt{c[9], c[10], c[11]}, rt{c[12], c[13], c[14]};
                Vec3 approach = (lt + rt) * 0.5 - palm;
                Vec3 closing = lb - rb;
                if (approach.norm() < 1e-8 || approach.cross(closing).norm() < 1e-8) {
                    ++local.degenerate_skipped;
                    continue;
                }
                Quat rot;
                try {
                    rot = rotation_from_approach_closing(approach, closing);
                } catch (const std::invalid_argument&) {
                    ++local.degenerate_skipped;
                    continue;
                }
                raw.push_back({{rot, palm}, s});
            }

    std::sort(raw.begin(), raw.end(), [](const ExtractedGrasp& a, const ExtractedGrasp& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.pose.translation.x != b.pose.translation.x)
            return a.pose.translation.x < b.pose.translation.x;
        return a.pose.translation.y < b.pose.translation.y;
    });

    double angle_limit = deg2rad(dedup_angle_deg);
    std::vector<ExtractedGrasp> kept;
    for (const auto& g : raw) {
        bool dup = false;
        for (const auto& k : kept)
            if ((g.pose.translation - k.pose.translation).norm() < dedup_pos &&
                g.pose.rotation.angle_to(k.pose.rotation) < angle_limit) {
                dup = true;
                break;
            }
        if (!dup) kept.push_back(g);
    }
    if (stats) *stats = local;
    return kept;
}

// ---- ICP (point-to-point, Kabsch/Horn closed-form updates) ----

struct IcpConfig {
    int max_iterations = 30;
    double min_improvement = 1e-5;  // meters of correspondence RMSE
    int min_points = 50;
    std::size_t max_model_points = 2000;
    std::size_t max_observed_points = 1000;
};

namespace detail {

// largest-eigenvalue eigenvector of a symmetric 4x4 via Jacobi rotations
inline std::array<double, 4> principal_eigenvector4(double m[4][4]) {
    double v[4][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        int p = 0, q = 1;
        double off = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (std::fabs(m[i][j]) > off) {
                    off = std::fabs(m[i][j]);
                    p = i;
                    q = j;
                }
        if (off < 1e-14) break;
        double theta = 0.5 * std::atan2(2 * m[p][q], m[q][q] - m[p][p]);
        double c = std::cos(theta), s = std::sin(theta);
        for (int k = 0; k < 4; ++k) {
            double mkp = m[k][p], mkq = m[k][q];
            m[k][p] = c * mkp - s * mkq;
            m[k][q] = s * mkp + c * mkq;
        }
        for (int k = 0; k < 4; ++k) {
            double mpk = m[p][k], mqk = m[q][k];
            m[p][k] = c * mpk - s * mqk;
            m[q][k] = s * mpk + c * mqk;
        }
        for (int k = 0; k < 4; ++k) {
            double vkp = v[k][p], vkq = v[k][q];
            v[k][p] = c * vkp - s * vkq;
            v[k][q] = s * vkp + c * vkq;
        }
    }
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (m[i][i] > m[best][best]) best = i;
    return {v[0][best], v[1][best], v[2][best], v[3][best]};
}

// optimal rigid transform mapping src -> dst (Horn's quaternion method)
inline Pose kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    Vec3 ms{0, 0, 0}, md{0, 0, 0};
    double n = static_cast<double>(src.size());
    for (const auto& p : src) ms += p;
    for (const auto& p : dst) md += p;
    ms = ms / n;
    md = md / n;
    double H[3][3] = {};
    for (std::size_t i = 0; i < src.size(); ++i) {
        Vec3 a = src[i] - ms, b = dst[i] - md;
        double av[3] = {a.x, a.y, a.z}, bv[3] = {b.x, b.y, b.z};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) H[r][c] += av[r] * bv[c];
    }
    double tr = H[0][0] + H[1][1] + H[2][2];
    double N[4][4] = {
        {tr, H[1][2] - H[2][1], H[2][0] - H[0][2], H[0][1] - H[1][0]},
        {H[1][2] - H[2][1], H[0][0] - H[1][1] - H[2][2], H[0][1] + H[1][0], H[2][0] + H[0][2]},
        {H[2][0] - H[0][2], H[0][1] + H[1][0], H[1][1] - H[0][0] - H[2][2], H[1][2] + H[2][1]},
        {H[0][1] - H[1][0], H[2][0] + H[0][2], H[1][2] + H[2][1], H[2][2] - H[0][0] - H[1][1]}};
    auto q = principal_eigenvector4(N);
    Quat rot(q[0], q[1], q[2], q[3]);
    return {rot, md - rot.rotate(ms)};
}

} // namespace detail

struct IcpResult {
    Pose refined;
    bool enough_points = true;
    bool hit_iteration_cap = false;
    int iterations = 0;
    double rmse = 0.0;
};

// Refines `pose` so the model points (already in the target frame via
// `pose`-applied geometry) align with the observed cloud. Returns the
// composed refinement; with too few observations the input pose comes back
// flagged.
inline IcpResult icp_refine(const Pose& pose, const std::vector<Vec3>& model_points,
                            const std::vector<Vec3>& observed_points,
                            const IcpConfig& cfg = {}) {
    IcpResult result;
    result.refined = pose;
    if (static_cast<int>(observed_points.size()) < cfg.min_points ||
        model_points.empty()) {
        result.enough_points = false;
        return result;
    }

    auto subsample = [](const std::vector<Vec3>& pts, std::size_t cap) {
        if (pts.size() <= cap) return pts;
        std::vector<Vec3> out;
        out.reserve(cap);
        double step = static_cast<double>(pts.size()) / cap;
        for (std::size_t i = 0; i < cap; ++i)
            out.push_back(pts[static_cast<std::size_t>(i * step)]);
        return out;
    };
    std::vector<Vec3> model = subsample(model_points, cfg.max_model_points);
    std::vector<Vec3> obs = subsample(observed_points, cfg.max_observed_points);

    Pose accumulated = Pose::identity();
    double prev_rmse = 1e30;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        result.iterations = iter + 1;
        // correspondences: each observed point to its nearest model point
        std::vector<Vec3> src, dst;
        src.reserve(obs.size());
        dst.reserve(obs.size());
        double se = 0;
        for (const auto& o : obs) {
            double best = 1e300;
            Vec3 bm;
            for (const auto& m : model) {
                double d = (m - o).norm2();
                if (d < best) {
                    best = d;
                    bm = m;
                }
            }
            src.push_back(bm);
            dst.push_back(o);
            se += best;
        }
        double rmse = std::sqrt(se / obs.size());
        result.rmse = rmse;
        if (prev_rmse - rmse < cfg.min_improvement && iter > 0) {
            result.refined = compose(accumulated, pose);
            return result;
        }
        prev_rmse = rmse;
        Pose update = detail::kabsch(src, dst);
        for (auto& m : model) m = update.apply(m);
        accumulated = compose(update, accumulated);
    }
    result.hit_iteration_cap = true;
    result.refined = compose(accumulated, pose);
    return result;
}

// ---- full reconstruction ----

struct PipelineConfig {
    int grid_resolution = 48;
    double delta = 0.1;
    double epsilon = 0.025;  // delta/4
    double dedup_pos = 0.02;
    double dedup_angle_deg = 10.0;
    double detection_threshold = 0.3;
    int nms_radius = 5;
    bool use_icp = false;
    IcpConfig icp;
    int icp_window = 24;  // half-size of the pixel window around a peak
    int threads = 0;
};

struct ObjectReconstruction {
    Detection detection;
    Mesh mesh_canonical;
    std::vector<ExtractedGrasp> grasps_canonical;
    Mesh mesh_camera;                              // meters
    std::vector<std::pair<Pose, double>> grasps_camera;  // pose + score
    bool icp_applied = false;
    Pose cam_from_object;  // possibly refined
};

// cache of decoded grids keyed by the exact code bits
class GridCache {
public:
    const SgdfGrid* find(const std::string& key) const {
        auto it = cache_.find(key);
        return it == cache_.end() ? nullptr : &it->second;
    }
    const SgdfGrid& put(const std::string& key, SgdfGrid&& grid) {
        return cache_.emplace(key, std::move(grid)).first->second;
    }
    static std::string key_of(const ShapeCode& z_s, double z_j, int res) {
        std::string k;
        k.reserve(33 * 8 + 8);
        auto push = [&](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            k.append(reinterpret_cast<const char*>(&bits), 8);
        };
        for (double v : z_s) push(v);
        push(z_j);
        k.push_back(static_cast<char>(res & 0xff));
        k.push_back(static_cast<char>((res >> 8) & 0xff));
        return k;
    }

private:
    std::map<std::string, SgdfGrid> cache_;
};

inline std::vector<ObjectReconstruction> reconstruct_scene(
        const RenderedFrame& frame, const Camera& camera, const PredictedMaps& maps,
        const MlpSpec& decoder_spec, const MlpParams& decoder_params,
        const PipelineConfig& cfg, GridCache* cache = nullptr) {
    auto peaks = detect_peaks(maps.heat, maps.width, maps.height,
                              cfg.detection_threshold, cfg.nms_radius);
    auto detections = extract_detections(maps, peaks);

    std::vector<ObjectReconstruction> out;
    for (const auto& det : detections) {
        ObjectReconstruction rec;
        rec.detection = det;

        std::string key = GridCache::key_of(det.z_s, det.z_j, cfg.grid_resolution);
        const SgdfGrid* grid = cache ? cache->find(key) : nullptr;
        SgdfGrid local;
        if (!grid) {
            local = decode_grid(decoder_spec, decoder_params, det.z_s, det.z_j,
                                cfg.grid_resolution, cfg.delta, cfg.threads);
            grid = cache ? &cache->put(key, std::move(local)) : &local;
        }

        rec.mesh_canonical = marching_cubes(grid->sdf, grid->resolution, grid->lo,
                                            grid->hi, 0.0);
        rec.grasps_canonical = extract_grasps(*grid, cfg.epsilon, cfg.dedup_pos,
                                              cfg.dedup_angle_deg);

        rec.cam_from_object = det.cam_from_object;
        if (cfg.use_icp && !rec.mesh_canonical.empty()) {
            // predicted surface in the camera frame under the initial pose
            std::vector<Vec3> model;
            model.reserve(rec.mesh_canonical.vertices.size());
            for (const auto& v : rec.mesh_canonical.vertices)
                model.push_back(det.cam_from_object.apply(v / det.scale));
            // observed points from the depth window around the peak
            std::vector<Vec3> observed;
            for (int dv = -cfg.icp_window; dv <= cfg.icp_window; ++dv)
                for (int du = -cfg.icp_window; du <= cfg.icp_window; ++du) {
                    int u = det.col + du, v = det.row + dv;
                    if (u < 0 || u >= frame.width || v < 0 || v >= frame.height) continue;
                    float d = frame.depth[frame.idx(u, v)];
                    if (d <= 0) continue;
                    observed.push_back({(u + 0.5 - camera.cx) / camera.fx * d,
                                        (v + 0.5 - camera.cy) / camera.fy * d,
                                        d});
                }
            IcpResult icp = icp_refine(det.cam_from_object, model, observed, cfg.icp);
            rec.cam_from_object = icp.refined;
            rec.icp_applied = icp.enough_points;
        }

        rec.mesh_camera = rec.mesh_canonical;
        rec.mesh_camera.transform(rec.cam_from_object, det.scale);
        for (const auto& g : rec.grasps_canonical) {
            Pose metric{g.pose.rotation, g.pose.translation / det.scale};
            rec.grasps_camera.emplace_back(compose(rec.cam_from_object, metric), g.score);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// symmetric Chamfer distance (mean of directed mean nearest-neighbor
// distances); used by the fidelity checks
inline double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) return 1e30;
    auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double acc = 0;
        for (const auto& p : from) {
            double best = 1e300;
            for (const auto& q : to) best = std::fmin(best, (p - q).norm2());
            acc += std::sqrt(best);
        }
        return acc / static_cast<double>(from.size());
    };
    return 0.5 * (directed(a, b) + directed(b, a));
}

} // namespace artgrasp
