// artgrasp command-line pipeline: procedural articulated objects, grasp
// label generation, field samples, decoder/encoder training, scene
// rendering, inference, and SR/RSR evaluation. Every stage is seeded and
// writes a manifest with the config hash so reruns are byte-identical.

#include <CLI11.hpp>

#include <artgrasp/config.hpp>
#include <artgrasp/eval.hpp>
#include <artgrasp/io.hpp>
#include <artgrasp/pipeline.hpp>

#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;
using namespace artgrasp;

namespace {

struct StageArgs {
    std::string config_path;
    std::string out = "out";
    std::uint64_t seed = 1234;
};

void add_common(CLI::App* cmd, StageArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config overriding defaults");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--seed", args.seed, "seed for this stage");
}

AppConfig load_config(const StageArgs& args) {
    if (args.config_path.empty()) return config_from_json(nlohmann::json::object());
    return config_from_json(nlohmann::json::parse(read_text_file(args.config_path)));
}

void write_manifest(const std::string& dir, const std::string& stage,
                    const StageArgs& args, const AppConfig& cfg,
                    nlohmann::json extra = nlohmann::json::object()) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    nlohmann::json m{{"stage", stage}, {"seed", args.seed}, {"config_hash", hash}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_text_file(dir + "/manifest.json", m.dump(2) + "\n");
}

// ---- frame directory layout ----

void save_frame_dir(const std::string& dir, const RenderedFrame& frame,
                    const Camera& camera, const TargetMaps& maps) {
    fs::create_directories(dir);
    write_pfm(dir + "/depth.pfm", frame.depth, frame.width, frame.height);
    write_pfm(dir + "/shaded.pfm", frame.shaded, frame.width, frame.height);
    write_pfm(dir + "/incidence.pfm", frame.incidence, frame.width, frame.height);
    std::vector<std::uint16_t> mask(frame.instance.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = static_cast<std::uint16_t>(frame.instance[i]);
    write_pgm16(dir + "/mask.pgm", mask, frame.width, frame.height);
    write_text_file(dir + "/camera.json", camera.to_json().dump(2) + "\n");

    write_pfm(dir + "/heat.pfm", maps.heat, maps.width, maps.height);
    write_f32_blob(dir + "/posemap.f32", maps.pose);
    write_f32_blob(dir + "/shapemap.f32", maps.shape);
    write_f32_blob(dir + "/jointmap.f32", maps.joint);
    nlohmann::json centers = nlohmann::json::array();
    for (auto [r, c] : maps.centers) centers.push_back({r, c});
    write_text_file(dir + "/targets.json",
                    nlohmann::json{{"layout", "pose:10,shape:32,joint:1"},
                                   {"centers", centers}}
                            .dump(2) +
                        "\n");
}

RenderedFrame load_frame(const std::string& dir) {
    RenderedFrame f;
    int w, h;
    f.depth = read_pfm(dir + "/depth.pfm", w, h);
    f.width = w;
    f.height = h;
    f.shaded = read_pfm(dir + "/shaded.pfm", w, h);
    f.incidence = read_pfm(dir + "/incidence.pfm", w, h);
    auto mask = read_pgm16(dir + "/mask.pgm", w, h);
    f.instance.assign(mask.begin(), mask.end());
    return f;
}

TargetMaps load_targets(const std::string& dir, const RenderedFrame& frame) {
    TargetMaps t;
    int w, h;
    t.heat = read_pfm(dir + "/heat.pfm", w, h);
    t.width = w;
    t.height = h;
    t.pose = read_f32_blob(dir + "/posemap.f32");
    t.shape = read_f32_blob(dir + "/shapemap.f32");
    t.joint = read_f32_blob(dir + "/jointmap.f32");
    t.mask.assign(frame.instance.begin(), frame.instance.end());
    nlohmann::json meta = nlohmann::json::parse(read_text_file(dir + "/targets.json"));
    for (const auto& c : meta.at("centers"))
        t.centers.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
    return t;
}

std::vector<ArticulatedObject> load_corpus(const std::string& path) {
    return corpus_from_json(nlohmann::json::parse(read_text_file(path)));
}

GraspDataset load_grasps(const std::string& path) {
    return GraspDataset::from_jsonl(read_text_file(path));
}

struct DecoderBundle {
    MlpSpec spec;
    MlpParams params;
    ShapeCodeTable codes;
    SgdfConfig cfg;
};

DecoderBundle load_decoder(const std::string& dir) {
    DecoderBundle b;
    std::string tag;
    std::tie(b.spec, b.params) = load_checkpoint(dir + "/decoder.ckpt", &tag);
    if (tag != "sgdf-v1")
        throw std::runtime_error("not an sgdf-v1 decoder checkpoint: " + dir);
    b.codes = ShapeCodeTable::from_json(
        nlohmann::json::parse(read_text_file(dir + "/codes.json")));
    nlohmann::json cj = nlohmann::json::parse(read_text_file(dir + "/decoder_config.json"));
    b.cfg.delta = cj.at("delta").get<double>();
    b.cfg.width = cj.at("width").get<int>();
    return b;
}

std::vector<EvalScene> load_scene_set(const std::string& dir,
                                      int max_scenes = 1 << 30) {
    std::vector<EvalScene> scenes;
    for (int i = 0; i < max_scenes; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d", i);
        std::string sdir = dir + "/" + name;
        if (!fs::exists(sdir + "/scene.json")) break;
        EvalScene es;
        es.id = i;
        es.spec = SceneSpec::from_json(nlohmann::json::parse(read_text_file(sdir + "/scene.json")));
        es.camera = Camera::from_json(
            nlohmann::json::parse(read_text_file(sdir + "/cam_0/camera.json")));
        scenes.push_back(std::move(es));
    }
    if (scenes.empty()) throw std::runtime_error("no scenes found under " + dir);
    return scenes;
}

void write_ppm_gray(const std::string& path, const std::vector<float>& img, int w, int h) {
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (float v : img) {
        unsigned char b = static_cast<unsigned char>(std::clamp(v, 0.0f, 1.0f) * 255.0f);
        out.push_back(static_cast<char>(b));
        out.push_back(static_cast<char>(b));
        out.push_back(static_cast<char>(b));
    }
    write_text_file(path, out);
}

// ---- stages ----

int cmd_gen_objects(const StageArgs& args) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    auto corpus = generate_corpus(cfg.corpus_objects, args.seed);
    write_text_file(args.out + "/corpus.json", corpus_to_json(corpus).dump(2) + "\n");
    write_manifest(args.out, "gen-objects", args, cfg,
                   {{"objects", corpus.size()}});
    std::printf("wrote %zu objects to %s/corpus.json\n", corpus.size(), args.out.c_str());
    return 0;
}

int cmd_gen_grasps(const StageArgs& args, const std::string& corpus_path) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    auto corpus = load_corpus(corpus_path);

    GraspDataset ds;
    nlohmann::json excluded = nlohmann::json::array();
    for (std::size_t oi = 0; oi < corpus.size(); ++oi) {
        const auto& obj = corpus[oi];
        auto states = joint_state_set(obj, cfg.joint_states);
        for (int ji = 0; ji < cfg.joint_states; ++ji) {
            std::uint64_t seed = hash_combine(args.seed, oi * 64 + ji);
            try {
                ds.groups.push_back(generate_grasps(obj, ji, states, cfg.grasp, seed));
            } catch (const InsufficientGrasps& e) {
                std::printf("excluding %s joint %d: %s\n", obj.id.c_str(), ji, e.what());
                excluded.push_back({{"object_id", obj.id},
                                    {"joint_index", ji},
                                    {"found", e.found}});
            }
        }
    }

    write_text_file(args.out + "/grasps.jsonl", ds.to_jsonl());
    write_text_file(args.out + "/grasps_index.json",
                    nlohmann::json{{"pairs", ds.index_json()}, {"excluded", excluded}}
                            .dump(2) +
                        "\n");
    write_manifest(args.out, "gen-grasps", args, cfg,
                   {{"pairs", ds.groups.size()},
                    {"labels", ds.total_labels()},
                    {"excluded", excluded.size()}});
    std::printf("wrote %zu labels over %zu pairs (%zu pairs excluded)\n",
                ds.total_labels(), ds.groups.size(), excluded.size());
    return 0;
}

int cmd_sample_sgdf(const StageArgs& args, const std::string& corpus_path,
                    const std::string& grasps_path) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    auto corpus = load_corpus(corpus_path);
    GraspDataset ds = load_grasps(grasps_path);

    nlohmann::json pair_list = nlohmann::json::array();
    for (const auto& group : ds.groups) {
        const ArticulatedObject* obj = nullptr;
        for (const auto& o : corpus)
            if (o.id == group.object_id) obj = &o;
        if (!obj) throw std::runtime_error("grasps reference unknown object " +
                                           group.object_id);
        auto states = joint_state_set(*obj, cfg.joint_states);
        PairSamples ps;
        ps.object_id = group.object_id;
        ps.joint_index = group.joint_index;
        ps.z_j = normalize_joint(states.states.at(group.joint_index), obj->joint);
        ps.samples = sample_sgdf(*obj, group.joint_index, states, group,
                                 cfg.sgdf.samples_per_pair, cfg.sgdf,
                                 hash_combine(args.seed, fnv1a(group.object_id) +
                                                             group.joint_index));
        char base[64];
        std::snprintf(base, sizeof(base), "%s_j%02d", group.object_id.c_str(),
                      group.joint_index);
        save_sgdf_samples(args.out + "/" + base, ps);
        pair_list.push_back(base);
    }
    write_text_file(args.out + "/pairs.json", pair_list.dump(2) + "\n");
    write_manifest(args.out, "sample-sgdf", args, cfg, {{"pairs", pair_list.size()}});
    std::printf("sampled %zu pairs x %d points\n", pair_list.size(),
                cfg.sgdf.samples_per_pair);
    return 0;
}

int cmd_train_decoder(const StageArgs& args, const std::string& samples_dir) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    nlohmann::json pair_list =
        nlohmann::json::parse(read_text_file(samples_dir + "/pairs.json"));
    std::vector<PairSamples> pairs;
    for (const auto& base : pair_list)
        pairs.push_back(load_sgdf_samples(samples_dir + "/" + base.get<std::string>()));

    TrainedDecoder dec = train_decoder(pairs, cfg.sgdf, args.seed);

    save_checkpoint(args.out + "/decoder.ckpt", dec.spec, dec.params, "sgdf-v1");
    write_text_file(args.out + "/codes.json", dec.codes.to_json().dump(2) + "\n");
    write_text_file(args.out + "/decoder_config.json",
                    nlohmann::json{{"delta", cfg.sgdf.delta},
                                   {"width", cfg.sgdf.width},
                                   {"validation_joint", dec.validation_joint}}
                            .dump(2) +
                        "\n");
    std::string log;
    auto log_line = [](const EpochStats& st) {
        return nlohmann::json{{"epoch", st.epoch},
                              {"lr", st.lr},
                              {"train_sdf", st.train_sdf},
                              {"train_grasp", st.train_grasp},
                              {"val_sdf", st.val_sdf},
                              {"val_grasp", st.val_grasp}}
                   .dump() +
               "\n";
    };
    log += log_line(dec.initial);
    for (const auto& st : dec.log) log += log_line(st);
    write_text_file(args.out + "/decoder_log.jsonl", log);
    write_manifest(args.out, "train-decoder", args, cfg,
                   {{"epochs", dec.log.size()},
                    {"final_train_sdf", dec.log.back().train_sdf},
                    {"final_val_sdf", dec.log.back().val_sdf}});
    std::printf("decoder trained: train_sdf %.5f -> %.5f, val_sdf %.5f\n",
                dec.initial.train_sdf, dec.log.back().train_sdf,
                dec.log.back().val_sdf);
    return 0;
}

int cmd_gen_scenes(const StageArgs& args, const std::string& corpus_path,
                   const std::string& decoder_dir) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    auto corpus = load_corpus(corpus_path);
    DecoderBundle dec = load_decoder(decoder_dir);

    int frames = 0;
    for (int si = 0; si < cfg.scene_count; ++si) {
        SceneSpec spec = generate_scene(corpus, cfg.scene, hash_combine(args.seed, si));
        SceneContext ctx(spec, corpus);
        char sname[32];
        std::snprintf(sname, sizeof(sname), "scene_%04d", si);
        std::string sdir = args.out + "/" + sname;
        fs::create_directories(sdir);
        write_text_file(sdir + "/scene.json", spec.to_json().dump(2) + "\n");
        for (int ci = 0; ci < cfg.cameras_per_scene; ++ci) {
            Rng cam_rng(hash_combine(args.seed ^ 0xCA11ULL, si * 64 + ci));
            Camera cam = sample_camera(spec, cfg.image_size, cfg.image_size, cam_rng);
            RenderedFrame frame = render(ctx, cam);
            TargetMaps maps = make_target_maps(ctx, cam, frame, dec.codes);
            char cname[16];
            std::snprintf(cname, sizeof(cname), "cam_%d", ci);
            save_frame_dir(sdir + "/" + cname, frame, cam, maps);
            ++frames;
        }
    }
    write_manifest(args.out, "gen-scenes", args, cfg,
                   {{"scenes", cfg.scene_count}, {"frames", frames}});
    std::printf("wrote %d scenes, %d frames\n", cfg.scene_count, frames);
    return 0;
}

int cmd_train_encoder(const StageArgs& args, const std::string& scenes_dir) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);

    std::vector<TrainingFrame> frames;
    for (int si = 0;; ++si) {
        char sname[32];
        std::snprintf(sname, sizeof(sname), "scene_%04d", si);
        std::string sdir = scenes_dir + "/" + sname;
        if (!fs::exists(sdir + "/scene.json")) break;
        for (int ci = 0;; ++ci) {
            char cname[16];
            std::snprintf(cname, sizeof(cname), "cam_%d", ci);
            std::string cdir = sdir + "/" + cname;
            if (!fs::exists(cdir + "/camera.json")) break;
            TrainingFrame tf;
            tf.frame = load_frame(cdir);
            tf.camera = Camera::from_json(
                nlohmann::json::parse(read_text_file(cdir + "/camera.json")));
            tf.targets = load_targets(cdir, tf.frame);
            frames.push_back(std::move(tf));
        }
    }
    std::printf("training encoder on %zu frames\n", frames.size());
    TrainedEncoder enc = train_encoder(frames, cfg.percept, args.seed);

    save_encoder(args.out + "/encoder.ckpt", enc);
    std::string log;
    for (const auto& st : enc.log)
        log += nlohmann::json{{"epoch", st.epoch}, {"loss", st.sampled_loss}}.dump() + "\n";
    write_text_file(args.out + "/encoder_log.jsonl", log);
    write_manifest(args.out, "train-encoder", args, cfg,
                   {{"frames", frames.size()},
                    {"final_loss", enc.log.back().sampled_loss}});
    std::printf("encoder trained: loss %.5f -> %.5f\n", enc.log.front().sampled_loss,
                enc.log.back().sampled_loss);
    return 0;
}

int cmd_infer(const StageArgs& args, const std::string& scene_dir,
              const std::string& decoder_dir, const std::string& encoder_path,
              bool oracle, bool icp) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    DecoderBundle dec = load_decoder(decoder_dir);

    RenderedFrame frame = load_frame(scene_dir);
    Camera cam = Camera::from_json(
        nlohmann::json::parse(read_text_file(scene_dir + "/camera.json")));

    PredictedMaps maps;
    if (oracle) {
        TargetMaps targets = load_targets(scene_dir, frame);
        maps = maps_from_targets(targets);
    } else {
        if (encoder_path.empty())
            throw std::runtime_error("--encoder required unless --oracle is set");
        LoadedEncoder enc = load_encoder(encoder_path);
        maps = encode(enc.spec, enc.params, frame, cam, enc.dilation);
        // predicted maps in the same formats the scene stage writes
        write_pfm(args.out + "/pred_heat.pfm", maps.heat, maps.width, maps.height);
        write_f32_blob(args.out + "/pred_posemap.f32", maps.pose);
        write_f32_blob(args.out + "/pred_shapemap.f32", maps.shape);
        write_f32_blob(args.out + "/pred_jointmap.f32", maps.joint);
    }

    PipelineConfig pcfg = cfg.pipeline;
    pcfg.use_icp = icp;
    pcfg.delta = dec.cfg.delta;
    pcfg.detection_threshold = cfg.percept.detection_threshold;
    pcfg.nms_radius = cfg.percept.nms_radius;
    auto recs = reconstruct_scene(frame, cam, maps, dec.spec, dec.params, pcfg);

    std::string grasps_out;
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "recon_%03zu.obj", i);
        write_text_file(args.out + "/" + name, mesh_to_obj(recs[i].mesh_camera));
        for (const auto& [pose, score] : recs[i].grasps_camera) {
            nlohmann::json rec{{"object_index", i},
                               {"pose", to_json(pose)},
                               {"score", score}};
            grasps_out += rec.dump() + "\n";
        }
        summary.push_back({{"object_index", i},
                           {"peak", {recs[i].detection.row, recs[i].detection.col}},
                           {"grasps", recs[i].grasps_camera.size()},
                           {"mesh_vertices", recs[i].mesh_camera.vertices.size()},
                           {"icp_applied", recs[i].icp_applied}});
    }
    write_text_file(args.out + "/grasps.jsonl", grasps_out);
    write_manifest(args.out, "infer", args, cfg,
                   {{"detections", recs.size()}, {"objects", summary}});
    std::printf("reconstructed %zu objects\n", recs.size());
    return 0;
}

int cmd_evaluate(const StageArgs& args, const std::string& corpus_path,
                 const std::string& grasps_path, const std::string& scenes_dir,
                 const std::string& decoder_dir, const std::string& encoder_path,
                 bool oracle, bool icp, bool noisy, bool labels_only, int max_scenes) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    auto corpus = load_corpus(corpus_path);
    GraspDataset ds = load_grasps(grasps_path);

    if (labels_only) {
        LabelEvalResult r = evaluate_labels(corpus, ds, cfg.grasp);
        nlohmann::json m{{"labels", {{"SR", r.sr}, {"RSR", r.rsr}, {"n", r.n}}}};
        write_text_file(args.out + "/metrics.json", m.dump(2) + "\n");
        write_manifest(args.out, "evaluate", args, cfg,
                       {{"mode", "labels"}, {"SR", r.sr}, {"RSR", r.rsr}});
        std::printf("label evaluation: SR %.4f RSR %.4f over %d labels\n", r.sr, r.rsr,
                    r.n);
        return 0;
    }

    DecoderBundle dec = load_decoder(decoder_dir);
    ModelBundle models;
    models.decoder_spec = dec.spec;
    models.decoder_params = dec.params;
    models.codes = dec.codes;
    models.delta = dec.cfg.delta;
    LoadedEncoder enc;
    if (!oracle) {
        if (encoder_path.empty())
            throw std::runtime_error("--encoder required unless --oracle is set");
        enc = load_encoder(encoder_path);
        models.encoder_spec = &enc.spec;
        models.encoder_params = &enc.params;
        models.encoder_dilation = enc.dilation;
    }

    auto scenes = load_scene_set(scenes_dir, max_scenes);
    GridCache cache;
    EvalRun run = evaluate(scenes, corpus, ds, models, oracle, icp, noisy,
                           cfg.eval_config(), &cache);

    std::string method = std::string(oracle ? "oracle" : "encoder") + (icp ? "+icp" : "");
    std::string condition = method + "/" + (noisy ? "noisy" : "gt");
    EvalGrid grid;
    grid.conditions[condition] = run.metrics;
    write_text_file(args.out + "/metrics.json", grid.to_json().dump(2) + "\n");
    write_text_file(args.out + "/table.txt", grid.to_table());
    std::string records;
    for (const auto& r : run.records) records += r.to_json().dump() + "\n";
    write_text_file(args.out + "/records.jsonl", records);
    write_manifest(args.out, "evaluate", args, cfg,
                   {{"condition", condition},
                    {"SR", run.metrics.sr},
                    {"RSR", run.metrics.rsr},
                    {"n", run.metrics.n},
                    {"skipped_scenes", run.skipped_scenes.size()}});
    std::printf("%s: SR %.4f RSR %.4f over %d records (%zu scenes skipped)\n",
                condition.c_str(), run.metrics.sr, run.metrics.rsr, run.metrics.n,
                run.skipped_scenes.size());
    return 0;
}

int cmd_render_debug(const StageArgs& args, const std::string& corpus_path) {
    AppConfig cfg = load_config(args);
    fs::create_directories(args.out);
    auto corpus = load_corpus(corpus_path);
    SceneSpec spec = generate_scene(corpus, cfg.scene, args.seed);
    SceneContext ctx(spec, corpus);
    Rng cam_rng(hash_combine(args.seed ^ 0xCA11ULL, 0));
    Camera cam = sample_camera(spec, cfg.image_size, cfg.image_size, cam_rng);
    RenderedFrame frame = render(ctx, cam);

    write_text_file(args.out + "/scene.json", spec.to_json().dump(2) + "\n");
    write_pfm(args.out + "/depth.pfm", frame.depth, frame.width, frame.height);
    write_pfm(args.out + "/shaded.pfm", frame.shaded, frame.width, frame.height);
    write_ppm_gray(args.out + "/shaded.ppm", frame.shaded, frame.width, frame.height);
    std::vector<float> noisy = add_depth_noise(frame.depth, frame.incidence, cfg.noise,
                                               args.seed);
    write_pfm(args.out + "/depth_noisy.pfm", noisy, frame.width, frame.height);
    std::vector<std::uint16_t> mask(frame.instance.begin(), frame.instance.end());
    write_pgm16(args.out + "/mask.pgm", mask, frame.width, frame.height);
    write_manifest(args.out, "render-debug", args, cfg,
                   {{"objects", spec.objects.size()}});
    std::printf("rendered %zu objects at %dx%d\n", spec.objects.size(), frame.width,
                frame.height);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"articulated-object grasp pipeline"};
    app.require_subcommand(1);

    StageArgs args;
    std::string corpus_path, grasps_path, samples_dir, scenes_dir, scene_dir;
    std::string decoder_dir, encoder_path;
    bool oracle = false, icp = false, noisy = false, labels_only = false;
    int max_scenes = 1 << 30;

    auto* gen_objects = app.add_subcommand("gen-objects", "procedural object corpus");
    add_common(gen_objects, args);

    auto* gen_grasps = app.add_subcommand("gen-grasps", "grasp labels per joint state");
    add_common(gen_grasps, args);
    gen_grasps->add_option("--corpus", corpus_path, "corpus.json")->required();

    auto* sample = app.add_subcommand("sample-sgdf", "field training samples");
    add_common(sample, args);
    sample->add_option("--corpus", corpus_path, "corpus.json")->required();
    sample->add_option("--grasps", grasps_path, "grasps.jsonl")->required();

    auto* train_dec = app.add_subcommand("train-decoder", "train the field decoder");
    add_common(train_dec, args);
    train_dec->add_option("--samples", samples_dir, "sample-sgdf output dir")->required();

    auto* gen_scenes = app.add_subcommand("gen-scenes", "render scenes + target maps");
    add_common(gen_scenes, args);
    gen_scenes->add_option("--corpus", corpus_path, "corpus.json")->required();
    gen_scenes->add_option("--decoder", decoder_dir, "train-decoder output dir")->required();

    auto* train_enc = app.add_subcommand("train-encoder", "train the per-pixel encoder");
    add_common(train_enc, args);
    train_enc->add_option("--scenes", scenes_dir, "gen-scenes output dir")->required();

    auto* infer = app.add_subcommand("infer", "RGB-D frame -> meshes + grasps");
    add_common(infer, args);
    infer->add_option("--frame", scene_dir, "frame dir (scene_XXXX/cam_K)")->required();
    infer->add_option("--decoder", decoder_dir, "train-decoder output dir")->required();
    infer->add_option("--encoder", encoder_path, "encoder.ckpt");
    infer->add_flag("--oracle", oracle, "use ground-truth maps");
    infer->add_flag("--icp", icp, "refine poses with ICP");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "SR/RSR over a scene set");
    add_common(evaluate_cmd, args);
    evaluate_cmd->add_option("--corpus", corpus_path, "corpus.json")->required();
    evaluate_cmd->add_option("--grasps", grasps_path, "grasps.jsonl")->required();
    evaluate_cmd->add_option("--scenes", scenes_dir, "gen-scenes output dir");
    evaluate_cmd->add_option("--decoder", decoder_dir, "train-decoder output dir");
    evaluate_cmd->add_option("--encoder", encoder_path, "encoder.ckpt");
    evaluate_cmd->add_option("--max-scenes", max_scenes, "evaluate at most N scenes");
    evaluate_cmd->add_flag("--oracle", oracle, "use ground-truth maps");
    evaluate_cmd->add_flag("--icp", icp, "refine poses with ICP");
    evaluate_cmd->add_flag("--noisy", noisy, "apply the depth-noise model");
    evaluate_cmd->add_flag("--labels-only", labels_only,
                           "evaluate stored labels as predictions");

    auto* render_debug = app.add_subcommand("render-debug", "render one scene to files");
    add_common(render_debug, args);
    render_debug->add_option("--corpus", corpus_path, "corpus.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_objects->parsed()) return cmd_gen_objects(args);
        if (gen_grasps->parsed()) return cmd_gen_grasps(args, corpus_path);
        if (sample->parsed()) return cmd_sample_sgdf(args, corpus_path, grasps_path);
        if (train_dec->parsed()) return cmd_train_decoder(args, samples_dir);
        if (gen_scenes->parsed()) return cmd_gen_scenes(args, corpus_path, decoder_dir);
        if (train_enc->parsed()) return cmd_train_encoder(args, scenes_dir);
        if (infer->parsed())
            return cmd_infer(args, scene_dir, decoder_dir, encoder_path, oracle, icp);
        if (evaluate_cmd->parsed())
            return cmd_evaluate(args, corpus_path, grasps_path, scenes_dir, decoder_dir,
                                encoder_path, oracle, icp, noisy, labels_only, max_scenes);
        if (render_debug->parsed()) return cmd_render_debug(args, corpus_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
