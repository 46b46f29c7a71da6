// Command-line driver: synthetic data generation, structured-SVM training,
// ACM inference, evaluation, ablations and SVG overlays.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include "json.hpp"

#include "dsac/config.hpp"
#include "dsac/dataset.hpp"
#include "dsac/inference.hpp"
#include "dsac/metrics.hpp"
#include "dsac/serialize.hpp"
#include "dsac/svg.hpp"
#include "dsac/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_out(std::string path) {
    const char* root = std::getenv("DSAC_OUT_ROOT");
    if (root && *root && !path.empty() && path[0] != '/')
        return std::string(root) + "/" + path;
    return path;
}

std::vector<const dsac::Instance*> select_split(const dsac::Dataset& ds, const std::string& split) {
    std::vector<const dsac::Instance*> out;
    if (split == "train" || split == "all")
        for (const auto& i : ds.train) out.push_back(&i);
    if (split == "test" || split == "all")
        for (const auto& i : ds.test) out.push_back(&i);
    if (out.empty()) throw std::runtime_error("no instances in split '" + split + "'");
    return out;
}

void parallel_over(size_t n, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads <= 0) threads = 2;
        threads = std::min(threads, 8);
    }
    if (threads == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

json contour_to_json(const dsac::Contour& c) {
    json nodes = json::array();
    for (const dsac::Vec2& p : c.nodes) nodes.push_back({p.u, p.v});
    return nodes;
}

dsac::Contour contour_from_json(const json& nodes) {
    dsac::Contour c;
    for (const auto& p : nodes) c.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return c;
}

// pre-scan for --config so CLI flags can override file values
dsac::RunConfig load_config_arg(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream f(argv[i + 1]);
            if (!f) throw std::runtime_error(std::string("cannot open config ") + argv[i + 1]);
            return dsac::RunConfig::from_json(json::parse(f));
        }
    }
    return {};
}

void add_run_config_flags(CLI::App* cmd, dsac::RunConfig& rc) {
    cmd->add_option("--config", "JSON config file (applied before other flags)");
    cmd->add_option("--L", rc.L, "contour nodes");
    cmd->add_option("--iterations", rc.iterations, "ACM iterations");
    cmd->add_option("--gamma", rc.step_gamma, "external force step scale");
    cmd->add_option("--optimizer", rc.optimizer, "adam|sgd");
    cmd->add_option("--lr", rc.lr, "learning rate (<0: per-predictor default)");
    cmd->add_option("--lr-decay", rc.lr_decay, "multiplicative per-epoch learning rate factor");
    cmd->add_option("--C", rc.C, "hinge weight");
    cmd->add_option("--l2", rc.l2, "weight decay");
    cmd->add_option("--c-delta", rc.c_delta, "loss augmentation magnitude");
    cmd->add_option("--epochs", rc.epochs, "training epochs");
    cmd->add_option("--batch", rc.batch, "gradient accumulation batch");
    cmd->add_option("--seed", rc.seed, "run seed");
    cmd->add_option("--predictor", rc.predictor, "convnet|directgrid");
    cmd->add_option("--mlp-hidden", rc.mlp_hidden, "per-pixel MLP hidden width");
    cmd->add_option("--smooth-init", rc.smooth_init, "raw alpha/beta pre-activation at init");
    cmd->add_flag("--max-pool", rc.max_pool, "use max pooling instead of average");
    cmd->add_flag("--alpha-local", rc.alpha_local, "per-pixel alpha map");
    cmd->add_flag("!--scalar-beta", rc.beta_local, "broadcast a single beta value");
    cmd->add_flag("!--scalar-kappa", rc.kappa_local, "broadcast a single kappa value");
    cmd->add_flag("--no-kappa", rc.no_kappa, "disable the balloon term");
    cmd->add_flag("!--no-augment", rc.augment, "disable rotation/flip augmentation");
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, dsac::SynthConfig cfg, int n_test, bool force) {
    const std::string out = resolve_out(out_dir);
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw std::runtime_error("output path exists: " + out + " (use --force to overwrite)");
    fs::create_directories(out);

    dsac::SynthConfig full = cfg;
    full.n = cfg.n + n_test;
    auto all = dsac::generate_synthetic(full);
    dsac::Dataset ds;
    ds.train.assign(std::make_move_iterator(all.begin()),
                    std::make_move_iterator(all.begin() + cfg.n));
    ds.test.assign(std::make_move_iterator(all.begin() + cfg.n),
                   std::make_move_iterator(all.end()));
    json desc = cfg.to_json();
    desc["n_test"] = n_test;
    ds.config = desc;
    dsac::save_dataset(ds, out);
    std::printf("wrote %d train + %d test instances to %s\n", cfg.n, n_test, out.c_str());
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, const dsac::RunConfig& rc,
              bool quiet) {
    const dsac::Dataset ds = dsac::load_dataset(data_dir);
    if (ds.train.empty()) throw std::runtime_error("dataset has no training instances");
    const std::string out = resolve_out(out_dir);
    const dsac::TrainResult result = dsac::train_ssvm(rc, ds.train, out, !quiet);
    std::printf("trained %s on %zu instances for %d epochs; final mean hinge %.5f\n",
                rc.predictor.c_str(), ds.train.size(), rc.epochs,
                result.stats.epoch_mean_hinge.back());
    std::printf("model written to %s\n",
                (out + (result.shared ? "/model.dsac" : "/model_directgrid")).c_str());
    return 0;
}

struct InferOutputs {
    std::vector<dsac::Contour> preds;
    std::vector<std::string> ids;
};

InferOutputs run_infer(const dsac::Dataset& ds, const std::string& split,
                       const std::string& model_path, const std::string& maps_dir,
                       const dsac::RunConfig& rc, const std::string& traj_dir,
                       const std::string& maps_out_dir, int threads) {
    const auto instances = select_split(ds, split);

    std::unique_ptr<dsac::Predictor> shared;
    std::map<std::string, std::unique_ptr<dsac::Predictor>> per_id;
    dsac::EnergyMaps fixed_maps;
    bool use_fixed = false;

    if (!maps_dir.empty()) {
        fixed_maps = dsac::load_energy_maps(maps_dir);
        use_fixed = true;
    } else if (fs::is_directory(model_path)) {
        for (const auto& e : fs::directory_iterator(model_path)) {
            if (e.path().extension() != ".dsac") continue;
            auto loaded = dsac::load_predictor(e.path().string());
            per_id[e.path().stem().string()] = std::move(loaded.predictor);
        }
        if (per_id.empty()) throw std::runtime_error("no .dsac models in " + model_path);
    } else {
        shared = dsac::load_predictor(model_path).predictor;
    }

    auto check_dims = [&](const dsac::Predictor& p, const dsac::Instance& inst) {
        const dsac::PredictorConfig& pc = p.config();
        if (pc.width != inst.patch.width || pc.height != inst.patch.height ||
            pc.channels != inst.patch.channels)
            throw std::runtime_error("architecture mismatch: model expects " +
                                     std::to_string(pc.width) + "x" + std::to_string(pc.height) +
                                     "x" + std::to_string(pc.channels) + ", dataset patch is " +
                                     std::to_string(inst.patch.width) + "x" +
                                     std::to_string(inst.patch.height) + "x" +
                                     std::to_string(inst.patch.channels));
    };

    if (!traj_dir.empty()) fs::create_directories(traj_dir);
    if (!maps_out_dir.empty()) fs::create_directories(maps_out_dir);

    InferOutputs out;
    out.preds.resize(instances.size());
    out.ids.resize(instances.size());
    dsac::InferenceConfig icfg = rc.inference_config();

    parallel_over(instances.size(), threads, [&](size_t i) {
        const dsac::Instance& inst = *instances[i];
        dsac::EnergyMaps maps;
        if (use_fixed) {
            if (fixed_maps.width() != inst.patch.width || fixed_maps.height() != inst.patch.height)
                throw std::runtime_error("maps dimensions do not match dataset patches");
            maps = fixed_maps;
        } else if (shared) {
            check_dims(*shared, inst);
            maps = shared->forward(inst.patch);
        } else {
            auto it = per_id.find(inst.id);
            if (it == per_id.end())
                throw std::runtime_error("no per-instance model for id " + inst.id);
            check_dims(*it->second, inst);
            maps = it->second->forward(inst.patch);
        }
        const dsac::Contour init = dsac::resample_closed(dsac::ensure_ccw(inst.init), rc.L);
        dsac::Trajectory traj;
        dsac::Trajectory* tp = traj_dir.empty() ? nullptr : &traj;
        out.preds[i] = dsac::run_inference(maps, init, icfg, tp);
        out.ids[i] = inst.id;
        if (tp) {
            json jt = json::array();
            for (const auto& c : traj.contours) jt.push_back(contour_to_json(c));
            std::ofstream f(traj_dir + "/" + inst.id + ".json", std::ios::trunc);
            f << json{{"id", inst.id}, {"contours", jt}, {"energies", traj.energies}}.dump();
        }
        if (!maps_out_dir.empty()) dsac::save_energy_maps(maps, maps_out_dir + "/" + inst.id);
    });
    return out;
}

int cmd_infer(const std::string& data_dir, const std::string& out_file,
              const std::string& model_path, const std::string& maps_dir, std::string split,
              const dsac::RunConfig& rc, const std::string& traj_dir,
              const std::string& maps_out_dir, int threads) {
    const dsac::Dataset ds = dsac::load_dataset(data_dir);
    const InferOutputs res =
        run_infer(ds, split, model_path, maps_dir, rc, traj_dir, maps_out_dir, threads);
    const std::string out = resolve_out(out_file);
    if (const auto parent = fs::path(out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    for (size_t i = 0; i < res.preds.size(); ++i)
        f << json{{"id", res.ids[i]}, {"nodes", contour_to_json(res.preds[i])}}.dump() << "\n";
    std::printf("wrote %zu predictions to %s\n", res.preds.size(), out.c_str());
    return 0;
}

std::pair<std::vector<dsac::Contour>, std::vector<dsac::Instance>> load_predictions(
    const std::string& preds_file, const dsac::Dataset& ds, const std::string& split) {
    std::map<std::string, dsac::Contour> by_id;
    std::ifstream f(preds_file);
    if (!f) throw std::runtime_error("cannot open " + preds_file);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        by_id[j.at("id").get<std::string>()] = contour_from_json(j.at("nodes"));
    }
    std::vector<dsac::Contour> preds;
    std::vector<dsac::Instance> insts;
    for (const dsac::Instance* inst : select_split(ds, split)) {
        auto it = by_id.find(inst->id);
        if (it == by_id.end()) throw std::runtime_error("prediction missing for id " + inst->id);
        preds.push_back(it->second);
        insts.push_back(*inst);
    }
    return {std::move(preds), std::move(insts)};
}

int cmd_eval(const std::string& data_dir, const std::string& preds_file,
             const std::string& out_file, const std::string& split) {
    const dsac::Dataset ds = dsac::load_dataset(data_dir);
    auto [preds, insts] = load_predictions(preds_file, ds, split);
    const dsac::EvalReport rep = dsac::evaluate(preds, insts);
    std::fputs(rep.to_table().c_str(), stdout);
    if (!out_file.empty()) {
        std::ofstream f(resolve_out(out_file), std::ios::trunc);
        f << rep.to_json().dump(2) << "\n";
    }
    return 0;
}

int cmd_render(const std::string& data_dir, const std::string& preds_file,
               const std::string& out_dir, const std::string& split) {
    const dsac::Dataset ds = dsac::load_dataset(data_dir);
    auto [preds, insts] = load_predictions(preds_file, ds, split);
    const std::string out = resolve_out(out_dir);
    fs::create_directories(out);
    for (size_t i = 0; i < insts.size(); ++i)
        dsac::render_overlay(insts[i], &preds[i], out + "/" + insts[i].id + ".svg");
    std::printf("wrote %zu overlays to %s\n", insts.size(), out.c_str());
    return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& out_dir, dsac::RunConfig rc,
               int threads) {
    const dsac::Dataset ds = dsac::load_dataset(data_dir);
    if (ds.train.empty() || ds.test.empty())
        throw std::runtime_error("ablation needs both train and test splits");
    const std::string out = resolve_out(out_dir);
    fs::create_directories(out);

    struct Variant {
        const char* name;
        void (*apply)(dsac::RunConfig&);
    };
    const Variant variants[] = {
        {"full", [](dsac::RunConfig&) {}},
        {"scalar-kappa-beta",
         [](dsac::RunConfig& c) {
             c.kappa_local = false;
             c.beta_local = false;
         }},
        {"no-kappa", [](dsac::RunConfig& c) { c.no_kappa = true; }},
        {"local-alpha", [](dsac::RunConfig& c) { c.alpha_local = true; }},
    };

    json results = json::array();
    std::printf("%-20s %10s %12s %10s\n", "variant", "mean IoU", "weigh. cov.", "area RMSE");
    for (const Variant& v : variants) {
        dsac::RunConfig vc = rc;
        v.apply(vc);
        const std::string vdir = out + "/" + v.name;
        dsac::train_ssvm(vc, ds.train, vdir, false);
        const InferOutputs res =
            run_infer(ds, "test", vdir + "/model.dsac", "", vc, "", "", threads);
        std::vector<dsac::Instance> insts;
        for (const dsac::Instance* p : select_split(ds, "test")) insts.push_back(*p);
        const dsac::EvalReport rep = dsac::evaluate(res.preds, insts);
        std::printf("%-20s %10.4f %12.4f %10.3f\n", v.name, rep.mean_iou, rep.weighted_coverage,
                    rep.area_rmse);
        results.push_back({{"variant", v.name},
                           {"mean_iou", rep.mean_iou},
                           {"weighted_coverage", rep.weighted_coverage},
                           {"area_rmse", rep.area_rmse}});
    }
    std::ofstream f(out + "/ablate.json", std::ios::trunc);
    f << results.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep structured active contours"};
    app.require_subcommand(1);

    dsac::RunConfig rc;
    try {
        rc = load_config_arg(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    dsac::SynthConfig sc;
    int n_test = 100;
    bool force = false;
    std::string synth_out, shape = "mixed", texture = "flat";
    synth->add_option("--out", synth_out, "dataset directory")->required();
    synth->add_option("--n", sc.n, "training instances");
    synth->add_option("--n-test", n_test, "test instances");
    synth->add_option("--size", sc.size, "patch size (U=V)");
    synth->add_option("--shape", shape, "axis-rect|rot-rect|l-shape|mixed");
    synth->add_option("--noise", sc.noise_sigma, "additive Gaussian noise sigma");
    synth->add_option("--texture", texture, "flat|gradient|speckle");
    synth->add_option("--seed", sc.seed, "generator seed");
    synth->add_option("--jitter", sc.jitter_frac, "init seed jitter fraction");
    synth->add_option("--init-radius", sc.init_radius_frac, "init circle radius fraction");
    synth->add_option("--init-nodes", sc.init_nodes, "init circle node count");
    synth->add_option("--distractors", sc.distractors, "distractor shapes per patch");
    synth->add_flag("--force", force, "overwrite an existing dataset directory");

    // train
    auto* train = app.add_subcommand("train", "run structured-SVM training");
    std::string train_data, train_out;
    bool quiet = false;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "run output directory")->required();
    train->add_flag("--quiet", quiet, "suppress per-epoch progress");
    add_run_config_flags(train, rc);

    // infer
    auto* infer = app.add_subcommand("infer", "predict contours");
    std::string infer_data, infer_out, infer_model, infer_maps, infer_split = "test";
    std::string traj_dir, maps_out;
    int threads = 0;
    infer->add_option("--data", infer_data, "dataset directory")->required();
    infer->add_option("--out", infer_out, "predictions file (JSON lines)")->required();
    infer->add_option("--model", infer_model, "model file (or directgrid model directory)");
    infer->add_option("--maps", infer_maps, "energy-maps directory (debug path, bypasses model)");
    infer->add_option("--split", infer_split, "train|test|all");
    infer->add_option("--dump-trajectory", traj_dir, "write per-instance trajectories here");
    infer->add_option("--dump-maps", maps_out, "write per-instance energy maps here");
    infer->add_option("--threads", threads, "worker threads (0 = auto)");
    add_run_config_flags(infer, rc);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate predictions");
    std::string eval_data, eval_preds, eval_out, eval_split = "test";
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--preds", eval_preds, "predictions file")->required();
    eval->add_option("--out", eval_out, "write the JSON report here");
    eval->add_option("--split", eval_split, "train|test|all");

    // render
    auto* render = app.add_subcommand("render", "write SVG overlays");
    std::string render_data, render_preds, render_out, render_split = "test";
    render->add_option("--data", render_data, "dataset directory")->required();
    render->add_option("--preds", render_preds, "predictions file")->required();
    render->add_option("--out", render_out, "output directory")->required();
    render->add_option("--split", render_split, "train|test|all");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train and evaluate the ablation variants");
    std::string ablate_data, ablate_out;
    int ablate_threads = 0;
    ablate->add_option("--data", ablate_data, "dataset directory")->required();
    ablate->add_option("--out", ablate_out, "output directory")->required();
    ablate->add_option("--threads", ablate_threads, "inference threads");
    add_run_config_flags(ablate, rc);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            sc.family = dsac::shape_family_from_string(shape);
            sc.texture = dsac::texture_from_string(texture);
            return cmd_synth(synth_out, sc, n_test, force);
        }
        if (train->parsed()) return cmd_train(train_data, train_out, rc, quiet);
        if (infer->parsed()) {
            if (infer_model.empty() && infer_maps.empty())
                throw std::runtime_error("infer needs --model or --maps");
            return cmd_infer(infer_data, infer_out, infer_model, infer_maps, infer_split, rc,
                             traj_dir, maps_out, threads);
        }
        if (eval->parsed()) return cmd_eval(eval_data, eval_preds, eval_out, eval_split);
        if (render->parsed())
            return cmd_render(render_data, render_preds, render_out, render_split);
        if (ablate->parsed()) return cmd_ablate(ablate_data, ablate_out, rc, ablate_threads);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
