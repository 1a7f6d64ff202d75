// Command-line surface: dataset synthesis, training, stitched prediction,
// Dice evaluation, gradient checking, and PGM slice export.
//
// Exit codes: 0 success, 1 usage, 2 invalid config/spec, 3 I/O,
// 4 file-format/checkpoint parse, 5 runtime failure (gradcheck fail,
// training abort, evaluation mismatch).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "uafuse/uafuse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;
constexpr int kExitRuntime = 5;

struct CliError {
    int code;
    std::string message;
};

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CliError{kExitIo, "cannot open '" + path + "'"};
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw CliError{kExitConfig, "'" + path + "' is not valid JSON: " + e.what()};
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw CliError{kExitIo, "cannot write '" + path + "'"};
    f << j.dump(2) << "\n";
    if (!f) throw CliError{kExitIo, "short write to '" + path + "'"};
}

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw CliError{kExitIo, "cannot create output directory '" + dir + "': " + ec.message()};
    std::ofstream probe(dir + "/.write_probe", std::ios::trunc);
    if (!probe) throw CliError{kExitIo, "output directory '" + dir + "' is not writable"};
    probe.close();
    fs::remove(dir + "/.write_probe", ec);
}

std::string case_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "case_%03d", index);
    return buf;
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out_dir, int count, std::uint64_t seed,
                  const std::vector<std::string>& raw_args) {
    uafuse::PhantomSpec spec;
    try {
        spec = uafuse::phantom_spec_from_json(load_json_file(spec_path));
    } catch (const std::invalid_argument& e) {
        throw CliError{kExitConfig, std::string("invalid phantom spec: ") + e.what()};
    }
    if (count < 1) throw CliError{kExitConfig, "--count must be positive"};

    ensure_output_dir(out_dir);
    write_json_file(out_dir + "/manifest.json",
                    uafuse::run_manifest("gen-synth", uafuse::to_json(spec), seed, out_dir, raw_args));

    json cases = json::array();
    for (int i = 0; i < count; ++i) {
        auto phantom = uafuse::generate_phantom(spec, seed + static_cast<std::uint64_t>(i));
        const std::string cdir = out_dir + "/" + case_name(i);
        ensure_output_dir(cdir);
        for (std::size_t m = 0; m < phantom.volume.modalities.size(); ++m)
            uafuse::write_nifti(phantom.volume.modalities[m], phantom.volume.spacing,
                                cdir + "/modal" + std::to_string(m + 1) + ".nii");
        uafuse::write_nifti(phantom.volume.label, phantom.volume.spacing, cdir + "/label.nii");
        if (spec.has_corruption) uafuse::write_nifti(phantom.region, phantom.volume.spacing, cdir + "/region.nii");
        cases.push_back(case_name(i));
        std::cout << "generated " << case_name(i) << "\n";
    }
    write_json_file(out_dir + "/dataset.json", json{{"spec", uafuse::to_json(spec)},
                                                    {"seed", seed},
                                                    {"count", count},
                                                    {"cases", cases}});
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              const std::vector<std::string>& raw_args) {
    uafuse::ExperimentConfig cfg;
    try {
        cfg = uafuse::experiment_config_from_json(load_json_file(config_path));
    } catch (const std::invalid_argument& e) {
        throw CliError{kExitConfig, std::string("invalid config: ") + e.what()};
    }

    uafuse::Dataset data = uafuse::load_dataset(data_dir);
    ensure_output_dir(out_dir);
    write_json_file(out_dir + "/manifest.json",
                    uafuse::run_manifest("train", uafuse::to_json(cfg), cfg.train.seed, out_dir, raw_args));

    std::ofstream metrics(out_dir + "/metrics.jsonl", std::ios::trunc);
    if (!metrics) throw CliError{kExitIo, "cannot write metrics.jsonl"};

    uafuse::TrainHooks hooks;
    hooks.on_epoch = [&](const uafuse::EpochRecord& rec) {
        metrics << uafuse::to_json(rec).dump() << "\n";
        metrics.flush();
        std::cout << "epoch " << rec.epoch << " stage " << rec.stage << " loss " << rec.total;
        if (rec.validated) std::cout << " val_dice " << rec.val.mean_foreground;
        std::cout << std::endl;
    };

    auto result = uafuse::train<float>(cfg.network, cfg.train, data, hooks);

    const json sidecar = uafuse::to_json(cfg);
    uafuse::write_checkpoint(out_dir + "/ckpt_best.uaf", result.best_params, &result.best_appendix);
    write_json_file(out_dir + "/ckpt_best.uaf.json", sidecar);
    auto last = uafuse::snapshot_params(result.model);
    uafuse::write_checkpoint(out_dir + "/ckpt_last.uaf", last);
    write_json_file(out_dir + "/ckpt_last.uaf.json", sidecar);

    std::cout << "best epoch " << result.best_epoch << " mean foreground dice " << result.best_val_dice << "\n";
    return kExitOk;
}

int cmd_predict(const std::string& ckpt_path, const std::string& case_dir, const std::string& out_dir,
                bool emit_uncertainty, const std::vector<std::string>& raw_args) {
    const std::string sidecar_path = ckpt_path + ".json";
    if (!fs::exists(sidecar_path))
        throw CliError{kExitIo, "missing config sidecar '" + sidecar_path + "' (written next to checkpoints by train)"};
    uafuse::ExperimentConfig cfg;
    try {
        cfg = uafuse::experiment_config_from_json(load_json_file(sidecar_path));
    } catch (const std::invalid_argument& e) {
        throw CliError{kExitConfig, std::string("invalid sidecar config: ") + e.what()};
    }

    auto model = uafuse::Model<float>::init(cfg.network, 0);
    try {
        uafuse::load_params(model, uafuse::read_checkpoint(ckpt_path));
    } catch (const std::runtime_error& e) {
        throw CliError{kExitFormat, e.what()};
    }

    uafuse::Volume vol = uafuse::load_case(case_dir);
    ensure_output_dir(out_dir);
    write_json_file(out_dir + "/manifest.json",
                    uafuse::run_manifest("predict", uafuse::to_json(cfg), 0, out_dir, raw_args));

    auto result = uafuse::predict_volume(model, vol, cfg.train.patch_size, cfg.train.stride, emit_uncertainty);
    uafuse::write_nifti(result.labels, vol.spacing, out_dir + "/label.nii");
    for (std::size_t s = 0; s < result.uncertainty.size(); ++s)
        uafuse::write_nifti(result.uncertainty[s], vol.spacing,
                            out_dir + "/u_modal" + std::to_string(s + 1) + ".nii");
    std::cout << "wrote " << out_dir << "/label.nii";
    if (!result.uncertainty.empty()) std::cout << " and " << result.uncertainty.size() << " uncertainty volumes";
    std::cout << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& pred_dir, const std::string& truth_dir, const std::vector<std::string>& raw_args) {
    if (!fs::is_directory(pred_dir)) throw CliError{kExitIo, "'" + pred_dir + "' is not a directory"};
    if (!fs::is_directory(truth_dir)) throw CliError{kExitIo, "'" + truth_dir + "' is not a directory"};

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "label.nii") &&
            fs::exists(fs::path(truth_dir) / entry.path().filename() / "label.nii"))
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw CliError{kExitRuntime, "no case directories with label.nii are present in both trees"};

    std::vector<uafuse::GridI> preds, truths;
    int num_classes = 2;
    for (const auto& name : names) {
        auto p = uafuse::read_nifti(pred_dir + "/" + name + "/label.nii").as_labels();
        auto t = uafuse::read_nifti(truth_dir + "/" + name + "/label.nii").as_labels();
        if (p.dims != t.dims)
            throw CliError{kExitRuntime, "case '" + name + "': prediction and truth dims disagree"};
        for (auto v : p.data) num_classes = std::max(num_classes, v + 1);
        for (auto v : t.data) num_classes = std::max(num_classes, v + 1);
        preds.push_back(std::move(p));
        truths.push_back(std::move(t));
    }

    std::vector<double> class_sum(static_cast<std::size_t>(num_classes - 1), 0.0);
    json case_records = json::array();
    std::printf("%-12s", "case");
    for (int c = 1; c < num_classes; ++c) std::printf("  class%-3d", c);
    std::printf("  mean\n");
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto rep = uafuse::dice_report(preds[i], truths[i], num_classes);
        std::printf("%-12s", names[i].c_str());
        for (double d : rep.per_class) std::printf("  %7.1f ", 100.0 * d);
        std::printf("  %5.1f\n", 100.0 * rep.mean_foreground);
        for (std::size_t c = 0; c < class_sum.size(); ++c) class_sum[c] += rep.per_class[c];
        case_records.push_back(json{{"name", names[i]}, {"dice", rep.per_class}, {"mean", rep.mean_foreground}});
    }
    std::vector<double> class_mean;
    double total = 0;
    for (double s : class_sum) {
        class_mean.push_back(s / static_cast<double>(names.size()));
        total += class_mean.back();
    }
    const double mean = class_mean.empty() ? 0.0 : total / static_cast<double>(class_mean.size());
    std::printf("%-12s", "mean");
    for (double d : class_mean) std::printf("  %7.1f ", 100.0 * d);
    std::printf("  %5.1f\n", 100.0 * mean);

    const json report{{"num_classes", num_classes},
                      {"cases", case_records},
                      {"per_class_mean", class_mean},
                      {"mean", mean},
                      {"manifest", uafuse::run_manifest("eval", json::object(), 0, "", raw_args)}};
    std::cout << report.dump() << std::endl;
    return kExitOk;
}

int cmd_gradcheck(const std::string& only, int seeds) {
    std::vector<uafuse::GradCheckReport> reports;
    try {
        reports = uafuse::run_gradcheck(seeds, 1e-4, 1e-3, only);
    } catch (const std::invalid_argument& e) {
        throw CliError{kExitConfig, e.what()};
    }
    bool all_pass = true;
    for (const auto& r : reports) {
        std::printf("%-18s %s  max rel err %.3e  (%d seeds)\n", r.op.c_str(), r.pass ? "PASS" : "FAIL", r.max_err,
                    r.seeds);
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) {
        std::cerr << "gradient check failed\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_slices(const std::string& vol_path, const std::string& out_dir) {
    auto img = uafuse::read_nifti(vol_path);
    ensure_output_dir(out_dir);
    write_json_file(out_dir + "/manifest.json",
                    uafuse::run_manifest("slices", json{{"vol", vol_path}}, 0, out_dir, {vol_path}));
    if (img.is_float()) {
        uafuse::export_axial_slices(img.as_grid(), out_dir);
    } else {
        auto labels = img.as_labels();
        std::int32_t hi = 1;
        for (auto v : labels.data) hi = std::max(hi, v);
        uafuse::export_axial_slices(labels, hi + 1, out_dir);
    }
    std::cout << "wrote " << img.dims[0] << " slices to " << out_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uncertainty-gated multi-modal 3D segmentation"};
    app.set_version_flag("--version", std::string(uafuse::kVersion));
    app.require_subcommand(1);

    std::vector<std::string> raw_args(argv + 1, argv + argc);

    std::string spec_path, out_dir, config_path, data_dir, ckpt_path, case_dir, pred_dir, truth_dir, vol_path, op;
    int count = 1, seeds = 20;
    std::uint64_t seed = 1;
    bool emit_uncertainty = false;

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic phantom dataset");
    gen->add_option("--spec", spec_path, "phantom spec JSON")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_option("--count", count, "number of cases");
    gen->add_option("--seed", seed, "master seed");

    auto* train = app.add_subcommand("train", "train on a dataset directory");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "run output directory")->required();

    auto* predict = app.add_subcommand("predict", "stitched sliding-window inference on one case");
    predict->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    predict->add_option("--case", case_dir, "case directory with modal<k>.nii")->required();
    predict->add_option("--out", out_dir, "output directory")->required();
    predict->add_flag("--emit-uncertainty", emit_uncertainty, "also write stitched per-stream uncertainty volumes");

    auto* eval = app.add_subcommand("eval", "per-class and mean Dice of predictions vs ground truth");
    eval->add_option("--pred", pred_dir, "directory of predicted case_*/label.nii")->required();
    eval->add_option("--truth", truth_dir, "directory of reference case_*/label.nii")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every autodiff op");
    gradcheck->add_option("--op", op, "check a single op by name");
    gradcheck->add_option("--seeds", seeds, "random instances per op");

    auto* slices = app.add_subcommand("slices", "export axial PGM slices of a volume");
    slices->add_option("--vol", vol_path, "NIfTI volume")->required();
    slices->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synth(spec_path, out_dir, count, seed, raw_args);
        if (train->parsed()) return cmd_train(config_path, data_dir, out_dir, raw_args);
        if (predict->parsed()) return cmd_predict(ckpt_path, case_dir, out_dir, emit_uncertainty, raw_args);
        if (eval->parsed()) return cmd_eval(pred_dir, truth_dir, raw_args);
        if (gradcheck->parsed()) return cmd_gradcheck(op, seeds);
        if (slices->parsed()) return cmd_slices(vol_path, out_dir);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const uafuse::TrainAbortError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const uafuse::NiftiError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code == uafuse::NiftiError::Code::Io ? kExitIo : kExitFormat;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: invalid JSON: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        std::cerr << "error: " << what << "\n";
        if (what.rfind("dataset:", 0) == 0 || what.rfind("case:", 0) == 0) return kExitIo;
        if (what.rfind("checkpoint:", 0) == 0) return kExitFormat;
        return kExitRuntime;
    }
    return kExitOk;
}
