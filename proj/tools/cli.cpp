#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adamat/infer.hpp"
#include "adamat/matting.hpp"
#include "adamat/metrics.hpp"
#include "adamat/netpbm.hpp"
#include "adamat/synth.hpp"
#include "adamat/trainer.hpp"

namespace adamat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Input the user got wrong: bad values, unknown config keys, inconsistent flags.
class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------------------------
// JSON config mirrored as --key value flags

struct ConfigFlags {
    json defaults;
    std::string config_path;
    std::map<std::string, std::string> values;  // dotted path -> raw text
    std::map<std::string, CLI::Option*> options;
};

void collect_leaves(const json& node, const std::string& prefix, std::vector<std::string>& out) {
    if (node.is_object()) {
        for (const auto& [k, v] : node.items()) collect_leaves(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out.push_back(prefix);
    }
}

json::json_pointer pointer_of(const std::string& dotted) {
    std::string p;
    std::stringstream ss(dotted);
    for (std::string part; std::getline(ss, part, '.');) p += "/" + part;
    return json::json_pointer(p);
}

const std::map<std::string, std::string>& flag_help() {
    static const std::map<std::string, std::string> help{
        {"count", "number of samples"},
        {"size", "image side length in pixels"},
        {"seed", "random seed"},
        {"strand_fraction", "fraction of strand foregrounds; the rest are feathered discs"},
        {"hard_fraction", "fraction of backgrounds with hues close to the foreground"},
        {"d_min", "smallest trimap erosion radius"},
        {"d_max", "largest trimap erosion radius"},
        {"model.in_size", "nominal input side; must be a multiple of the encoder stride"},
        {"model.stage_widths", "encoder channels per stage, as a JSON list"},
        {"model.blocks_per_stage", "residual blocks per encoder stage"},
        {"model.gc_kernel", "global convolution kernel size (odd)"},
        {"model.lstm_hidden", "conv-LSTM hidden channels"},
        {"model.prop_width", "propagation unit residual block width"},
        {"model.prop_steps", "propagation unit recurrent steps"},
        {"model.use_sp", "sub-pixel upsampling; false uses nearest upsampling plus conv"},
        {"model.use_gc", "global convolution shortcuts; false uses 1x1 convs"},
        {"model.use_pu", "propagation unit"},
        {"model.shared_encoder", "one encoder for both tasks; false trains the sequential variant"},
        {"model.use_bn", "batch normalization"},
        {"model.bn_momentum", "running statistics momentum"},
        {"model.bn_eps", "normalization epsilon"},
        {"train.base_lr", "base learning rate"},
        {"train.poly_p", "power of the polynomial decay"},
        {"train.beta1", "Adam first-moment decay"},
        {"train.beta2", "Adam second-moment decay"},
        {"train.adam_eps", "Adam epsilon"},
        {"train.weight_decay", "L2 coefficient added to the gradient"},
        {"train.decay_norm_params", "also decay normalization scales and shifts"},
        {"train.epochs", "passes over the dataset"},
        {"train.batch_size", "samples per step"},
        {"train.sigma_init", "initial sigma of both tasks"},
        {"train.seed", "seed for initialization, shuffling and augmentation"},
        {"train.loss.mode", "uncertainty or naive"},
        {"train.loss.naive_sigma", "alpha-loss weight of the naive combination, in [0, 1]"},
        {"train.loss.kendall_strict", "use L_a / (2 sigma2^2) in the uncertainty loss"},
        {"train.loss.per_step_alpha_loss", "average the alpha loss over all propagation steps"},
        {"train.loss.mask_fallback", "use the input unknown region when none is predicted"},
        {"train.augment.flip_prob", "horizontal flip probability"},
        {"train.augment.scale_min", "smallest random scale"},
        {"train.augment.scale_max", "largest random scale"},
        {"train.augment.rotation_deg", "rotation range in degrees (symmetric)"},
        {"train.augment.crop_min", "smallest crop side before resizing"},
        {"train.augment.crop_max", "largest crop side before resizing"},
        {"train.augment.out_size", "training crop side after resizing"},
        {"train.resample_trimap", "draw a fresh degraded trimap each time a sample is used"},
        {"train.d_min", "smallest erosion radius of resampled trimaps"},
        {"train.d_max", "largest erosion radius of resampled trimaps"},
        {"train.keep_checkpoints", "keep only the newest N epoch checkpoints; 0 keeps all"},
    };
    return help;
}

void add_config_flags(CLI::App* app, ConfigFlags& flags, json defaults) {
    flags.defaults = std::move(defaults);
    app->add_option("--config", flags.config_path, "JSON config file; flags below override its values")
        ->check(CLI::ExistingFile);
    std::vector<std::string> leaves;
    collect_leaves(flags.defaults, "", leaves);
    for (const auto& path : leaves) {
        const auto it = flag_help().find(path);
        const std::string what = it == flag_help().end() ? "config value" : it->second;
        flags.options[path] = app->add_option("--" + path, flags.values[path],
                                              what + " (default " + flags.defaults[pointer_of(path)].dump() + ")");
    }
}

json parse_value(const std::string& path, const std::string& text, const json& like) {
    try {
        if (like.is_boolean()) {
            if (text == "true" || text == "1" || text == "yes") return true;
            if (text == "false" || text == "0" || text == "no") return false;
            throw UsageError("");
        }
        std::size_t used = 0;
        if (like.is_number_unsigned()) {
            if (!text.empty() && text[0] == '-') throw UsageError("");
            const unsigned long long v = std::stoull(text, &used);
            if (used != text.size()) throw UsageError("");
            return v;
        }
        if (like.is_number_integer()) {
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw UsageError("");
            return v;
        }
        if (like.is_number_float()) {
            const double v = std::stod(text, &used);
            if (used != text.size()) throw UsageError("");
            return v;
        }
        if (like.is_string()) return text;
        return json::parse(text);
    } catch (const std::exception&) {
        throw UsageError("--" + path + ": cannot parse '" + text + "' as " + like.type_name());
    }
}

/// Every key of `overlay` must already exist in `base`.
void merge_strict(json& base, const json& overlay, const std::string& where) {
    if (!overlay.is_object()) throw UsageError("config " + (where.empty() ? "root" : where) + " must be an object");
    for (const auto& [k, v] : overlay.items()) {
        const std::string path = where.empty() ? k : where + "." + k;
        if (!base.contains(k)) throw UsageError("unknown config key '" + path + "'");
        if (base[k].is_object()) {
            merge_strict(base[k], v, path);
        } else {
            base[k] = v;
        }
    }
}

json resolve(const ConfigFlags& flags) {
    json doc = flags.defaults;
    if (!flags.config_path.empty()) {
        std::ifstream is(flags.config_path);
        json file;
        try {
            file = json::parse(is);
        } catch (const json::exception& e) {
            throw UsageError("config file " + flags.config_path + " is not valid JSON: " + e.what());
        }
        merge_strict(doc, file, "");
    }
    for (const auto& [path, opt] : flags.options) {
        if (opt->count() == 0) continue;
        doc[pointer_of(path)] = parse_value(path, flags.values.at(path), flags.defaults[pointer_of(path)]);
    }
    return doc;
}

bool any_override(const ConfigFlags& flags) {
    if (!flags.config_path.empty()) return true;
    return std::any_of(flags.options.begin(), flags.options.end(), [](const auto& kv) { return kv.second->count() > 0; });
}

void echo_config(std::ostream& out, const std::string& command, const json& config) {
    out << json{{"command", command}, {"config", config}}.dump(2) << "\n";
}

// ---------------------------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string out;
    ConfigFlags flags;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
    const json doc = resolve(a.flags);
    synth::DatasetConfig cfg;
    try {
        cfg = synth::DatasetConfig::from_json(doc);
    } catch (const json::exception& e) {
        throw UsageError(std::string("synth config: ") + e.what());
    }
    if (cfg.count == 0 || cfg.size == 0) throw UsageError("count and size must be positive");
    if (cfg.d_min < 0 || cfg.d_max < cfg.d_min) throw UsageError("need 0 <= d_min <= d_max");
    echo_config(out, "synth", cfg.to_json());
    synth::write_dataset(a.out, cfg);
    err << "wrote " << cfg.count << " samples to " << a.out << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string out;
    std::string resume;
    std::string eval_data;
    ConfigFlags flags;
};

void write_eval(const fs::path& dir, const infer::HeldOutResult& r, const std::string& stem, std::ostream& out) {
    std::vector<std::pair<std::string, metrics::MetricReport>> rows;
    json per = json::array();
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "%04zu", i);
        rows.emplace_back(name, r.reports[i]);
        json j = r.reports[i].to_json();
        j["name"] = name;
        per.push_back(j);
    }
    rows.emplace_back("mean", r.summary);
    const std::string table = metrics::format_table(rows);
    std::ofstream(dir / (stem + ".json")) << json{{"images", per}, {"aggregate", r.summary.to_json()}}.dump(2) << "\n";
    std::ofstream(dir / (stem + ".txt")) << table;
    out << table;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    auto data = synth::load_dataset(a.data);
    auto progress = [&err](std::size_t ipe, std::size_t max_iter) {
        return [&err, ipe, max_iter](const train::StepStats& s) {
            if ((s.iter + 1) % ipe != 0 && s.iter + 1 != max_iter) return;
            char line[256];
            std::snprintf(line, sizeof line,
                          "epoch %zu iter %zu/%zu lr %.3g total %.5f L_T %.5f L_a %.5f sigma1 %.4f sigma2 %.4f\n",
                          (s.iter + ipe) / ipe, s.iter + 1, max_iter, s.lr, s.total, s.l_t, s.l_a, s.sigma1, s.sigma2);
            err << line;
        };
    };
    train::TrainResult result;
    if (!a.resume.empty()) {
        if (any_override(a.flags)) throw UsageError("--resume takes its configuration from the checkpoint");
        const auto ckpt = train::load_checkpoint(a.resume);
        echo_config(out, "train", json{{"model", ckpt.model.to_json()}, {"train", ckpt.train.to_json()},
                                       {"resume_from", a.resume}, {"iteration", ckpt.iteration}});
        const std::size_t ipe = (data.size() + ckpt.train.batch_size - 1) / ckpt.train.batch_size;
        result = train::resume(std::move(data), ckpt, a.out, progress(ipe, ipe * ckpt.train.epochs));
    } else {
        const json doc = resolve(a.flags);
        model::ModelConfig mc;
        train::TrainConfig tc;
        try {
            mc = model::ModelConfig::from_json(doc.at("model"));
            mc.validate();
            tc = train::TrainConfig::from_json(doc.at("train"));
        } catch (const json::exception& e) {
            throw UsageError(std::string("train config: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        echo_config(out, "train", json{{"model", mc.to_json()}, {"train", tc.to_json()}});
        const std::size_t ipe = (data.size() + tc.batch_size - 1) / tc.batch_size;
        result = train::train(std::move(data), tc, mc, a.out, progress(ipe, ipe * tc.epochs));
    }
    err << "final checkpoint at iteration " << result.final.iteration << "\n";
    if (!a.eval_data.empty()) {
        const auto held = synth::load_dataset(a.eval_data);
        const model::Network net(result.final.model);
        write_eval(a.out, infer::evaluate_samples(net, result.final.state, held), "eval", out);
    }
    return kOk;
}

// ---------------------------------------------------------------------------------------------
// infer

struct InferArgs {
    std::string ckpt, image, trimap, out_alpha, out_trimap, out_raw;
    bool snap = false;
};

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
    const auto ckpt = train::load_checkpoint(a.ckpt);
    const ImageRGB image = io::read_rgb(a.image);
    const Trimap trimap = io::read_trimap(a.trimap, a.snap);
    if (!image.same_extent(trimap)) {
        throw DataError("image is " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                        " but trimap is " + std::to_string(trimap.height()) + "x" + std::to_string(trimap.width()));
    }
    echo_config(out, "infer", json{{"ckpt", a.ckpt}, {"image", a.image}, {"trimap", a.trimap},
                                   {"out_alpha", a.out_alpha}, {"out_trimap", a.out_trimap}, {"snap", a.snap},
                                   {"model", ckpt.model.to_json()}});
    const model::Network net(ckpt.model);
    const auto p = infer::predict(net, ckpt.state, image, trimap);
    if (p.pad_bottom || p.pad_right) {
        err << "input " << image.height() << "x" << image.width() << " is not a multiple of "
            << net.config().stride() << "; reflect-padded by " << p.pad_bottom << " rows and " << p.pad_right
            << " columns, outputs cropped back\n";
    }
    io::write_pnm(a.out_alpha, io::alpha_to_pnm(p.alpha));
    io::write_pnm(a.out_trimap, io::trimap_to_pnm(p.trimap));
    if (!a.out_raw.empty()) io::write_pnm(a.out_raw, io::alpha_to_pnm(p.raw_alpha));
    return kOk;
}

// ---------------------------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string pred_dir, gt_dir, trimap_dir, region = "unknown", out_json, out_table;
    double sigma = metrics::kGradSigma;
};

std::vector<std::string> alpha_stems(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    const std::string suffix = "_alpha.pgm";
    std::vector<std::string> stems;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            stems.push_back(name.substr(0, name.size() - suffix.size()));
        }
    }
    std::sort(stems.begin(), stems.end());
    return stems;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const metrics::Region region = metrics::parse_region(a.region);
    if (!(a.sigma > 0)) throw UsageError("--sigma must be positive");
    const fs::path trimap_dir = a.trimap_dir.empty() ? fs::path(a.gt_dir) : fs::path(a.trimap_dir);
    echo_config(out, "eval", json{{"pred_dir", a.pred_dir}, {"gt_dir", a.gt_dir}, {"trimap_dir", trimap_dir.string()},
                                  {"region", a.region}, {"sigma", a.sigma}});

    const auto stems = alpha_stems(a.gt_dir);
    if (stems.empty()) throw DataError("no *_alpha.pgm files in " + a.gt_dir);
    std::vector<metrics::MetricReport> reports;
    std::vector<std::pair<std::string, metrics::MetricReport>> rows;
    json per = json::array(), missing = json::array();
    for (const auto& stem : stems) {
        const fs::path pred_alpha = fs::path(a.pred_dir) / (stem + "_alpha.pgm");
        const fs::path region_trimap = trimap_dir / (stem + "_trimap.pgm");
        if (!fs::exists(pred_alpha) || (region == metrics::Region::kUnknown && !fs::exists(region_trimap))) {
            missing.push_back(stem);
            err << "missing pair for " << stem << "\n";
            continue;
        }
        const AlphaMatte gt = io::read_alpha(fs::path(a.gt_dir) / (stem + "_alpha.pgm"));
        const AlphaMatte pred = io::read_alpha(pred_alpha);
        if (!pred.same_extent(gt)) throw DataError(stem + ": prediction and ground truth extents differ");
        Trimap rt, pt, gtt;
        metrics::EvalInputs in{&pred, &gt, nullptr, nullptr, nullptr};
        if (fs::exists(region_trimap)) {
            rt = io::read_trimap(region_trimap);
            in.region_trimap = &rt;
        }
        const fs::path pred_trimap = fs::path(a.pred_dir) / (stem + "_trimap.pgm");
        const fs::path gt_trimap = fs::path(a.gt_dir) / (stem + "_trimap.pgm");
        if (fs::exists(pred_trimap)) {
            pt = io::read_trimap(pred_trimap);
            gtt = fs::exists(gt_trimap) ? io::read_trimap(gt_trimap) : derive_optimal_trimap(gt);
            in.pred_trimap = &pt;
            in.gt_trimap = &gtt;
        }
        const auto r = metrics::evaluate(in, region, a.sigma);
        json j = r.to_json();
        j["name"] = stem;
        per.push_back(j);
        rows.emplace_back(stem, r);
        reports.push_back(r);
    }
    const auto summary = metrics::aggregate(reports);
    rows.emplace_back("mean", summary);
    const std::string table = metrics::format_table(rows);
    const json report{{"images", per}, {"aggregate", summary.to_json()}, {"missing", missing}};
    if (!a.out_json.empty()) std::ofstream(a.out_json) << report.dump(2) << "\n";
    if (!a.out_table.empty()) std::ofstream(a.out_table) << table;
    out << table;
    if (!missing.empty()) {
        err << missing.size() << " of " << stems.size() << " images had no matching prediction or trimap\n";
        return kDataError;
    }
    return kOk;
}

// ---------------------------------------------------------------------------------------------
// trimap

struct TrimapArgs {
    std::string alpha, out;
    float eps = kOpaqueEps;
    int d_min = 3, d_max = 15;
    std::uint64_t seed = 1;
    std::string element = "disk";
};

int cmd_trimap_derive(const TrimapArgs& a, std::ostream& out, std::ostream&) {
    if (!(a.eps >= 0 && a.eps < 0.5f)) throw UsageError("--eps must lie in [0, 0.5)");
    echo_config(out, "trimap derive", json{{"alpha", a.alpha}, {"out", a.out}, {"eps", a.eps}});
    io::write_pnm(a.out, io::trimap_to_pnm(derive_optimal_trimap(io::read_alpha(a.alpha), a.eps)));
    return kOk;
}

int cmd_trimap_degrade(const TrimapArgs& a, std::ostream& out, std::ostream&) {
    if (a.d_min < 0 || a.d_max < a.d_min) throw UsageError("need 0 <= --dmin <= --dmax");
    if (a.element != "disk" && a.element != "square") throw UsageError("--element must be disk or square");
    if (!(a.eps >= 0 && a.eps < 0.5f)) throw UsageError("--eps must lie in [0, 0.5)");
    synth::Rng rng(a.seed);
    const auto radii = synth::random_radii(a.d_min, a.d_max, rng);
    echo_config(out, "trimap degrade",
                json{{"alpha", a.alpha}, {"out", a.out}, {"dmin", a.d_min}, {"dmax", a.d_max}, {"seed", a.seed},
                     {"eps", a.eps}, {"element", a.element}, {"radii", {{"fg", radii.fg}, {"bg", radii.bg}}}});
    const Trimap t_opt = derive_optimal_trimap(io::read_alpha(a.alpha), a.eps);
    const auto element = a.element == "disk" ? StructuringElement::kDisk : StructuringElement::kSquare;
    io::write_pnm(a.out, io::trimap_to_pnm(degrade_trimap(t_opt, radii.fg, radii.bg, element)));
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trimap-adaptive alpha matting: data synthesis, training, inference and evaluation", "adamat"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic matting dataset");
    synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
    add_config_flags(synth_cmd, synth_args.flags, synth::DatasetConfig{}.to_json());

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
    train_cmd->add_option("--data", train_args.data, "Dataset directory written by synth")->required();
    train_cmd->add_option("--out", train_args.out, "Run directory (loss.csv, config.json, ckpt/)")->required();
    train_cmd->add_option("--resume", train_args.resume, "Continue from this checkpoint directory");
    train_cmd->add_option("--eval-data", train_args.eval_data, "Held-out dataset scored after training");
    add_config_flags(train_cmd, train_args.flags,
                     json{{"model", model::ModelConfig{}.to_json()}, {"train", train::TrainConfig{}.to_json()}});

    InferArgs infer_args;
    auto* infer_cmd = app.add_subcommand("infer", "Predict an alpha matte and adapted trimap for one image");
    infer_cmd->add_option("--ckpt", infer_args.ckpt, "Checkpoint directory")->required();
    infer_cmd->add_option("--image", infer_args.image, "RGB image (PPM)")->required();
    infer_cmd->add_option("--trimap", infer_args.trimap, "Input trimap (PGM, gray levels 0/128/255)")->required();
    infer_cmd->add_option("--out-alpha", infer_args.out_alpha, "Fused alpha output (8-bit PGM)")->required();
    infer_cmd->add_option("--out-trimap", infer_args.out_trimap, "Adapted trimap output (PGM)")->required();
    infer_cmd->add_option("--out-raw", infer_args.out_raw, "Optional unfused network alpha (8-bit PGM)");
    infer_cmd->add_flag("--snap", infer_args.snap, "Snap other trimap gray levels to the nearest of 0/128/255");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Score predicted alphas and trimaps against ground truth");
    eval_cmd->add_option("--pred-dir", eval_args.pred_dir, "Predictions: <stem>_alpha.pgm [, <stem>_trimap.pgm]")
        ->required();
    eval_cmd->add_option("--gt-dir", eval_args.gt_dir, "Ground truth: <stem>_alpha.pgm [, <stem>_trimap.pgm]")
        ->required();
    eval_cmd->add_option("--trimap-dir", eval_args.trimap_dir,
                         "Trimaps <stem>_trimap.pgm defining the unknown region (default: --gt-dir)");
    eval_cmd->add_option("--region", eval_args.region, "unknown or whole")->capture_default_str();
    eval_cmd->add_option("--sigma", eval_args.sigma, "Gaussian sigma of the gradient metric")->capture_default_str();
    eval_cmd->add_option("--out-json", eval_args.out_json, "Write the per-image and aggregate report here");
    eval_cmd->add_option("--out-table", eval_args.out_table, "Write the text table here");

    TrimapArgs trimap_args;
    auto* trimap_cmd = app.add_subcommand("trimap", "Trimap tooling");
    trimap_cmd->require_subcommand(1);
    auto* derive_cmd = trimap_cmd->add_subcommand("derive", "Optimal trimap of an alpha matte");
    auto* degrade_cmd = trimap_cmd->add_subcommand("degrade", "Random erode/dilate degradation of the optimal trimap");
    for (auto* c : {derive_cmd, degrade_cmd}) {
        c->add_option("--alpha", trimap_args.alpha, "Alpha matte (PGM)")->required();
        c->add_option("--out", trimap_args.out, "Output trimap (PGM)")->required();
        c->add_option("--eps", trimap_args.eps, "Opacity tolerance for the definite labels")->capture_default_str();
    }
    degrade_cmd->add_option("--dmin", trimap_args.d_min, "Smallest erosion radius")->capture_default_str();
    degrade_cmd->add_option("--dmax", trimap_args.d_max, "Largest erosion radius")->capture_default_str();
    degrade_cmd->add_option("--seed", trimap_args.seed, "Seed for the radii")->capture_default_str();
    degrade_cmd->add_option("--element", trimap_args.element, "disk or square")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_args, out, err);
        if (train_cmd->parsed()) return cmd_train(train_args, out, err);
        if (infer_cmd->parsed()) return cmd_infer(infer_args, out, err);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, out, err);
        if (derive_cmd->parsed()) return cmd_trimap_derive(trimap_args, out, err);
        if (degrade_cmd->parsed()) return cmd_trimap_degrade(trimap_args, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const ShapeError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    }
    return kUsage;
}

}  // namespace adamat::cli
