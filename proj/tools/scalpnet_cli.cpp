// scalpnet — train, evaluate, serve and query a scalp-condition image
// classifier built around a directory-per-class dataset layout.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scalpnet/data.hpp"
#include "scalpnet/error.hpp"
#include "scalpnet/image.hpp"
#include "scalpnet/model_io.hpp"
#include "scalpnet/serve.hpp"
#include "scalpnet/train.hpp"

namespace {

namespace fs = std::filesystem;

uint64_t env_seed_or(uint64_t fallback) {
    if (const char* env = std::getenv("SCALPNET_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw scalpnet::Error("SCALPNET_SEED is not an integer");
        }
    }
    return fallback;
}

int env_port_or(int fallback) {
    if (const char* env = std::getenv("SCALPNET_PORT")) {
        try {
            return std::stoi(env);
        } catch (...) {
            throw scalpnet::Error("SCALPNET_PORT is not an integer");
        }
    }
    return fallback;
}

std::vector<uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw scalpnet::Error("cannot open file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TrainArgs {
    std::string data;
    std::string out;
    int epochs = 50;
    int batch_size = 32;
    int image_size = 256;
    uint64_t seed = 0;
    bool seed_given = false;
    bool no_augment = false;
    double lowpass = 0.0;
    bool lowpass_given = false;
    bool equalize = false;
    std::string history;
    std::string model_spec;
};

int run_train(const TrainArgs& args) {
    scalpnet::TrainConfig cfg;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.image_size = args.image_size;
    cfg.seed = args.seed_given ? args.seed : env_seed_or(cfg.seed);
    cfg.split.seed = cfg.seed;
    cfg.augment = !args.no_augment;
    if (args.lowpass_given) cfg.preproc.lowpass_sigma = static_cast<float>(args.lowpass);
    cfg.preproc.equalize = args.equalize;

    std::optional<scalpnet::ModelSpec> spec;
    if (!args.model_spec.empty()) {
        std::ifstream in(args.model_spec);
        if (!in) throw scalpnet::Error("cannot open model spec file: " + args.model_spec);
        std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        spec = scalpnet::model_spec_from_json(text);
    }

    auto result = scalpnet::train(args.data, cfg, spec);
    scalpnet::save_model(result.model, args.out);
    if (!args.history.empty()) scalpnet::write_history_csv(result.history, args.history);

    if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::printf("epoch %d/%d  train loss %.4f  train acc %.4f  val loss %.4f  val acc %.4f\n",
                    last.epoch, cfg.epochs, static_cast<double>(last.train_loss),
                    static_cast<double>(last.train_acc), static_cast<double>(last.val_loss),
                    static_cast<double>(last.val_acc));
    }

    // Final check against the held-out test split, when there is one.
    const auto ds = scalpnet::scan_dataset_dir(args.data);
    const auto split = scalpnet::split_dataset(ds, cfg.split);
    if (!split.test.items.empty()) {
        const auto report = scalpnet::evaluate(result.model, split.test, cfg);
        std::printf("test accuracy %.4f  macro f1 %.4f\n", report.accuracy, report.macro_f1);
    }
    std::printf("model written to %s\n", args.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string data;
    std::string model;
    std::string split = "test";
};

int run_eval(const EvalArgs& args) {
    const scalpnet::Model model = scalpnet::load_model(args.model);
    scalpnet::TrainConfig cfg;
    cfg.image_size = model.spec.input_shape[0];
    cfg.seed = model.rng_seed;
    cfg.split.seed = model.rng_seed;

    const auto ds = scalpnet::scan_dataset_dir(args.data);
    scalpnet::LabeledDataset target = ds;
    if (args.split == "test") {
        // Reproduce the held-out split the model was trained with.
        target = scalpnet::split_dataset(ds, cfg.split).test;
        if (target.items.empty())
            throw scalpnet::Error("the test split is empty; use --split all");
    }

    const auto report = scalpnet::evaluate(model, target, cfg);
    std::cout << scalpnet::format_report(report) << "\n";
    std::cout << scalpnet::report_to_json(report) << "\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& image_path) {
    const scalpnet::Model model = scalpnet::load_model(model_path);
    const auto bytes = read_file_bytes(image_path);
    const auto p = scalpnet::predict(model, bytes);
    std::printf("Predicted: %s. Confidence: %.1f%%\n",
                scalpnet::display_class_name(p.class_name).c_str(),
                static_cast<double>(p.confidence));
    return 0;
}

struct ServeArgs {
    std::string model;
    int port = 0;
    bool port_given = false;
    std::string host = "0.0.0.0";
    double lowpass = 0.0;
    bool lowpass_given = false;
    bool equalize = false;
};

int run_serve(const ServeArgs& args) {
    scalpnet::ServeConfig cfg;
    cfg.model_path = args.model;
    cfg.host = args.host;
    cfg.port = args.port_given ? args.port : env_port_or(8080);
    if (args.lowpass_given) cfg.preproc.lowpass_sigma = static_cast<float>(args.lowpass);
    cfg.preproc.equalize = args.equalize;

    std::printf("serving on %s:%d\n", cfg.host.c_str(), cfg.port);
    scalpnet::serve(cfg);
    return 0;
}

struct InspectArgs {
    std::string data;
    std::string out;
    int count = 9;
    int image_size = 256;
    uint64_t seed = 0;
    bool seed_given = false;
};

int run_inspect(const InspectArgs& args) {
    const auto ds = scalpnet::scan_dataset_dir(args.data);
    const uint64_t seed = args.seed_given ? args.seed : env_seed_or(42);

    fs::create_directories(args.out);
    scalpnet::BatchLoader loader(ds, {args.count, seed, args.image_size}, nullptr);
    const auto batch = loader.next();
    if (!batch) throw scalpnet::Error("dataset produced no batches");

    const auto& images = batch->images;
    const size_t h = images.shape()[1], w = images.shape()[2], c = images.shape()[3];
    for (size_t i = 0; i < batch->labels.size(); ++i) {
        scalpnet::RawImage img;
        img.width = static_cast<int>(w);
        img.height = static_cast<int>(h);
        img.channels = static_cast<int>(c);
        img.pixels.resize(h * w * c);
        const float* src = images.raw() + i * h * w * c;
        for (size_t j = 0; j < img.pixels.size(); ++j)
            img.pixels[j] = static_cast<uint8_t>(std::lround(src[j] * 255.0f));

        const auto png = scalpnet::encode_png(img);
        char name[64];
        std::snprintf(name, sizeof(name), "%02zu_%s.png", i,
                      ds.class_names[batch->labels[i]].c_str());
        const fs::path out_path = fs::path(args.out) / name;
        std::ofstream out(out_path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(png.data()),
                  static_cast<std::streamsize>(png.size()));
        if (!out) throw scalpnet::Error("cannot write " + out_path.string());
    }
    std::printf("wrote %zu sample images to %s\n", batch->labels.size(), args.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scalp-condition image classifier: training, evaluation and serving"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset directory");
    train_cmd->add_option("--data", train_args.data, "dataset root (one directory per class)")
        ->required();
    train_cmd->add_option("--out", train_args.out, "output model file")->required();
    train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
    train_cmd->add_option("--batch-size", train_args.batch_size, "batch size");
    train_cmd->add_option("--image-size", train_args.image_size, "square input size in pixels");
    auto* seed_opt = train_cmd->add_option("--seed", train_args.seed, "random seed");
    train_cmd->add_flag("--no-augment", train_args.no_augment, "disable data augmentation");
    auto* lp_opt = train_cmd->add_option("--lowpass", train_args.lowpass,
                                         "gaussian low-pass sigma applied before training");
    train_cmd->add_flag("--equalize", train_args.equalize, "histogram-equalize images");
    train_cmd->add_option("--history", train_args.history, "write per-epoch metrics CSV here");
    train_cmd->add_option("--model-spec", train_args.model_spec,
                          "JSON layer-stack file overriding the default architecture");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
    eval_cmd->add_option("--data", eval_args.data, "dataset root")->required();
    eval_cmd->add_option("--model", eval_args.model, "model file")->required();
    eval_cmd->add_option("--split", eval_args.split, "test (reproduce training split) or all")
        ->check(CLI::IsMember({"test", "all"}));

    std::string predict_model, predict_image;
    auto* predict_cmd = app.add_subcommand("predict", "classify a single image");
    predict_cmd->add_option("--model", predict_model, "model file")->required();
    predict_cmd->add_option("--image", predict_image, "image file (png or jpeg)")->required();

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP prediction service");
    serve_cmd->add_option("--model", serve_args.model, "model file")->required();
    auto* port_opt = serve_cmd->add_option("--port", serve_args.port, "listen port");
    serve_cmd->add_option("--host", serve_args.host, "bind address");
    auto* serve_lp_opt = serve_cmd->add_option("--lowpass", serve_args.lowpass,
                                               "gaussian low-pass sigma applied to uploads");
    serve_cmd->add_flag("--equalize", serve_args.equalize, "histogram-equalize uploads");

    InspectArgs inspect_args;
    auto* inspect_cmd = app.add_subcommand("inspect", "export a sample batch as image files");
    inspect_cmd->add_option("--data", inspect_args.data, "dataset root")->required();
    inspect_cmd->add_option("--out", inspect_args.out, "output directory")->required();
    inspect_cmd->add_option("--count", inspect_args.count, "number of samples to export");
    inspect_cmd->add_option("--image-size", inspect_args.image_size, "square output size");
    auto* inspect_seed_opt = inspect_cmd->add_option("--seed", inspect_args.seed, "shuffle seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    train_args.seed_given = seed_opt->count() > 0;
    train_args.lowpass_given = lp_opt->count() > 0;
    serve_args.port_given = port_opt->count() > 0;
    serve_args.lowpass_given = serve_lp_opt->count() > 0;
    inspect_args.seed_given = inspect_seed_opt->count() > 0;

    try {
        if (train_cmd->parsed()) return run_train(train_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (predict_cmd->parsed()) return run_predict(predict_model, predict_image);
        if (serve_cmd->parsed()) return run_serve(serve_args);
        if (inspect_cmd->parsed()) return run_inspect(inspect_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
