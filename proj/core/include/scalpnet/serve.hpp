#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "scalpnet/data.hpp"
#include "scalpnet/nn.hpp"
#include "scalpnet/train.hpp"

namespace scalpnet {

struct ServeConfig {
    std::filesystem::path model_path;
    std::string host = "0.0.0.0";
    int port = 8080;
    size_t max_upload_bytes = 10 * 1024 * 1024;
    PreprocOptions preproc;
};

// JSON body of a /predict response: predicted class (raw name), confidence
// rounded to one decimal, and the full probability map. Shared with tests
// so response parity with in-process predict() is byte-comparable.
std::string prediction_to_json(const Model& model, const Prediction& p);

// JSON body of /healthz.
std::string health_to_json(const Model& model);

// HTTP/1.1 prediction service:
//   GET  /healthz -> 200 {"status":"ok","classes":[...]}
//   POST /predict -> 200 {"predicted":...,"confidence":...,"probabilities":{...}}
//                    400 malformed image, 413 oversize body, 405 wrong method
// The model is loaded once and shared read-only across requests.
class PredictionServer {
public:
    PredictionServer(Model model, ServeConfig cfg);
    ~PredictionServer();

    PredictionServer(const PredictionServer&) = delete;
    PredictionServer& operator=(const PredictionServer&) = delete;

    // Blocks until stop(); throws on bind failure.
    void run();

    // Binds (an ephemeral port when cfg.port == 0), serves on a background
    // thread and returns the bound port. For tests and supervised setups.
    int start_background();

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Loads the model and runs the server until terminated.
void serve(const ServeConfig& cfg);

}  // namespace scalpnet
