#include "scalpnet/serve.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scalpnet/error.hpp"
#include "scalpnet/model_io.hpp"

namespace scalpnet {

std::string prediction_to_json(const Model& model, const Prediction& p) {
    nlohmann::json j;
    j["predicted"] = p.class_name;
    j["confidence"] = std::round(static_cast<double>(p.confidence) * 10.0) / 10.0;
    nlohmann::json probs = nlohmann::json::object();
    for (size_t i = 0; i < model.spec.class_names.size(); ++i)
        probs[model.spec.class_names[i]] = static_cast<double>(p.probabilities[i]);
    j["probabilities"] = std::move(probs);
    return j.dump();
}

std::string health_to_json(const Model& model) {
    nlohmann::json j;
    j["status"] = "ok";
    j["classes"] = model.spec.class_names;
    return j.dump();
}

namespace {

std::string error_json(const std::string& message) {
    nlohmann::json j;
    j["error"] = message;
    return j.dump();
}

bool is_raw_image_content_type(const std::string& ct) {
    return ct.rfind("image/", 0) == 0 || ct.rfind("application/octet-stream", 0) == 0;
}

}  // namespace

struct PredictionServer::Impl {
    Model model;
    ServeConfig cfg;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> running{false};

    Impl(Model m, ServeConfig c) : model(std::move(m)), cfg(std::move(c)) {
        server.set_payload_max_length(cfg.max_upload_bytes);
        server.set_keep_alive_max_count(64);

        server.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/healthz" && req.method != "GET") {
                res.status = 405;
                res.set_content(error_json("method not allowed"), "application/json");
                return httplib::Server::HandlerResponse::Handled;
            }
            if (req.path == "/predict" && req.method != "POST") {
                res.status = 405;
                res.set_content(error_json("method not allowed"), "application/json");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });

        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(health_to_json(model), "application/json");
        });

        server.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const std::string* body = &req.body;
                httplib::MultipartFormData upload;
                const std::string content_type = req.get_header_value("Content-Type");
                if (req.is_multipart_form_data()) {
                    if (!req.has_file("image")) {
                        res.status = 400;
                        res.set_content(error_json("multipart request is missing the 'image' field"),
                                        "application/json");
                        return;
                    }
                    upload = req.get_file_value("image");
                    body = &upload.content;
                } else if (!is_raw_image_content_type(content_type)) {
                    res.status = 400;
                    res.set_content(
                        error_json("expected image/png, image/jpeg or a multipart 'image' field"),
                        "application/json");
                    return;
                }

                const auto* bytes = reinterpret_cast<const uint8_t*>(body->data());
                const Prediction p =
                    predict(model, std::span<const uint8_t>(bytes, body->size()), cfg.preproc);
                res.set_content(prediction_to_json(model, p), "application/json");
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(error_json(e.what()), "application/json");
            }
        });
    }
};

PredictionServer::PredictionServer(Model model, ServeConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(cfg))) {}

PredictionServer::~PredictionServer() {
    stop();
}

void PredictionServer::run() {
    impl_->running = true;
    if (!impl_->server.listen(impl_->cfg.host, impl_->cfg.port))
        throw Error("failed to bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
}

int PredictionServer::start_background() {
    int port = impl_->cfg.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->cfg.host);
        if (port < 0) throw Error("failed to bind an ephemeral port on " + impl_->cfg.host);
    } else if (!impl_->server.bind_to_port(impl_->cfg.host, port)) {
        throw Error("failed to bind " + impl_->cfg.host + ":" + std::to_string(port));
    }
    impl_->running = true;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void PredictionServer::stop() {
    if (!impl_ || !impl_->running.exchange(false)) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void serve(const ServeConfig& cfg) {
    Model model = load_model(cfg.model_path);
    PredictionServer server(std::move(model), cfg);
    server.run();
}

}  // namespace scalpnet
