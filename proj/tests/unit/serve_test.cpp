#include <doctest.h>

#include <cmath>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "../support/testutil.hpp"
#include "scalpnet/model_io.hpp"
#include "scalpnet/serve.hpp"

using namespace scalpnet;

namespace {

Model fixture_model() {
    ModelSpec spec;
    spec.input_shape = {8, 8, 3};
    spec.layers = {FlattenSpec{}, DenseSpec{2}, SoftmaxSpec{}};
    spec.class_names = {"alopecia_areata", "head_lice"};
    return init_model(spec, 11);
}

ServeConfig test_config() {
    ServeConfig cfg;
    cfg.host = "127.0.0.1";
    cfg.port = 0;  // ephemeral
    return cfg;
}

}  // namespace

TEST_CASE("healthz reports the class list") {
    PredictionServer server(fixture_model(), test_config());
    const int port = server.start_background();

    httplib::Client client("127.0.0.1", port);
    const auto res = client.Get("/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["classes"].size() == 2);
    CHECK(body["classes"][0] == "alopecia_areata");
    server.stop();
}

TEST_CASE("predict responses equal the in-process prediction byte for byte") {
    const Model model = fixture_model();
    PredictionServer server(fixture_model(), test_config());
    const int port = server.start_background();

    const auto png = encode_png(testutil::solid_image(20, 20, 180, 40, 90));
    httplib::Client client("127.0.0.1", port);

    const auto res = client.Post("/predict", std::string(png.begin(), png.end()), "image/png");
    REQUIRE(res);
    CHECK(res->status == 200);
    const std::string expected = prediction_to_json(model, predict(model, png));
    CHECK(res->body == expected);

    // Multipart upload hits the same path.
    httplib::MultipartFormDataItems items = {
        {"image", std::string(png.begin(), png.end()), "sample.png", "image/png"}};
    const auto multi = client.Post("/predict", items);
    REQUIRE(multi);
    CHECK(multi->status == 200);
    CHECK(multi->body == expected);
    server.stop();
}

TEST_CASE("confidence is rounded to one decimal in the json body") {
    ModelSpec spec;
    spec.input_shape = {8, 8, 3};
    spec.layers = {FlattenSpec{}, DenseSpec{3}, SoftmaxSpec{}};
    spec.class_names = {"a", "b", "c"};
    Model model = init_model(spec, 3);
    for (float& v : model.params[1].weights.data()) v = 0.0f;
    model.params[1].bias[0] = std::log(0.9973f);
    model.params[1].bias[1] = std::log(0.0017f);
    model.params[1].bias[2] = std::log(0.0010f);

    const auto png = encode_png(testutil::solid_image(8, 8, 10, 10, 10));
    const auto body = nlohmann::json::parse(prediction_to_json(model, predict(model, png)));
    CHECK(body["predicted"] == "a");
    CHECK(body["confidence"].dump() == "99.7");
}

TEST_CASE("malformed uploads return 400 without killing the server") {
    PredictionServer server(fixture_model(), test_config());
    const int port = server.start_background();
    httplib::Client client("127.0.0.1", port);

    const auto res = client.Post("/predict", "this is not an image", "image/png");
    REQUIRE(res);
    CHECK(res->status == 400);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body.contains("error"));

    const auto wrong_type = client.Post("/predict", "{}", "application/json");
    REQUIRE(wrong_type);
    CHECK(wrong_type->status == 400);

    // Still alive afterwards.
    const auto health = client.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    server.stop();
}

TEST_CASE("wrong methods return 405 and oversize uploads 413") {
    auto cfg = test_config();
    cfg.max_upload_bytes = 1024;
    PredictionServer server(fixture_model(), cfg);
    const int port = server.start_background();
    httplib::Client client("127.0.0.1", port);

    const auto get_predict = client.Get("/predict");
    REQUIRE(get_predict);
    CHECK(get_predict->status == 405);

    const auto post_health = client.Post("/healthz", "x", "text/plain");
    REQUIRE(post_health);
    CHECK(post_health->status == 405);

    const std::string big(4096, 'x');
    const auto oversize = client.Post("/predict", big, "image/png");
    REQUIRE(oversize);
    CHECK(oversize->status == 413);
    server.stop();
}

TEST_CASE("identical concurrent requests get identical bodies") {
    const Model model = fixture_model();
    PredictionServer server(fixture_model(), test_config());
    const int port = server.start_background();

    const auto png = encode_png(testutil::solid_image(12, 12, 60, 160, 30));
    const std::string payload(png.begin(), png.end());
    const std::string expected = prediction_to_json(model, predict(model, png));

    std::vector<std::thread> threads;
    std::vector<std::string> bodies(8);
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&, i] {
            httplib::Client c("127.0.0.1", port);
            const auto res = c.Post("/predict", payload, "image/png");
            if (res && res->status == 200) bodies[i] = res->body;
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& b : bodies) CHECK(b == expected);
    server.stop();
}
