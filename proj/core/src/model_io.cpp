#include "scalpnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "scalpnet/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "model file writer assumes a little-endian host");

namespace scalpnet {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'N', 'N'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    buf.push_back(static_cast<uint8_t>(v));
    buf.push_back(static_cast<uint8_t>(v >> 8));
    buf.push_back(static_cast<uint8_t>(v >> 16));
    buf.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

nlohmann::json layer_to_json(const LayerSpec& layer) {
    nlohmann::json j;
    if (const auto* conv = std::get_if<Conv2DSpec>(&layer)) {
        j["type"] = "conv2d";
        j["filters"] = conv->filters;
        j["kernel"] = conv->kernel;
        j["stride"] = conv->stride;
        j["padding"] = conv->padding == Padding::valid ? "valid" : "same";
    } else if (std::holds_alternative<ReLUSpec>(layer)) {
        j["type"] = "relu";
    } else if (const auto* pool = std::get_if<MaxPool2DSpec>(&layer)) {
        j["type"] = "maxpool2d";
        j["pool"] = pool->pool;
        j["stride"] = pool->stride;
    } else if (std::holds_alternative<FlattenSpec>(layer)) {
        j["type"] = "flatten";
    } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
        j["type"] = "dense";
        j["units"] = dense->units;
    } else {
        j["type"] = "softmax";
    }
    return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "conv2d") {
        Conv2DSpec conv;
        conv.filters = j.at("filters").get<int>();
        conv.kernel = j.at("kernel").get<int>();
        conv.stride = j.value("stride", 1);
        const std::string pad = j.value("padding", "valid");
        if (pad == "valid")
            conv.padding = Padding::valid;
        else if (pad == "same")
            conv.padding = Padding::same;
        else
            throw Error("unknown padding mode: " + pad);
        return conv;
    }
    if (type == "relu") return ReLUSpec{};
    if (type == "maxpool2d") return MaxPool2DSpec{j.at("pool").get<int>(), j.value("stride", 2)};
    if (type == "flatten") return FlattenSpec{};
    if (type == "dense") return DenseSpec{j.at("units").get<int>()};
    if (type == "softmax") return SoftmaxSpec{};
    throw Error("unknown layer type: " + type);
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec, uint64_t seed) {
    nlohmann::json j;
    j["input_shape"] = {spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : spec.layers) layers.push_back(layer_to_json(layer));
    j["layers"] = std::move(layers);
    j["class_names"] = spec.class_names;
    j["seed"] = seed;
    return j.dump();
}

ModelSpec model_spec_from_json(const std::string& text, uint64_t* seed_out) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid model spec json: ") + e.what());
    }
    try {
        ModelSpec spec;
        if (j.contains("input_shape")) {
            const auto arr = j.at("input_shape");
            if (!arr.is_array() || arr.size() != 3)
                throw Error("input_shape must be [H, W, C]");
            for (size_t i = 0; i < 3; ++i) spec.input_shape[i] = arr[i].get<int>();
        }
        for (const auto& jl : j.at("layers")) spec.layers.push_back(layer_from_json(jl));
        if (j.contains("class_names"))
            spec.class_names = j.at("class_names").get<std::vector<std::string>>();
        if (seed_out) *seed_out = j.value("seed", uint64_t{0});
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid model spec json: ") + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path) {
    const std::string header = model_spec_to_json(model.spec, model.rng_seed);

    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<uint32_t>(header.size()));
    buf.insert(buf.end(), header.begin(), header.end());

    for (const auto& layer : model.params) {
        if (layer.weights.rank() == 0) continue;
        for (const Tensor* t : {&layer.weights, &layer.bias}) {
            const size_t off = buf.size();
            buf.resize(off + t->size() * sizeof(float));
            std::memcpy(buf.data() + off, t->raw(), t->size() * sizeof(float));
        }
    }

    const auto crc = static_cast<uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write model file: " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("failed writing model file: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file: " + path.string());
    std::vector<uint8_t> buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    if (buf.size() < 16) throw Error("model file truncated: " + path.string());
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw Error("not a model file (bad magic): " + path.string());
    const uint32_t version = get_u32(buf.data() + 4);
    if (version != kVersion)
        throw Error("unsupported model file version " + std::to_string(version));

    const uint32_t stored_crc = get_u32(buf.data() + buf.size() - 4);
    const auto computed_crc = static_cast<uint32_t>(
        crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (stored_crc != computed_crc)
        throw Error("model file checksum mismatch: " + path.string());

    const uint32_t header_len = get_u32(buf.data() + 8);
    if (12 + static_cast<size_t>(header_len) + 4 > buf.size())
        throw Error("model file truncated: " + path.string());
    const std::string header(reinterpret_cast<const char*>(buf.data() + 12), header_len);

    Model model;
    model.spec = model_spec_from_json(header, &model.rng_seed);
    validate_spec(model.spec);

    const auto plan = build_layer_plan(model.spec);
    model.params.resize(plan.size());
    size_t off = 12 + header_len;
    const size_t end = buf.size() - 4;
    for (size_t li = 0; li < plan.size(); ++li) {
        if (plan[li].w_count == 0) continue;
        Shape w_shape, b_shape;
        if (plan[li].kind == detail::LayerKind::conv2d) {
            const auto& g = plan[li].conv;
            w_shape = {static_cast<size_t>(g.kernel), static_cast<size_t>(g.kernel),
                       static_cast<size_t>(g.in_c), static_cast<size_t>(g.filters)};
            b_shape = {static_cast<size_t>(g.filters)};
        } else {
            w_shape = {static_cast<size_t>(plan[li].dense.in_dim),
                       static_cast<size_t>(plan[li].dense.units)};
            b_shape = {static_cast<size_t>(plan[li].dense.units)};
        }
        for (auto* dst : {&model.params[li].weights, &model.params[li].bias}) {
            const Shape& shape = dst == &model.params[li].weights ? w_shape : b_shape;
            size_t count = 1;
            for (size_t e : shape) count *= e;
            if (off + count * sizeof(float) > end)
                throw Error("model file truncated: " + path.string());
            std::vector<float> data(count);
            std::memcpy(data.data(), buf.data() + off, count * sizeof(float));
            off += count * sizeof(float);
            *dst = Tensor::from_data(shape, std::move(data));
            if (!dst->all_finite())
                throw Error("model file contains non-finite parameters: " + path.string());
        }
    }
    if (off != end) throw Error("model file has trailing bytes: " + path.string());
    return model;
}

}  // namespace scalpnet
