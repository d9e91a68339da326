#pragma once

#include <filesystem>
#include <string>

#include "scalpnet/nn.hpp"

namespace scalpnet {

// Model file layout (all integers little-endian):
//   "SCNN" | u32 version=1 | u32 header_len | header JSON (UTF-8)
//   | parameter tensors in layer order (weights then bias, f32 LE)
//   | u32 CRC-32 of all preceding bytes
// The header JSON carries input_shape, layers, class_names and seed.
void save_model(const Model& model, const std::filesystem::path& path);

// Verifies magic, version and the whole-file checksum before building the
// model; never returns a partially read model.
Model load_model(const std::filesystem::path& path);

// Header-JSON (de)serialization of a layer stack; also the format of
// model-spec files fed to training. input_shape/class_names/seed may be
// omitted there — training fills them in.
std::string model_spec_to_json(const ModelSpec& spec, uint64_t seed);
ModelSpec model_spec_from_json(const std::string& text, uint64_t* seed_out = nullptr);

}  // namespace scalpnet
