#include "remul/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "remul/errors.hpp"

namespace remul {

namespace {

constexpr const char* kFormat = "remul-checkpoint-v1";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
}

}  // namespace

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".json");
}

std::filesystem::path checkpoint_data_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".bin");
}

void save_checkpoint(const std::filesystem::path& stem, const ParamTree& params,
                     const std::map<std::string, std::string>& meta) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const auto data_path = checkpoint_data_path(stem);

  nlohmann::ordered_json manifest;
  manifest["format"] = kFormat;
  manifest["data_file"] = data_path.filename().string();
  manifest["last_layer"] = params.last_layer();
  manifest["meta"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta) manifest["meta"][k] = v;
  manifest["blocks"] = nlohmann::ordered_json::object();

  std::ofstream bin(data_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw ValidationError("cannot write " + data_path.string());
  std::uint64_t offset = 0;
  for (const auto& entry : params) {
    const Tensor& t = entry.value.value();
    manifest["blocks"][entry.name] = {{"shape", t.shape()}, {"offset", offset}};
    for (double v : t.data()) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    offset += t.size() * sizeof(double);
  }
  if (!bin) throw ValidationError("write failed for " + data_path.string());

  std::ofstream js(checkpoint_manifest_path(stem), std::ios::trunc);
  if (!js) throw ValidationError("cannot write " + checkpoint_manifest_path(stem).string());
  js << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  const auto manifest_path = checkpoint_manifest_path(stem);
  std::ifstream js(manifest_path);
  if (!js) throw ValidationError("cannot open checkpoint manifest " + manifest_path.string());
  nlohmann::ordered_json manifest;
  try {
    manifest = nlohmann::ordered_json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat) {
    throw ValidationError("unsupported checkpoint format in " + manifest_path.string());
  }

  const auto data_path = manifest_path.parent_path() / manifest.at("data_file").get<std::string>();
  std::ifstream bin(data_path, std::ios::binary);
  if (!bin) throw ValidationError("cannot open checkpoint data " + data_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  Checkpoint out;
  try {
    for (const auto& [name, block] : manifest.at("blocks").items()) {
      Shape shape = block.at("shape").get<Shape>();
      const auto offset = block.at("offset").get<std::uint64_t>();
      const std::size_t n = shape_size(shape);
      if (offset + n * sizeof(double) > bytes.size()) {
        throw ValidationError("checkpoint block '" + name + "' exceeds data file");
      }
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes.data() + offset + i * sizeof(double), sizeof bits);
        values[i] = std::bit_cast<double>(to_little(bits));
      }
      out.params.add(name, Tensor(std::move(shape), std::move(values)));
    }
    const auto last = manifest.value("last_layer", std::string{});
    if (!last.empty()) out.params.set_last_layer(last);
    if (manifest.contains("meta")) {
      for (const auto& [k, v] : manifest["meta"].items()) out.meta[k] = v.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace remul
