#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "remul/autodiff.hpp"

namespace remul {

/// Parameter checkpoint on disk as two files sharing a stem:
///
///   <stem>.json  manifest: {"format", "data_file", "last_layer", "meta",
///                "blocks": {name: {"shape": [...], "offset": bytes}}}
///   <stem>.bin   little-endian float64 values of every block, manifest order
///
/// Blocks keep insertion order. Values round-trip bit-exactly.
struct Checkpoint {
  ParamTree params;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::filesystem::path& stem, const ParamTree& params,
                     const std::map<std::string, std::string>& meta = {});

Checkpoint load_checkpoint(const std::filesystem::path& stem);

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& stem);
std::filesystem::path checkpoint_data_path(const std::filesystem::path& stem);

}  // namespace remul
