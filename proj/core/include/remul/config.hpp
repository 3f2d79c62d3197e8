#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "remul/models.hpp"
#include "remul/trainer.hpp"

namespace remul {

// Flat "key = value" files. '#' starts a comment; blank lines are ignored.
// Nested settings use dotted keys (model.hidden_dim, gradnorm.eta, ...).
// Unknown keys, duplicates and malformed values are errors that name the
// key and the 1-based line.
struct KeyValue {
  std::string value;
  std::size_t line = 0;
};
using KeyValueMap = std::map<std::string, KeyValue>;

KeyValueMap parse_key_values(std::istream& in);

TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& config);

// Accepts only model.* keys (the bench model-config file).
ModelConfig parse_model_config(std::istream& in);
ModelConfig load_model_config(const std::filesystem::path& path);
std::string format_model_config(const ModelConfig& config);

// Round-trips a model config through checkpoint metadata.
std::map<std::string, std::string> model_config_to_meta(const ModelConfig& config);
ModelConfig model_config_from_meta(const std::map<std::string, std::string>& meta);

}  // namespace remul
