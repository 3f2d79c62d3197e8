#include "remul/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "remul/errors.hpp"
#include "remul/format.hpp"

namespace remul {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const KeyValue& kv, const std::string& expected) {
  throw ValidationError("line " + std::to_string(kv.line) + ": key '" + key + "': invalid value '" + kv.value +
                        "' (expected " + expected + ")");
}

double as_double(const std::string& key, const KeyValue& kv) {
  double v = 0.0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) bad_value(key, kv, "a number");
  return v;
}

std::uint64_t as_uint(const std::string& key, const KeyValue& kv) {
  std::uint64_t v = 0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) bad_value(key, kv, "a non-negative integer");
  return v;
}

bool as_bool(const std::string& key, const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  bad_value(key, kv, "true or false");
}

template <class F>
auto wrap(const std::string& key, const KeyValue& kv, F&& parse) {
  try {
    return parse(kv.value);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(kv.line) + ": key '" + key + "': " + e.what());
  }
}

using Setter = std::function<void(const std::string&, const KeyValue&)>;

std::map<std::string, Setter> model_setters(ModelConfig& m) {
  return {
      {"model.family", [&m](auto& k, auto& v) { m.family = wrap(k, v, [](auto& s) { return parse_model_family(s); }); }},
      {"model.hidden_dim", [&m](auto& k, auto& v) { m.hidden_dim = as_uint(k, v); }},
      {"model.layers", [&m](auto& k, auto& v) { m.layers = as_uint(k, v); }},
      {"model.heads", [&m](auto& k, auto& v) { m.heads = as_uint(k, v); }},
      {"model.node_count", [&m](auto& k, auto& v) { m.node_count = as_uint(k, v); }},
      {"model.scalar_width", [&m](auto& k, auto& v) { m.scalar_width = as_uint(k, v); }},
      {"model.residual_output", [&m](auto& k, auto& v) { m.residual_output = as_bool(k, v); }},
  };
}

// The residual default depends on the family, so family is applied first.
void apply(const KeyValueMap& kv, std::map<std::string, Setter>& setters, ModelConfig& model) {
  for (const auto& [key, value] : kv) {
    if (!setters.contains(key)) {
      throw ValidationError("line " + std::to_string(value.line) + ": unknown key '" + key + "'");
    }
  }
  if (auto it = kv.find("model.family"); it != kv.end()) {
    setters.at("model.family")(it->first, it->second);
    const ModelFamily family = model.family;
    model = default_model_config(family);
  }
  for (const auto& [key, value] : kv) {
    if (key != "model.family") setters.at(key)(key, value);
  }
}

std::string fmt(double v) { return format_double(v); }

void validate_with_context(const std::function<void()>& check, const std::string& what) {
  try {
    check();
  } catch (const ValidationError& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

}  // namespace

KeyValueMap parse_key_values(std::istream& in) {
  KeyValueMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + text + "'");
    }
    std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ValidationError("line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    if (auto it = out.find(key); it != out.end()) {
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                            std::to_string(it->second.line) + ")");
    }
    out.emplace(std::move(key), KeyValue{std::move(value), lineno});
  }
  return out;
}

TrainConfig parse_train_config(std::istream& in) {
  const KeyValueMap kv = parse_key_values(in);
  TrainConfig c;
  auto setters = model_setters(c.model);
  auto num = [](double& field) { return [&field](auto& k, auto& v) { field = as_double(k, v); }; };
  auto count = [](std::size_t& field) { return [&field](auto& k, auto& v) { field = as_uint(k, v); }; };
  setters["mode"] = [&c](auto& k, auto& v) { c.mode = wrap(k, v, [](auto& s) { return parse_train_mode(s); }); };
  setters["metric"] = [&c](auto& k, auto& v) { c.metric = wrap(k, v, [](auto& s) { return parse_metric_kind(s); }); };
  setters["alpha0"] = num(c.alpha0);
  setters["beta0"] = num(c.beta0);
  setters["lr"] = num(c.lr);
  setters["group_samples"] = count(c.group_samples);
  setters["batch_size"] = count(c.batch_size);
  setters["steps"] = count(c.steps);
  setters["eval_every"] = count(c.eval_every);
  setters["seed"] = [&c](auto& k, auto& v) { c.seed = as_uint(k, v); };
  setters["gradnorm.eta"] = num(c.gradnorm.eta);
  setters["gradnorm.gamma"] = num(c.gradnorm.gamma);
  setters["gradnorm.stride"] = count(c.gradnorm.stride);
  setters["gradnorm.renormalize"] = [&c](auto& k, auto& v) { c.gradnorm.renormalize = as_bool(k, v); };
  setters["rotation.sampler"] = [&c](auto&, auto& v) { c.rotation.sampler = v.value; };
  setters["rotation.min_deg"] = num(c.rotation.min_deg);
  setters["rotation.max_deg"] = num(c.rotation.max_deg);
  setters["rotation.schedule"] = [&c](auto&, auto& v) { c.rotation.schedule = v.value; };
  apply(kv, setters, c.model);
  validate_with_context([&] { c.validate(); }, "invalid config");
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return parse_train_config(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string format_model_config(const ModelConfig& m) {
  std::ostringstream os;
  os << "model.family = " << to_string(m.family) << '\n'
     << "model.hidden_dim = " << m.hidden_dim << '\n'
     << "model.layers = " << m.layers << '\n'
     << "model.heads = " << m.heads << '\n'
     << "model.node_count = " << m.node_count << '\n'
     << "model.scalar_width = " << m.scalar_width << '\n'
     << "model.residual_output = " << (m.residual_output ? "true" : "false") << '\n';
  return os.str();
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "mode = " << to_string(c.mode) << '\n'
     << "alpha0 = " << fmt(c.alpha0) << '\n'
     << "beta0 = " << fmt(c.beta0) << '\n'
     << "metric = " << to_string(c.metric) << '\n'
     << "group_samples = " << c.group_samples << '\n'
     << "lr = " << fmt(c.lr) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "steps = " << c.steps << '\n'
     << "seed = " << c.seed << '\n'
     << "eval_every = " << c.eval_every << '\n'
     << format_model_config(c.model)
     << "gradnorm.eta = " << fmt(c.gradnorm.eta) << '\n'
     << "gradnorm.gamma = " << fmt(c.gradnorm.gamma) << '\n'
     << "gradnorm.stride = " << c.gradnorm.stride << '\n'
     << "gradnorm.renormalize = " << (c.gradnorm.renormalize ? "true" : "false") << '\n'
     << "rotation.sampler = " << c.rotation.sampler << '\n'
     << "rotation.min_deg = " << fmt(c.rotation.min_deg) << '\n'
     << "rotation.max_deg = " << fmt(c.rotation.max_deg) << '\n'
     << "rotation.schedule = " << c.rotation.schedule << '\n';
  return os.str();
}

ModelConfig parse_model_config(std::istream& in) {
  const KeyValueMap kv = parse_key_values(in);
  ModelConfig m;
  auto setters = model_setters(m);
  apply(kv, setters, m);
  validate_with_context([&] { m.validate(); }, "invalid model config");
  return m;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model config " + path.string());
  try {
    return parse_model_config(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> model_config_to_meta(const ModelConfig& m) {
  std::map<std::string, std::string> out;
  std::istringstream in(format_model_config(m));
  for (const auto& [key, kv] : parse_key_values(in)) out[key] = kv.value;
  return out;
}

ModelConfig model_config_from_meta(const std::map<std::string, std::string>& meta) {
  std::ostringstream os;
  for (const auto& [key, value] : meta) {
    if (key.starts_with("model.")) os << key << " = " << value << '\n';
  }
  std::istringstream in(os.str());
  return parse_model_config(in);
}

}  // namespace remul
