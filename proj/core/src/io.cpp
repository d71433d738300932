#include "aoisched/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "aoisched/errors.hpp"

namespace aoisched {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
    if (!known) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
  return obj.at(key);
}

int require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) throw ConfigError(where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

int optional_int(const json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ConfigError(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

SystemConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(root, {"schema_version", "variant", "K", "M", "devices"}, "config");

  const int version = require_int(root, "schema_version", "config");
  if (version != 1) throw ConfigError("config: unsupported schema_version");

  SystemConfig cfg;
  cfg.variant = variant_from_string(require_string(root, "variant", "config"));
  cfg.max_scheduled = require_int(root, "M", "config");
  const int declared = require_int(root, "K", "config");

  const json& devices = require(root, "devices", "config");
  if (!devices.is_array() || devices.empty())
    throw ConfigError("config: \"devices\" must be a non-empty array");
  if (declared != static_cast<int>(devices.size()))
    throw ConfigError("config: K must equal the number of device entries");

  const bool buffered = cfg.variant == ModelVariant::RandomArrival;
  const bool generated = cfg.variant == ModelVariant::NonZeroGenerationTime;
  int i = 0;
  for (const json& d : devices) {
    const std::string where = "devices[" + std::to_string(i) + "]";
    if (!d.is_object()) throw ConfigError(where + ": must be an object");
    if (buffered)
      reject_unknown_keys(d, {"L", "lambda", "cap_d", "cap_r", "rho", "cap_b"}, where);
    else if (generated)
      reject_unknown_keys(d, {"L", "lambda", "cap_d", "cap_r", "tau"}, where);
    else
      reject_unknown_keys(d, {"L", "lambda", "cap_d", "cap_r"}, where);

    DeviceParams p;
    p.packets_per_update = require_int(d, "L", where);
    p.channel_reliability = require_number(d, "lambda", where);
    p.cap_device = optional_int(d, "cap_d", p.cap_device, where);
    p.cap_receiver = optional_int(d, "cap_r", p.cap_receiver, where);
    if (buffered) {
      p.arrival_rate = require_number(d, "rho", where);
      p.cap_buffer = optional_int(d, "cap_b", p.cap_buffer, where);
    }
    if (generated) p.generation_slots = require_int(d, "tau", where);
    cfg.devices.push_back(p);
    ++i;
  }
  cfg.validate();
  return cfg;
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_to_json(const SystemConfig& cfg, int indent) {
  json root;
  root["schema_version"] = 1;
  root["variant"] = to_string(cfg.variant);
  root["K"] = cfg.device_count();
  root["M"] = cfg.max_scheduled;
  json devices = json::array();
  const bool buffered = cfg.variant == ModelVariant::RandomArrival;
  const bool generated = cfg.variant == ModelVariant::NonZeroGenerationTime;
  for (const auto& p : cfg.devices) {
    json d;
    d["L"] = p.packets_per_update;
    d["lambda"] = p.channel_reliability;
    d["cap_d"] = p.cap_device;
    d["cap_r"] = p.cap_receiver;
    if (buffered) {
      d["rho"] = p.arrival_rate;
      d["cap_b"] = p.cap_buffer;
    }
    if (generated) d["tau"] = p.generation_slots;
    devices.push_back(std::move(d));
  }
  root["devices"] = std::move(devices);
  return indent < 0 ? root.dump() : root.dump(indent);
}

void save_config(const SystemConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << config_to_json(cfg, 2) << '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_config_comment(std::ostream& os, const SystemConfig& cfg) {
  os << "# config: " << config_to_json(cfg) << '\n';
}

void write_coordinate_header(std::ostream& os, int devices, int skip_age_device = -1) {
  for (int k = 0; k < devices; ++k) {
    os << ",a_b_" << k;
    if (k != skip_age_device) os << ",a_d_" << k;
    os << ",a_r_" << k << ",d_" << k;
  }
}

void write_coordinates(std::ostream& os, const SystemModel& model,
                       const std::vector<std::uint32_t>& digits, int skip_age_device = -1) {
  for (int k = 0; k < model.device_count(); ++k) {
    const DeviceState x = model.space(k).state_at(digits[static_cast<std::size_t>(k)]);
    os << ',' << x.buffer_age;
    if (k != skip_age_device) os << ',' << x.device_age;
    os << ',' << x.receiver_age << ',' << x.remaining;
  }
}

}  // namespace

void write_policy_csv(std::ostream& os, const SystemModel& model, const Policy& policy,
                      const std::vector<double>* values) {
  if (!model.state_count_exact())
    throw BudgetExceeded("joint state space too large to export");
  const std::uint64_t n = model.state_count();
  if (policy.action_id.size() != n)
    throw ConfigError("policy table size must match the joint state count");
  if (values != nullptr && values->size() != n)
    throw ConfigError("value table size must match the joint state count");

  write_config_comment(os, model.config());
  os << "state_index";
  write_coordinate_header(os, model.device_count());
  for (int k = 0; k < model.device_count(); ++k) os << ",action_" << k;
  if (values != nullptr) os << ",value";
  os << '\n';

  JointOdometer odo(model, 0);
  for (std::uint64_t s = 0; s < n; ++s, odo.advance()) {
    os << s;
    write_coordinates(os, model, odo.digits());
    const SystemAction& w = model.actions()[policy.action_id[s]];
    for (int k = 0; k < model.device_count(); ++k)
      os << ',' << action_char(w[static_cast<std::size_t>(k)]);
    if (values != nullptr) os << ',' << format_double((*values)[s]);
    os << '\n';
  }
}

void write_threshold_csv(std::ostream& os, const SystemModel& model,
                         const ThresholdTable& table) {
  write_config_comment(os, model.config());
  os << "# device: " << table.device << '\n';
  os << "# action: ";
  const SystemAction& w = model.actions()[table.action_id];
  for (int k = 0; k < model.device_count(); ++k) os << action_char(w[static_cast<std::size_t>(k)]);
  os << '\n';
  os << "reduced_index";
  write_coordinate_header(os, model.device_count(), table.device);
  os << ",phi\n";

  const DeviceSpace& space = model.space(table.device);
  std::uint64_t row = 0;
  JointOdometer odo(model, 0);
  for (std::uint64_t s = 0; s < model.state_count(); ++s, odo.advance()) {
    if (space.device_age_of(odo.digits()[static_cast<std::size_t>(table.device)]) != 0) continue;
    if (row >= table.min_age.size())
      throw ConfigError("threshold table shorter than the reduced state space");
    os << row;
    write_coordinates(os, model, odo.digits(), table.device);
    os << ',' << format_double(table.min_age[row]) << '\n';
    ++row;
  }
  if (row != table.min_age.size())
    throw ConfigError("threshold table longer than the reduced state space");
}

void write_per_device_csv(std::ostream& os, const SystemModel& model,
                          const DecompositionTables& tables) {
  write_config_comment(os, model.config());
  for (std::size_t k = 0; k < tables.per_device.size(); ++k)
    os << "# theta_" << k << ": " << format_double(tables.per_device[k].theta) << '\n';
  os << "device,a_b,a_d,a_r,d,value,sampling\n";
  for (std::size_t k = 0; k < tables.per_device.size(); ++k) {
    const DeviceSpace& space = model.space(static_cast<int>(k));
    for (std::uint32_t s = 0; s < space.size(); ++s) {
      const DeviceState x = space.state_at(s);
      os << k << ',' << x.buffer_age << ',' << x.device_age << ',' << x.receiver_age << ','
         << x.remaining << ',' << format_double(tables.per_device[k].values[s]) << ','
         << action_char(tables.per_device[k].sampling[s]) << '\n';
    }
  }
}

void write_sim_csv(std::ostream& os, const SystemModel& model,
                   const std::vector<std::string>& names,
                   const std::vector<SimResult>& results, std::uint64_t seed) {
  if (names.size() != results.size())
    throw ConfigError("one name per simulation result is required");
  write_config_comment(os, model.config());
  os << "# seed: " << seed << '\n';
  os << "policy_name,replication,device,mean_aoi\n";
  for (std::size_t p = 0; p < results.size(); ++p) {
    const SimResult& r = results[p];
    for (std::size_t rep = 0; rep < r.rep_device.size(); ++rep)
      for (std::size_t k = 0; k < r.rep_device[rep].size(); ++k)
        os << names[p] << ',' << rep << ',' << k << ','
           << format_double(r.rep_device[rep][k]) << '\n';
  }
}

std::string sim_summary_json(const SystemConfig& cfg, std::uint64_t seed,
                             const std::vector<std::string>& names,
                             const std::vector<SimResult>& results) {
  if (names.size() != results.size())
    throw ConfigError("one name per simulation result is required");
  json root;
  root["config"] = json::parse(config_to_json(cfg));
  root["seed"] = seed;
  json policies = json::array();
  for (std::size_t p = 0; p < results.size(); ++p) {
    json entry;
    entry["name"] = names[p];
    entry["overall_mean"] = results[p].overall_mean;
    entry["std_error"] = results[p].std_error;
    entry["device_mean"] = results[p].device_mean;
    entry["replications"] = results[p].rep_overall.size();
    policies.push_back(std::move(entry));
  }
  root["policies"] = std::move(policies);
  return root.dump(2);
}

}  // namespace aoisched
