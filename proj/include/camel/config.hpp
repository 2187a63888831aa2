#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "camel/errors.hpp"
#include "camel/fl.hpp"

namespace camel {

/// Parses a human-readable key-value config ("key = value" lines, '#'
/// comments). Later keys override earlier ones.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line missing '=': " + line);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw UsageError("bad config line: " + line);
    kv[key] = value;
  }
  return kv;
}

inline TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  auto get_u32 = [&](const std::string& key, std::uint32_t& out) {
    const auto it = kv.find(key);
    if (it != kv.end()) out = static_cast<std::uint32_t>(std::stoul(it->second));
  };
  auto get_f = [&](const std::string& key, double& out) {
    const auto it = kv.find(key);
    if (it != kv.end()) out = std::stod(it->second);
  };
  get_u32("n", cfg.n);
  get_u32("r", cfg.r);
  get_u32("s", cfg.s);
  get_u32("k", cfg.k);
  get_u32("T", cfg.T);
  get_u32("d", cfg.d);
  get_f("L", cfg.L);
  get_f("epsilon0", cfg.epsilon0);
  get_f("D", cfg.D);
  if (const auto it = kv.find("seed"); it != kv.end()) cfg.seed = std::stoull(it->second);
  if (const auto it = kv.find("mode"); it != kv.end()) {
    if (it->second == "compressed")
      cfg.mode = PayloadMode::Compressed;
    else if (it->second == "vec")
      cfg.mode = PayloadMode::Vec;
    else
      throw UsageError("config: mode must be 'compressed' or 'vec'");
  }
  for (const auto& [key, value] : kv) {
    static const std::string known[] = {"n", "r",        "s", "k",    "T",   "d",
                                        "L", "epsilon0", "D", "mode", "seed"};
    bool ok = false;
    for (const auto& k2 : known) ok = ok || k2 == key;
    if (!ok) throw UsageError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return train_config_from(parse_config_text(buf.str()));
}

}  // namespace camel
