#include "config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "crystal_io.hpp"

namespace xtal {

using nlohmann::json;

namespace {

// One row per key: JSON reader, string setter, string getter. Keeping the
// three views in a single table means a new field cannot be half-wired.
struct KeyOps {
  std::function<void(RunConfig&, const json&)> from_json;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int parse_int(const std::string& v) {
  size_t pos = 0;
  int out = 0;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) throw ParseError("not an integer: " + v);
  return out;
}

double parse_double(const std::string& v) {
  size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) throw ParseError("not a number: " + v);
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) throw ParseError("not an unsigned integer: " + v);
  return out;
}

KeyOps int_key(int RunConfig::* field) {
  return {[field](RunConfig& c, const json& j) { c.*field = j.get<int>(); },
          [field](RunConfig& c, const std::string& v) { c.*field = parse_int(v); },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeyOps double_key(double RunConfig::* field) {
  return {[field](RunConfig& c, const json& j) { c.*field = j.get<double>(); },
          [field](RunConfig& c, const std::string& v) { c.*field = parse_double(v); },
          [field](const RunConfig& c) { return shortest_double(c.*field); }};
}

KeyOps string_key(std::string RunConfig::* field) {
  return {[field](RunConfig& c, const json& j) { c.*field = j.get<std::string>(); },
          [field](RunConfig& c, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }};
}

const std::map<std::string, KeyOps>& key_table() {
  static const std::map<std::string, KeyOps> table = {
      {"T", int_key(&RunConfig::T)},
      {"s", double_key(&RunConfig::s)},
      {"sigma1", double_key(&RunConfig::sigma1)},
      {"sigmaT", double_key(&RunConfig::sigmaT)},
      {"gamma", double_key(&RunConfig::gamma)},
      {"layers", int_key(&RunConfig::layers)},
      {"hidden", int_key(&RunConfig::hidden)},
      {"fourier", int_key(&RunConfig::fourier)},
      {"lambda_k", double_key(&RunConfig::lambda_k)},
      {"lambda_F", double_key(&RunConfig::lambda_F)},
      {"lambda_A", double_key(&RunConfig::lambda_A)},
      {"n_img", int_key(&RunConfig::n_img)},
      {"seed",
       {[](RunConfig& c, const json& j) { c.seed = j.get<std::uint64_t>(); },
        [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"mode", string_key(&RunConfig::mode)},
      {"loss_average", string_key(&RunConfig::loss_average)},
      {"lr", double_key(&RunConfig::lr)},
      {"momentum", double_key(&RunConfig::momentum)},
      {"epochs", int_key(&RunConfig::epochs)},
      {"optimizer", string_key(&RunConfig::optimizer)},
      {"t_start", int_key(&RunConfig::t_start)},
      {"jobs", int_key(&RunConfig::jobs)},
      {"data_dir", string_key(&RunConfig::data_dir)},
      {"checkpoint", string_key(&RunConfig::checkpoint)},
      {"out_dir", string_key(&RunConfig::out_dir)},
      {"elements", string_key(&RunConfig::elements_path)},
      {"spacegroups", string_key(&RunConfig::spacegroups_path)},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::from_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config must be a JSON object");

  RunConfig cfg;
  const auto& table = key_table();
  for (const auto& [key, value] : doc.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ParseError("unknown config key: " + key);
    try {
      it->second.from_json(cfg, value);
    } catch (const json::exception& e) {
      throw ParseError("config key " + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void RunConfig::validate() const {
  if (T < 1) throw DomainError("T must be at least 1");
  if (s <= 0) throw DomainError("s must be positive");
  if (!(sigma1 > 0 && sigma1 < sigmaT))
    throw DomainError("need 0 < sigma1 < sigmaT");
  if (gamma < 0) throw DomainError("gamma must be nonnegative");
  if (layers < 1) throw DomainError("layers must be at least 1");
  if (hidden < 2 || hidden % 2 != 0) throw DomainError("hidden must be even and >= 2");
  if (fourier < 2 || fourier % 2 != 0) throw DomainError("fourier must be even and >= 2");
  if (lambda_k < 0 || lambda_F < 0 || lambda_A < 0)
    throw DomainError("loss weights must be nonnegative");
  if (n_img < 1) throw DomainError("n_img must be at least 1");
  if (mode != "csp" && mode != "ab-initio" && mode != "refine")
    throw DomainError("mode must be csp, ab-initio, or refine");
  if (loss_average != "post" && loss_average != "pre")
    throw DomainError("loss_average must be post or pre");
  if (lr <= 0) throw DomainError("lr must be positive");
  if (momentum < 0 || momentum >= 1) throw DomainError("momentum must be in [0,1)");
  if (epochs < 0) throw DomainError("epochs must be nonnegative");
  if (optimizer != "sgd" && optimizer != "adam")
    throw DomainError("optimizer must be sgd or adam");
  if (t_start < 0 || t_start > T) throw DomainError("t_start must be in [0, T]");
  if (jobs < 1) throw DomainError("jobs must be at least 1");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = key_table();
  auto it = table.find(key);
  if (it == table.end()) throw DomainError("unknown config key: " + key);
  it->second.set(*this, value);
  validate();
}

std::string RunConfig::get(const std::string& key) const {
  const auto& table = key_table();
  auto it = table.find(key);
  if (it == table.end()) throw DomainError("unknown config key: " + key);
  return it->second.get(*this);
}

LossOptions RunConfig::loss_options(bool csp) const {
  LossOptions opt;
  opt.weights.k = lambda_k;
  opt.weights.F = lambda_F;
  opt.weights.A = lambda_A;
  opt.average = loss_average == "pre" ? LossAverage::pre : LossAverage::post;
  opt.csp_mode = csp;
  opt.n_img = n_img;
  return opt;
}

}  // namespace xtal
