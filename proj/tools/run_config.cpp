#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

namespace pcm::cli {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw DomainError("config key '" + key + "': " + what);
}

double number(const Json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(key, "must be finite");
  return x;
}

std::int64_t integer(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string text(const Json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

Vec2 vec2(const Json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2) bad(key, "expected [equity, liability]");
  return {number(v[0], key), number(v[1], key)};
}

Mat2 mat2(const Json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2) bad(key, "expected a 2x2 array");
  Mat2 m;
  for (int i = 0; i < 2; ++i) {
    const Vec2 row = vec2(v[static_cast<std::size_t>(i)], key);
    m.row(i) = row.transpose();
  }
  return m;
}

std::vector<Vec2> vec2_list(const Json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) bad(key, "expected a nonempty list of [equity, liability]");
  std::vector<Vec2> out;
  for (const auto& e : v) out.push_back(vec2(e, key));
  return out;
}

const char* kParamKeys[] = {"k_tilde", "mu0", "phi", "Sigma0", "Sigma_u", "Sigma_v"};

}  // namespace

double RunConfig::r_tilde() const { return std::log1p(rate); }

void apply_config(RunConfig& cfg, const Json& doc) {
  if (!doc.is_object()) throw DomainError("config must be a JSON object");
  using Setter = std::function<void(const Json&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"input", [&](const Json& v, const std::string& k) { cfg.input = text(v, k); }},
      {"output", [&](const Json& v, const std::string& k) { cfg.output = text(v, k); }},
      {"truth_output", [&](const Json& v, const std::string& k) { cfg.truth_output = text(v, k); }},
      {"params_file", [&](const Json& v, const std::string& k) { cfg.params_file = text(v, k); }},
      {"seed",
       [&](const Json& v, const std::string& k) {
         if (!v.is_number_unsigned()) bad(k, "expected a nonnegative integer");
         cfg.seed = v.get<std::uint64_t>();
       }},
      {"paths",
       [&](const Json& v, const std::string& k) {
         const auto n = integer(v, k);
         if (n < 1) bad(k, "must be at least 1");
         cfg.paths = static_cast<std::size_t>(n);
       }},
      {"maturity",
       [&](const Json& v, const std::string& k) {
         const auto n = integer(v, k);
         if (n < 1 || n > 100000) bad(k, "must be a positive number of periods");
         cfg.maturity = static_cast<int>(n);
       }},
      {"strike",
       [&](const Json& v, const std::string& k) {
         const double x = number(v, k);
         if (!(x > 0.0)) bad(k, "must be positive");
         cfg.strike = x;
       }},
      {"threshold",
       [&](const Json& v, const std::string& k) {
         const double x = number(v, k);
         if (!(x > 0.0)) bad(k, "must be positive");
         cfg.threshold = x;
       }},
      {"rate",
       [&](const Json& v, const std::string& k) {
         const double x = number(v, k);
         if (!(x > -1.0)) bad(k, "must exceed -1");
         cfg.rate = x;
         cfg.rate_given = true;
       }},
      {"check",
       [&](const Json& v, const std::string& k) {
         const auto s = text(v, k);
         if (s != "mc" && s != "none") bad(k, "expected \"mc\" or \"none\"");
         cfg.check_mc = s == "mc";
       }},
      {"max_iter",
       [&](const Json& v, const std::string& k) {
         const auto n = integer(v, k);
         if (n < 0 || n > 1000000) bad(k, "must be a nonnegative iteration count");
         cfg.max_iter = static_cast<int>(n);
       }},
      {"tol",
       [&](const Json& v, const std::string& k) {
         const double x = number(v, k);
         if (!(x >= 0.0)) bad(k, "must be nonnegative");
         cfg.tol = x;
       }},
      {"future_varrho", [&](const Json& v, const std::string& k) { cfg.future_varrho = vec2_list(v, k); }},
      {"future_payout_ratio",
       [&](const Json& v, const std::string& k) {
         const Vec2 x = vec2(v, k);
         if (!(x.array() > 0.0).all()) bad(k, "ratios must be positive");
         cfg.future_payout_ratio = x;
       }},
      {"public_multiplier", [&](const Json& v, const std::string& k) { cfg.public_multiplier = vec2(v, k); }},
      {"periods",
       [&](const Json& v, const std::string& k) {
         const auto n = integer(v, k);
         if (n < 1 || n > 1000000) bad(k, "must be a positive number of periods");
         cfg.periods = static_cast<int>(n);
       }},
      {"B0",
       [&](const Json& v, const std::string& k) {
         const Vec2 x = vec2(v, k);
         if (!(x.array() > 0.0).all()) bad(k, "book values must be positive");
         cfg.B0 = x;
       }},
      {"first_period", [&](const Json& v, const std::string& k) { cfg.first_period = integer(v, k); }},
      {"varrho", [&](const Json& v, const std::string& k) { cfg.varrho = vec2_list(v, k); }},
      {"payout_ratio",
       [&](const Json& v, const std::string& k) {
         const Vec2 x = vec2(v, k);
         if (!(x.array() > 0.0).all()) bad(k, "ratios must be positive");
         cfg.payout_ratio = x;
       }},
  };

  int param_keys = 0;
  for (const auto& [key, value] : doc.items()) {
    bool is_param = false;
    for (const char* p : kParamKeys) is_param = is_param || key == p;
    if (is_param) {
      ++param_keys;
      continue;
    }
    const auto it = setters.find(key);
    if (it == setters.end()) throw DomainError("unknown config key '" + key + "'");
    it->second(value, key);
  }
  if (param_keys > 0) {
    if (param_keys != 6)
      throw DomainError("inline parameters need all of k_tilde, mu0, phi, Sigma0, Sigma_u, Sigma_v");
    cfg.inline_params = params_from_json(doc);
  }
  if (cfg.future_varrho && cfg.future_payout_ratio)
    throw DomainError("config keys 'future_varrho' and 'future_payout_ratio' are exclusive");
  if (cfg.varrho && cfg.payout_ratio)
    throw DomainError("config keys 'varrho' and 'payout_ratio' are exclusive");
  if (cfg.inline_params && cfg.params_file)
    throw DomainError("give parameters inline or through 'params_file', not both");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DomainError("config file " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  apply_config(cfg, doc);
  return cfg;
}

Json to_json(const Vec2& v) { return Json::array({v[0], v[1]}); }

Json to_json(const Mat2& m) {
  return Json::array({Json::array({m(0, 0), m(0, 1)}), Json::array({m(1, 0), m(1, 1)})});
}

Json to_json(const ModelParams& p) {
  Json j;
  j["k_tilde"] = to_json(p.k_tilde);
  j["mu0"] = to_json(p.mu0);
  j["phi"] = to_json(p.phi);
  j["Sigma0"] = to_json(p.Sigma0);
  j["Sigma_u"] = to_json(p.Sigma_u);
  j["Sigma_v"] = to_json(p.Sigma_v);
  j["r_tilde"] = p.r_tilde;
  return j;
}

ModelParams params_from_json(const Json& doc) {
  const Json& j = doc.contains("params") ? doc.at("params") : doc;
  if (!j.is_object()) throw DomainError("parameters must be a JSON object");
  for (const char* k : kParamKeys)
    if (!j.contains(k)) bad(k, "missing model parameter");
  ModelParams p;
  p.k_tilde = vec2(j.at("k_tilde"), "k_tilde");
  p.mu0 = vec2(j.at("mu0"), "mu0");
  p.phi = vec2(j.at("phi"), "phi");
  p.Sigma0 = mat2(j.at("Sigma0"), "Sigma0");
  p.Sigma_u = mat2(j.at("Sigma_u"), "Sigma_u");
  p.Sigma_v = mat2(j.at("Sigma_v"), "Sigma_v");
  if (j.contains("r_tilde")) p.r_tilde = number(j.at("r_tilde"), "r_tilde");
  p.validate();
  return p;
}

ModelParams read_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open parameter file " + path);
  try {
    return params_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw DomainError("parameter file " + path + " is not valid JSON: " + e.what());
  }
}

Json to_json(const RunConfig& cfg) {
  Json j;
  auto opt = [&](const char* k, const auto& v) {
    if (v) j[k] = *v;
  };
  opt("input", cfg.input);
  opt("params_file", cfg.params_file);
  j["seed"] = cfg.seed;
  j["paths"] = cfg.paths;
  opt("maturity", cfg.maturity);
  opt("strike", cfg.strike);
  opt("threshold", cfg.threshold);
  j["rate"] = cfg.rate;
  j["check"] = cfg.check_mc ? "mc" : "none";
  j["max_iter"] = cfg.max_iter;
  j["tol"] = cfg.tol;
  if (cfg.inline_params) j["inline_params"] = to_json(*cfg.inline_params);
  if (cfg.future_varrho) {
    Json a = Json::array();
    for (const auto& v : *cfg.future_varrho) a.push_back(to_json(v));
    j["future_varrho"] = a;
  }
  if (cfg.future_payout_ratio) j["future_payout_ratio"] = to_json(*cfg.future_payout_ratio);
  if (cfg.public_multiplier) j["public_multiplier"] = to_json(*cfg.public_multiplier);
  return j;
}

}  // namespace pcm::cli
