#pragma once

// Run configuration of the command-line tool: a flat JSON object whose keys
// mirror the long flags, plus model parameters and payout schedules. Flags
// given on the command line override the file.

#include "pcm/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pcm::cli {

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> truth_output;
  std::optional<std::string> params_file;
  std::uint64_t seed = 0;
  std::size_t paths = 200000;
  std::optional<int> maturity;
  std::optional<double> strike;
  std::optional<double> threshold;
  double rate = 0.0;  // simple per-period rate r; r~ = ln(1 + r)
  bool rate_given = false;
  bool check_mc = false;
  int max_iter = 500;
  double tol = 1e-8;

  // Model parameters given inline (all six together) instead of a file.
  std::optional<ModelParams> inline_params;

  // Future payout schedule for horizons past the sample.
  std::optional<std::vector<Vec2>> future_varrho;
  std::optional<Vec2> future_payout_ratio;
  std::optional<Vec2> public_multiplier;

  // simulate
  std::optional<int> periods;
  Vec2 B0 = Vec2(100.0, 100.0);
  long first_period = 0;
  std::optional<std::vector<Vec2>> varrho;
  std::optional<Vec2> payout_ratio;

  double r_tilde() const;
};

/// Reads and validates a config file. Unknown keys and ill-typed values
/// throw DomainError naming the key.
RunConfig load_config(const std::string& path);

/// Applies the keys of a parsed object onto cfg.
void apply_config(RunConfig& cfg, const Json& doc);

/// Echo of the resolved configuration for reports.
Json to_json(const RunConfig& cfg);

Json to_json(const Vec2& v);
Json to_json(const Mat2& m);
Json to_json(const ModelParams& p);

/// Parameters from an object with keys k_tilde, mu0, phi, Sigma0, Sigma_u,
/// Sigma_v and optionally r_tilde. An object holding a "params" member (an
/// estimate report) is unwrapped first.
ModelParams params_from_json(const Json& doc);
ModelParams read_params_file(const std::string& path);

}  // namespace pcm::cli
