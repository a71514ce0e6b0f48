#pragma once

// Flat "key = value" run configuration covering the model, training,
// weight-rule and generator settings. '#' starts a comment. The key "seed"
// sets the model, training and generator seeds together.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "domaingcn/domain_weights.hpp"
#include "domaingcn/model.hpp"
#include "domaingcn/synthetic.hpp"
#include "domaingcn/training.hpp"

namespace domaingcn {

struct RunConfig {
  HyperParams hyper;
  TrainConfig train;
  WeightRule rule;
  SyntheticSpec synthetic;

  // Unknown keys and invalid values raise a config error.
  void Set(const std::string& key, const std::string& value);
  // "key=value" as given on a command line.
  void SetAssignment(const std::string& assignment);
  void Validate() const;

  std::map<std::string, std::string> ToKeyValues() const;
};

std::map<std::string, std::string> WeightRuleKeyValues(const WeightRule& rule);
// Returns false for keys the rule does not own.
bool SetWeightRule(WeightRule& rule, const std::string& key, const std::string& value);

// Applies every assignment in the stream on top of `config`. Errors name the
// source and line.
void ReadConfig(std::istream& in, const std::string& source, RunConfig& config);
void LoadConfig(const std::filesystem::path& path, RunConfig& config);
void WriteConfig(std::ostream& out, const RunConfig& config);

}  // namespace domaingcn
