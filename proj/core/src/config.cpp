#include "domaingcn/config.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"

namespace domaingcn {

std::map<std::string, std::string> WeightRuleKeyValues(const WeightRule& rule) {
  return {
      {"epithelium_max", FormatDouble(rule.epithelium_max)},
      {"lymphocyte_min", FormatDouble(rule.lymphocyte_min)},
      {"debris_min", FormatDouble(rule.debris_min)},
      {"weight_base", std::to_string(rule.base)},
  };
}

bool SetWeightRule(WeightRule& rule, const std::string& key, const std::string& value) {
  double* target = nullptr;
  if (key == "epithelium_max") {
    target = &rule.epithelium_max;
  } else if (key == "lymphocyte_min") {
    target = &rule.lymphocyte_min;
  } else if (key == "debris_min") {
    target = &rule.debris_min;
  } else if (key == "weight_base") {
    const auto v = ParseInt(value);
    if (!v || *v < 1 || *v > 1000) {
      Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
    }
    rule.base = static_cast<int>(*v);
    return true;
  } else {
    return false;
  }
  const auto v = ParseDouble(value);
  if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
  *target = *v;
  return true;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  bool owned = false;
  owned = hyper.Set(key, value) || owned;
  owned = train.Set(key, value) || owned;
  owned = SetWeightRule(rule, key, value) || owned;
  owned = synthetic.Set(key, value) || owned;
  if (!owned) Fail(ErrorKind::kConfig, "unknown configuration key '" + key + "'");
}

void RunConfig::SetAssignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    Fail(ErrorKind::kConfig, "expected key=value, got '" + assignment + "'");
  }
  Set(std::string(Trim(std::string_view(assignment).substr(0, eq))),
      std::string(Trim(std::string_view(assignment).substr(eq + 1))));
}

void RunConfig::Validate() const {
  hyper.Validate();
  train.Validate();
  rule.Validate();
  synthetic.Validate();
}

std::map<std::string, std::string> RunConfig::ToKeyValues() const {
  std::map<std::string, std::string> out = hyper.ToKeyValues();
  out.merge(train.ToKeyValues());
  out.merge(WeightRuleKeyValues(rule));
  out.merge(synthetic.ToKeyValues());
  return out;
}

void ReadConfig(std::istream& in, const std::string& source, RunConfig& config) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view t(line);
    if (const auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
    t = Trim(t);
    if (t.empty()) continue;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      Fail(ErrorKind::kConfig, where + "expected 'key = value'");
    }
    try {
      config.Set(std::string(Trim(t.substr(0, eq))), std::string(Trim(t.substr(eq + 1))));
    } catch (const Error& e) {
      Fail(ErrorKind::kConfig, where + e.what());
    }
  }
}

void LoadConfig(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string() + " for reading");
  ReadConfig(in, path.string(), config);
}

void WriteConfig(std::ostream& out, const RunConfig& config) {
  for (const auto& [key, value] : config.ToKeyValues()) out << key << " = " << value << '\n';
}

}  // namespace domaingcn
