#include "dera/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dera::prompts {

namespace {

constexpr std::array<const char*, kPromptCount> kPromptNames = {
    "summ_initial",   "summ_decider",  "summ_researcher", "summ_corruption",
    "summ_final",     "metric_extractor", "metric_verifier", "cp_initial",
    "cp_decider",     "cp_researcher", "cp_final",        "rewrite_full",
    "rewrite_last",   "qa_single_shot", "qa_student_exp", "qa_teacher",
    "qa_student",     "qa_final",      "qa_sim",          "qa_exact",
};

bool is_identifier(const std::string& name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_') return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RegistryError("cannot read prompt file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string rstrip(const std::string& text) {
  auto end = text.find_last_not_of(" \t\r\n\f\v");
  if (end == std::string::npos) return "";
  return text.substr(0, end + 1);
}

}  // namespace

const std::array<PromptId, kPromptCount>& all_prompt_ids() {
  static const std::array<PromptId, kPromptCount> ids = [] {
    std::array<PromptId, kPromptCount> out{};
    for (size_t i = 0; i < kPromptCount; ++i) out[i] = static_cast<PromptId>(i);
    return out;
  }();
  return ids;
}

const char* to_string(PromptId id) {
  return kPromptNames.at(static_cast<size_t>(id));
}

PromptId prompt_id_from_string(const std::string& name) {
  for (size_t i = 0; i < kPromptCount; ++i) {
    if (name == kPromptNames[i]) return static_cast<PromptId>(i);
  }
  throw UnknownPrompt(name);
}

PromptTemplate PromptTemplate::parse(const std::string& text) {
  PromptTemplate result;
  std::string literal;
  size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size() && (text[i + 1] == '{' || text[i + 1] == '}')) {
      literal += text[i + 1];
      i += 2;
      continue;
    }
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      const auto close = text.find("}}", i + 2);
      if (close == std::string::npos) {
        throw RegistryError("unterminated placeholder in template");
      }
      const std::string name = text.substr(i + 2, close - i - 2);
      if (!is_identifier(name)) {
        throw RegistryError("invalid placeholder name: '" + name + "'");
      }
      if (!literal.empty()) {
        result.segments_.push_back({false, literal});
        literal.clear();
      }
      result.segments_.push_back({true, name});
      result.placeholders_.insert(name);
      i = close + 2;
      continue;
    }
    literal += c;
    ++i;
  }
  if (!literal.empty()) result.segments_.push_back({false, literal});
  return result;
}

std::string PromptTemplate::render(const VarMap& vars) const {
  for (const auto& name : placeholders_) {
    if (!vars.count(name)) throw MissingVariable("template", name);
  }
  for (const auto& [name, value] : vars) {
    if (!placeholders_.count(name)) throw UnexpectedVariable("template", name);
  }
  std::string out;
  for (const auto& segment : segments_) {
    if (segment.is_var) {
      out += vars.at(segment.text);
    } else {
      out += segment.text;
    }
  }
  return out;
}

PromptRegistry PromptRegistry::load(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw RegistryError("cannot read manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw RegistryError("invalid manifest JSON: " + std::string(e.what()));
  }
  if (!manifest.is_object() || manifest.value("format_version", 0) != 1) {
    throw RegistryError("manifest must declare format_version 1");
  }
  if (!manifest.contains("prompts") || !manifest["prompts"].is_array()) {
    throw RegistryError("manifest must list prompts");
  }

  PromptRegistry registry;
  std::array<bool, kPromptCount> seen{};
  for (const auto& item : manifest["prompts"]) {
    std::string name;
    try {
      name = item.at("id").get<std::string>();
      const PromptId id = prompt_id_from_string(name);
      const size_t index = static_cast<size_t>(id);
      if (seen[index]) throw RegistryError("duplicate prompt in manifest: " + name);
      seen[index] = true;

      PromptSpec spec;
      spec.id = id;
      spec.required_vars = item.at("required_vars").get<std::vector<std::string>>();
      const auto& params = item.at("params");
      spec.params.temperature = params.at("temperature").get<double>();
      spec.params.max_tokens = params.at("max_tokens").get<int>();
      spec.params.top_p = params.at("top_p").get<double>();
      spec.params.frequency_penalty = params.at("frequency_penalty").get<double>();
      spec.params.num_completions = params.at("num_completions").get<int>();
      if (params.contains("turn_budget")) {
        spec.params.turn_budget = params.at("turn_budget").get<int>();
      }
      spec.params.validate();
      spec.template_text = rstrip(read_file(dir + "/" + item.at("file").get<std::string>()));

      PromptTemplate compiled = PromptTemplate::parse(spec.template_text);
      std::set<std::string> required(spec.required_vars.begin(), spec.required_vars.end());
      if (required.size() != spec.required_vars.size()) {
        throw RegistryError("prompt " + name + ": duplicate required variable");
      }
      if (required != compiled.placeholders()) {
        throw RegistryError("prompt " + name +
                            ": required_vars do not match template placeholders");
      }
      registry.entries_[index] = {std::move(spec), std::move(compiled)};
    } catch (const RegistryError&) {
      throw;
    } catch (const UnknownPrompt&) {
      throw;
    } catch (const std::exception& e) {
      throw RegistryError("manifest entry '" + name + "': " + e.what());
    }
  }
  for (size_t i = 0; i < kPromptCount; ++i) {
    if (!seen[i]) {
      throw RegistryError(std::string("manifest is missing prompt: ") + kPromptNames[i]);
    }
  }
  return registry;
}

const PromptSpec& PromptRegistry::spec(PromptId id) const {
  return entries_.at(static_cast<size_t>(id)).spec;
}

GenerationParams PromptRegistry::params_for(PromptId id) const {
  return spec(id).params;
}

std::string PromptRegistry::render(PromptId id, const VarMap& vars) const {
  const auto& entry = entries_.at(static_cast<size_t>(id));
  for (const auto& required : entry.spec.required_vars) {
    if (!vars.count(required)) {
      throw MissingVariable(to_string(id), required);
    }
  }
  for (const auto& [name, value] : vars) {
    if (!entry.compiled.placeholders().count(name)) {
      throw UnexpectedVariable(to_string(id), name);
    }
  }
  return entry.compiled.render(vars);
}

std::string PromptRegistry::render(const std::string& name, const VarMap& vars) const {
  return render(prompt_id_from_string(name), vars);
}

}  // namespace dera::prompts
