#include "mrst/runconfig.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mrst/errors.hpp"

namespace mrst {
namespace {

using nlohmann::json;

// Collects unknown keys ("train.lrr") across the whole document before
// reporting, so one pass surfaces every typo.
void collect_unknown(const json& obj, const std::string& prefix,
                     const std::set<std::string>& allowed,
                     std::vector<std::string>& unknown) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      unknown.push_back(prefix.empty() ? key : prefix + "." + key);
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& section, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field " +
                      (section.empty() ? std::string(key)
                                       : section + "." + key) +
                      " has the wrong type");
  }
}

[[noreturn]] void bad_value(const std::string& field_name,
                            const std::string& detail) {
  throw ConfigError("config field " + field_name + " invalid: " + detail);
}

}  // namespace

void validate(const RunConfig& cfg) {
  if (cfg.version != kConfigVersion)
    bad_value("version", "expected " + std::to_string(kConfigVersion) +
                             ", got " + std::to_string(cfg.version));
  if (cfg.net.base_channels < 1)
    bad_value("net.base_channels", "must be >= 1");
  if (cfg.net.depth < 1) bad_value("net.depth", "must be >= 1");
  if (cfg.net.num_tasks < 1) bad_value("net.num_tasks", "must be >= 1");
  if (cfg.net.patch_disc_depth < 1)
    bad_value("net.patch_disc_depth", "must be >= 1");
  if (!(cfg.loss.lambda >= 0.0))
    bad_value("loss.lambda",
              "must be >= 0, got " + std::to_string(cfg.loss.lambda));
  if (cfg.train.epochs < 1) bad_value("train.epochs", "must be >= 1");
  if (cfg.train.batch_size < 1) bad_value("train.batch_size", "must be >= 1");
  if (!(cfg.train.adam.lr > 0.0)) bad_value("train.lr", "must be > 0");
  if (!(cfg.train.adam.beta1 >= 0.0 && cfg.train.adam.beta1 < 1.0))
    bad_value("train.beta1", "must lie in [0, 1)");
  if (!(cfg.train.adam.beta2 >= 0.0 && cfg.train.adam.beta2 < 1.0))
    bad_value("train.beta2", "must lie in [0, 1)");
  if (!(cfg.train.adam.eps > 0.0)) bad_value("train.eps", "must be > 0");
  if (cfg.train.checkpoint_every < 0)
    bad_value("train.checkpoint_every", "must be >= 0");
  if (cfg.train.tasks.empty()) bad_value("train.tasks", "must be non-empty");
  if (cfg.phantom.image_size < 16)
    bad_value("phantom.image_size", "must be >= 16");
  if (!(cfg.phantom.density >= 0.0))
    bad_value("phantom.density", "must be >= 0");
  if (!(cfg.defect.gaussian_sigma >= 0.0))
    bad_value("defect.gaussian_sigma", "must be >= 0");
  if (!(cfg.defect.poisson_peak >= 0.0))
    bad_value("defect.poisson_peak", "must be >= 0");
  if (cfg.defect.drop_every < 2) bad_value("defect.drop_every", "must be >= 2");
  if (!(cfg.defect.psf_sigma > 0.0)) bad_value("defect.psf_sigma", "must be > 0");
  if (cfg.defect.factor < 2) bad_value("defect.factor", "must be >= 2");
}

RunConfig parse_config(const std::string& json_text,
                       const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": config must be a JSON object");
  if (!doc.contains("version"))
    throw ConfigError(origin + ": config requires a version field");

  std::vector<std::string> unknown;
  collect_unknown(doc, "",
                  {"version", "net", "loss", "train", "phantom", "defect"},
                  unknown);
  if (doc.contains("net") && doc["net"].is_object())
    collect_unknown(doc["net"], "net",
                    {"base_channels", "depth", "num_tasks", "patch_disc_depth"},
                    unknown);
  if (doc.contains("loss") && doc["loss"].is_object())
    collect_unknown(doc["loss"], "loss",
                    {"lambda", "adv_kind", "content_space", "featnet_seed"},
                    unknown);
  if (doc.contains("train") && doc["train"].is_object())
    collect_unknown(doc["train"], "train",
                    {"epochs", "batch_size", "lr", "beta1", "beta2", "eps",
                     "checkpoint_every", "tasks"},
                    unknown);
  if (doc.contains("phantom") && doc["phantom"].is_object())
    collect_unknown(doc["phantom"], "phantom",
                    {"kind", "image_size", "density"}, unknown);
  if (doc.contains("defect") && doc["defect"].is_object())
    collect_unknown(doc["defect"], "defect",
                    {"gaussian_sigma", "poisson_peak", "drop_every", "fill",
                     "psf_sigma", "factor"},
                    unknown);
  if (!unknown.empty()) {
    std::string joined;
    for (const auto& k : unknown) joined += (joined.empty() ? "" : ", ") + k;
    throw ConfigError(origin + ": unknown config keys: " + joined);
  }

  RunConfig cfg;
  cfg.version = field<int>(doc, "version", "", cfg.version);
  if (doc.contains("net")) {
    const json& net = doc["net"];
    cfg.net.base_channels =
        field<int>(net, "base_channels", "net", cfg.net.base_channels);
    cfg.net.depth = field<int>(net, "depth", "net", cfg.net.depth);
    cfg.net.num_tasks = field<int>(net, "num_tasks", "net", cfg.net.num_tasks);
    cfg.net.patch_disc_depth =
        field<int>(net, "patch_disc_depth", "net", cfg.net.patch_disc_depth);
  }
  if (doc.contains("loss")) {
    const json& loss = doc["loss"];
    cfg.loss.lambda = field<double>(loss, "lambda", "loss", cfg.loss.lambda);
    cfg.loss.adv_kind = adv_kind_from_string(field<std::string>(
        loss, "adv_kind", "loss", to_string(cfg.loss.adv_kind)));
    cfg.loss.content_space = content_space_from_string(field<std::string>(
        loss, "content_space", "loss", to_string(cfg.loss.content_space)));
    cfg.loss.featnet_seed =
        field<uint64_t>(loss, "featnet_seed", "loss", cfg.loss.featnet_seed);
  }
  if (doc.contains("train")) {
    const json& train = doc["train"];
    cfg.train.epochs = field<int>(train, "epochs", "train", cfg.train.epochs);
    cfg.train.batch_size =
        field<int>(train, "batch_size", "train", cfg.train.batch_size);
    cfg.train.adam.lr = field<double>(train, "lr", "train", cfg.train.adam.lr);
    cfg.train.adam.beta1 =
        field<double>(train, "beta1", "train", cfg.train.adam.beta1);
    cfg.train.adam.beta2 =
        field<double>(train, "beta2", "train", cfg.train.adam.beta2);
    cfg.train.adam.eps = field<double>(train, "eps", "train", cfg.train.adam.eps);
    cfg.train.checkpoint_every = field<int>(train, "checkpoint_every", "train",
                                            cfg.train.checkpoint_every);
    if (train.contains("tasks")) {
      cfg.train.tasks.clear();
      for (const auto& t :
           field<std::vector<std::string>>(train, "tasks", "train", {}))
        cfg.train.tasks.push_back(task_from_string(t));
    }
  }
  if (doc.contains("phantom")) {
    const json& ph = doc["phantom"];
    cfg.phantom.kind = phantom_kind_from_string(
        field<std::string>(ph, "kind", "phantom", to_string(cfg.phantom.kind)));
    cfg.phantom.image_size =
        field<int>(ph, "image_size", "phantom", cfg.phantom.image_size);
    cfg.phantom.density =
        field<double>(ph, "density", "phantom", cfg.phantom.density);
  }
  if (doc.contains("defect")) {
    const json& df = doc["defect"];
    cfg.defect.gaussian_sigma =
        field<double>(df, "gaussian_sigma", "defect", cfg.defect.gaussian_sigma);
    cfg.defect.poisson_peak =
        field<double>(df, "poisson_peak", "defect", cfg.defect.poisson_peak);
    cfg.defect.drop_every =
        field<int>(df, "drop_every", "defect", cfg.defect.drop_every);
    cfg.defect.fill = row_fill_from_string(
        field<std::string>(df, "fill", "defect", to_string(cfg.defect.fill)));
    cfg.defect.psf_sigma =
        field<double>(df, "psf_sigma", "defect", cfg.defect.psf_sigma);
    cfg.defect.factor = field<int>(df, "factor", "defect", cfg.defect.factor);
  }

  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string config_to_json(const RunConfig& cfg) {
  json tasks = json::array();
  for (TaskId t : cfg.train.tasks) tasks.push_back(to_string(t));
  json doc = {
      {"version", cfg.version},
      {"net",
       {{"base_channels", cfg.net.base_channels},
        {"depth", cfg.net.depth},
        {"num_tasks", cfg.net.num_tasks},
        {"patch_disc_depth", cfg.net.patch_disc_depth}}},
      {"loss",
       {{"lambda", cfg.loss.lambda},
        {"adv_kind", to_string(cfg.loss.adv_kind)},
        {"content_space", to_string(cfg.loss.content_space)},
        {"featnet_seed", cfg.loss.featnet_seed}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"lr", cfg.train.adam.lr},
        {"beta1", cfg.train.adam.beta1},
        {"beta2", cfg.train.adam.beta2},
        {"eps", cfg.train.adam.eps},
        {"checkpoint_every", cfg.train.checkpoint_every},
        {"tasks", tasks}}},
      {"phantom",
       {{"kind", to_string(cfg.phantom.kind)},
        {"image_size", cfg.phantom.image_size},
        {"density", cfg.phantom.density}}},
      {"defect",
       {{"gaussian_sigma", cfg.defect.gaussian_sigma},
        {"poisson_peak", cfg.defect.poisson_peak},
        {"drop_every", cfg.defect.drop_every},
        {"fill", to_string(cfg.defect.fill)},
        {"psf_sigma", cfg.defect.psf_sigma},
        {"factor", cfg.defect.factor}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace mrst
