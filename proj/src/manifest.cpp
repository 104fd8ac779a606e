#include "mrst/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "mrst/errors.hpp"

namespace mrst {
namespace {

using nlohmann::json;

json tasks_to_json(const std::vector<TaskId>& tasks) {
  json arr = json::array();
  for (TaskId t : tasks) arr.push_back(to_string(t));
  return arr;
}

json pool_to_json(const std::map<TaskId, std::vector<std::string>>& pool) {
  json obj = json::object();
  for (const auto& [task, list] : pool) obj[to_string(task)] = list;
  return obj;
}

std::map<TaskId, std::vector<std::string>> pool_from_json(const json& obj,
                                                          const char* field) {
  std::map<TaskId, std::vector<std::string>> pool;
  if (!obj.is_object())
    throw DataError(std::string(field) + " must be an object keyed by task");
  for (const auto& [key, value] : obj.items())
    pool[task_from_string(key)] = value.get<std::vector<std::string>>();
  return pool;
}

}  // namespace

std::string image_id(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

void canonicalize(DatasetManifest& m) {
  std::sort(m.gt_images.begin(), m.gt_images.end());
  std::sort(m.defected_images.begin(), m.defected_images.end());
  std::sort(m.tasks.begin(), m.tasks.end());
  m.tasks.erase(std::unique(m.tasks.begin(), m.tasks.end()), m.tasks.end());
  std::sort(m.pairs.begin(), m.pairs.end(),
            [](const PairEntry& a, const PairEntry& b) {
              return std::tie(a.task, a.gt, a.defected) <
                     std::tie(b.task, b.gt, b.defected);
            });
  for (auto& [task, list] : m.unpaired_gt) std::sort(list.begin(), list.end());
  for (auto& [task, list] : m.unpaired_defected)
    std::sort(list.begin(), list.end());
}

void validate(const DatasetManifest& m) {
  std::set<std::string> listed;
  for (const auto& p : m.gt_images)
    if (!listed.insert(p).second)
      throw DataError("duplicate image path in manifest: " + p);
  for (const auto& p : m.defected_images)
    if (!listed.insert(p).second)
      throw DataError("duplicate image path in manifest: " + p);

  auto require_listed = [&](const std::string& p, const char* where) {
    if (!listed.count(p))
      throw DataError(std::string(where) + " references unlisted image: " + p);
  };
  for (const auto& pair : m.pairs) {
    require_listed(pair.gt, "pair");
    require_listed(pair.defected, "pair");
  }
  for (const auto& [task, list] : m.unpaired_gt)
    for (const auto& p : list) require_listed(p, "unpaired_gt");
  for (const auto& [task, list] : m.unpaired_defected)
    for (const auto& p : list) require_listed(p, "unpaired_defected");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " +
                    e.what());
  }

  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw DataError("manifest " + path.string() + " missing integer version");
  if (doc["version"].get<int>() != kManifestVersion)
    throw DataError("manifest version " +
                    std::to_string(doc["version"].get<int>()) +
                    " unsupported (expected " +
                    std::to_string(kManifestVersion) + ")");

  DatasetManifest m;
  m.root = path.parent_path();
  for (const auto& t : doc.value("tasks", json::array()))
    m.tasks.push_back(task_from_string(t.get<std::string>()));
  const json images = doc.value("images", json::object());
  m.gt_images = images.value("gt", std::vector<std::string>{});
  m.defected_images = images.value("defected", std::vector<std::string>{});
  for (const auto& p : doc.value("pairs", json::array())) {
    PairEntry e;
    e.gt = p.at("gt").get<std::string>();
    e.defected = p.at("defected").get<std::string>();
    e.synthetic = p.value("synthetic", false);
    e.task = task_from_string(p.at("task").get<std::string>());
    m.pairs.push_back(e);
  }
  if (doc.contains("unpaired_gt"))
    m.unpaired_gt = pool_from_json(doc["unpaired_gt"], "unpaired_gt");
  if (doc.contains("unpaired_defected"))
    m.unpaired_defected =
        pool_from_json(doc["unpaired_defected"], "unpaired_defected");
  if (doc.contains("phantom_seeds")) {
    for (const auto& [key, value] : doc["phantom_seeds"].items())
      m.phantom_seeds[key] = value.get<uint64_t>();
  }

  validate(m);

  std::vector<std::string> missing;
  auto check_exists = [&](const std::string& rel) {
    if (!std::filesystem::exists(m.resolve(rel))) missing.push_back(rel);
  };
  for (const auto& p : m.gt_images) check_exists(p);
  for (const auto& p : m.defected_images) check_exists(p);
  if (!missing.empty()) {
    std::string joined;
    for (const auto& p : missing) joined += (joined.empty() ? "" : ", ") + p;
    throw DataError("manifest " + path.string() +
                    " references missing files: " + joined);
  }
  return m;
}

void save_manifest(DatasetManifest& m, const std::filesystem::path& path) {
  canonicalize(m);
  validate(m);

  json doc;
  doc["version"] = m.version;
  doc["tasks"] = tasks_to_json(m.tasks);
  doc["images"] = {{"gt", m.gt_images}, {"defected", m.defected_images}};
  json pairs = json::array();
  for (const auto& p : m.pairs) {
    pairs.push_back({{"gt", p.gt},
                     {"defected", p.defected},
                     {"synthetic", p.synthetic},
                     {"task", to_string(p.task)}});
  }
  doc["pairs"] = pairs;
  doc["unpaired_gt"] = pool_to_json(m.unpaired_gt);
  doc["unpaired_defected"] = pool_to_json(m.unpaired_defected);
  if (!m.phantom_seeds.empty()) {
    json seeds = json::object();
    for (const auto& [key, value] : m.phantom_seeds) seeds[key] = value;
    doc["phantom_seeds"] = seeds;
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("short write to " + path.string());
  m.root = path.parent_path();
}

}  // namespace mrst
