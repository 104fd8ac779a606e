#include "mrst/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mrst/errors.hpp"

namespace mrst {
namespace {

using nlohmann::json;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
  return v;
}

uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

json meta_to_json(const ParamStore<float>& params, const CheckpointMeta& meta) {
  json plist = json::array();
  for (const auto& entry : params.entries()) {
    plist.push_back({{"name", entry.name},
                     {"partition", to_string(entry.partition)},
                     {"shape", entry.tensor.shape()}});
  }
  json tasks = json::array();
  for (TaskId t : meta.tasks) tasks.push_back(to_string(t));
  return json{{"kind", meta.kind},
              {"tasks", tasks},
              {"loss",
               {{"lambda", meta.loss.lambda},
                {"adv_kind", to_string(meta.loss.adv_kind)},
                {"content_space", to_string(meta.loss.content_space)},
                {"featnet_seed", meta.loss.featnet_seed}}},
              {"net",
               {{"base_channels", meta.net.base_channels},
                {"depth", meta.net.depth},
                {"num_tasks", meta.net.num_tasks},
                {"patch_disc_depth", meta.net.patch_disc_depth}}},
              {"params", plist},
              {"seed", meta.seed},
              {"step", meta.step}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore<float>& params,
                     const CheckpointMeta& meta) {
  const std::string header = meta_to_json(params, meta).dump();

  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, header.size());
  out += header;
  for (const auto& entry : params.entries()) {
    for (float f : entry.tensor.data()) {
      const uint32_t bits = std::bit_cast<uint32_t>(f);
      put_u32(out, bits);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  const auto* p = (const unsigned char*)bytes.data();

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const uint32_t version = get_u32(p + 4);
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  const uint64_t header_len = get_u64(p + 8);
  if (16 + header_len > bytes.size())
    throw FormatError(path.string() + ": truncated header");

  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": header is not valid JSON: " +
                      e.what());
  }

  LoadedCheckpoint loaded;
  try {
    loaded.meta.kind = header.at("kind").get<std::string>();
    for (const auto& t : header.at("tasks"))
      loaded.meta.tasks.push_back(task_from_string(t.get<std::string>()));
    const json& loss = header.at("loss");
    loaded.meta.loss.lambda = loss.at("lambda").get<double>();
    loaded.meta.loss.adv_kind =
        adv_kind_from_string(loss.at("adv_kind").get<std::string>());
    loaded.meta.loss.content_space =
        content_space_from_string(loss.at("content_space").get<std::string>());
    loaded.meta.loss.featnet_seed = loss.at("featnet_seed").get<uint64_t>();
    const json& net = header.at("net");
    loaded.meta.net.base_channels = net.at("base_channels").get<int>();
    loaded.meta.net.depth = net.at("depth").get<int>();
    loaded.meta.net.num_tasks = net.at("num_tasks").get<int>();
    loaded.meta.net.patch_disc_depth = net.at("patch_disc_depth").get<int>();
    loaded.meta.seed = header.at("seed").get<uint64_t>();
    loaded.meta.step = header.at("step").get<int64_t>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }

  if (!header.contains("params") || !header["params"].is_array())
    throw FormatError(path.string() + ": header missing params array");
  size_t offset = 16 + size_t(header_len);
  for (const auto& pj : header["params"]) {
    std::string name, partition;
    Shape shape;
    try {
      name = pj.at("name").get<std::string>();
      partition = pj.at("partition").get<std::string>();
      shape = pj.at("shape").get<Shape>();
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": malformed parameter entry: " +
                        e.what());
    }
    const int64_t count = shape_numel(shape);
    const size_t block = size_t(count) * 4;
    if (offset + block > bytes.size())
      throw FormatError(path.string() + ": truncated parameter block for '" +
                        name + "'");
    std::vector<float> values(static_cast<size_t>(count), 0.0f);
    for (int64_t i = 0; i < count; ++i)
      values[size_t(i)] =
          std::bit_cast<float>(get_u32(p + offset + size_t(i) * 4));
    offset += block;
    loaded.params.add(name, Tensor<float>::from_data(shape, std::move(values)),
                      partition_from_string(partition));
  }
  if (offset != bytes.size())
    throw FormatError(path.string() + ": " +
                      std::to_string(bytes.size() - offset) +
                      " trailing bytes after parameter blocks");
  return loaded;
}

std::string checkpoint_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  uint64_t hash = 14695981039346656037ull;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= (unsigned char)chunk[i];
      hash *= 1099511628211ull;
    }
    if (in.eof()) break;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)hash);
  return buf;
}

}  // namespace mrst
