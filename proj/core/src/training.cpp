#include "edag/training.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "edag/crc32.hpp"

namespace edag {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'D', 'A', 'G'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(in[at + size_t(i)]) << (8 * i);
  return v;
}

uint64_t get_u64(const std::vector<uint8_t>& in, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(in[at + size_t(i)]) << (8 * i);
  return v;
}

json config_to_json(const ModelConfig& c) {
  return json{{"d_w", c.d_w},
              {"vocab_size", c.vocab_size},
              {"max_sentences", c.max_sentences},
              {"max_sentence_len", c.max_sentence_len},
              {"num_layers", c.num_layers},
              {"ff_dim", c.ff_dim},
              {"num_heads", c.num_heads},
              {"dropout", c.dropout},
              {"lambda_er", c.lambda_er},
              {"lambda_tr", c.lambda_tr},
              {"lambda_dag", c.lambda_dag},
              {"lambda_ks", c.lambda_ks},
              {"gamma", c.gamma},
              {"sched_start_epoch", c.sched_start_epoch},
              {"sched_end_epoch", c.sched_end_epoch},
              {"sched_start_prob", c.sched_start_prob},
              {"sched_end_prob", c.sched_end_prob},
              {"trigger_threshold", c.trigger_threshold},
              {"expand_threshold", c.expand_threshold},
              {"frontier_cap", c.frontier_cap},
              {"use_path_memory", c.use_path_memory}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_w = j.at("d_w").get<int64_t>();
  c.vocab_size = j.at("vocab_size").get<int64_t>();
  c.max_sentences = j.at("max_sentences").get<int>();
  c.max_sentence_len = j.at("max_sentence_len").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.ff_dim = j.at("ff_dim").get<int64_t>();
  c.num_heads = j.at("num_heads").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.lambda_er = j.at("lambda_er").get<double>();
  c.lambda_tr = j.at("lambda_tr").get<double>();
  c.lambda_dag = j.at("lambda_dag").get<double>();
  c.lambda_ks = j.at("lambda_ks").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.sched_start_epoch = j.at("sched_start_epoch").get<int>();
  c.sched_end_epoch = j.at("sched_end_epoch").get<int>();
  c.sched_start_prob = j.at("sched_start_prob").get<double>();
  c.sched_end_prob = j.at("sched_end_prob").get<double>();
  c.trigger_threshold = j.at("trigger_threshold").get<double>();
  c.expand_threshold = j.at("expand_threshold").get<double>();
  c.frontier_cap = j.at("frontier_cap").get<int>();
  c.use_path_memory = j.at("use_path_memory").get<bool>();
  return c;
}

}  // namespace

std::vector<uint8_t> encode_checkpoint(const CheckpointData& data) {
  // Payload first, so the manifest can carry real offsets.
  std::vector<uint8_t> payload;
  json manifest = json::array();
  for (const auto& [name, blob] : data.tensors) {
    if (int64_t(blob.values.size()) != blob.rows * blob.cols)
      throw IoError("checkpoint: tensor '" + name + "' has " +
                    std::to_string(blob.values.size()) + " values for shape " +
                    std::to_string(blob.rows) + "x" + std::to_string(blob.cols));
    manifest.push_back(json{{"name", name},
                            {"rows", blob.rows},
                            {"cols", blob.cols},
                            {"offset", payload.size()}});
    for (float f : blob.values) {
      uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(payload, bits);
    }
  }
  json header{{"config", config_to_json(data.config)},
              {"schema", data.schema_text},
              {"tensors", manifest},
              {"payload_bytes", payload.size()}};
  const std::string header_text = header.dump();

  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u64(out, header_text.size());
  out.insert(out.end(), header_text.begin(), header_text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc32(out.data(), out.size()));
  return out;
}

CheckpointData decode_checkpoint(const std::vector<uint8_t>& bytes) {
  auto truncated = [] { throw IoError("checkpoint: file truncated"); };
  if (bytes.size() < 4 + 4 + 8 + 4) truncated();
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("checkpoint: bad magic bytes (not a checkpoint file)");
  const uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version));
  const uint64_t header_len = get_u64(bytes, 8);
  const size_t header_at = 16;
  if (bytes.size() < header_at + header_len + 4) truncated();

  const uint32_t stored_crc = get_u32(bytes, bytes.size() - 4);
  const uint32_t actual_crc = crc32(bytes.data(), bytes.size() - 4);
  if (stored_crc != actual_crc)
    throw IoError("checkpoint: checksum mismatch (corrupt file)");

  json header;
  try {
    header = json::parse(bytes.begin() + long(header_at),
                         bytes.begin() + long(header_at + header_len));
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: unreadable header: ") + e.what());
  }

  CheckpointData data;
  try {
    data.config = config_from_json(header.at("config"));
    data.schema_text = header.at("schema").get<std::string>();
    const size_t payload_at = header_at + header_len;
    const uint64_t payload_bytes = header.at("payload_bytes").get<uint64_t>();
    if (bytes.size() != payload_at + payload_bytes + 4) truncated();

    std::vector<std::pair<uint64_t, uint64_t>> spans;  // offset, byte length
    for (const auto& entry : header.at("tensors")) {
      TensorBlob blob;
      blob.rows = entry.at("rows").get<int64_t>();
      blob.cols = entry.at("cols").get<int64_t>();
      const std::string name = entry.at("name").get<std::string>();
      const uint64_t offset = entry.at("offset").get<uint64_t>();
      if (blob.rows < 1 || blob.cols < 1)
        throw IoError("checkpoint: tensor '" + name + "' has a non-positive shape");
      const uint64_t len = uint64_t(blob.rows * blob.cols) * 4;
      if (offset + len > payload_bytes)
        throw IoError("checkpoint: tensor '" + name + "' reaches past the payload");
      spans.emplace_back(offset, len);
      blob.values.reserve(size_t(blob.rows * blob.cols));
      for (uint64_t i = 0; i < uint64_t(blob.rows * blob.cols); ++i) {
        const uint32_t bits = get_u32(bytes, payload_at + size_t(offset + i * 4));
        float f = 0;
        std::memcpy(&f, &bits, sizeof f);
        blob.values.push_back(f);
      }
      if (data.tensors.count(name))
        throw IoError("checkpoint: duplicate tensor '" + name + "'");
      data.tensors[name] = std::move(blob);
    }
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i)
      if (spans[i].first < spans[i - 1].first + spans[i - 1].second)
        throw IoError("checkpoint: overlapping tensor payloads");
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return data;
}

void write_checkpoint_file(const std::string& path, const CheckpointData& data) {
  const std::vector<uint8_t> bytes = encode_checkpoint(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw IoError("checkpoint: failed writing '" + path + "'");
}

CheckpointData read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace edag
