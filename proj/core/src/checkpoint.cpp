#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "boltzcurve/training.hpp"
#include "json.hpp"

namespace bc {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'R', 'V'};
constexpr std::uint32_t kVersion = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64_le(std::string& out, double d) {
  put_u64_le(out, std::bit_cast<std::uint64_t>(d));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

nlohmann::json widths_json(const Mlp& net) {
  return net.empty() ? nlohmann::json(nullptr) : nlohmann::json(net.widths);
}

}  // namespace

void save_checkpoint(const FlowModel& m, const std::filesystem::path& path,
                     std::uint64_t seed, long iterations) {
  const auto* gauss = dynamic_cast<const GaussianEnergy*>(m.latent.get());
  if (gauss == nullptr) {
    throw CheckpointError("save_checkpoint: latent must be Gaussian");
  }

  nlohmann::json meta;
  meta["kind"] = to_string(m.kind);
  meta["dim"] = m.dim();
  meta["sigma"] = gauss->sigma();
  meta["beta_min"] = m.vp.beta_min;
  meta["beta_max"] = m.vp.beta_max;
  meta["use_ct"] = m.use_ct;
  meta["widths"] = {{"psi", widths_json(m.psi)},
                    {"v", widths_json(m.vel)},
                    {"c", widths_json(m.cnet)},
                    {"g", widths_json(m.sched.h)}};
  meta["target"] = nlohmann::json::parse(m.target->spec_json());
  meta["seed"] = seed;
  meta["iterations"] = iterations;
  const std::string meta_str = meta.dump();

  std::string payload;
  for (const Mlp* net : m.nets()) {
    payload.reserve(payload.size() +
                    static_cast<std::size_t>(net->param_count()) * 8);
    for (Eigen::Index i = 0; i < net->params.size(); ++i) {
      put_f64_le(payload, net->params[i]);
    }
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));

  std::string blob;
  blob.append(kMagic, 4);
  put_u32_le(blob, kVersion);
  put_u64_le(blob, meta_str.size());
  blob += meta_str;
  blob += payload;
  put_u32_le(blob, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("save_checkpoint: cannot open '" + path.string() +
                          "' for writing");
  }
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) {
    throw CheckpointError("save_checkpoint: write failed for '" +
                          path.string() + "'");
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("load_checkpoint: cannot open '" + path.string() + "'");
  }
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw CheckpointError("load_checkpoint: version mismatch (bad magic)");
  }
  const std::uint32_t version = get_u32_le(blob.data() + 4);
  if (version != kVersion) {
    throw CheckpointError("load_checkpoint: version mismatch (got " +
                          std::to_string(version) + ")");
  }
  const std::uint64_t meta_len = get_u64_le(blob.data() + 8);
  if (blob.size() < 16 + meta_len + 4) {
    throw CheckpointError("load_checkpoint: truncated file");
  }
  const std::string meta_str(reinterpret_cast<const char*>(blob.data() + 16),
                             meta_len);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("load_checkpoint: bad metadata: ") +
                          e.what());
  }

  LoadedCheckpoint loaded;
  FlowModel& m = loaded.model;
  try {
    m.kind = interp_kind_from_string(meta.at("kind").get<std::string>());
    m.target = target_from_spec_json(meta.at("target").dump());
    m.latent = gaussian_latent(meta.at("sigma").get<double>(),
                               meta.at("dim").get<int>());
    m.use_ct = meta.at("use_ct").get<bool>();
    m.vp.beta_min = meta.at("beta_min").get<double>();
    m.vp.beta_max = meta.at("beta_max").get<double>();
    const auto& widths = meta.at("widths");
    if (!widths.at("psi").is_null()) {
      m.psi = Mlp(widths.at("psi").get<std::vector<int>>());
    }
    if (!widths.at("v").is_null()) {
      m.vel = Mlp(widths.at("v").get<std::vector<int>>());
    }
    if (!widths.at("c").is_null()) {
      m.cnet = Mlp(widths.at("c").get<std::vector<int>>());
    }
    if (!widths.at("g").is_null()) {
      m.sched.h = Mlp(widths.at("g").get<std::vector<int>>());
    }
    loaded.seed = meta.at("seed").get<std::uint64_t>();
    loaded.iterations = meta.at("iterations").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("load_checkpoint: bad metadata: ") +
                          e.what());
  }

  std::ptrdiff_t n_params = m.flat_param_count();
  const std::size_t payload_len = blob.size() - 16 - meta_len - 4;
  if (payload_len != static_cast<std::size_t>(n_params) * 8) {
    throw CheckpointError(
        "load_checkpoint: truncated file (payload holds " +
        std::to_string(payload_len / 8) + " parameters, metadata implies " +
        std::to_string(n_params) + ")");
  }
  const unsigned char* p = blob.data() + 16 + meta_len;
  const auto crc_stored = get_u32_le(blob.data() + blob.size() - 4);
  const auto crc_actual = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(payload_len)));
  if (crc_stored != crc_actual) {
    throw CheckpointError("load_checkpoint: checksum failure");
  }
  for (Mlp* net : m.nets()) {
    for (Eigen::Index i = 0; i < net->params.size(); ++i) {
      net->params[i] = std::bit_cast<double>(get_u64_le(p));
      p += 8;
    }
  }
  return loaded;
}

}  // namespace bc
