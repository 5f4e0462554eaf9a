#include "jetfit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "jetfit/errors.hpp"

namespace jetfit {

namespace {

constexpr char kMagic[8] = {'J', 'F', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& t) {
  write_u32(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<uint32_t>(t.rows()));
  write_u32(out, static_cast<uint32_t>(t.cols()));
  std::vector<float> row_major(static_cast<size_t>(t.size()));
  size_t n = 0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) row_major[n++] = static_cast<float>(t(i, j));
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(float)));
}

}  // namespace

nlohmann::ordered_json net_config_to_json(const WeightNetConfig& c) {
  nlohmann::ordered_json j;
  j["local_width"] = c.local_width;
  j["mid_width"] = c.mid_width;
  j["global_width"] = c.global_width;
  j["head_widths"] = c.head_widths;
  j["input_transform"] = c.input_transform;
  j["feature_transform"] = c.feature_transform;
  j["epsilon"] = c.epsilon;
  j["norm_eps"] = c.norm_eps;
  j["norm_momentum"] = c.norm_momentum;
  return j;
}

WeightNetConfig net_config_from_json(const nlohmann::json& j) {
  WeightNetConfig c;
  c.local_width = j.value("local_width", c.local_width);
  c.mid_width = j.value("mid_width", c.mid_width);
  c.global_width = j.value("global_width", c.global_width);
  if (j.contains("head_widths")) {
    const auto& hw = j.at("head_widths");
    if (!hw.is_array() || hw.size() != 3)
      throw FormatError("net config: head_widths must be a 3-element array");
    for (int i = 0; i < 3; ++i) c.head_widths[static_cast<size_t>(i)] = hw[static_cast<size_t>(i)];
  }
  c.input_transform = j.value("input_transform", c.input_transform);
  c.feature_transform = j.value("feature_transform", c.feature_transform);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.norm_eps = j.value("norm_eps", c.norm_eps);
  c.norm_momentum = j.value("norm_momentum", c.norm_momentum);
  return c;
}

const Eigen::MatrixXd* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const WeightNetParams& params,
                     const AdamState* optimizer_state,
                     const nlohmann::ordered_json& extra_meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());

  nlohmann::ordered_json meta;
  meta["format"] = "jetfit-checkpoint";
  meta["version"] = 1;
  meta["net"] = net_config_to_json(params.config);
  meta["has_optimizer"] = optimizer_state != nullptr;
  if (optimizer_state != nullptr) meta["adam_step"] = optimizer_state->step;
  if (!extra_meta.is_null()) meta["extra"] = extra_meta;
  const std::string meta_str = meta.dump();

  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
  params.visit_trainable([&tensors](const std::string& name, const Eigen::MatrixXd& t) {
    tensors.emplace_back(name, t);
  });
  params.visit_buffers([&tensors](const std::string& name, const Eigen::MatrixXd& t) {
    tensors.emplace_back(name, t);
  });
  if (optimizer_state != nullptr) {
    size_t i = 0;
    params.visit_trainable([&](const std::string& name, const Eigen::MatrixXd&) {
      tensors.emplace_back("opt.m." + name, optimizer_state->m[i]);
      tensors.emplace_back("opt.v." + name, optimizer_state->v[i]);
      ++i;
    });
  }

  out.write(kMagic, sizeof(kMagic));
  write_u64(out, meta_str.size());
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  write_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) write_tensor(out, name, t);
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint file: " + path.string());

  CheckpointData data;
  const uint64_t meta_len = read_u64(in);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  try {
    data.meta = nlohmann::ordered_json::parse(meta_str);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }

  const uint32_t count = read_u32(in);
  data.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    std::vector<float> buf(static_cast<size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw FormatError("truncated checkpoint: " + path.string());
    Eigen::MatrixXd t(rows, cols);
    size_t n = 0;
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) t(r, c) = static_cast<double>(buf[n++]);
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  return data;
}

WeightNetParams params_from_checkpoint(const CheckpointData& data) {
  if (!data.meta.contains("net"))
    throw FormatError("checkpoint metadata is missing the net configuration");
  WeightNetParams params = init_params(net_config_from_json(data.meta.at("net")), 0);
  auto load = [&data](const std::string& name, Eigen::MatrixXd& t) {
    const Eigen::MatrixXd* stored = data.find(name);
    if (stored == nullptr) throw FormatError("checkpoint is missing tensor " + name);
    if (stored->rows() != t.rows() || stored->cols() != t.cols())
      throw FormatError("checkpoint tensor " + name + " has the wrong shape");
    t = *stored;
  };
  params.visit_trainable(load);
  params.visit_buffers(load);
  return params;
}

std::optional<AdamState> adam_from_checkpoint(const CheckpointData& data,
                                              const WeightNetParams& params) {
  if (!data.meta.value("has_optimizer", false)) return std::nullopt;
  AdamState state = AdamState::zeros_like(params);
  state.step = data.meta.value("adam_step", int64_t{0});
  size_t i = 0;
  bool complete = true;
  params.visit_trainable([&](const std::string& name, const Eigen::MatrixXd&) {
    const Eigen::MatrixXd* m = data.find("opt.m." + name);
    const Eigen::MatrixXd* v = data.find("opt.v." + name);
    if (m == nullptr || v == nullptr) {
      complete = false;
    } else {
      state.m[i] = *m;
      state.v[i] = *v;
    }
    ++i;
  });
  if (!complete) throw FormatError("checkpoint optimizer state is incomplete");
  return state;
}

}  // namespace jetfit
