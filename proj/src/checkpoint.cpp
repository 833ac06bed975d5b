#include "tsk/checkpoint.hpp"

#include "byte_io.hpp"

namespace tsk {

nlohmann::json to_json(const HeadConfig& c) {
  return nlohmann::json{
      {"mode", to_string(c.mode)},
      {"kind", to_string(c.kind)},
      {"feature_dim", c.feature_dim},
      {"num_classes", c.num_classes},
      {"window", c.window},
      {"kernel", c.kernel},
      {"pyramid_levels", c.levels()},
      {"sub_filters", c.sub_filters},
      {"gaussians", c.gaussians},
      {"super_filters", c.super_filters},
      {"hidden", c.hidden},
      {"output_offset", c.output_offset},
      {"output_scale", c.output_scale},
  };
}

HeadConfig head_config_from_json(const nlohmann::json& j) {
  try {
    HeadConfig c;
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.kind = parse_head_kind(j.at("kind").get<std::string>());
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.window = j.value("window", c.window);
    c.kernel = j.value("kernel", c.kernel);
    c.pyramid_levels = j.value("pyramid_levels", std::vector<std::size_t>{});
    c.sub_filters = j.value("sub_filters", c.sub_filters);
    c.gaussians = j.value("gaussians", c.gaussians);
    c.super_filters = j.value("super_filters", c.super_filters);
    c.hidden = j.value("hidden", c.hidden);
    c.output_offset = j.value("output_offset", c.output_offset);
    c.output_scale = j.value("output_scale", c.output_scale);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed head config: ") + e.what());
  }
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  detail::ByteWriter out;
  out.raw("TSKM");
  out.u32(kCheckpointVersion);
  nlohmann::json header{{"head", to_json(checkpoint.model.config())}, {"task", checkpoint.task}};
  const std::string text = header.dump();
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.raw(text);
  const auto params = checkpoint.model.parameters();
  out.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    out.u32(static_cast<std::uint32_t>(p.name.size()));
    out.raw(p.name);
    out.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) out.u32(static_cast<std::uint32_t>(d));
    for (double x : p.value.data()) out.f64(x);
  }
  return out.bytes();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.raw(4, "magic") != "TSKM") throw FormatError(FormatErrorKind::bad_magic, "not a TSKM checkpoint");
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::bad_version, "checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_len = in.u32("header length");
  const auto header_text = in.raw(header_len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::invalid, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint checkpoint;
  HeadConfig config;
  try {
    config = head_config_from_json(header.at("head"));
    checkpoint.task = header.value("task", std::string{});
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorKind::invalid, e.what());
  }

  const std::uint32_t count = in.u32("tensor count");
  std::vector<NamedTensor> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor p;
    p.name = std::string(in.raw(in.u32("name length"), "tensor name"));
    const std::uint32_t rank = in.u32("tensor rank");
    if (rank == 0 || rank > 3) {
      throw FormatError(FormatErrorKind::invalid, "tensor '" + p.name + "' has rank " + std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& d : shape) d = in.u32("tensor shape");
    const std::size_t n = element_count(shape);
    if (in.remaining() / sizeof(double) < n) {
      throw FormatError(FormatErrorKind::truncated, "file ends inside tensor '" + p.name + "'");
    }
    std::vector<double> values(n);
    for (double& x : values) x = in.f64("tensor values");
    p.value = Tensor(std::move(shape), std::move(values));
    params.push_back(std::move(p));
  }
  if (in.remaining() != 0) throw FormatError(FormatErrorKind::invalid, "trailing bytes after last tensor");
  try {
    checkpoint.model = Model::from_parameters(config, std::move(params));
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::invalid, e.what());
  }
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  detail::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace tsk
