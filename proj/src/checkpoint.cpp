#include "voxgan/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "voxgan/binary_io.hpp"
#include "voxgan/error.hpp"

namespace voxgan {
namespace {

using binary::put_le;

void put_entry(std::string& out, const std::string& name, const Tensor& t) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  for (float v : t.to_vector()) put_le<float>(out, v);
}

void put_optimizer(std::string& out, const OptimizerState& s) {
  put_le<std::int64_t>(out, s.t);
  put_le<double>(out, s.beta1);
  put_le<double>(out, s.beta2);
  put_le<double>(out, s.epsilon);
}

void get_optimizer(binary::Reader& in, OptimizerState& s) {
  s.t = in.get<std::int64_t>();
  s.beta1 = in.get<double>();
  s.beta2 = in.get<double>();
  s.epsilon = in.get<double>();
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

std::string serialize_checkpoint(const TrainState& st) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);

  std::uint32_t n_entries = static_cast<std::uint32_t>(
      st.generator.size() + st.discriminator.size() + st.opt_g.m.size() +
      st.opt_g.v.size() + st.opt_d.m.size() + st.opt_d.v.size());
  put_le<std::uint32_t>(out, n_entries);
  for (const auto& [name, t] : st.generator.entries()) put_entry(out, name, t);
  for (const auto& [name, t] : st.discriminator.entries()) {
    put_entry(out, name, t);
  }
  for (const auto& [name, t] : st.opt_g.m) put_entry(out, "opt_g.m/" + name, t);
  for (const auto& [name, t] : st.opt_g.v) put_entry(out, "opt_g.v/" + name, t);
  for (const auto& [name, t] : st.opt_d.m) put_entry(out, "opt_d.m/" + name, t);
  for (const auto& [name, t] : st.opt_d.v) put_entry(out, "opt_d.v/" + name, t);

  const TrainSchedule& s = st.schedule;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.stage));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.target_stage));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.phase));
  put_le<std::uint8_t>(out, s.finished ? 1 : 0);
  put_le<std::int64_t>(out, s.reals_shown_in_phase);
  put_le<std::int64_t>(out, s.reals_per_phase);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.lr_table.size()));
  for (double lr : s.lr_table) put_le<double>(out, lr);
  put_le<std::uint8_t>(out, s.late_lr ? 1 : 0);
  put_le<double>(out, s.late_lr ? s.late_lr->rate : 0.0);
  put_le<double>(out, s.late_lr ? s.late_lr->fraction : 0.0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.batch_sizes.size()));
  for (int b : s.batch_sizes) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b));

  put_optimizer(out, st.opt_g);
  put_optimizer(out, st.opt_d);

  put_le<std::int64_t>(out, st.step);
  put_le<std::uint64_t>(out, st.data_seed);
  put_le<std::uint64_t>(out, st.cursor.epoch);
  put_le<std::uint64_t>(out, st.cursor.position);

  const std::string rng = st.rng.state();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rng.size()));
  out += rng;
  return out;
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  binary::Reader in(bytes);
  TrainState st;
  try {
    const auto magic = in.take(4);
    if (magic != std::string_view(kCheckpointMagic, 4)) {
      throw DataError("not a checkpoint (bad magic)");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " +
                      std::to_string(version) + " (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const auto n_entries = in.get<std::uint32_t>();
    for (std::uint32_t e = 0; e < n_entries; ++e) {
      const std::string name(in.take(in.get<std::uint32_t>()));
      const auto ndim = in.get<std::uint32_t>();
      if (ndim > 8) throw DataError("entry " + name + " has rank " + std::to_string(ndim));
      Shape shape;
      for (std::uint32_t d = 0; d < ndim; ++d) {
        shape.push_back(static_cast<std::int64_t>(in.get<std::uint64_t>()));
      }
      const auto count = numel(shape);
      if (count < 0 || static_cast<std::uint64_t>(count) * 4 > in.remaining()) {
        throw DataError("truncated data in entry " + name);
      }
      std::vector<float> values(static_cast<std::size_t>(count));
      for (auto& v : values) v = in.get<float>();
      Tensor t = Tensor::from_vector(shape, std::move(values));
      if (starts_with(name, "opt_g.m/")) {
        st.opt_g.m.emplace(name.substr(8), t);
      } else if (starts_with(name, "opt_g.v/")) {
        st.opt_g.v.emplace(name.substr(8), t);
      } else if (starts_with(name, "opt_d.m/")) {
        st.opt_d.m.emplace(name.substr(8), t);
      } else if (starts_with(name, "opt_d.v/")) {
        st.opt_d.v.emplace(name.substr(8), t);
      } else if (starts_with(name, "g.")) {
        st.generator.add(name, t);
      } else if (starts_with(name, "d.")) {
        st.discriminator.add(name, t);
      } else {
        throw DataError("unknown checkpoint entry " + name);
      }
    }

    TrainSchedule& s = st.schedule;
    s.stage = static_cast<int>(in.get<std::uint32_t>());
    s.target_stage = static_cast<int>(in.get<std::uint32_t>());
    const auto phase = in.get<std::uint32_t>();
    if (phase > 1) throw DataError("invalid phase " + std::to_string(phase));
    s.phase = static_cast<Phase>(phase);
    s.finished = in.get<std::uint8_t>() != 0;
    s.reals_shown_in_phase = in.get<std::int64_t>();
    s.reals_per_phase = in.get<std::int64_t>();
    s.lr_table.resize(in.get<std::uint32_t>());
    for (auto& lr : s.lr_table) lr = in.get<double>();
    const bool has_late = in.get<std::uint8_t>() != 0;
    LateLearningRate late;
    late.rate = in.get<double>();
    late.fraction = in.get<double>();
    s.late_lr = has_late ? std::optional<LateLearningRate>(late) : std::nullopt;
    s.batch_sizes.resize(in.get<std::uint32_t>());
    for (auto& b : s.batch_sizes) b = static_cast<int>(in.get<std::uint32_t>());

    get_optimizer(in, st.opt_g);
    get_optimizer(in, st.opt_d);

    st.step = in.get<std::int64_t>();
    st.data_seed = in.get<std::uint64_t>();
    st.cursor.epoch = in.get<std::uint64_t>();
    st.cursor.position = in.get<std::uint64_t>();
    st.rng.restore(std::string(in.take(in.get<std::uint32_t>())));
    if (in.remaining() != 0) {
      throw DataError("trailing bytes after checkpoint payload");
    }
  } catch (const DataError& e) {
    throw DataError(std::string("corrupt checkpoint (format version ") +
                    std::to_string(kCheckpointVersion) + "): " + e.what());
  }
  if (!st.schedule.finished) st.schedule.validate();
  return st;
}

void save_checkpoint(const TrainState& state,
                     const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(state);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace voxgan
