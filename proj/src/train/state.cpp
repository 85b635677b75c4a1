#include <json.hpp>

#include <cstdio>
#include <cstring>

#include "vsegan/trainer.hpp"

namespace vsegan::train {

using nlohmann::json;

namespace {

constexpr std::size_t kHistoryCols = 8;

template <typename T>
void append_adam(ckpt::Container& c, const std::string& prefix, const ParamStore<T>& store, const AdamState<T>& st) {
  c.records.push_back(ckpt::u64_record(prefix + ".step", {st.step_count}));
  for (std::size_t i = 0; i < store.params().size(); ++i) {
    c.records.push_back(ckpt::tensor_record(prefix + ".m." + store.params()[i].name, st.first_moment[i]));
    c.records.push_back(ckpt::tensor_record(prefix + ".v." + store.params()[i].name, st.second_moment[i]));
  }
}

template <typename T>
void restore_adam(const ckpt::Container& c, const std::string& prefix, const ParamStore<T>& store, AdamState<T>& st) {
  const auto step = ckpt::read_u64(c, prefix + ".step");
  if (step.size() != 1) throw IntegrityError("checkpoint record " + prefix + ".step must hold one value");
  st.step_count = step[0];
  for (std::size_t i = 0; i < store.params().size(); ++i) {
    ckpt::read_tensor(c, prefix + ".m." + store.params()[i].name, st.first_moment[i]);
    ckpt::read_tensor(c, prefix + ".v." + store.params()[i].name, st.second_moment[i]);
  }
}

}  // namespace

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = "epoch,step,d_loss,g_adv,g_l1,g_total,val_stoi,val_sisdr\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.9g,%.9g,%.9g,%.9g,%.6f,%.4f\n", r.epoch, (unsigned long long)r.step,
                  r.d_loss, r.g_adv, r.g_l1, r.g_total, r.val_stoi, r.val_sisdr);
    out += buf;
  }
  return out;
}

template <typename T>
ckpt::Container make_checkpoint(const RunState& state, const GanModels<T>& models) {
  ckpt::Container c;
  const json cfg = {{"train", json::parse(to_json(state.config))},
                    {"norm", {{"min", state.stats.min}, {"max", state.stats.max}}}};
  c.config_json = cfg.dump(2);
  c.records.push_back(ckpt::u64_record("state.counters", {state.epoch, state.step}));

  ckpt::Record hist;
  hist.name = "state.history";
  hist.dtype = ckpt::DType::kF64;
  hist.dims = {std::uint32_t(state.history.size()), std::uint32_t(kHistoryCols)};
  for (const auto& h : state.history) {
    const double row[kHistoryCols] = {double(h.epoch), double(h.step), h.d_loss, h.g_adv,
                                      h.g_l1,          h.g_total,      h.val_stoi, h.val_sisdr};
    const auto* p = reinterpret_cast<const unsigned char*>(row);
    hist.bytes.insert(hist.bytes.end(), p, p + sizeof row);
  }
  c.records.push_back(std::move(hist));

  ckpt::append_store(c, models.g.store());
  ckpt::append_store(c, models.d.store());
  append_adam(c, "adam.g", models.g.store(), models.opt_g.state());
  append_adam(c, "adam.d", models.d.store(), models.opt_d.state());
  c.rng_state = state.rng.serialize();
  return c;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const RunState& state, const GanModels<T>& models) {
  ckpt::save(path, make_checkpoint(state, models));
}

RunState read_run_state(const ckpt::Container& c) {
  RunState st;
  try {
    const json j = json::parse(c.config_json);
    st.config = config_from_json(j.at("train").dump());
    st.stats.min = j.at("norm").at("min").get<double>();
    st.stats.max = j.at("norm").at("max").get<double>();
    st.stats.valid = true;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint config is malformed: ") + e.what());
  } catch (const ContractViolation& e) {
    throw IntegrityError(std::string("checkpoint config is invalid: ") + e.what());
  }
  const auto counters = ckpt::read_u64(c, "state.counters");
  if (counters.size() != 2) throw IntegrityError("checkpoint counters must hold epoch and step");
  st.epoch = counters[0];
  st.step = counters[1];

  const ckpt::Record* hist = c.find("state.history");
  if (!hist || hist->dtype != ckpt::DType::kF64 || hist->dims.size() != 2 || hist->dims[1] != kHistoryCols)
    throw IntegrityError("checkpoint is missing its metrics history");
  for (std::size_t r = 0; r < hist->dims[0]; ++r) {
    double row[kHistoryCols];
    std::memcpy(row, hist->bytes.data() + r * sizeof row, sizeof row);
    st.history.push_back({std::size_t(row[0]), std::uint64_t(row[1]), row[2], row[3], row[4], row[5], row[6], row[7]});
  }
  st.rng.deserialize(c.rng_state);
  return st;
}

template <typename T>
RunState load_checkpoint(const std::filesystem::path& path, GanModels<T>& models) {
  const auto c = ckpt::load(path);
  RunState st = read_run_state(c);
  ckpt::restore_store(c, models.g.store());
  ckpt::restore_store(c, models.d.store());
  restore_adam(c, "adam.g", models.g.store(), models.opt_g.state());
  restore_adam(c, "adam.d", models.d.store(), models.opt_d.state());
  return st;
}

template ckpt::Container make_checkpoint(const RunState&, const GanModels<float>&);
template ckpt::Container make_checkpoint(const RunState&, const GanModels<double>&);
template void save_checkpoint(const std::filesystem::path&, const RunState&, const GanModels<float>&);
template void save_checkpoint(const std::filesystem::path&, const RunState&, const GanModels<double>&);
template RunState load_checkpoint(const std::filesystem::path&, GanModels<float>&);
template RunState load_checkpoint(const std::filesystem::path&, GanModels<double>&);

}  // namespace vsegan::train
