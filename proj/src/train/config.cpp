#include <json.hpp>

#include <cmath>

#include "vsegan/rng.hpp"
#include "vsegan/trainer.hpp"

namespace vsegan::train {

using nlohmann::json;

NetConfig TrainConfig::net_config() const {
  NetConfig n;
  n.width_shift = width_scale;
  n.latent_noise = latent_noise;
  n.init_seed = derive_seed(seed, 0x696e6974);
  return n;
}

void TrainConfig::validate() const {
  require(std::isfinite(lr) && lr > 0, "config: lr must be positive");
  require(epochs > 0, "config: epochs must be positive");
  require(batch_size > 0, "config: batch_size must be positive");
  require(std::isfinite(lambda) && lambda >= 0, "config: lambda must be >= 0");
  require(std::isfinite(attenuation_lo_db) && std::isfinite(attenuation_hi_db) && attenuation_lo_db <= attenuation_hi_db,
          "config: attenuation_db must be [lo, hi] with lo <= hi");
  require(width_scale <= 10, "config: width_scale must be in [0, 10]");
  require(precision == "float32" || precision == "float64", "config: precision must be float32 or float64");
  require(!out_dir.empty(), "config: out_dir must be set");
}

std::string to_json(const TrainConfig& c) {
  json j = {{"lr", c.lr},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lambda", c.lambda},
            {"seed", c.seed},
            {"attenuation_db", {c.attenuation_lo_db, c.attenuation_hi_db}},
            {"width_scale", c.width_scale},
            {"precision", c.precision},
            {"latent_noise", c.latent_noise},
            {"train_manifest", c.train_manifest},
            {"val_manifest", c.val_manifest},
            {"out_dir", c.out_dir},
            {"val_utterances", c.val_utterances}};
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("config: invalid JSON: ") + e.what());
  }
  require(j.is_object(), "config: top level must be an object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "lr") c.lr = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "attenuation_db") {
        require(v.is_array() && v.size() == 2, "config: attenuation_db must be [lo, hi]");
        c.attenuation_lo_db = v[0].get<double>();
        c.attenuation_hi_db = v[1].get<double>();
      } else if (key == "width_scale") c.width_scale = v.get<unsigned>();
      else if (key == "precision") c.precision = v.get<std::string>();
      else if (key == "latent_noise") c.latent_noise = v.get<bool>();
      else if (key == "train_manifest") c.train_manifest = v.get<std::string>();
      else if (key == "val_manifest") c.val_manifest = v.get<std::string>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "val_utterances") c.val_utterances = v.get<std::size_t>();
      else throw ContractViolation("config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ContractViolation("config: bad value for '" + key + "': " + e.what());
    }
    // nlohmann converts negative numbers to huge unsigned values silently.
    if ((key == "epochs" || key == "batch_size" || key == "seed" || key == "width_scale" || key == "val_utterances") &&
        !v.is_number_unsigned())
      throw ContractViolation("config: '" + key + "' must be a non-negative integer");
  }
  c.validate();
  return c;
}

}  // namespace vsegan::train
