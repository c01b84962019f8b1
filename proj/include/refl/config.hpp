#pragma once

#include <string>

#include "refl/model.hpp"

namespace refl {

// Full run configuration: model hyper-parameters plus the I/O and mode
// choices the CLI exposes. Text form is line-based `key = value` with keys
// matching the flag names; unknown keys are errors.
struct RunConfig {
  ModelConfig model;
  std::string data_dir;
  std::string out_dir;
  std::string checkpoint_path;
  std::string mode = "basic";    // basic | semi
  std::string metric = "csls";   // csls | cosine
  double train_ratio = 0.3;
  // diagnostics toggles
  std::size_t ss_m = 100;
  std::size_t apart_epochs = 0;

  // Throws std::invalid_argument naming the offending key.
  void validate() const;

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);

  // Applies one key/value; shared by the config file and checkpoint codecs.
  void set_key(const std::string& key, const std::string& value);
};

}  // namespace refl
