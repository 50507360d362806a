#pragma once

#include <string>
#include <vector>

#include "mhccl/train.hpp"

namespace mhccl {

// Flat dotted-key configuration shared by all subcommands. Precedence:
// built-in defaults, then the config file, then command-line overrides.
// Unknown keys and constraint violations are rejected by name.
struct RunConfig {
  TrainConfig train;

  double split_train_frac = 0.8;
  double split_val_frac = 0.2;
  int probe_epochs = 500;
  double probe_lr = 0.5;
  int audit_kmeans_k = 0;  // 0: use the dataset's class count

  void apply(const std::string& key, const std::string& value);
  void apply_line(const std::string& line);  // "key=value", '#' comments allowed

  static RunConfig from_file(const std::string& path,
                             const std::vector<std::string>& overrides = {});
  static RunConfig from_overrides(const std::vector<std::string>& overrides);

  // Every key with its resolved value, sorted; echoed into run directories.
  std::string canonical_text() const;
};

}  // namespace mhccl
