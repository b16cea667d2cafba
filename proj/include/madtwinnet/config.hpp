#pragma once

#include "madtwinnet/data.hpp"
#include "madtwinnet/masker.hpp"
#include "madtwinnet/signal.hpp"
#include "madtwinnet/training.hpp"
#include "madtwinnet/twinnet.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

namespace madt {

inline constexpr int kConfigSchemaVersion = 1;

/// Every tunable of a run. Defaults are the desk-scale preset; see
/// paper_preset() for the full-size model.
struct RunConfig {
  StftConfig stft{511, 512, 128, 44100};
  SequenceConfig sequence{24, 4};
  std::size_t trimmed_bins = 93;
  TrainConfig train;
  std::size_t griffin_lim_iterations = 10;
  EncoderAlignment encoder_alignment = EncoderAlignment::realigned;
  bool twin_enabled = true;
  TwinLossBackprop twin_loss_backprop = TwinLossBackprop::stop;
  bool twin_shares_projection = false;

  static RunConfig desk_preset() { return RunConfig{}; }
  static RunConfig paper_preset();

  MaskerConfig masker_config() const;
  LossOptions loss_options() const;

  /// Throws ConfigError when any invariant is broken.
  void validate() const;

  /// Sets one key. Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);

  /// Canonical `key = value` text; parse_config(to_text()) reproduces *this.
  std::string to_text() const;
};

/// Applies `key = value` lines (blank lines and `#` comments ignored) on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});

RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace madt
