#pragma once

#include "madtwinnet/denoiser.hpp"
#include "madtwinnet/masker.hpp"
#include "madtwinnet/twinnet.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace madt {

/// Every trainable tensor of the model. Biases are stored as 1 x n matrices
/// so that all tensors share one type.
struct ParameterSet {
  MaskerParams masker;
  TwinParams twin;
  DenoiserParams denoiser;

  static ParameterSet zeros(const MaskerConfig& dims);

  /// Calls f(name, tensor) for every tensor in a fixed order with stable
  /// dotted names, e.g. "masker.enc_fwd.w_hidden".
  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    auto gru = [&f](const std::string& prefix, auto& g) {
      f(prefix + ".w_input", g.w_input);
      f(prefix + ".w_hidden", g.w_hidden);
      f(prefix + ".b_input", g.b_input);
      f(prefix + ".b_hidden", g.b_hidden);
    };
    gru("masker.enc_fwd", self.masker.enc_forward);
    gru("masker.enc_bwd", self.masker.enc_backward);
    gru("masker.dec", self.masker.decoder);
    f(std::string("masker.w_mask"), self.masker.w_mask);
    f(std::string("masker.b_mask"), self.masker.b_mask);
    gru("twin.dec", self.twin.decoder);
    f(std::string("twin.w_mask"), self.twin.w_mask);
    f(std::string("twin.b_mask"), self.twin.b_mask);
    f(std::string("twin.w_bridge"), self.twin.w_bridge);
    f(std::string("twin.b_bridge"), self.twin.b_bridge);
    f(std::string("denoiser.w_enc"), self.denoiser.w_enc);
    f(std::string("denoiser.b_enc"), self.denoiser.b_enc);
    f(std::string("denoiser.w_dec"), self.denoiser.w_dec);
    f(std::string("denoiser.b_dec"), self.denoiser.b_dec);
  }
};

/// Recurrent (hidden-to-hidden) blocks are orthogonal per gate, every other
/// weight matrix is Glorot-normal (std = sqrt(2 / (fan_in + fan_out))),
/// biases are zero. Deterministic in `seed`.
ParameterSet init_parameters(std::uint64_t seed, const MaskerConfig& dims);

}  // namespace madt
