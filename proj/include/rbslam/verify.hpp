#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rbslam {

struct VerifyCheck {
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Multiplies the spectral density inside the kernel-reconstruction check only.
  /// Anything far from 1 must make that check fail.
  double spectral_scale = 1.0;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed() const;
  void print(std::ostream& os) const;
};

// Individual checks, shared with the acceptance binary.
VerifyCheck check_rb_batch_equivalence(std::uint64_t seed, int steps = 200);
VerifyCheck check_chain_rule(std::uint64_t seed, int cases = 100);
VerifyCheck check_kernel_reconstruction(double spectral_scale = 1.0);
VerifyCheck check_spectral_density();
VerifyCheck check_basis_gradient(std::uint64_t seed);
VerifyCheck check_magnetic_jacobian(std::uint64_t seed);
VerifyCheck check_visual_jacobian(std::uint64_t seed);
VerifyCheck check_ancestor_weights(std::uint64_t seed);
/// Empirical frequencies of `draws` sampled ancestor indices against the dense oracle.
VerifyCheck check_ancestor_sampling(std::uint64_t seed, int draws = 100000);

VerifyReport verify_suite(const VerifyOptions& opt = {});

}  // namespace rbslam
