#pragma once

#include <random>

#include "ialpha/config.hpp"

namespace ialpha {

/// Random Moebius map built from up to `factors` similarity/inversion
/// factors; coefficients of moderate size.
MoebiusMap random_moebius(std::mt19937_64& rng, int n, int factors = 3);

/// Random orthogonal matrix (Haar-ish via QR of a Gaussian matrix).
Mat random_orthogonal(std::mt19937_64& rng, int n);

/// Residuals of the exact identities the construction relies on, maximized
/// over random samples: the Euclidean distance identity, its chordal
/// counterpart, the derivative chain and inverse rules, the spectral
/// composition of the Riesz potential with the fractional Laplacian, and the
/// kernel covariance.
struct IdentitySuite {
  double distance_identity = 0.0;
  double chordal_identity = 0.0;
  double chain_rule = 0.0;
  double inverse_rule = 0.0;
  double spectral_inverse = 0.0;
  double covariance = 0.0;
  double stereographic_roundtrip = 0.0;
  bool pass = false;
};

IdentitySuite run_identity_suite(std::uint64_t seed, int n, double alpha,
                                 int mobius_samples = 1000,
                                 int covariance_samples = 100,
                                 int spectral_fields = 20);

/// Entry point of the command-line tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace ialpha
