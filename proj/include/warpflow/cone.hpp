#pragma once

#include <cmath>

#include "warpflow/numerics.hpp"

namespace warpflow {

// Dimensions and slope constants of the Ricci-flat cone over S^p x S^q.
struct ConeParams {
  int p = 0;
  int q = 0;
  int n = 0;
  double A = 0.0;  // S^p slope
  double B = 0.0;  // S^q slope
  bool spectral_available = false;  // mode formulas need n >= 10

  static ConeParams make(int p, int q) {
    require(p >= 2 && q >= 2, "ConeParams: need p, q >= 2");
    ConeParams c;
    c.p = p;
    c.q = q;
    c.n = p + q;
    c.A = std::sqrt(double(p - 1) / double(p + q - 1));
    c.B = std::sqrt(double(q - 1) / double(p + q - 1));
    c.spectral_available = (c.n >= 10);
    return c;
  }

  double A2() const { return A * A; }
  double B2() const { return B * B; }
};

inline ConeParams cone_constants(int p, int q) { return ConeParams::make(p, q); }

}  // namespace warpflow
