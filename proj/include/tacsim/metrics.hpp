#pragma once

// Image comparison: global alignment by normalized cross-correlation, then
// MSE, PSNR and single-scale SSIM over 8-bit RGB.

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "tacsim/render.hpp"

namespace tacsim::metrics {

using render::Image;

struct Offset {
  int x = 0;
  int y = 0;
  bool operator==(const Offset&) const = default;
};

struct Aligned {
  Image a;
  Image b;
  Offset offset;  // b(x + dx, y + dy) corresponds to a(x, y)
};

// Searches integer shifts in [-max_shift, max_shift]^2 for the highest NCC
// of the luma planes over the overlap, then crops both to that overlap.
// Ties go to the smallest |dx| + |dy|, then to the lexicographically
// smallest (dy, dx).
Aligned align_crop(const Image& a, const Image& b, int max_shift = 20);

double mse(const Image& a, const Image& b);
// Positive infinity when the images are identical.
double psnr_from_mse(double mse);
double psnr(const Image& a, const Image& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};
// Mean of valid-window local SSIM per channel, averaged over channels.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

struct MetricsReport {
  std::string name;
  Offset offset;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

MetricsReport evaluate(const Image& a, const Image& b, int max_shift = 20);

// CSV with header case,offset_x,offset_y,mse,psnr_db,ssim; infinite PSNR is
// written as "inf". A summary row of mean ± std is appended when requested.
std::string format_double(double v);
std::string to_csv(const std::vector<MetricsReport>& rows, bool summary);

}  // namespace tacsim::metrics
