#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tacsim/error.hpp"
#include "tacsim/metrics.hpp"

namespace tacsim::metrics {
namespace {

constexpr int kMinOverlap = 16;

void require_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    fail(ErrorKind::Validation, "image dimensions differ: " + std::to_string(a.width) + "x" +
                                    std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                    "x" + std::to_string(b.height));
  }
  if (a.pixels.size() != static_cast<std::size_t>(a.width) * a.height * 3 ||
      b.pixels.size() != a.pixels.size()) {
    fail(ErrorKind::Validation, "image pixel buffer does not match its size");
  }
}

std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] +
           0.114 * img.pixels[3 * i + 2];
  }
  return y;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto* src = &img.pixels[(static_cast<std::size_t>(y0 + y) * img.width + x0) * 3];
    std::copy(src, src + 3 * w, &out.pixels[static_cast<std::size_t>(y) * w * 3]);
  }
  return out;
}

// Separable Gaussian filter over the valid region.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * src[static_cast<std::size_t>(y) * w + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

Aligned align_crop(const Image& a, const Image& b, int max_shift) {
  require_same_size(a, b);
  if (max_shift < 0) fail(ErrorKind::Validation, "max_shift must be >= 0");
  const int w = static_cast<int>(a.width);
  const int h = static_cast<int>(a.height);
  if (w - max_shift < kMinOverlap || h - max_shift < kMinOverlap) {
    fail(ErrorKind::Validation, "overlap smaller than 16x16 for the requested max_shift");
  }
  const auto la = luma(a);
  const auto lb = luma(b);

  double best = -std::numeric_limits<double>::infinity();
  Offset best_off;
  int best_l1 = 0;
  for (int dy = -max_shift; dy <= max_shift; ++dy) {
    for (int dx = -max_shift; dx <= max_shift; ++dx) {
      const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
      const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
      const double n = static_cast<double>(x1 - x0) * (y1 - y0);
      double sa = 0, sb = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          sa += la[y * w + x];
          sb += lb[(y + dy) * w + x + dx];
        }
      }
      const double ma = sa / n, mb = sb / n;
      double cab = 0, caa = 0, cbb = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const double u = la[y * w + x] - ma;
          const double v = lb[(y + dy) * w + x + dx] - mb;
          cab += u * v;
          caa += u * u;
          cbb += v * v;
        }
      }
      const double denom = std::sqrt(caa * cbb);
      const double ncc = denom > 0.0 ? cab / denom : 0.0;
      const int l1 = std::abs(dx) + std::abs(dy);
      // Iteration order already yields the smallest (dy, dx) among equals.
      if (ncc > best || (ncc == best && l1 < best_l1)) {
        best = ncc;
        best_off = {dx, dy};
        best_l1 = l1;
      }
    }
  }
  const int dx = best_off.x, dy = best_off.y;
  const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
  const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
  return {crop(a, x0, y0, x1 - x0, y1 - y0), crop(b, x0 + dx, y0 + dy, x1 - x0, y1 - y0),
          best_off};
}

double mse(const Image& a, const Image& b) {
  require_same_size(a, b);
  if (a.pixels.empty()) fail(ErrorKind::Validation, "images are empty");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  require_same_size(a, b);
  const int w = static_cast<int>(a.width);
  const int h = static_cast<int>(a.height);
  if (w < p.window || h < p.window) {
    fail(ErrorKind::Validation, "image smaller than the SSIM window");
  }
  std::vector<double> k(p.window);
  double ks = 0.0;
  for (int i = 0; i < p.window; ++i) {
    const double x = i - 0.5 * (p.window - 1);
    k[i] = std::exp(-x * x / (2.0 * p.sigma * p.sigma));
    ks += k[i];
  }
  for (double& v : k) v /= ks;
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.pixels[3 * i + c];
      y[i] = b.pixels[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, k);
    const auto my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k);
    const auto syy = filter_valid(yy, w, h, k);
    const auto sxy = filter_valid(xy, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

MetricsReport evaluate(const Image& a, const Image& b, int max_shift) {
  const Aligned al = align_crop(a, b, max_shift);
  MetricsReport r;
  r.offset = al.offset;
  r.mse = mse(al.a, al.b);
  r.psnr = psnr_from_mse(r.mse);
  r.ssim = ssim(al.a, al.b);
  return r;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string to_csv(const std::vector<MetricsReport>& rows, bool summary) {
  std::ostringstream os;
  os << "case,offset_x,offset_y,mse,psnr_db,ssim\n";
  for (const auto& r : rows) {
    os << r.name << ',' << r.offset.x << ',' << r.offset.y << ',' << format_double(r.mse) << ','
       << format_double(r.psnr) << ',' << format_double(r.ssim) << '\n';
  }
  if (summary && !rows.empty()) {
    auto stat = [&](auto field) {
      double mean = 0.0;
      for (const auto& r : rows) mean += field(r);
      mean /= rows.size();
      double var = 0.0;
      if (std::isfinite(mean)) {
        for (const auto& r : rows) var += (field(r) - mean) * (field(r) - mean);
        var /= rows.size();
      }
      return format_double(mean) + " ± " + format_double(std::sqrt(var));
    };
    os << "mean ± std," << stat([](const MetricsReport& r) { return double(r.offset.x); }) << ','
       << stat([](const MetricsReport& r) { return double(r.offset.y); }) << ','
       << stat([](const MetricsReport& r) { return r.mse; }) << ','
       << stat([](const MetricsReport& r) { return r.psnr; }) << ','
       << stat([](const MetricsReport& r) { return r.ssim; }) << '\n';
  }
  return os.str();
}

}  // namespace tacsim::metrics
