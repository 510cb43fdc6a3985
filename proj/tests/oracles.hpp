#pragma once

// Straight-loop reference implementations. None of these call into the
// library's numeric code, so agreement with them is an independent check.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "ecanet/label_map.hpp"
#include "ecanet/tensor.hpp"

namespace oracle {

using ecanet::LabelMap;
using ecanet::Tensor;

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Attention over one (C,H,W) block with keys/values averaged over a
// (ph,pw) grid: bin i spans rows floor(i*H/ph) .. ceil((i+1)*H/ph).
inline Tensor attention(const Tensor& f, const Tensor& wq, const Tensor& wk, const Tensor& wv, std::size_t ph,
                        std::size_t pw) {
  const std::size_t C = f.extent(0), H = f.extent(1), W = f.extent(2);
  const std::size_t R = wq.extent(0);
  auto project = [&](const Tensor& w, std::size_t out) {
    Tensor p({out, H, W});
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t x = 0; x < W; ++x) {
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) s += w.at(o, c) * f.at(c, h, x);
          p.at(o, h, x) = s;
        }
    return p;
  };
  auto pool = [&](const Tensor& p) {
    Tensor out({p.extent(0), ph, pw});
    for (std::size_t c = 0; c < p.extent(0); ++c)
      for (std::size_t i = 0; i < ph; ++i)
        for (std::size_t j = 0; j < pw; ++j) {
          const std::size_t h0 = i * H / ph, h1 = ((i + 1) * H + ph - 1) / ph;
          const std::size_t w0 = j * W / pw, w1 = ((j + 1) * W + pw - 1) / pw;
          double s = 0.0;
          for (std::size_t h = h0; h < h1; ++h)
            for (std::size_t x = w0; x < w1; ++x) s += p.at(c, h, x);
          out.at(c, i, j) = s / static_cast<double>((h1 - h0) * (w1 - w0));
        }
    return out;
  };
  const Tensor q = project(wq, R);
  const Tensor k = pool(project(wk, R));
  const Tensor v = pool(project(wv, wv.extent(0)));
  const std::size_t P = ph * pw;

  Tensor out({wv.extent(0), H, W});
  std::vector<double> a(P);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t x = 0; x < W; ++x) {
      double peak = -INFINITY;
      for (std::size_t r = 0; r < P; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < R; ++c) s += q.at(c, h, x) * k.at(c, r / pw, r % pw);
        a[r] = s;
        peak = std::max(peak, s);
      }
      double z = 0.0;
      for (auto& e : a) z += (e = std::exp(e - peak));
      for (std::size_t c = 0; c < out.extent(0); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < P; ++r) s += v.at(c, r / pw, r % pw) * a[r] / z;
        out.at(c, h, x) = s;
      }
    }
  return out;
}

struct Head {
  std::vector<std::string> classes;
  Tensor scores;  // (C,H,W)
};

enum class Rule { Variance, Probability, Ratio };

// Per-pixel fusion written from the definitions: heads ranked by softmax
// probabilities (not logit gaps), classes matched by name.
inline std::pair<std::vector<std::uint32_t>, std::vector<std::uint8_t>> fuse(const std::vector<Head>& heads,
                                                                              std::size_t default_head, Rule rule) {
  std::set<std::string> shared(heads[0].classes.begin(), heads[0].classes.end());
  for (const auto& hd : heads) {
    std::set<std::string> next;
    for (const auto& c : hd.classes)
      if (shared.count(c)) next.insert(c);
    shared = next;
  }
  const std::size_t H = heads[0].scores.extent(1), W = heads[0].scores.extent(2);
  std::vector<std::uint32_t> labels(H * W);
  std::vector<std::uint8_t> refined(H * W, 0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      std::vector<double> score;
      for (const auto& hd : heads) {
        const std::size_t C = hd.classes.size();
        std::vector<double> z(C), p(C);
        for (std::size_t c = 0; c < C; ++c) z[c] = hd.scores.at(c, h, w);
        double mean = 0.0;
        for (double v : z) mean += v / static_cast<double>(C);
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean) / static_cast<double>(C);
        double zsum = 0.0;
        for (std::size_t c = 0; c < C; ++c) zsum += std::exp(z[c]);
        for (std::size_t c = 0; c < C; ++c) p[c] = std::exp(z[c]) / zsum;
        std::sort(p.rbegin(), p.rend());
        score.push_back(rule == Rule::Variance ? -var : rule == Rule::Probability ? p[0] : p[0] / p[1]);
      }
      std::size_t j = 0;
      for (std::size_t k = 1; k < heads.size(); ++k)
        if (score[k] > score[j]) j = k;

      auto best_of = [&](const Head& hd, const std::set<std::string>* only) {
        std::string best;
        double top = -INFINITY;
        for (std::size_t c = 0; c < hd.classes.size(); ++c) {
          if (only && !only->count(hd.classes[c])) continue;
          if (hd.scores.at(c, h, w) > top) top = hd.scores.at(c, h, w), best = hd.classes[c];
        }
        return best;
      };
      const auto& home = heads[default_head].classes;
      auto home_index = [&](const std::string& name) {
        return static_cast<std::uint32_t>(std::find(home.begin(), home.end(), name) - home.begin());
      };
      const std::uint32_t fallback = home_index(best_of(heads[default_head], nullptr));
      std::uint32_t label = fallback;
      if (shared.count(best_of(heads[j], nullptr))) {
        label = home_index(best_of(heads[j], &shared));
        refined[h * W + w] = label != fallback;
      }
      labels[h * W + w] = label;
    }
  return {labels, refined};
}

struct Correlation {
  double horizontal = 0.0;
  double vertical = 0.0;
};

// Textbook Pearson on the raw frequency vectors of every position pair.
inline Correlation pairwise_pearson(const std::vector<LabelMap>& maps, std::size_t K) {
  const std::size_t H = maps[0].height, W = maps[0].width;
  std::vector<std::vector<double>> q(H * W, std::vector<double>(K, 0.0));
  for (const auto& m : maps)
    for (std::size_t i = 0; i < H * W; ++i) q[i][m.indices[i]] += 1.0 / static_cast<double>(maps.size());
  auto pearson = [&](const std::vector<double>& a, const std::vector<double>& b, bool& ok) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t c = 0; c < K; ++c) ma += a[c], mb += b[c];
    ma /= static_cast<double>(K);
    mb /= static_cast<double>(K);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      sab += (a[c] - ma) * (b[c] - mb);
      saa += (a[c] - ma) * (a[c] - ma);
      sbb += (b[c] - mb) * (b[c] - mb);
    }
    ok = saa > 1e-15 && sbb > 1e-15;
    return ok ? sab / (std::sqrt(saa) * std::sqrt(sbb)) : 0.0;
  };
  Correlation out;
  double n = 0.0;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t a = 0; a < W; ++a)
      for (std::size_t b = 0; b < W; ++b) {
        if (a == b) continue;
        bool ok = false;
        const double r = pearson(q[h * W + a], q[h * W + b], ok);
        if (ok) out.horizontal += r, n += 1.0;
      }
  out.horizontal /= n;
  n = 0.0;
  for (std::size_t w = 0; w < W; ++w)
    for (std::size_t a = 0; a < H; ++a)
      for (std::size_t b = 0; b < H; ++b) {
        if (a == b) continue;
        bool ok = false;
        const double r = pearson(q[a * W + w], q[b * W + w], ok);
        if (ok) out.vertical += r, n += 1.0;
      }
  out.vertical /= n;
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("ecanet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
