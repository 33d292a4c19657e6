#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "rotip/errors.hpp"
#include "rotip/rng.hpp"
#include "rotip/sensor.hpp"
#include "rotip/transform.hpp"

namespace rotip {

struct ContactMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  static ContactMask zeros(int w, int h) {
    if (w <= 0 || h <= 0)
      throw PreconditionViolation("ContactMask: non-positive dimensions");
    ContactMask m;
    m.width = w;
    m.height = h;
    m.bits.assign(static_cast<std::size_t>(w) * h, 0);
    return m;
  }

  bool at(int u, int v) const {
    return bits[static_cast<std::size_t>(v) * width + u] != 0;
  }
  void set(int u, int v, bool on) {
    bits[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0;
  }
  int count() const {
    int n = 0;
    for (std::uint8_t b : bits) n += b != 0;
    return n;
  }
  bool empty() const { return count() == 0; }
};

// World-frame description of one contact situation: where the sensor sits,
// the plane it touches, and how deep a surface point must penetrate the
// plane before its pixel counts as contact.
struct ContactScene {
  RigidTransform sensor_pose;
  Plane3 plane{UnitVector3(Vec3(0, 0, 1)), 0.0};
  double indentation = 0.2;

  void validate() const {
    if (indentation <= 0.0)
      throw PreconditionViolation("ContactScene: indentation must be > 0");
  }
};

// Per-pixel surface points cached once per (intrinsics, geometry) pair.
// Rendering a mask then costs one transform and one dot product per pixel,
// and a coarser stride gives cheap approximate contact-pixel counts for the
// control loop between full renders.
class SurfaceTable {
 public:
  SurfaceTable(const CameraIntrinsics& k, const SensorGeometry& g,
               int stride = 1)
      : k_(k), stride_(stride) {
    if (stride < 1) throw PreconditionViolation("SurfaceTable: stride >= 1");
    k.validate();
    g.validate();
    cols_ = (k.width + stride - 1) / stride;
    rows_ = (k.height + stride - 1) / stride;
    points_.resize(static_cast<std::size_t>(cols_) * rows_);
    for (int rv = 0; rv < rows_; ++rv) {
      for (int ru = 0; ru < cols_; ++ru) {
        double u = ru * stride;
        double v = rv * stride;
        auto hit = try_ray_surface_intersect(pixel_to_ray(u, v, k), g);
        points_[static_cast<std::size_t>(rv) * cols_ + ru] =
            hit ? hit->position : Vec3(0, 0, -1);  // z<0 marks a miss
      }
    }
  }

  const CameraIntrinsics& intrinsics() const { return k_; }
  int stride() const { return stride_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  const Vec3& point(int ru, int rv) const {
    return points_[static_cast<std::size_t>(rv) * cols_ + ru];
  }

 private:
  CameraIntrinsics k_;
  int stride_;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<Vec3> points_;
};

// Pixels whose surface point penetrates the scene plane by at least the
// indentation threshold. Requires a stride-1 table.
inline ContactMask render_contact_mask(const ContactScene& scene,
                                       const SurfaceTable& table) {
  scene.validate();
  if (table.stride() != 1)
    throw PreconditionViolation("render_contact_mask: table stride must be 1");
  const CameraIntrinsics& k = table.intrinsics();
  ContactMask m = ContactMask::zeros(k.width, k.height);
  const Mat3& r = scene.sensor_pose.rotation();
  const Vec3& t = scene.sensor_pose.translation();
  const Vec3& n = scene.plane.n.vec();
  // fold the pose into the plane test: n.(R p + t) - d <= -indentation
  Vec3 nr = r.transpose() * n;
  double rhs = scene.plane.d - n.dot(t) - scene.indentation;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3& p = table.point(u, v);
      if (p.z() > 0.0 && nr.dot(p) <= rhs) m.set(u, v, true);
    }
  }
  return m;
}

inline ContactMask render_contact_mask(const ContactScene& scene,
                                       const CameraIntrinsics& k,
                                       const SensorGeometry& g) {
  return render_contact_mask(scene, SurfaceTable(k, g, 1));
}

// Approximate contact-pixel count on a strided table, scaled back to full
// resolution. Used by the control loop's touch classifier between renders.
inline int count_contact_pixels(const ContactScene& scene,
                                const SurfaceTable& table) {
  scene.validate();
  const Mat3& r = scene.sensor_pose.rotation();
  const Vec3& t = scene.sensor_pose.translation();
  const Vec3& n = scene.plane.n.vec();
  Vec3 nr = r.transpose() * n;
  double rhs = scene.plane.d - n.dot(t) - scene.indentation;
  int hits = 0;
  for (int rv = 0; rv < table.rows(); ++rv)
    for (int ru = 0; ru < table.cols(); ++ru) {
      const Vec3& p = table.point(ru, rv);
      if (p.z() > 0.0 && nr.dot(p) <= rhs) ++hits;
    }
  return hits * table.stride() * table.stride();
}

// Exact iso-penetration contour: the circle where the surface penetrates the
// plane by exactly the indentation depth, sampled and projected to float
// pixel coordinates. Free of pixel discretization, unlike mask_boundary.
inline std::vector<Pixel> exact_contact_contour(const ContactScene& scene,
                                                const CameraIntrinsics& k,
                                                const SensorGeometry& g,
                                                int samples = 256) {
  scene.validate();
  g.validate();
  if (samples < 3)
    throw PreconditionViolation("exact_contact_contour: samples >= 3");
  // plane in the sensor frame
  Vec3 n_s = scene.sensor_pose.rotation().transpose() * scene.plane.n.vec();
  double d_s = scene.plane.d -
               scene.plane.n.vec().dot(scene.sensor_pose.translation());
  double iso = d_s - scene.indentation;  // n_s . p = iso
  Vec3 o = g.centre();
  double h = iso - n_s.dot(o);
  if (std::abs(h) >= g.r) return {};
  double rho = std::sqrt(g.r * g.r - h * h);
  Vec3 c = o + h * n_s;
  Vec3 ref = std::abs(n_s.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 e1 = (ref - n_s * n_s.dot(ref)).normalized();
  Vec3 e2 = n_s.cross(e1);
  std::vector<Pixel> out;
  out.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    double a = 2.0 * M_PI * i / samples;
    Vec3 p = c + rho * (std::cos(a) * e1 + std::sin(a) * e2);
    if (p.z() <= g.oz) continue;  // only the hemisphere branch is exact here
    Pixel px = project_point(p, k);
    if (px.u < 0.0 || px.v < 0.0 || px.u >= k.width || px.v >= k.height)
      continue;
    out.push_back(px);
  }
  return out;
}

namespace detail {

inline bool mask_at(const ContactMask& m, int u, int v) {
  return u >= 0 && v >= 0 && u < m.width && v < m.height && m.at(u, v);
}

inline bool is_boundary_pixel(const ContactMask& m, int u, int v) {
  return mask_at(m, u, v) &&
         (!mask_at(m, u - 1, v) || !mask_at(m, u + 1, v) ||
          !mask_at(m, u, v - 1) || !mask_at(m, u, v + 1));
}

}  // namespace detail

// Ordered boundary of the mask: Moore tracing around the largest 4-connected
// component (clockwise in image coordinates), then any remaining boundary
// pixels of smaller components or holes appended in row-major order. A pixel
// is boundary iff it is set and 4-adjacent to an unset or out-of-image cell.
inline std::vector<Eigen::Vector2i> mask_boundary(const ContactMask& m) {
  if (m.width <= 0 || m.height <= 0)
    throw PreconditionViolation("mask_boundary: empty mask dimensions");

  // label 4-connected components, remember the largest
  std::vector<int> label(static_cast<std::size_t>(m.width) * m.height, -1);
  auto idx = [&](int u, int v) {
    return static_cast<std::size_t>(v) * m.width + u;
  };
  int best_label = -1;
  int best_size = 0;
  Eigen::Vector2i best_start(0, 0);
  int next_label = 0;
  for (int v = 0; v < m.height; ++v) {
    for (int u = 0; u < m.width; ++u) {
      if (!m.at(u, v) || label[idx(u, v)] >= 0) continue;
      int size = 0;
      std::deque<Eigen::Vector2i> queue{{u, v}};
      label[idx(u, v)] = next_label;
      while (!queue.empty()) {
        Eigen::Vector2i p = queue.front();
        queue.pop_front();
        ++size;
        const int du[4] = {1, -1, 0, 0};
        const int dv[4] = {0, 0, 1, -1};
        for (int i = 0; i < 4; ++i) {
          int nu = p.x() + du[i];
          int nv = p.y() + dv[i];
          if (detail::mask_at(m, nu, nv) && label[idx(nu, nv)] < 0) {
            label[idx(nu, nv)] = next_label;
            queue.push_back({nu, nv});
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best_label = next_label;
        best_start = {u, v};  // first pixel in row-major scan: topmost-leftmost
      }
      ++next_label;
    }
  }
  if (best_label < 0) throw EmptyMask("mask_boundary: mask has no set pixels");

  // Moore neighbourhood, clockwise with v pointing down
  const int du8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  const int dv8[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  auto dir_index = [&](int du, int dv) {
    for (int i = 0; i < 8; ++i)
      if (du8[i] == du && dv8[i] == dv) return i;
    throw Error("mask_boundary: internal direction lookup failure");
  };

  std::vector<Eigen::Vector2i> contour;
  std::vector<std::uint8_t> visited(label.size(), 0);
  Eigen::Vector2i cur = best_start;
  int backtrack = dir_index(-1, 0);  // came from the left of the start pixel
  const int start_backtrack = backtrack;
  const long max_steps = 4L * best_size + 8;
  for (long step = 0; step < max_steps; ++step) {
    contour.push_back(cur);
    visited[idx(cur.x(), cur.y())] = 1;
    if (best_size == 1) break;
    int found = -1;
    for (int i = 1; i <= 8; ++i) {
      int di = (backtrack + i) % 8;
      int nu = cur.x() + du8[di];
      int nv = cur.y() + dv8[di];
      if (detail::mask_at(m, nu, nv) && label[idx(nu, nv)] == best_label) {
        found = di;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    int prev = (found + 7) % 8;
    Eigen::Vector2i prev_cell(cur.x() + du8[prev], cur.y() + dv8[prev]);
    Eigen::Vector2i next(cur.x() + du8[found], cur.y() + dv8[found]);
    backtrack = dir_index(prev_cell.x() - next.x(), prev_cell.y() - next.y());
    cur = next;
    if (cur == best_start && backtrack == start_backtrack) break;
  }

  // stray boundary pixels: other components and interior hole rims
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u)
      if (!visited[idx(u, v)] && detail::is_boundary_pixel(m, u, v))
        contour.push_back({u, v});
  return contour;
}

// Segmentation-noise model: pixels within a band around the mask boundary
// flip with a rate that is biased toward a random direction, producing both
// speckle and a small systematic shift of the contour per mask.
struct MaskNoiseParams {
  double flip_rate = 0.0;      // per-pixel flip probability inside the band
  int band_px = 2;             // band half-width around the boundary (pixels)
  double bias_strength = 0.6;  // 0 = isotropic flips, 1 = fully one-sided
  double iou_floor = 0.90;     // documented expectation for tuned presets

  void validate() const {
    if (flip_rate < 0.0 || flip_rate > 1.0 || band_px < 0 ||
        bias_strength < 0.0 || bias_strength > 1.0)
      throw PreconditionViolation("MaskNoiseParams: out-of-range value");
  }
};

inline ContactMask corrupt_mask(const ContactMask& m,
                                const MaskNoiseParams& noise,
                                std::uint64_t seed) {
  noise.validate();
  ContactMask out = m;
  if (noise.flip_rate <= 0.0 || m.empty()) return out;

  // multi-source BFS distance from the boundary, capped at band_px
  std::vector<int> dist(m.bits.size(), -1);
  auto idx = [&](int u, int v) {
    return static_cast<std::size_t>(v) * m.width + u;
  };
  std::deque<Eigen::Vector2i> queue;
  double cu = 0.0, cv = 0.0;
  int count = 0;
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      if (m.at(u, v)) {
        cu += u;
        cv += v;
        ++count;
        if (detail::is_boundary_pixel(m, u, v)) {
          dist[idx(u, v)] = 0;
          queue.push_back({u, v});
        }
      }
    }
  cu /= count;
  cv /= count;
  while (!queue.empty()) {
    Eigen::Vector2i p = queue.front();
    queue.pop_front();
    int d = dist[idx(p.x(), p.y())];
    if (d >= noise.band_px) continue;
    for (int dv = -1; dv <= 1; ++dv)
      for (int du = -1; du <= 1; ++du) {
        int nu = p.x() + du;
        int nv = p.y() + dv;
        if (nu < 0 || nv < 0 || nu >= m.width || nv >= m.height) continue;
        if (dist[idx(nu, nv)] < 0) {
          dist[idx(nu, nv)] = d + 1;
          queue.push_back({nu, nv});
        }
      }
  }

  Rng rng(stream_seed(seed, /*tag=*/0x6d61736b));
  double phi = rng.uniform(0.0, 2.0 * M_PI);
  double bx = std::cos(phi);
  double by = std::sin(phi);
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      if (dist[idx(u, v)] < 0) continue;
      double dx = u - cu;
      double dy = v - cv;
      double len = std::hypot(dx, dy);
      double along = len > 1e-9 ? (dx * bx + dy * by) / len : 0.0;
      double w = (1.0 - noise.bias_strength) +
                 noise.bias_strength * (1.0 + along);  // mean 1 over the ring
      if (rng.bernoulli(noise.flip_rate * w)) out.set(u, v, !out.at(u, v));
    }
  return out;
}

inline double mask_iou(const ContactMask& a, const ContactMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw PreconditionViolation("mask_iou: dimension mismatch");
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    bool pa = a.bits[i] != 0;
    bool pb = b.bits[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

// ---------------------------------------------------------------------------
// Edge-detection stream

struct EdgeDetection {
  int frame_index = 0;
  double center_u = 0.0;
  double center_v = 0.0;
  double bbox[4] = {0, 0, 0, 0};  // x0, y0, x1, y1
  double confidence = 1.0;
};

// Ground-truth schedule of one sheet edge travelling through the detection
// window: visible from appear_tick to vanish_tick, crossing the counting
// line at cross_tick.
struct EdgeTruth {
  int sheet = 0;
  int appear_tick = 0;
  int cross_tick = 0;
  int vanish_tick = 0;
};

// Detector noise model. Misses are a mix of independent drops and short
// bursts (consecutive missed frames); their combined rate is set so the
// long-run recall matches the configured value. Spurious detections appear
// at a small per-tick rate with confidences straddling the downstream gate.
struct DetectorParams {
  double recall = 1.0;
  double burst_rate = 0.0;      // per-tick probability of starting a burst
  double burst_mean = 1.5;      // mean burst length in frames
  double false_rate = 0.0;      // per-tick spurious-detection probability
  double center_jitter_px = 0.0;
  double enter_v = 40.0;        // row where an edge becomes visible
  double exit_v = 440.0;        // row where it leaves the window
  double center_u = 320.0;
  double bbox_half_w = 30.0;
  double bbox_half_h = 8.0;
  int image_w = 640;
  int image_h = 480;

  void validate() const {
    if (recall < 0.0 || recall > 1.0 || burst_rate < 0.0 || burst_rate >= 1.0 ||
        burst_mean < 1.0 || false_rate < 0.0 || false_rate > 1.0 ||
        center_jitter_px < 0.0 || image_w <= 0 || image_h <= 0)
      throw PreconditionViolation("DetectorParams: out-of-range value");
    if (exit_v <= enter_v)
      throw PreconditionViolation("DetectorParams: exit_v must be > enter_v");
  }

  // independent per-frame miss probability that, combined with bursts,
  // yields the configured long-run recall
  double iid_miss() const {
    double fb = burst_rate * burst_mean / (1.0 + burst_rate * burst_mean);
    double target_miss = 1.0 - recall;
    if (target_miss <= fb) return 0.0;
    return (target_miss - fb) / (1.0 - fb);
  }
};

inline std::vector<EdgeDetection> edge_event_stream(
    std::span<const EdgeTruth> edges, const DetectorParams& det,
    std::uint64_t seed) {
  det.validate();
  std::vector<EdgeDetection> out;
  Rng rng(stream_seed(seed, /*tag=*/0x65646765));
  double miss = det.iid_miss();
  int last_tick = 0;
  for (const EdgeTruth& e : edges) {
    if (e.vanish_tick < e.appear_tick)
      throw PreconditionViolation("edge_event_stream: inverted edge window");
    last_tick = std::max(last_tick, e.vanish_tick);
    int burst_left = 0;
    for (int tick = e.appear_tick; tick <= e.vanish_tick; ++tick) {
      if (burst_left > 0) {
        --burst_left;
        continue;
      }
      if (det.burst_rate > 0.0 && rng.bernoulli(det.burst_rate)) {
        burst_left = rng.geometric(1.0 / det.burst_mean) - 1;
        continue;
      }
      if (miss > 0.0 && rng.bernoulli(miss)) continue;
      double span = std::max(1, e.vanish_tick - e.appear_tick);
      double frac = (tick - e.appear_tick) / span;
      EdgeDetection d;
      d.frame_index = tick;
      d.center_u = det.center_u + det.center_jitter_px * rng.normal();
      d.center_v = det.enter_v + frac * (det.exit_v - det.enter_v) +
                   det.center_jitter_px * rng.normal();
      d.center_u = std::clamp(d.center_u, 0.0, det.image_w - 1.0);
      d.center_v = std::clamp(d.center_v, 0.0, det.image_h - 1.0);
      d.bbox[0] = std::max(0.0, d.center_u - det.bbox_half_w);
      d.bbox[1] = std::max(0.0, d.center_v - det.bbox_half_h);
      d.bbox[2] = std::min(det.image_w - 1.0, d.center_u + det.bbox_half_w);
      d.bbox[3] = std::min(det.image_h - 1.0, d.center_v + det.bbox_half_h);
      d.confidence = 0.75 + 0.25 * rng.uniform();
      out.push_back(d);
    }
  }
  if (det.false_rate > 0.0 && !edges.empty()) {
    Rng fp(stream_seed(seed, /*tag=*/0x66616c73));
    int first_tick = edges.front().appear_tick;
    for (int tick = first_tick; tick <= last_tick; ++tick) {
      if (!fp.bernoulli(det.false_rate)) continue;
      EdgeDetection d;
      d.frame_index = tick;
      d.center_u = fp.uniform(0.0, det.image_w - 1.0);
      d.center_v = fp.uniform(0.0, det.image_h - 1.0);
      d.bbox[0] = std::max(0.0, d.center_u - det.bbox_half_w);
      d.bbox[1] = std::max(0.0, d.center_v - det.bbox_half_h);
      d.bbox[2] = std::min(det.image_w - 1.0, d.center_u + det.bbox_half_w);
      d.bbox[3] = std::min(det.image_h - 1.0, d.center_v + det.bbox_half_h);
      d.confidence = fp.uniform(0.2, 0.8);
      out.push_back(d);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EdgeDetection& a, const EdgeDetection& b) {
                     if (a.frame_index != b.frame_index)
                       return a.frame_index < b.frame_index;
                     if (a.center_v != b.center_v) return a.center_v < b.center_v;
                     return a.center_u < b.center_u;
                   });
  return out;
}

}  // namespace rotip
