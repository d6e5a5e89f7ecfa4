#include "bpm/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "bpm/error.hpp"

namespace bpm {

namespace {

constexpr double kPi = std::numbers::pi;

// mt19937_64 output is fully specified by the standard; distributions are
// not, so sampling is done by hand to keep images identical across libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int below(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }

 private:
  std::mt19937_64 eng_;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint8_t gray(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

/// Closed contour as a radial function sampled at fixed angles, so two
/// contours with the same sample count are in point-wise correspondence.
struct Contour {
  std::vector<double> radius;  // relative, max == 1

  std::vector<Point> place(Point center, double scale) const {
    std::vector<Point> pts(radius.size());
    for (std::size_t i = 0; i < radius.size(); ++i) {
      const double th = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(radius.size());
      pts[i] = {center.x + scale * radius[i] * std::cos(th), center.y + scale * radius[i] * std::sin(th)};
    }
    return pts;
  }
};

Contour random_contour(Rng& rng, int samples = 72) {
  constexpr int kHarmonics = 5;
  double amp[kHarmonics + 1] = {};
  double phase[kHarmonics + 1] = {};
  for (int k = 1; k <= kHarmonics; ++k) {
    amp[k] = rng.uniform(0.04, 0.32) / std::sqrt(static_cast<double>(k));
    phase[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  // keep the contour star-shaped with a clear minimum radius
  double total = 0.0;
  for (int k = 1; k <= kHarmonics; ++k) total += amp[k];
  const double squash = total > 0.6 ? 0.6 / total : 1.0;

  Contour c;
  c.radius.resize(samples);
  double rmax = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double th = 2.0 * kPi * i / samples;
    double r = 1.0;
    for (int k = 1; k <= kHarmonics; ++k) r += squash * amp[k] * std::cos(k * th + phase[k]);
    c.radius[i] = r;
    rmax = std::max(rmax, r);
  }
  for (double& r : c.radius) r /= rmax;
  return c;
}

Contour interpolate(const Contour& a, const Contour& b, double t) {
  Contour c;
  c.radius.resize(a.radius.size());
  for (std::size_t i = 0; i < a.radius.size(); ++i) c.radius[i] = (1.0 - t) * a.radius[i] + t * b.radius[i];
  return c;
}

Image blank(const StimulusSpec& spec) {
  return Image(spec.canvas_px, spec.canvas_px, 1, gray(spec.background_gray));
}

class SetBuilder {
 public:
  explicit SetBuilder(PropertyId p) { set_.property = p; }

  void add(std::string id, Image img, std::string_view role, std::string group,
           std::optional<double> value = std::nullopt, std::vector<std::string> links = {}) {
    set_.manifest.push_back({id, std::string(role), std::move(group), value, std::move(links)});
    set_.images.push_back({std::move(id), std::move(img)});
  }

  StimulusSet take() { return std::move(set_); }

 private:
  StimulusSet set_;
};

std::string gid(int g) { return "g" + std::to_string(g); }

// ---------------------------------------------------------------------------
// per-property generators

StimulusSet gen_normalization(const StimulusSpec& spec, Rng& rng) {
  const int arity = normalization_arity(spec.property);
  const double c = spec.canvas_px;
  const Point center{c / 2.0, c / 2.0};
  const double ring = 0.28 * c;
  const double extent = std::min(0.9 * ring * std::sin(kPi / spec.positions), 0.13 * c);

  std::vector<Point> slots(spec.positions);
  for (int p = 0; p < spec.positions; ++p) {
    const double th = -kPi / 2.0 + kPi / spec.positions + 2.0 * kPi * p / spec.positions;
    slots[p] = {center.x + ring * std::cos(th), center.y + ring * std::sin(th)};
  }
  std::vector<Contour> objects;
  std::vector<std::uint8_t> shades;
  for (int k = 0; k < spec.objects; ++k) {
    objects.push_back(random_contour(rng));
    shades.push_back(gray(static_cast<int>(rng.uniform(0.0, 60.0))));
  }

  auto single_id = [](int k, int p) { return "s_o" + std::to_string(k) + "_p" + std::to_string(p); };

  SetBuilder b(spec.property);
  for (int k = 0; k < spec.objects; ++k) {
    for (int p = 0; p < spec.positions; ++p) {
      Image img = blank(spec);
      fill_polygon(img, objects[k].place(slots[p], extent), shades[k]);
      b.add(single_id(k, p), std::move(img), role::kSingle, "o" + std::to_string(k), p);
    }
  }

  std::set<std::vector<std::pair<int, int>>> used;
  int made = 0;
  int attempts = 0;
  while (made < spec.displays && attempts < spec.displays * 1000) {
    ++attempts;
    std::vector<int> objs, pos;
    while (static_cast<int>(objs.size()) < arity) {
      const int k = rng.below(spec.objects);
      if (std::find(objs.begin(), objs.end(), k) == objs.end()) objs.push_back(k);
    }
    while (static_cast<int>(pos.size()) < arity) {
      const int p = rng.below(spec.positions);
      if (std::find(pos.begin(), pos.end(), p) == pos.end()) pos.push_back(p);
    }
    std::vector<std::pair<int, int>> key;
    for (int i = 0; i < arity; ++i) key.emplace_back(objs[i], pos[i]);
    std::sort(key.begin(), key.end());
    if (!used.insert(key).second) continue;

    Image img = blank(spec);
    std::vector<std::string> links;
    for (const auto& [k, p] : key) {
      fill_polygon(img, objects[k].place(slots[p], extent), shades[k]);
      links.push_back(single_id(k, p));
    }
    const std::string id = "m" + std::to_string(made);
    b.add(id, std::move(img), role::kMulti, id, std::nullopt, std::move(links));
    ++made;
  }
  if (made < spec.displays) {
    throw Error(ErrorCode::DegenerateSpec, "cannot place " + std::to_string(spec.displays) +
                                               " distinct multi-object displays");
  }
  return b.take();
}

struct SceneAsset {
  std::filesystem::path object;
  int label;
  std::filesystem::path congruent;
  std::filesystem::path incongruent;
};

std::vector<SceneAsset> read_scene_assets(const std::filesystem::path& dir) {
  const auto table = dir / "assets.tsv";
  if (!std::filesystem::exists(table)) {
    throw Error(ErrorCode::MissingAssets, "scene incongruence needs " + table.string());
  }
  std::vector<SceneAsset> assets;
  const auto lines = split(read_text_file(table), '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) {
      throw Error(ErrorCode::SchemaError, "assets.tsv line " + std::to_string(i + 1) +
                                              ": expected object, label, congruent_scene, incongruent_scene");
    }
    if (f[0] == "object") continue;  // header
    const double label = parse_double(f[1]);
    if (label < 0 || label != std::floor(label)) {
      throw Error(ErrorCode::SchemaError, "assets.tsv line " + std::to_string(i + 1) + ": bad label");
    }
    assets.push_back({dir / f[0], static_cast<int>(label), dir / f[2], dir / f[3]});
  }
  if (assets.empty()) throw Error(ErrorCode::MissingAssets, "assets.tsv lists no objects");
  return assets;
}

Image composite(const Image& object, const Image& scene, int canvas) {
  Image out = to_rgb(resize_nearest(scene, canvas, canvas));
  const double scale = 0.5 * canvas / std::max(object.width(), object.height());
  const int w = std::max(1, static_cast<int>(std::lround(object.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(object.height() * scale)));
  const Image obj = resize_nearest(object, w, h);
  const int ox = (canvas - w) / 2, oy = (canvas - h) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int alpha = obj.channels() == 4 ? obj.at(x, y, 3) : 255;
      for (int ch = 0; ch < 3; ++ch) {
        const int src = obj.channels() == 1 ? obj.at(x, y) : obj.at(x, y, ch);
        auto& dst = out.at(ox + x, oy + y, ch);
        dst = gray((src * alpha + dst * (255 - alpha) + 127) / 255);
      }
    }
  }
  return out;
}

StimulusSet gen_scene(const StimulusSpec& spec, Rng&) {
  if (!spec.assets_dir) {
    throw Error(ErrorCode::MissingAssets,
                "scene incongruence requires user-supplied object cutouts and scenes (--assets)");
  }
  const auto assets = read_scene_assets(*spec.assets_dir);
  SetBuilder b(spec.property);
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const auto& a = assets[i];
    const Image obj = read_png(a.object);
    const std::string g = gid(static_cast<int>(i));
    b.add(g + "_congruent", composite(obj, read_png(a.congruent), spec.canvas_px), role::kCongruent, g, a.label);
    b.add(g + "_incongruent", composite(obj, read_png(a.incongruent), spec.canvas_px), role::kIncongruent, g,
          a.label);
  }
  return b.take();
}

StimulusSet gen_mirror(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  SetBuilder b(spec.property);
  for (int g = 0; g < spec.count; ++g) {
    Image img = blank(spec);
    const auto shape = random_contour(rng);
    // off-center centroid so both reflections move the figure
    const Point at{c / 2.0 + rng.uniform(-0.08, 0.08) * c, c / 2.0 + rng.uniform(-0.08, 0.08) * c};
    fill_polygon(img, shape.place(at, 0.32 * c), gray(static_cast<int>(rng.uniform(0.0, 60.0))));
    Image v = reflect_about_vertical_axis(img);
    Image h = reflect_about_horizontal_axis(img);
    b.add(gid(g) + "_original", std::move(img), role::kOriginal, gid(g));
    b.add(gid(g) + "_vflip", std::move(v), role::kVflip, gid(g));
    b.add(gid(g) + "_hflip", std::move(h), role::kHflip, gid(g));
  }
  return b.take();
}

StimulusSet gen_morph(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  const Point center{c / 2.0, c / 2.0};
  std::vector<Contour> shapes;
  for (int k = 0; k < spec.count; ++k) shapes.push_back(random_contour(rng));

  SetBuilder b(spec.property);
  for (int k = 0; k < spec.count; ++k) {
    Image img = blank(spec);
    fill_polygon(img, shapes[k].place(center, 0.36 * c), 0);
    b.add("ref" + std::to_string(k), std::move(img), role::kReference, "reference", k);
  }
  for (int k = 0; k < spec.count; ++k) {
    const auto& from = shapes[k];
    const auto& to = shapes[(k + 1) % spec.count];
    const std::string line = "line" + std::to_string(k);
    for (int s = 0; s < spec.morph_steps; ++s) {
      const double t = static_cast<double>(s) / (spec.morph_steps - 1);
      Image img = blank(spec);
      fill_polygon(img, interpolate(from, to, t).place(center, 0.36 * c), 0);
      b.add(line + "_s" + std::to_string(s), std::move(img), role::kMorph, line, t);
    }
  }
  return b.take();
}

void box_blur(const std::vector<double>& src, int n, int r, std::vector<double>& out) {
  // separable box blur with wraparound
  std::vector<double> tmp(src.size());
  out.assign(src.size(), 0.0);
  const double norm = 1.0 / (2 * r + 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double s = 0;
      for (int k = -r; k <= r; ++k) s += src[y * n + (x + k + n) % n];
      tmp[y * n + x] = s * norm;
    }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double s = 0;
      for (int k = -r; k <= r; ++k) s += tmp[((y + k + n) % n) * n + x];
      out[y * n + x] = s * norm;
    }
}

Image bandpass_texture(const StimulusSpec& spec, Rng& rng) {
  const int n = spec.canvas_px;
  std::vector<double> noise(static_cast<std::size_t>(n) * n);
  for (double& v : noise) v = rng.uniform(-1.0, 1.0);
  const int fine = 1 + rng.below(3);
  const int coarse = fine * 3 + rng.below(4);
  std::vector<double> lo, hi;
  box_blur(noise, n, fine, hi);
  box_blur(noise, n, coarse, lo);
  double peak = 1e-12;
  for (std::size_t i = 0; i < hi.size(); ++i) {
    hi[i] -= lo[i];
    peak = std::max(peak, std::abs(hi[i]));
  }
  Image img = blank(spec);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      img.at(x, y) = gray(spec.background_gray + static_cast<int>(std::lround(100.0 * hi[y * n + x] / peak)));
  return img;
}

Image grating_texture(const StimulusSpec& spec, Rng& rng) {
  const int n = spec.canvas_px;
  const double theta = rng.uniform(0.0, kPi);
  const double period = rng.uniform(6.0, 28.0);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  Image img = blank(spec);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double u = x * std::cos(theta) + y * std::sin(theta);
      img.at(x, y) = gray(spec.background_gray +
                          static_cast<int>(std::lround(90.0 * std::sin(2.0 * kPi * u / period + phase))));
    }
  return img;
}

StimulusSet gen_shape_texture(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  SetBuilder b(spec.property);
  for (int k = 0; k < spec.count; ++k) {
    Image img = blank(spec);
    fill_polygon(img, random_contour(rng).place({c / 2.0, c / 2.0}, 0.36 * c), 0);
    b.add("shape" + std::to_string(k), std::move(img), role::kShape, "shapes", k);
  }
  for (int k = 0; k < spec.count; ++k) {
    Image img = (k % 2 == 0) ? bandpass_texture(spec, rng) : grating_texture(spec, rng);
    b.add("texture" + std::to_string(k), std::move(img), role::kTexture, "textures", k);
  }
  return b.take();
}

StimulusSet gen_weber(const StimulusSpec& spec, Rng&) {
  const double c = spec.canvas_px;
  const double thickness = std::max(2.0, std::round(c / 28.0));
  SetBuilder b(spec.property);
  const auto lengths = weber_lengths(spec.weber_start, spec.weber_ratio, spec.weber_count);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    Image img = blank(spec);
    const double l = lengths[i];
    fill_rect(img, c / 2.0 - l / 2.0, c / 2.0 - thickness / 2.0, c / 2.0 + l / 2.0, c / 2.0 + thickness / 2.0, 0);
    b.add("bar" + std::to_string(i), std::move(img), role::kBar, "series", l);
  }
  return b.take();
}

struct Rect {
  double x0, y0, x1, y1;
  Rect shifted(double dx, double dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }
  double w() const { return x1 - x0; }
  double h() const { return y1 - y0; }
};

void paint(Image& img, const Rect& r, std::uint8_t v) { fill_rect(img, r.x0, r.y0, r.x1, r.y1, v); }

StimulusSet gen_occlusion(const StimulusSpec& spec, Rng& rng, bool depth) {
  const double c = spec.canvas_px;
  const auto bg = gray(spec.background_gray);
  SetBuilder b(spec.property);
  for (int g = 0; g < spec.count; ++g) {
    const double wa = rng.uniform(0.16, 0.24) * c, ha = rng.uniform(0.2, 0.32) * c;
    const double wb = rng.uniform(0.16, 0.24) * c, hb = rng.uniform(0.2, 0.32) * c;
    const auto shade_a = gray(static_cast<int>(rng.uniform(20.0, 80.0)));
    const auto shade_b = gray(static_cast<int>(rng.uniform(180.0, 240.0)));
    const double overlap = rng.uniform(0.3, 0.5) * std::min(wa, wb);
    const double dy = rng.uniform(-0.15, 0.15) * c;

    // overlapping layout, centred on the canvas
    const double total = wa + wb - overlap;
    const Rect a{c / 2.0 - total / 2.0, c / 2.0 - ha / 2.0, c / 2.0 - total / 2.0 + wa, c / 2.0 + ha / 2.0};
    const Rect r_b{a.x1 - overlap, c / 2.0 - hb / 2.0 + dy, a.x1 - overlap + wb, c / 2.0 + hb / 2.0 + dy};
    const Rect inter{std::max(a.x0, r_b.x0), std::max(a.y0, r_b.y0), std::min(a.x1, r_b.x1),
                     std::min(a.y1, r_b.y1)};

    Image unoccluded = blank(spec), occluded = blank(spec), control = blank(spec);
    if (!depth) {
      // side-by-side layout with a small gap
      const double gap = 0.03 * c;
      const double sa = -(overlap / 2.0 + gap / 2.0), sb = overlap / 2.0 + gap / 2.0;
      paint(unoccluded, a.shifted(sa, 0), shade_a);
      paint(unoccluded, r_b.shifted(sb, 0), shade_b);
      paint(occluded, a, shade_a);
      paint(occluded, r_b, shade_b);
      // mosaic: the far object with the hidden part cut away, no occluder over it
      paint(control, a.shifted(sa, 0), shade_a);
      paint(control, inter.shifted(sa, 0), bg);
      paint(control, r_b.shifted(sb, 0), shade_b);
    } else {
      // base: b in front; occluded: depth order swapped; control: a patch of
      // the same size and colour change away from the junction
      paint(unoccluded, a, shade_a);
      paint(unoccluded, r_b, shade_b);
      paint(occluded, r_b, shade_b);
      paint(occluded, a, shade_a);
      paint(control, a, shade_a);
      paint(control, r_b, shade_b);
      const Rect patch{r_b.x1 - inter.w(), r_b.y1 - inter.h(), r_b.x1, r_b.y1};
      paint(control, patch, shade_a);
    }
    b.add(gid(g) + "_unoccluded", std::move(unoccluded), role::kUnoccluded, gid(g));
    b.add(gid(g) + "_occluded", std::move(occluded), role::kOccluded, gid(g));
    b.add(gid(g) + "_control", std::move(control), role::kControl, gid(g));
  }
  return b.take();
}

StimulusSet gen_relative_size(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  SetBuilder b(spec.property);
  for (int g = 0; g < spec.count; ++g) {
    const double bw = rng.uniform(0.18, 0.28) * c, bh = rng.uniform(0.2, 0.3) * c;
    const double r = rng.uniform(0.06, 0.1) * c;
    const double s = rng.uniform(1.15, 1.3);
    const auto shade = gray(static_cast<int>(rng.uniform(0.0, 60.0)));
    const double ground = 0.8 * c;

    auto draw = [&](double body_w, double body_h, double part_r) {
      Image img = blank(spec);
      fill_rect(img, c / 2.0 - body_w / 2.0, ground - body_h, c / 2.0 + body_w / 2.0, ground, shade);
      fill_ellipse(img, {c / 2.0, ground - body_h - part_r}, part_r, part_r, shade);
      return img;
    };
    // disproportional: only the part grows, by the same total area
    const double added = (s * s - 1.0) * (bw * bh + kPi * r * r);
    const double r_dis = std::sqrt(r * r + added / kPi);
    b.add(gid(g) + "_base", draw(bw, bh, r), role::kBase, gid(g), s);
    b.add(gid(g) + "_proportional", draw(s * bw, s * bh, s * r), role::kProportional, gid(g), s);
    b.add(gid(g) + "_disproportional", draw(bw, bh, r_dis), role::kDisproportional, gid(g), s);
  }
  return b.take();
}

struct GroundView {
  double horizon;  // image row of the horizon
  double height;   // focal length in pixels; camera height is the unit of length
};

Image render_surface(const StimulusSpec& spec, const GroundView& ground, const GroundView& object, double check,
                     double tile_u0, double tile_u1, double tile_z0, double tile_z1, double stripe) {
  const int n = spec.canvas_px;
  const double cx = n / 2.0;
  Image img = blank(spec);
  for (int y = 0; y < n; ++y) {
    const double py = y + 0.5;
    for (int x = 0; x < n; ++x) {
      const double px = x + 0.5;
      if (py > ground.horizon + 0.5) {
        const double z = ground.height / (py - ground.horizon);
        const double u = (px - cx) * z / ground.height;
        const long parity = static_cast<long>(std::floor(u / check)) + static_cast<long>(std::floor(z / check));
        img.at(x, y) = (parity & 1) ? 70 : 190;
      }
      if (py > object.horizon + 0.5) {
        const double z = object.height / (py - object.horizon);
        const double u = (px - cx) * z / object.height;
        if (u >= tile_u0 && u <= tile_u1 && z >= tile_z0 && z <= tile_z1) {
          img.at(x, y) = (static_cast<long>(std::floor((u - tile_u0) / stripe)) & 1) ? 20 : 245;
        }
      }
    }
  }
  return img;
}

StimulusSet gen_surface(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  SetBuilder b(spec.property);
  for (int g = 0; g < spec.count; ++g) {
    const GroundView base{rng.uniform(0.3, 0.4) * c, rng.uniform(0.9, 1.1) * c};
    const GroundView moved{base.horizon + rng.uniform(0.08, 0.14) * c, base.height * rng.uniform(0.7, 0.85)};
    const double check = rng.uniform(0.35, 0.6);
    const double z0 = rng.uniform(1.6, 2.2), z1 = z0 + rng.uniform(0.8, 1.2);
    const double u0 = rng.uniform(-0.6, -0.2), u1 = u0 + rng.uniform(0.6, 1.0);
    const double stripe = (u1 - u0) / (3 + rng.below(4));
    b.add(gid(g) + "_base", render_surface(spec, base, base, check, u0, u1, z0, z1, stripe), role::kBase, gid(g));
    b.add(gid(g) + "_congruent", render_surface(spec, moved, moved, check, u0, u1, z0, z1, stripe),
          role::kCongruent, gid(g));
    b.add(gid(g) + "_incongruent", render_surface(spec, moved, base, check, u0, u1, z0, z1, stripe),
          role::kIncongruent, gid(g));
  }
  return b.take();
}

struct Segment {
  Point a, b;
};

/// Nine visible edges of an obliquely viewed cuboid: 4 front, 3 receding, 2 back.
struct CuboidLines {
  std::vector<Segment> front;
  std::vector<Segment> receding;
  std::vector<Segment> back;
};

CuboidLines cuboid(Point origin, double side, Point depth) {
  const Point tl = origin, tr{origin.x + side, origin.y}, br{origin.x + side, origin.y + side},
              bl{origin.x, origin.y + side};
  auto off = [&](Point p) { return Point{p.x + depth.x, p.y + depth.y}; };
  CuboidLines l;
  l.front = {{tl, tr}, {tr, br}, {br, bl}, {bl, tl}};
  l.receding = {{tl, off(tl)}, {tr, off(tr)}, {br, off(br)}};
  l.back = {{off(tl), off(tr)}, {off(tr), off(br)}};
  return l;
}

Image draw_lines(const StimulusSpec& spec, const std::vector<Segment>& segs, double thickness) {
  Image img = blank(spec);
  for (const auto& s : segs) draw_segment(img, s.a, s.b, thickness, 0);
  return img;
}

std::vector<Segment> shift(std::vector<Segment> segs, Point d) {
  for (auto& s : segs) {
    s.a = {s.a.x + d.x, s.a.y + d.y};
    s.b = {s.b.x + d.x, s.b.y + d.y};
  }
  return segs;
}

std::vector<Segment> concat(std::initializer_list<std::vector<Segment>> parts) {
  std::vector<Segment> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

StimulusSet gen_three_d(const StimulusSpec& spec, Rng& rng, int variant) {
  const double c = spec.canvas_px;
  const double thick = std::max(2.0, std::round(c / 75.0));
  SetBuilder b(spec.property);
  for (int g = 0; g < spec.count; ++g) {
    const double side = rng.uniform(0.3, 0.38) * c;
    const double angle = rng.uniform(0.55, 1.0);
    const double k0 = rng.uniform(0.25, 0.35) * side, k1 = k0 + rng.uniform(0.15, 0.25) * side;
    const Point origin{c / 2.0 - side / 2.0 - 0.08 * c, c / 2.0 - side / 2.0 + 0.08 * c};
    const Point d0{k0 * std::cos(angle), -k0 * std::sin(angle)};
    const Point d1{k1 * std::cos(angle), -k1 * std::sin(angle)};
    const auto base = cuboid(origin, side, d0);
    const auto changed = cuboid(origin, side, d1);

    const auto base3d = concat({base.front, base.receding, base.back});
    const auto changed3d = concat({changed.front, changed.receding, changed.back});

    std::vector<Segment> base2d, changed2d;
    if (variant == 1) {
      // same nine segments, receding and back edges pulled off the corners
      const Point detach{-0.18 * side, 0.14 * side};
      base2d = concat({base.front, shift(concat({base.receding, base.back}), detach)});
      changed2d = concat({changed.front, shift(concat({changed.receding, changed.back}), detach)});
    } else {
      // receding edges stay attached (same junctions); back edges detached
      const Point detach{-0.5 * side, 0.55 * side};
      base2d = concat({base.front, base.receding, shift(base.back, detach)});
      changed2d = concat({changed.front, changed.receding, shift(changed.back, detach)});
    }
    b.add(gid(g) + "_base_3d", draw_lines(spec, base3d, thick), role::kBase3d, gid(g));
    b.add(gid(g) + "_changed_3d", draw_lines(spec, changed3d, thick), role::kChanged3d, gid(g));
    b.add(gid(g) + "_base_2d", draw_lines(spec, base2d, thick), role::kBase2d, gid(g));
    b.add(gid(g) + "_changed_2d", draw_lines(spec, changed2d, thick), role::kChanged2d, gid(g));
  }
  return b.take();
}

enum class Glyph { Circle, Diamond };

Point on_outline(Glyph g, double t) {
  // unit-radius outline parameterized by t in [0,1)
  const double th = 2.0 * kPi * t;
  if (g == Glyph::Circle) return {std::cos(th), std::sin(th)};
  const double cs = std::cos(th), sn = std::sin(th);
  const double scale = 1.0 / (std::abs(cs) + std::abs(sn));
  return {cs * scale, sn * scale};
}

void draw_glyph(Image& img, Glyph g, Point at, double r, std::uint8_t v) {
  if (g == Glyph::Circle) {
    fill_ellipse(img, at, r, r, v);
  } else {
    const Point poly[] = {{at.x, at.y - r}, {at.x + r, at.y}, {at.x, at.y + r}, {at.x - r, at.y}};
    fill_polygon(img, poly, v);
  }
}

Image navon(const StimulusSpec& spec, Glyph global, Glyph local, double radius, double local_r, int n) {
  const double c = spec.canvas_px;
  Image img = blank(spec);
  for (int i = 0; i < n; ++i) {
    const Point p = on_outline(global, static_cast<double>(i) / n);
    draw_glyph(img, local, {c / 2.0 + radius * p.x, c / 2.0 + radius * p.y}, local_r, 0);
  }
  return img;
}

StimulusSet gen_global(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  SetBuilder b(spec.property);
  auto other = [](Glyph g) { return g == Glyph::Circle ? Glyph::Diamond : Glyph::Circle; };
  for (int g = 0; g < spec.count; ++g) {
    const Glyph gl = (g % 2 == 0) ? Glyph::Circle : Glyph::Diamond;
    const Glyph lo = ((g / 2) % 2 == 0) ? Glyph::Circle : Glyph::Diamond;
    const double radius = rng.uniform(0.3, 0.38) * c;
    const double local_r = rng.uniform(0.035, 0.05) * c;
    const int n = 12 + rng.below(5);
    b.add(gid(g) + "_reference", navon(spec, gl, lo, radius, local_r, n), role::kReference, gid(g));
    b.add(gid(g) + "_global_change", navon(spec, other(gl), lo, radius, local_r, n), role::kGlobalChange, gid(g));
    b.add(gid(g) + "_local_change", navon(spec, gl, other(lo), radius, local_r, n), role::kLocalChange, gid(g));
  }
  return b.take();
}

StimulusSet gen_thatcher(const StimulusSpec& spec, Rng& rng) {
  const double c = spec.canvas_px;
  SetBuilder b(spec.property);
  for (int g = 0; g < spec.count; ++g) {
    const Point center{c / 2.0, c / 2.0};
    const double fx = rng.uniform(0.28, 0.34) * c, fy = rng.uniform(0.38, 0.44) * c;
    const double eye_dx = rng.uniform(0.35, 0.45) * fx, eye_y = center.y - rng.uniform(0.2, 0.3) * fy;
    const double erx = rng.uniform(0.16, 0.22) * fx, ery = rng.uniform(0.45, 0.6) * erx;
    const double mouth_y = center.y + rng.uniform(0.4, 0.5) * fy;
    const double mw = rng.uniform(0.35, 0.5) * fx, mh = rng.uniform(0.1, 0.16) * fy;
    const double thick = std::max(2.0, std::round(c / 80.0));

    Image face = blank(spec);
    fill_ellipse(face, center, fx, fy, 205);
    draw_ellipse_outline(face, center, fx, fy, thick, 40);

    std::vector<Rect> regions;
    for (int side : {-1, 1}) {
      const Point eye{center.x + side * eye_dx, eye_y};
      fill_ellipse(face, eye, erx, ery, 250);
      draw_ellipse_outline(face, eye, erx, ery, thick, 30);
      fill_ellipse(face, {eye.x, eye.y + 0.25 * ery}, 0.4 * ery, 0.4 * ery, 10);
      const double brow_y = eye.y - ery - 0.5 * ery;
      draw_segment(face, {eye.x - erx, brow_y + 0.3 * ery}, {eye.x + erx, brow_y - 0.1 * ery}, thick * 1.5, 30);
      regions.push_back({eye.x - erx - thick, brow_y - ery, eye.x + erx + thick, eye.y + ery + thick});
    }
    // smile: lower arc
    const int arc = 24;
    for (int i = 0; i < arc; ++i) {
      const double t0 = kPi * i / arc, t1 = kPi * (i + 1) / arc;
      draw_segment(face, {center.x + mw * std::cos(t0), mouth_y + mh * std::sin(t0)},
                   {center.x + mw * std::cos(t1), mouth_y + mh * std::sin(t1)}, thick * 1.5, 40);
    }
    regions.push_back({center.x - mw - 2 * thick, mouth_y - mh - 2 * thick, center.x + mw + 2 * thick,
                       mouth_y + mh + 2 * thick});

    Image thatcherized = face;
    for (const auto& r : regions) {
      flip_region_vertically(thatcherized, static_cast<int>(std::floor(r.x0)), static_cast<int>(std::floor(r.y0)),
                             static_cast<int>(std::ceil(r.x1)), static_cast<int>(std::ceil(r.y1)));
    }
    Image inverted = rotate_180(face);
    Image inverted_thatcher = rotate_180(thatcherized);
    b.add(gid(g) + "_upright", std::move(face), role::kUpright, gid(g));
    b.add(gid(g) + "_upright_thatcher", std::move(thatcherized), role::kUprightThatcher, gid(g));
    b.add(gid(g) + "_inverted", std::move(inverted), role::kInverted, gid(g));
    b.add(gid(g) + "_inverted_thatcher", std::move(inverted_thatcher), role::kInvertedThatcher, gid(g));
  }
  return b.take();
}

std::string format_value(const std::optional<double>& v) { return v ? format_double(*v) : "-"; }

}  // namespace

// ---------------------------------------------------------------------------
// protocol tables

std::vector<std::string_view> group_roles(PropertyId id) {
  using namespace role;
  switch (id) {
    case PropertyId::SceneIncongruence: return {kCongruent, kIncongruent};
    case PropertyId::MirrorConfusion: return {kOriginal, kVflip, kHflip};
    case PropertyId::OcclusionBasic:
    case PropertyId::OcclusionDepth: return {kUnoccluded, kOccluded, kControl};
    case PropertyId::RelativeSize: return {kBase, kProportional, kDisproportional};
    case PropertyId::SurfaceInvariance: return {kBase, kCongruent, kIncongruent};
    case PropertyId::ThreeD1:
    case PropertyId::ThreeD2: return {kBase3d, kChanged3d, kBase2d, kChanged2d};
    case PropertyId::GlobalAdvantage: return {kReference, kGlobalChange, kLocalChange};
    case PropertyId::Thatcher: return {kUpright, kUprightThatcher, kInverted, kInvertedThatcher};
    default: return {};
  }
}

std::vector<std::string_view> allowed_roles(PropertyId id) {
  using namespace role;
  switch (id) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: return {kSingle, kMulti};
    case PropertyId::SparsenessMorph: return {kReference, kMorph};
    case PropertyId::SparsenessShapeTexture: return {kShape, kTexture};
    case PropertyId::WebersLaw: return {kBar};
    default: return group_roles(id);
  }
}

int normalization_arity(PropertyId id) {
  if (id == PropertyId::NormPairs) return 2;
  if (id == PropertyId::NormTriplets) return 3;
  return 0;
}

std::vector<double> weber_lengths(double start, double ratio, int n) {
  std::vector<double> out;
  double l = start;
  for (int i = 0; i < n; ++i) {
    out.push_back(l);
    l *= ratio;
  }
  return out;
}

std::uint64_t property_seed(std::uint64_t root_seed, PropertyId id) {
  return splitmix(root_seed ^ splitmix(static_cast<std::uint64_t>(property_index(id)) + 1));
}

void validate_spec(const StimulusSpec& spec) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::DegenerateSpec, why); };
  if (spec.canvas_px < 64) fail("canvas_px must be >= 64");
  if (spec.background_gray < 0 || spec.background_gray > 255) fail("background_gray must be in 0..255");
  switch (spec.property) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: {
      const int arity = normalization_arity(spec.property);
      if (spec.positions < arity) fail("need at least " + std::to_string(arity) + " positions");
      if (spec.objects < arity) fail("need at least " + std::to_string(arity) + " objects");
      if (spec.displays < 1) fail("need at least one multi-object display");
      break;
    }
    case PropertyId::SparsenessMorph:
      if (spec.morph_steps < 2) fail("need at least 2 morph steps");
      if (spec.count < 2) fail("need at least 2 reference shapes");
      break;
    case PropertyId::SparsenessShapeTexture:
      if (spec.count < 2) fail("need at least 2 shapes and textures");
      break;
    case PropertyId::WebersLaw: {
      if (spec.weber_count < 3) fail("need at least 3 lengths");
      if (!(spec.weber_start > 0.0) || !(spec.weber_ratio > 1.0)) fail("need start > 0 and ratio > 1");
      const auto l = weber_lengths(spec.weber_start, spec.weber_ratio, spec.weber_count);
      if (l.back() > spec.canvas_px) fail("longest bar exceeds the canvas");
      break;
    }
    case PropertyId::SceneIncongruence:
      break;
    default:
      if (spec.count < 1) fail("need at least one group");
  }
}

StimulusSet generate_stimulus_set(const StimulusSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  StimulusSet set;
  switch (spec.property) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: set = gen_normalization(spec, rng); break;
    case PropertyId::SceneIncongruence: set = gen_scene(spec, rng); break;
    case PropertyId::MirrorConfusion: set = gen_mirror(spec, rng); break;
    case PropertyId::SparsenessMorph: set = gen_morph(spec, rng); break;
    case PropertyId::SparsenessShapeTexture: set = gen_shape_texture(spec, rng); break;
    case PropertyId::WebersLaw: set = gen_weber(spec, rng); break;
    case PropertyId::OcclusionBasic: set = gen_occlusion(spec, rng, false); break;
    case PropertyId::OcclusionDepth: set = gen_occlusion(spec, rng, true); break;
    case PropertyId::RelativeSize: set = gen_relative_size(spec, rng); break;
    case PropertyId::SurfaceInvariance: set = gen_surface(spec, rng); break;
    case PropertyId::ThreeD1: set = gen_three_d(spec, rng, 1); break;
    case PropertyId::ThreeD2: set = gen_three_d(spec, rng, 2); break;
    case PropertyId::GlobalAdvantage: set = gen_global(spec, rng); break;
    case PropertyId::Thatcher: set = gen_thatcher(spec, rng); break;
  }
  validate_structure(set);
  return set;
}

// ---------------------------------------------------------------------------
// structure validation

void validate_structure(const StimulusSet& set) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::SchemaError, why); };
  const auto roles = allowed_roles(set.property);
  std::set<std::string> ids;
  std::map<std::string, const ManifestRecord*> by_id;
  for (std::size_t i = 0; i < set.manifest.size(); ++i) {
    const auto& r = set.manifest[i];
    const std::string where = "row " + std::to_string(i + 1) + " (" + r.stimulus_id + ")";
    if (r.stimulus_id.empty()) fail(where + ": empty stimulus_id");
    if (!ids.insert(r.stimulus_id).second) fail(where + ": duplicate stimulus_id");
    if (std::find(roles.begin(), roles.end(), r.role) == roles.end()) fail(where + ": unknown role '" + r.role + "'");
    if (r.group_id.empty()) fail(where + ": empty group_id");
    by_id[r.stimulus_id] = &r;
  }
  std::set<std::string> image_ids;
  for (const auto& s : set.images) image_ids.insert(s.id);
  for (const auto& id : ids) {
    if (!image_ids.count(id)) throw Error(ErrorCode::MissingImageFile, id);
  }

  auto count_role = [&](std::string_view role) {
    return std::count_if(set.manifest.begin(), set.manifest.end(), [&](const auto& r) { return r.role == role; });
  };

  const auto grouped = group_roles(set.property);
  if (!grouped.empty() && set.property != PropertyId::SceneIncongruence) {
    std::map<std::string, std::map<std::string, int>> groups;
    for (const auto& r : set.manifest) groups[r.group_id][r.role]++;
    if (groups.empty()) fail("manifest has no groups");
    for (const auto& [g, counts] : groups) {
      for (auto role : grouped) {
        const auto it = counts.find(std::string(role));
        const int n = it == counts.end() ? 0 : it->second;
        if (n != 1) {
          fail("group " + g + ": expected exactly one '" + std::string(role) + "', found " + std::to_string(n));
        }
      }
    }
    return;
  }

  switch (set.property) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: {
      const auto arity = static_cast<std::size_t>(normalization_arity(set.property));
      if (count_role(role::kMulti) == 0) fail("no multi-object displays");
      for (const auto& r : set.manifest) {
        if (r.role != role::kMulti) continue;
        if (r.links.size() != arity) {
          fail(r.stimulus_id + ": expected " + std::to_string(arity) + " linked singles");
        }
        for (const auto& l : r.links) {
          const auto it = by_id.find(l);
          if (it == by_id.end() || it->second->role != role::kSingle) {
            fail(r.stimulus_id + ": link '" + l + "' is not a single-object display");
          }
        }
      }
      break;
    }
    case PropertyId::SceneIncongruence:
      if (count_role(role::kCongruent) == 0 || count_role(role::kIncongruent) == 0) {
        fail("need both congruent and incongruent composites");
      }
      for (const auto& r : set.manifest) {
        if (!r.value || *r.value < 0 || *r.value != std::floor(*r.value)) {
          fail(r.stimulus_id + ": value must hold the ground-truth class index");
        }
      }
      break;
    case PropertyId::SparsenessMorph:
      if (count_role(role::kReference) < 2 || count_role(role::kMorph) < 2) fail("need >= 2 reference and morph images");
      break;
    case PropertyId::SparsenessShapeTexture:
      if (count_role(role::kShape) < 2 || count_role(role::kTexture) < 2) fail("need >= 2 shape and texture images");
      break;
    case PropertyId::WebersLaw: {
      std::set<double> lengths;
      for (const auto& r : set.manifest) {
        if (!r.value || !(*r.value > 0)) fail(r.stimulus_id + ": bar needs a positive length");
        lengths.insert(*r.value);
      }
      if (lengths.size() < 3) fail("need >= 3 distinct bar lengths");
      break;
    }
    default:
      break;
  }
}

// ---------------------------------------------------------------------------
// manifest IO

std::string format_manifest(const StimulusSet& set) {
  std::string out = "# property: " + std::string(property_name(set.property)) + "\n";
  out += "stimulus_id\trole\tgroup_id\tvalue\tlinks\n";
  for (const auto& r : set.manifest) {
    std::string links;
    for (const auto& l : r.links) links += (links.empty() ? "" : ",") + l;
    out += r.stimulus_id + '\t' + r.role + '\t' + r.group_id + '\t' + format_value(r.value) + '\t' +
           (links.empty() ? "-" : links) + '\n';
  }
  return out;
}

std::vector<ManifestRecord> parse_manifest(std::string_view text, PropertyId* property_out) {
  std::vector<ManifestRecord> out;
  bool header_seen = false;
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "manifest line " + std::to_string(i + 1);
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      if (body.rfind("property:", 0) == 0 && property_out) {
        const auto id = parse_property(trim(body.substr(9)));
        if (!id) throw Error(ErrorCode::SchemaError, where + ": unknown property");
        *property_out = *id;
      }
      continue;
    }
    const auto f = split(line, '\t');
    if (!header_seen) {
      if (f.size() != 5 || f[0] != "stimulus_id" || f[1] != "role" || f[2] != "group_id" || f[3] != "value" ||
          f[4] != "links") {
        throw Error(ErrorCode::SchemaError, where + ": header must be stimulus_id, role, group_id, value, links");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 5) throw Error(ErrorCode::SchemaError, where + ": expected 5 fields");
    ManifestRecord r{f[0], f[1], f[2], std::nullopt, {}};
    if (f[3] != "-") {
      try {
        r.value = parse_double(f[3]);
      } catch (const Error&) {
        throw Error(ErrorCode::SchemaError, where + ": field 'value' is not numeric");
      }
    }
    if (f[4] != "-") r.links = split(f[4], ',');
    out.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorCode::SchemaError, "manifest has no header row");
  return out;
}

std::filesystem::path write_stimulus_set(const StimulusSet& set, const std::filesystem::path& out_root) {
  const auto dir = out_root / std::string(property_name(set.property));
  std::filesystem::create_directories(dir);
  for (const auto& s : set.images) write_png(dir / (s.id + ".png"), s.image);
  write_text_file(dir / "manifest.tsv", format_manifest(set));
  return dir;
}

StimulusSet load_manifest(const std::filesystem::path& manifest_path) {
  const auto text = read_text_file(manifest_path);
  std::optional<PropertyId> named;
  PropertyId parsed{};
  auto manifest = parse_manifest(text, &parsed);
  if (text.find("# property:") != std::string::npos) named = parsed;
  if (!named) {
    // fall back to the directory name, matching the generated layout
    named = parse_property(manifest_path.parent_path().filename().string());
    if (!named) throw Error(ErrorCode::SchemaError, "manifest names no property ('# property: <id>')");
  }

  const auto dir = manifest_path.parent_path();
  StimulusSet set{*named, {}, std::move(manifest)};
  for (const auto& r : set.manifest) {
    const auto file = dir / (r.stimulus_id + ".png");
    if (!std::filesystem::exists(file)) throw Error(ErrorCode::MissingImageFile, file.string());
    set.images.push_back({r.stimulus_id, Image()});
  }
  validate_structure(set);
  return set;
}

StimulusSet load_external_set(const std::filesystem::path& manifest_path) {
  StimulusSet set = load_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  for (auto& s : set.images) s.image = read_png(dir / (s.id + ".png"));
  return set;
}

}  // namespace bpm
