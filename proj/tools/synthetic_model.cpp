#include "synthetic_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "bpm/activation_store.hpp"
#include "bpm/image.hpp"
#include "bpm/stimulus.hpp"

namespace bpm::synth {

namespace fs = std::filesystem;

namespace {

double uniform(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

struct Layer {
  int in = 0, out = 0;
  std::vector<double> w;  // out x in
  std::vector<double> b;
};

Layer random_layer(std::mt19937_64& g, int in, int out) {
  Layer l{in, out, std::vector<double>(static_cast<std::size_t>(in) * out), std::vector<double>(out)};
  const double scale = std::sqrt(6.0 / in);
  for (auto& v : l.w) v = (2.0 * uniform(g) - 1.0) * scale;
  for (auto& v : l.b) v = 0.1 * (2.0 * uniform(g) - 1.0);
  return l;
}

std::vector<double> apply(const Layer& l, const std::vector<double>& x, bool relu) {
  std::vector<double> y(l.out);
  for (int o = 0; o < l.out; ++o) {
    double s = l.b[o];
    for (int i = 0; i < l.in; ++i) s += l.w[static_cast<std::size_t>(o) * l.in + i] * x[i];
    y[o] = relu ? std::max(0.0, s) : s;
  }
  return y;
}

std::vector<double> pixels(const Image& img, int grid) {
  std::vector<double> sum(static_cast<std::size_t>(grid) * grid, 0.0), n(sum.size(), 0.0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double v = 0.0;
      const int ch = std::min(img.channels(), 3);
      for (int c = 0; c < ch; ++c) v += img.at(x, y, c);
      const auto cell = static_cast<std::size_t>(y * grid / img.height()) * grid + x * grid / img.width();
      sum[cell] += v / (255.0 * ch);
      n[cell] += 1.0;
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = n[i] > 0 ? sum[i] / n[i] - 0.5 : 0.0;
  return sum;
}

std::string depth_tag(int layer, int depth) { return std::to_string(100 * (layer + 1) / depth); }

}  // namespace

int write_synthetic_model(const SyntheticModel& m, const fs::path& stimulus_dir, const fs::path& out_dir) {
  std::mt19937_64 g(m.seed);
  std::vector<Layer> layers;
  for (int d = 0; d < m.depth; ++d) layers.push_back(random_layer(g, d == 0 ? m.grid * m.grid : m.units, m.units));

  std::vector<fs::path> manifests;
  for (const auto& entry : fs::directory_iterator(stimulus_dir)) {
    if (fs::exists(entry.path() / "manifest.tsv")) manifests.push_back(entry.path() / "manifest.tsv");
  }
  std::sort(manifests.begin(), manifests.end());

  int written = 0;
  for (const auto& manifest : manifests) {
    const StimulusSet set = load_external_set(manifest);
    const std::string prop(property_name(set.property));
    std::vector<std::string> ids;
    std::vector<std::vector<std::vector<double>>> per_layer(m.depth);
    for (const auto& s : set.images) {
      ids.push_back(s.id);
      auto h = pixels(s.image, m.grid);
      for (int d = 0; d < m.depth; ++d) {
        h = apply(layers[d], h, true);
        per_layer[d].push_back(h);
      }
    }
    auto flat = [](const std::vector<std::vector<double>>& rows) {
      std::vector<float> out;
      for (const auto& r : rows) {
        for (double v : r) out.push_back(static_cast<float>(v));
      }
      return out;
    };

    if (set.property == PropertyId::SceneIncongruence) {
      // classifier head over the last layer; one class per label in the manifest
      int n_classes = 2;
      for (const auto& r : set.manifest) n_classes = std::max(n_classes, static_cast<int>(*r.value) + 1);
      std::mt19937_64 hg(m.seed ^ 0x5eedULL);
      const Layer head = random_layer(hg, m.units, n_classes);
      std::vector<float> probs;
      for (const auto& h : per_layer.back()) {
        auto z = apply(head, h, false);
        const double mx = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (auto& v : z) total += (v = std::exp(v - mx));
        std::vector<float> p;
        for (double v : z) p.push_back(static_cast<float>(v / total));
        // renormalize in float so rows sum to 1 within tolerance
        float fs = 0.0f;
        for (float v : p) fs += v;
        for (float v : p) probs.push_back(v / fs);
      }
      std::map<int, std::string> labels;
      for (int k = 0; k < n_classes; ++k) labels[k] = "class" + std::to_string(k);
      write_container(ActivationContainer(m.model_id, "head", ContainerKind::ClassProbabilities, ids,
                                          static_cast<std::size_t>(n_classes), std::move(probs), labels),
                      out_dir / prop);
      ++written;
      continue;
    }

    write_container(ActivationContainer(m.model_id, depth_tag(m.depth - 1, m.depth), ContainerKind::Activations, ids,
                                        static_cast<std::size_t>(m.units), flat(per_layer.back())),
                    out_dir / prop);
    ++written;
    if (m.layerwise) {
      for (int d = 0; d < m.depth; ++d) {
        const auto tag = depth_tag(d, m.depth);
        write_container(ActivationContainer(m.model_id, tag, ContainerKind::Activations, ids,
                                            static_cast<std::size_t>(m.units), flat(per_layer[d])),
                        out_dir / "layers" / tag / prop);
        ++written;
      }
    }
  }
  return written;
}

void write_toy_scene_assets(const fs::path& dir, int n_objects, std::uint64_t seed) {
  fs::create_directories(dir);
  std::mt19937_64 g(seed);
  std::string table = "object\tlabel\tcongruent_scene\tincongruent_scene\n";
  for (int i = 0; i < n_objects; ++i) {
    Image obj(48, 48, 4, 0);
    const auto shade = static_cast<std::uint8_t>(40 + 170 * uniform(g));
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        const bool inside = (x - 24) * (x - 24) + (y - 24) * (y - 24) < 20 * 20 - 150 * (i % 3);
        for (int c = 0; c < 3; ++c) obj.at(x, y, c) = shade;
        obj.at(x, y, 3) = inside ? 255 : 0;
      }
    }
    auto scene = [&](bool congruent) {
      Image s(64, 64, 3, 0);
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          const int v = congruent ? (x * 2 + i * 20) % 256 : (y * 3 + i * 50) % 256;
          for (int c = 0; c < 3; ++c) s.at(x, y, c) = static_cast<std::uint8_t>((v + 60 * c) % 256);
        }
      }
      return s;
    };
    const std::string stem = "obj" + std::to_string(i);
    write_png(dir / (stem + ".png"), obj);
    write_png(dir / (stem + "_scene_c.png"), scene(true));
    write_png(dir / (stem + "_scene_i.png"), scene(false));
    table += stem + ".png\t" + std::to_string(i % 4) + "\t" + stem + "_scene_c.png\t" + stem + "_scene_i.png\n";
  }
  write_text_file(dir / "assets.tsv", table);
}

}  // namespace bpm::synth
