#include "dcdm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dcdm/png_io.hpp"
#include "dcdm/rng.hpp"

namespace fs = std::filesystem;

namespace dcdm {

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    throw std::logic_error("bad split");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw std::invalid_argument("unknown split '" + name + "'");
}

std::vector<const Sample*> Corpus::select(Split split, int dist_flag) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples)
        if (s.split == split && s.dist_flag == dist_flag) out.push_back(&s);
    return out;
}

std::vector<const Sample*> Corpus::all_of_split(Split split) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back(&s);
    return out;
}

std::vector<const Sample*> Corpus::training_view(Split split) const {
    if (split != Split::test) {
        for (const auto& s : samples)
            if (s.split == split && s.dist_flag != 0)
                throw std::logic_error("corpus invariant violated: OOD sample '" + s.id + "' in split " + split_name(split));
    }
    return select(split, 0);
}

void Corpus::compute_hash() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& s : samples) {
        h = fnv1a64(s.id.data(), s.id.size(), h);
        const int meta[3] = {s.label, static_cast<int>(s.split), s.dist_flag};
        h = fnv1a64(meta, sizeof(meta), h);
        h = fnv1a64(s.image.data(), static_cast<std::size_t>(s.image.size()) * sizeof(real), h);
    }
    content_hash = h;
}

void audit_ood_exclusion(const Corpus& corpus) {
    for (const auto& s : corpus.samples)
        if (s.dist_flag != 0 && s.split != Split::test)
            throw std::logic_error("OOD sample '" + s.id + "' assigned to split " + split_name(s.split));
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Blob {
    double x, y;        // center, pixels
    double sa, sb;      // axis sigmas
    double phi;         // orientation
    double amp;
};

// Every layout is a set of identical soft elliptical blobs; only the
// arrangement (topology) differs between classes.
std::vector<Blob> make_layout(int class_id, double cx, double cy, double scale, double rot, Rng& rng) {
    auto blob = [&](double bx, double by, double size_mul, double ori) {
        Blob b;
        b.x = bx;
        b.y = by;
        b.sa = (2.0 + rng.uniform(-0.25, 0.25)) * scale * size_mul;
        b.sb = (1.45 + rng.uniform(-0.2, 0.2)) * scale * size_mul;
        b.phi = ori;
        b.amp = rng.uniform(0.8, 1.0);
        return b;
    };
    auto ring = [&](int count, double radius, double phase, double size_mul) {
        std::vector<Blob> blobs;
        for (int i = 0; i < count; ++i) {
            const double jitter_a = rng.uniform(-0.16, 0.16);
            const double jitter_r = radius * (1.0 + rng.uniform(-0.1, 0.1));
            const double a = phase + rot + 2.0 * kPi * i / count + jitter_a;
            // blobs oriented tangentially to the ring
            blobs.push_back(blob(cx + jitter_r * scale * std::cos(a), cy + jitter_r * scale * std::sin(a), size_mul, a + kPi / 2));
        }
        return blobs;
    };
    auto line = [&](int count, double spacing, double angle, double size_mul) {
        std::vector<Blob> blobs;
        for (int i = 0; i < count; ++i) {
            const double d = (i - (count - 1) / 2.0) * spacing * scale * (1.0 + rng.uniform(-0.08, 0.08));
            blobs.push_back(blob(cx + d * std::cos(angle), cy + d * std::sin(angle), size_mul, angle + kPi / 2));
        }
        return blobs;
    };

    switch (class_id) {
        // ---- ID classes: closed rings (and ring + core) ----
        case 0: return ring(3, 8.0, 0.0, 1.05);
        case 1: return ring(5, 9.0, 0.3, 0.95);
        case 2: {
            auto blobs = ring(4, 9.0, 0.0, 0.95);
            blobs.push_back(blob(cx + rng.uniform(-1.0, 1.0), cy + rng.uniform(-1.0, 1.0), 1.1, rot));
            return blobs;
        }
        case 3: return ring(2, 6.5, 0.0, 1.35);
        case 4: return ring(6, 10.0, 0.15, 0.8);
        // ---- OOD classes: same primitive, different topology ----
        case 5: return line(3, 7.5, rot, 1.05);  // ring collapsed to a line
        case 6: {
            // nested pair of rings
            auto blobs = ring(3, 4.2, 0.0, 0.85);
            auto outer = ring(3, 10.5, kPi / 3, 0.85);
            blobs.insert(blobs.end(), outer.begin(), outer.end());
            return blobs;
        }
        case 7: {
            // open arc: half a ring
            std::vector<Blob> blobs;
            for (int i = 0; i < 4; ++i) {
                const double a = rot + kPi * i / 3.0 + rng.uniform(-0.12, 0.12);
                const double r = 9.0 * (1.0 + rng.uniform(-0.1, 0.1));
                Blob b = blob(cx + r * scale * std::cos(a), cy + r * scale * std::sin(a), 0.95, a + kPi / 2);
                blobs.push_back(b);
            }
            return blobs;
        }
        default:
            throw std::invalid_argument("render_layout: unknown class id " + std::to_string(class_id));
    }
}

// low-frequency multiplicative speckle: bilinear interp of a coarse grid
void apply_speckle(Tensor& canvas, int size, double amp, Rng& rng) {
    constexpr int kGrid = 9;
    double grid[kGrid][kGrid];
    for (auto& row : grid)
        for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    const double step = static_cast<double>(size - 1) / (kGrid - 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double gy = y / step, gx = x / step;
            const int iy = std::min(static_cast<int>(gy), kGrid - 2);
            const int ix = std::min(static_cast<int>(gx), kGrid - 2);
            const double fy = gy - iy, fx = gx - ix;
            const double n = grid[iy][ix] * (1 - fy) * (1 - fx) + grid[iy + 1][ix] * fy * (1 - fx) +
                             grid[iy][ix + 1] * (1 - fy) * fx + grid[iy + 1][ix + 1] * fy * fx;
            real& v = canvas[static_cast<std::int64_t>(y) * size + x];
            v = std::clamp(v * (1.0 + amp * n), 0.0, 1.0);
        }
    }
}

}  // namespace

Tensor render_layout(int class_id, int image_size, double speckle_amp, std::uint64_t sample_seed) {
    if (image_size < 16) throw std::invalid_argument("render_layout: image_size too small");
    Rng rng(sample_seed);
    const double half = image_size / 2.0;
    const double unit = image_size / 32.0;  // layout coordinates assume a 32px canvas
    const double cx = half + rng.uniform(-1.5, 1.5) * unit;
    const double cy = half + rng.uniform(-1.5, 1.5) * unit;
    const double scale = rng.uniform(0.85, 1.15) * unit;
    const double rot = rng.uniform(0.0, 2.0 * kPi);

    auto blobs = make_layout(class_id, cx, cy, scale, rot, rng);

    Tensor canvas({image_size, image_size, 1});
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            double v = 0;
            for (const auto& b : blobs) {
                const double dx = x - b.x, dy = y - b.y;
                const double u = dx * std::cos(b.phi) + dy * std::sin(b.phi);
                const double w = -dx * std::sin(b.phi) + dy * std::cos(b.phi);
                v += b.amp * std::exp(-(u * u / (2 * b.sa * b.sa) + w * w / (2 * b.sb * b.sb)));
            }
            canvas[static_cast<std::int64_t>(y) * image_size + x] = std::min(v, 1.0);
        }
    }
    apply_speckle(canvas, image_size, speckle_amp, rng);
    for (std::int64_t i = 0; i < canvas.size(); ++i) canvas[i] = canvas[i] * 2.0 - 1.0;
    return canvas;
}

Corpus generate_toy(const ToyDataConfig& config, std::uint64_t seed) {
    if (config.train_per_class <= 0 || config.val_per_class <= 0 || config.test_per_class <= 0 ||
        config.ood_test_per_class <= 0)
        throw std::invalid_argument("generate_toy: per-class counts must be positive");
    if (config.id_classes != 5 || config.ood_classes != 3)
        throw std::invalid_argument("generate_toy: layout set defines 5 ID and 3 OOD classes");

    Corpus corpus;
    corpus.image_size = config.image_size;
    corpus.n_id_classes = config.id_classes;
    corpus.n_ood_classes = config.ood_classes;
    corpus.seed = seed;

    std::uint64_t index = 0;
    auto emit = [&](int class_id, Split split, int dist_flag, int count) {
        for (int i = 0; i < count; ++i, ++index) {
            Sample s;
            std::ostringstream id;
            id << (dist_flag ? "ood" : "id") << class_id << "_" << split_name(split) << "_" << std::setfill('0')
               << std::setw(5) << i;
            s.id = id.str();
            s.image = render_layout(class_id, config.image_size, config.speckle_amp, mix_seed(seed, index));
            s.label = class_id;
            s.split = split;
            s.dist_flag = dist_flag;
            corpus.samples.push_back(std::move(s));
        }
    };

    for (int c = 0; c < config.id_classes; ++c) {
        emit(c, Split::train, 0, config.train_per_class);
        emit(c, Split::val, 0, config.val_per_class);
        emit(c, Split::test, 0, config.test_per_class);
    }
    for (int c = 0; c < config.ood_classes; ++c)
        emit(config.id_classes + c, Split::test, 1, config.ood_test_per_class);

    audit_ood_exclusion(corpus);
    corpus.compute_hash();
    return corpus;
}

std::string export_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    const std::string manifest_path = (fs::path(dir) / "manifest.csv").string();
    std::ofstream manifest(manifest_path);
    if (!manifest) throw std::runtime_error("export_corpus: cannot write " + manifest_path);
    manifest << "relative_path,label,split,dist_flag\n";
    for (const auto& s : corpus.samples) {
        const std::string rel = s.id + ".png";
        write_png_gray((fs::path(dir) / rel).string(), s.image);
        manifest << rel << "," << s.label << "," << split_name(s.split) << "," << (s.dist_flag ? "OOD" : "ID") << "\n";
    }
    return manifest_path;
}

Corpus load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();

    Corpus corpus;
    std::string line;
    int row = 0;
    std::vector<std::string> errors;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        if (row == 1 && line.rfind("relative_path", 0) == 0) continue;  // header
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 4) {
            errors.push_back("row " + std::to_string(row) + ": expected 4 fields, got " + std::to_string(fields.size()));
            continue;
        }
        Sample s;
        try {
            s.label = std::stoi(fields[1]);
            s.split = split_from_name(fields[2]);
            if (fields[3] == "ID")
                s.dist_flag = 0;
            else if (fields[3] == "OOD")
                s.dist_flag = 1;
            else
                throw std::invalid_argument("dist_flag must be ID or OOD, got '" + fields[3] + "'");
            const fs::path img_path = root / fields[0];
            if (!fs::exists(img_path)) throw std::runtime_error("missing file " + img_path.string());
            s.image = read_png_gray(img_path.string());
            s.id = fs::path(fields[0]).stem().string();
        } catch (const std::exception& e) {
            errors.push_back("row " + std::to_string(row) + ": " + e.what());
            continue;
        }
        if (corpus.image_size == 0) {
            corpus.image_size = s.image.dim(0);
        } else if (s.image.dim(0) != corpus.image_size || s.image.dim(1) != corpus.image_size) {
            errors.push_back("row " + std::to_string(row) + ": image shape " + s.image.shape_str() +
                             " inconsistent with corpus size " + std::to_string(corpus.image_size));
            continue;
        }
        if (s.dist_flag == 0)
            corpus.n_id_classes = std::max(corpus.n_id_classes, s.label + 1);
        corpus.samples.push_back(std::move(s));
    }
    if (!errors.empty()) {
        std::string msg = "load_manifest: " + std::to_string(errors.size()) + " bad row(s):";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }
    for (const auto& s : corpus.samples)
        if (s.dist_flag == 1) corpus.n_ood_classes = std::max(corpus.n_ood_classes, s.label - corpus.n_id_classes + 1);
    corpus.compute_hash();
    return corpus;
}

}  // namespace dcdm
