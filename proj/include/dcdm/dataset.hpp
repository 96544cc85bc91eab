#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcdm/tensor.hpp"

namespace dcdm {

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct Sample {
    std::string id;      // relative path stem, unique within a corpus
    Tensor image;        // [H,W,1] in [-1,1]
    int label = 0;       // ID: 0..n_id-1; OOD: n_id..n_id+n_ood-1 (reporting only)
    Split split = Split::train;
    int dist_flag = 0;   // 0 = ID, 1 = OOD
};

struct Corpus {
    std::vector<Sample> samples;
    int image_size = 0;
    int n_id_classes = 0;
    int n_ood_classes = 0;
    std::uint64_t seed = 0;
    std::uint64_t content_hash = 0;

    /// ID-only samples of a split; the view trainers are allowed to see.
    /// Asserts the OOD-exclusion invariant for train/val.
    std::vector<const Sample*> training_view(Split split) const;
    std::vector<const Sample*> select(Split split, int dist_flag) const;
    std::vector<const Sample*> all_of_split(Split split) const;

    void compute_hash();
};

struct ToyDataConfig {
    int image_size = 32;
    int id_classes = 5;
    int ood_classes = 3;
    int train_per_class = 1000;
    int val_per_class = 100;
    int test_per_class = 200;
    int ood_test_per_class = 200;
    double speckle_amp = 0.25;
};

/// Synthesize the desk-scale corpus: 5 ID blob-ring layouts with pose/scale/
/// deformation jitter and multiplicative speckle; 3 OOD layouts built from
/// the same blob primitive with different topology. Deterministic per seed.
Corpus generate_toy(const ToyDataConfig& config, std::uint64_t seed);

/// Render one layout directly (exposed for tests and figure dumps).
Tensor render_layout(int class_id, int image_size, double speckle_amp, std::uint64_t sample_seed);

/// Load a corpus from a manifest CSV with columns
/// relative_path,label,split,dist_flag. Images are 8-bit grayscale PNG.
Corpus load_manifest(const std::string& manifest_path);

/// Write PNGs plus manifest.csv under dir; returns the manifest path.
std::string export_corpus(const Corpus& corpus, const std::string& dir);

/// Audit pass: throws if any OOD sample carries split=train or split=val.
void audit_ood_exclusion(const Corpus& corpus);

}  // namespace dcdm
