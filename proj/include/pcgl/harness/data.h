// data.h
// Corpus-to-splits preparation: recording standardization, window assembly,
// patient-stratified splits, quality filtering, oversampling plans, and the
// on-disk prepared-dataset layout consumed by the trainers.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcgl/substrate/tensor.h"
#include "pcgl/views/augment.h"
#include "pcgl/windows/windows.h"

namespace pcgl::harness {

struct PreparedDataset {
    windows::SplitAssignment split;
    std::vector<windows::Window> train, val, test;
    // Full-train oversampling plan, stored for provenance. Trainers recompute
    // the plan on their actual labeled subset.
    std::vector<std::pair<int, views::AugmentationRecipe>> oversample_plan;
    int dropped_quality = 0;
    int skipped_intervals = 0;
    int n_recordings = 0;
};

// Reads the corpus manifest, z-scores each recording, assembles quality-
// checked 4000-sample windows and splits them 60/20/20 by patient.
PreparedDataset prepare_dataset(const std::string& corpus_dir, std::uint64_t seed);

void save_prepared(const std::string& dir, const PreparedDataset& ds, std::uint64_t seed);
PreparedDataset load_prepared(const std::string& dir);

// Nested stratified label subsets: per patient-level class, a seeded shuffle
// fixes a priority order and a fraction keeps the first ceil(f * n_c)
// patients, so smaller fractions are subsets of larger ones.
std::vector<std::string> label_fraction_patients(const std::vector<windows::Window>& train,
                                                 double fraction, std::uint64_t seed);

std::vector<windows::Window> filter_by_patients(const std::vector<windows::Window>& ws,
                                                const std::vector<std::string>& patients);

// Materializes the augmented copies of an oversampling plan.
std::vector<windows::Window> apply_oversample(
    const std::vector<windows::Window>& train,
    const std::vector<std::pair<int, views::AugmentationRecipe>>& plan);

// Tensor assembly for the encoders: raw waveforms [N, 4000] and eval-time
// log-mel spectrograms [N, 64, 59].
substrate::Tensor<float> wave_batch(const std::vector<windows::Window>& ws,
                                    const std::vector<int>& idx);
substrate::Tensor<float> spec_batch(const std::vector<windows::Window>& ws,
                                    const std::vector<int>& idx);
std::vector<int> window_labels(const std::vector<windows::Window>& ws);
int count_patients(const std::vector<windows::Window>& ws);

}  // namespace pcgl::harness
