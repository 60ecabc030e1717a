#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fabfix/fabsim.hpp"
#include "fabfix/neural.hpp"
#include "fabfix/raster.hpp"

namespace fabfix {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

/// Positionally aligned (layout patch, fabricated patch) pairs with a
/// seeded 80:20 train/test assignment.
struct Dataset {
    int patch_size = 128;
    std::vector<std::uint8_t> layout;     // count * patch_size^2, blocked per patch
    std::vector<std::uint8_t> fabricated; // same layout as `layout`
    std::vector<Split> split;

    std::size_t count() const { return split.size(); }
    std::size_t patch_values() const { return static_cast<std::size_t>(patch_size) * patch_size; }
    const std::uint8_t* layout_patch(std::size_t i) const { return layout.data() + i * patch_values(); }
    const std::uint8_t* fabricated_patch(std::size_t i) const { return fabricated.data() + i * patch_values(); }
    std::vector<std::size_t> indices(Split s) const;
    std::size_t count(Split s) const;
};

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 10;      ///< early-stop window, epochs without test-BCE improvement
    std::uint64_t seed = 1; ///< drives weight init and per-epoch shuffles
    int dataset_stride = 32;
    int ensemble_size = 10;
    int patch_size = 128;
    double lr = 1e-3;
    int threads = 0; ///< ensemble-member parallelism; 0 = hardware concurrency

    void validate() const;
};

/// Ordered list of identically structured model instances.
struct Ensemble {
    enum class Role { Forward, Corrector };
    Role role = Role::Forward;
    std::vector<ModelWeights> members;
};

/// Fabricate every pattern with the oracle, co-slice layout and fabricated
/// rasters at the stride, and split 80:20 by a seeded permutation.
/// Patterns smaller than the patch raise a ShapeError.
Dataset build_dataset(const std::vector<Bitmap>& corpus, const FabParams& fab, int stride,
                      int patch_size = 128, std::uint64_t split_seed = 1);

/// Same, from pre-fabricated pairs (the hook for externally produced data).
Dataset build_dataset_from_pairs(const std::vector<std::pair<Bitmap, Bitmap>>& pairs, int stride,
                                 int patch_size = 128, std::uint64_t split_seed = 1);

struct EpochStats {
    int epoch = 0;
    double train_bce = 0.0;
    double test_bce = 0.0;
};

struct TrainResult {
    ModelWeights weights; ///< weights achieving the minimum recorded test BCE
    double best_test_bce = 0.0;
    int best_epoch = 0;
    std::vector<EpochStats> epochs;
};

/// Forward predictor: input layout patch, label fabricated patch.
TrainResult train_forward(const Dataset& dataset, const TrainConfig& config);

/// Independently trained corrector: input fabricated, label layout.
TrainResult train_inverse_independent(const Dataset& dataset, const TrainConfig& config);

/// Tandem-trained corrector: the frozen forward ensemble is chained after
/// the corrector and the composed output is compared against the input.
/// Gradients flow through the frozen members into the corrector only.
TrainResult train_inverse_tandem(const Dataset& dataset, const Ensemble& forward_ensemble,
                                 const TrainConfig& config);

enum class Regime { Forward, InverseIndependent, InverseTandem };

struct EnsembleResult {
    Ensemble ensemble;
    std::vector<TrainResult> members; ///< per-member stats; weights duplicated in `ensemble`
};

/// Train ensemble_size members with seeds seed..seed+size-1, each with an
/// independently shuffled dataset ordering. Members run concurrently.
EnsembleResult train_ensemble(Regime regime, const Dataset& dataset, const TrainConfig& config,
                              const Ensemble* forward_ensemble = nullptr);

/// Mean of the members' outputs for one batch.
Tensor4<float> ensemble_mean_forward(const Ensemble& ensemble, const Tensor4<float>& batch);

/// Gather dataset patches into a [B, patch, patch, 1] batch tensor.
Tensor4<float> gather_batch(const Dataset& dataset, const std::vector<std::size_t>& order,
                            std::size_t first, std::size_t count, bool from_layout);

/// One line per epoch: epoch,train_bce,test_bce.
void write_epoch_csv(const std::vector<EpochStats>& stats, const std::string& path);

/// Directory layout: ensemble.json (role, member file names) plus one
/// weight file per member.
void save_ensemble(const Ensemble& ensemble, const std::string& dir,
                   const std::vector<std::string>* member_meta_json = nullptr);
Ensemble load_ensemble(const std::string& dir);

} // namespace fabfix
