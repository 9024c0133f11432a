#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voxgan/config.hpp"
#include "voxgan/trainer.hpp"

namespace voxgan {

namespace fs = std::filesystem;

inline constexpr char kPreprocessManifest[] = "preprocess_manifest.tsv";
inline constexpr char kAugmentManifest[] = "augment_manifest.tsv";
inline constexpr char kTrainLog[] = "train_log.tsv";
inline constexpr char kConfigEcho[] = "resolved_config.txt";
inline constexpr char kFinalCheckpoint[] = "final.vgan";

// Writes the resolved configuration beside a command's outputs.
void write_config_echo(const RunConfig& cfg, const fs::path& dir);

// Writes cfg.synth_count phantom volumes synth_NNN.nii.gz into out_dir.
std::vector<fs::path> cmd_synthdata(const RunConfig& cfg, const fs::path& out_dir);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  std::string split;  // "train" or "eval"
};

// read -> downsample_by_2 -> center_crop(cfg.crop) -> normalize -> write, per
// NIfTI file in in_dir. The last cfg.eval_count files in sorted order are
// marked "eval". Unreadable files are skipped with a warning. Returns the
// manifest path.
fs::path cmd_preprocess(const fs::path& in_dir, const fs::path& out_dir,
                        const RunConfig& cfg);
std::vector<ManifestEntry> read_preprocess_manifest(const fs::path& manifest);

// cfg.augment_k rotated copies of every "train" entry, written to out_dir.
fs::path cmd_augment(const fs::path& manifest, const fs::path& out_dir,
                     const RunConfig& cfg);

// Loads the training volumes listed by an augment or preprocess manifest and
// reduces them to the target resolution: [N, 1, R, R, R].
Tensor load_training_set(const fs::path& manifest, int target_stage);

struct TrainOptions {
  std::optional<fs::path> resume;
  std::int64_t max_steps = -1;
  bool dry_run = false;
};

struct TrainResult {
  std::int64_t steps = 0;
  bool finished = false;
  std::optional<fs::path> final_checkpoint;
  std::string plan;  // filled by dry runs
};

// Writes train_log.tsv, checkpoints/step_NNNNNNNN.vgan and final.vgan. A dry
// run only validates and describes; its manifest may be empty.
TrainResult cmd_train(const fs::path& manifest, const fs::path& out_dir,
                      const RunConfig& cfg, const TrainOptions& options);

// Human-readable stage/phase/step summary of a schedule.
std::string describe_schedule(const TrainConfig& cfg);

// sample_NNN.nii.gz plus three slice images per volume.
std::vector<fs::path> cmd_generate(const fs::path& checkpoint,
                                   const fs::path& out_dir,
                                   const RunConfig& cfg);

}  // namespace voxgan
