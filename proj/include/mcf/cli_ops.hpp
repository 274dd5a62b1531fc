#pragma once

#include <string>

#include "mcf/io.hpp"
#include "mcf/trainer.hpp"

namespace mcf::cli {

// Layout sidecar: scalars plus normalization factors as key=value text;
// tile positions are rebuilt from the scalars on read.
void write_layout(const std::string& path, const TileLayout& layout);
TileLayout read_layout(const std::string& path);

// Run report as flat key=value text. Loss curves are comma-joined %.17g,
// so write -> read -> write is byte-identical.
io::KeyValueFile report_to_kv(const RunReport& report);
RunReport report_from_kv(const io::KeyValueFile& kv);

// Suffix network checkpoints as named-tensor files.
std::vector<io::NamedTensor> tensors_from_net(const SuffixNetwork& net);
SuffixNetwork net_from_tensors(const std::vector<io::NamedTensor>& tensors);

// Directory of PPM scenes listed by labels.csv (filename,label).
Dataset load_ppm_dataset(const std::string& dir);

// K square maps rendered into one grid image with 1-pixel separators.
RealGrid feature_montage(const std::vector<RealGrid>& maps);

// Subcommand bodies. Each consumes a flat key=value config, writes its
// artifacts, and returns the text the CLI prints. All outputs are pure
// functions of config plus inputs; reruns rewrite identical bytes.
std::string run_design(const io::KeyValueFile& cfg, const std::string& out_dir);
std::string run_optimize(const io::KeyValueFile& cfg, const std::string& out_dir);
std::string run_simulate(const io::KeyValueFile& cfg, const std::string& out_dir);

// Creates out_root/<config-hash>/ and fills it; *run_dir_out receives the
// directory path when non-null.
std::string run_train(const io::KeyValueFile& cfg, const std::string& out_root,
                      std::string* run_dir_out = nullptr);

std::string run_evaluate(const std::string& run_dir);
std::string run_export_orientations(const std::string& phase_path, const std::string& out_csv);
std::string run_report(const std::string& run_dir);

}  // namespace mcf::cli
