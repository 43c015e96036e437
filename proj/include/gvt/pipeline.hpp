#pragma once

// End-to-end orchestration: toy corpus generation, the two-stage sampling
// path (AR codes -> VQ-VAE decode -> molecules), generation metrics, CLI
// command bodies, and the ablation harness. All persistence runs in float32.

#include "gvt/armodel.hpp"
#include "gvt/checkpoint.hpp"
#include "gvt/config.hpp"
#include "gvt/molgraph.hpp"
#include "gvt/vqvae.hpp"

#include <string>
#include <vector>

namespace gvt {

// incompatible checkpoints (K_c mismatch between stages) -> CLI exit 4
class CompatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Valence-respecting random molecules (chains, rings, branched trees) as
// SMILES, distinct under wl_hash.
std::vector<std::string> generate_toy_corpus(int count, int min_atoms, int max_atoms,
                                             const Alphabet& alpha, Rng& rng);

struct GenerationReport {
    int num_requested = 0;
    int num_generated = 0;
    int num_valid = 0;
    int num_unique = 0; // distinct wl_hash among valid
    int num_novel = 0;  // unique hashes absent from the training set
    double validity_pct = 0;
    double uniqueness_pct = 0; // among valid
    double novelty_pct = 0;    // among valid+unique
    int truncations = 0;
    double wall_seconds = 0;
    double temperature = 1.0;
    int top_k = 0;
    uint64_t seed = 0;
    bool novelty_reference = false; // training set supplied
};

std::string report_to_json(const GenerationReport& r);

struct GenerationOutput {
    std::vector<std::string> smiles; // valid molecules, generation order
    GenerationReport report;
};

// Samples `count` sequences, decodes each through the VQ-VAE, and scores
// validity/uniqueness/novelty. `training` may be empty (novelty then
// unreferenced).
GenerationOutput generate(const ArParams<float>& ar, VqVaeParams<float>& vq, int count,
                          double temperature, int top_k, int max_len, uint64_t seed,
                          const std::vector<MolGraph>& training);

// code-sequence text file: "#vocab=<K_c>" header, one molecule per line as
// space-separated raw code indices
void write_codes_file(const std::string& path, int k_c,
                      const std::vector<std::vector<int>>& codes);
struct CodesFile {
    int k_c = 0;
    std::vector<std::vector<int>> codes;
};
CodesFile read_codes_file(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& content);

struct AblateRow {
    std::string variant;
    double final_loss = 0;
    double held_recon_rate = 0; // percent
};

// Trains matched configs that differ only on `axis` (equal seeds/budgets) on
// an 80/20 split of `corpus`; reports held-out reconstruction per variant.
std::vector<AblateRow> run_ablation(const std::string& axis, const std::vector<MolGraph>& corpus,
                                    const VqVaeConfig& base_cfg, const TrainConfig& tc,
                                    uint64_t seed);

// CLI command bodies; throw ConfigError/DataError/CompatError, which the
// binary maps to exit codes 2/3/4.
void cli_train_vqvae(const std::string& config_path, const std::string& data_path,
                     const std::string& out_path, uint64_t seed_override, bool has_seed);
void cli_train_ar(const std::string& config_path, const std::string& codes_path,
                  const std::string& out_path, uint64_t seed_override, bool has_seed);
void cli_encode(const std::string& vqvae_ckpt, const std::string& data_path,
                const std::string& out_path);
struct SampleArgs {
    std::string ar_ckpt;
    std::string vqvae_ckpt;
    std::string train_data; // optional, for novelty
    std::string out_path;
    int count = 100;
    double temperature = 1.0;
    int top_k = 0;
    int max_len = 64;
    uint64_t seed = 1;
};
void cli_sample(const SampleArgs& args);
void cli_reconstruct_eval(const std::string& vqvae_ckpt, const std::string& data_path);
void cli_ablate(const std::string& config_path, const std::string& data_path,
                const std::string& axis, const std::string& out_path, uint64_t seed_override,
                bool has_seed);
void cli_make_toy(const std::string& out_path, int count, int min_atoms, int max_atoms,
                  const std::string& alphabet_csv, uint64_t seed);

} // namespace gvt
