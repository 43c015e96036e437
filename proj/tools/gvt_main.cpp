// gvt: train, encode, sample and evaluate the two-stage molecular generator.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 data error (bad SMILES / bad file contents), 4 incompatible checkpoints.

#include "gvt/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"gvt - graph VQ-VAE + autoregressive molecular generator"};
    app.require_subcommand(1);

    std::string config, data, codes, out, model, ar_ckpt, vq_ckpt, train_data, axis;
    std::string alphabet_csv = "C,N,O,F";
    uint64_t seed = 1;
    bool has_seed = false;
    int count = 100, min_atoms = 2, max_atoms = 9, top_k = 0, max_len = 64;
    double temperature = 1.0;

    auto* tv = app.add_subcommand("train-vqvae", "train the graph VQ-VAE on a SMILES dataset");
    tv->add_option("--config", config, "run configuration file")->required();
    tv->add_option("--data", data, "training SMILES file, one molecule per line")->required();
    tv->add_option("--out", out, "checkpoint output path")->required();
    tv->add_option("--seed", seed, "override [train] seed")->each([&](const std::string&) {
        has_seed = true;
    });

    auto* ta = app.add_subcommand("train-ar", "train the code-sequence model");
    ta->add_option("--config", config, "run configuration file")->required();
    ta->add_option("--codes", codes, "code-sequence file from `encode`")->required();
    ta->add_option("--out", out, "checkpoint output path")->required();
    ta->add_option("--seed", seed, "override [train] seed")->each([&](const std::string&) {
        has_seed = true;
    });

    auto* en = app.add_subcommand("encode", "encode a SMILES dataset to code sequences");
    en->add_option("--model", model, "VQ-VAE checkpoint")->required();
    en->add_option("--data", data, "SMILES file")->required();
    en->add_option("--out", out, "code-sequence output path")->required();

    auto* sa = app.add_subcommand("sample", "generate molecules from trained checkpoints");
    sa->add_option("--ar", ar_ckpt, "code-sequence model checkpoint")->required();
    sa->add_option("--vqvae", vq_ckpt, "VQ-VAE checkpoint")->required();
    sa->add_option("--train-data", train_data, "training SMILES file (novelty reference)");
    sa->add_option("--out", out, "generated SMILES output path")->required();
    sa->add_option("--count", count, "number of sequences to sample");
    sa->add_option("--temperature", temperature, "softmax temperature (0 = greedy)");
    sa->add_option("--top-k", top_k, "top-k filter (0 = off)");
    sa->add_option("--max-len", max_len, "maximum framed sequence length");
    sa->add_option("--seed", seed, "sampling seed");

    auto* re = app.add_subcommand("reconstruct-eval", "VQ-VAE round-trip reconstruction report");
    re->add_option("--model", model, "VQ-VAE checkpoint")->required();
    re->add_option("--data", data, "SMILES file")->required();

    auto* ab = app.add_subcommand("ablate", "train matched variants along one design axis");
    ab->add_option("--config", config, "run configuration file")->required();
    ab->add_option("--data", data, "SMILES file")->required();
    ab->add_option("--axis", axis, "rope | ordering | codebook_size")->required();
    ab->add_option("--out", out, "CSV output path (optional)");
    ab->add_option("--seed", seed, "override [train] seed")->each([&](const std::string&) {
        has_seed = true;
    });

    auto* mt = app.add_subcommand("make-toy", "write a synthetic SMILES training corpus");
    mt->add_option("--out", out, "SMILES output path")->required();
    mt->add_option("--count", count, "number of distinct molecules");
    mt->add_option("--min-atoms", min_atoms, "minimum heavy-atom count");
    mt->add_option("--max-atoms", max_atoms, "maximum heavy-atom count");
    mt->add_option("--alphabet", alphabet_csv, "comma-separated element symbols");
    mt->add_option("--seed", seed, "corpus seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tv->parsed()) {
            gvt::cli_train_vqvae(config, data, out, seed, has_seed);
        } else if (ta->parsed()) {
            gvt::cli_train_ar(config, codes, out, seed, has_seed);
        } else if (en->parsed()) {
            gvt::cli_encode(model, data, out);
        } else if (sa->parsed()) {
            gvt::SampleArgs args;
            args.ar_ckpt = ar_ckpt;
            args.vqvae_ckpt = vq_ckpt;
            args.train_data = train_data;
            args.out_path = out;
            args.count = count;
            args.temperature = temperature;
            args.top_k = top_k;
            args.max_len = max_len;
            args.seed = seed;
            gvt::cli_sample(args);
        } else if (re->parsed()) {
            gvt::cli_reconstruct_eval(model, data);
        } else if (ab->parsed()) {
            gvt::cli_ablate(config, data, axis, out, seed, has_seed);
        } else if (mt->parsed()) {
            gvt::cli_make_toy(out, count, min_atoms, max_atoms, alphabet_csv, seed);
        }
    } catch (const gvt::ConfigError& e) {
        std::cerr << "config error";
        if (e.line > 0) std::cerr << " (line " << e.line << ")";
        std::cerr << ": " << e.what() << "\n";
        return 2;
    } catch (const gvt::CompatError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 4;
    } catch (const gvt::SmilesError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const gvt::DataError& e) {
        std::cerr << "data error";
        if (e.line > 0) std::cerr << " (line " << e.line << ")";
        std::cerr << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
