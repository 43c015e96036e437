#pragma once

// Run configuration: UTF-8 text, "[section]" headers and one "key = value"
// per line; '#' starts a comment, blank lines ignored. The schema is fixed:
// unknown sections or keys are rejected, and each command checks that the
// sections it needs are present with all their required keys. Errors carry
// the offending line number.

#include "gvt/armodel.hpp"
#include "gvt/common.hpp"
#include "gvt/vqvae.hpp"

#include <map>
#include <string>

namespace gvt {

class RunConfig {
public:
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_string(const std::string& text);

    bool has_section(const std::string& section) const;
    // throws ConfigError naming the missing section/key
    void require_sections(const std::vector<std::string>& sections) const;

    // typed accessors; the *_or variants fall back when the key is absent
    std::string get_string(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;
    std::string get_string_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const;
    int get_int_or(const std::string& section, const std::string& key, int fallback) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    // section bundles (each calls require_sections for what it reads)
    Alphabet data_alphabet() const;   // [data] alphabet = C,N,O,F
    int data_max_atoms() const;       // [data] max_atoms
    VqVaeConfig vqvae_config() const; // [vqvae] (+ alphabet from [data])
    ArConfig ar_config(int k_c) const; // [ar]; vocab derived from k_c
    TrainConfig train_config() const; // [train]
    uint64_t seed() const;            // [train] seed, default 1
    double sample_temperature() const;
    int sample_top_k() const;
    int sample_count() const;
    int sample_max_len() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, std::map<std::string, Entry>> sections_;

    const Entry* find(const std::string& section, const std::string& key) const;
    const Entry& must_find(const std::string& section, const std::string& key) const;
};

} // namespace gvt
