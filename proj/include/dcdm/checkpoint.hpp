#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dcdm/tensor.hpp"

namespace dcdm {

/// Versioned binary model container: kind tag, string metadata (architecture
/// hyperparameters, lineage hashes), named parameter arrays, and a trailing
/// content hash validated on load. No timestamps, so identical runs produce
/// byte-identical files.
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::string kind;
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> params;
    std::uint64_t content_hash = 0;  // filled by save()/load()

    void save(const std::string& path);
    static Checkpoint load(const std::string& path);

    const Tensor& param(const std::string& name) const;
    std::string meta_at(const std::string& key) const;
    std::int64_t meta_int(const std::string& key) const;
    double meta_real(const std::string& key) const;
};

}  // namespace dcdm
