#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dcan {

// SHA-1 of "blob <size>\0<content>", the hash git assigns to file contents.
std::string git_blob_hash(std::string_view content);
std::string file_hash(const std::filesystem::path& path);

struct ArtifactRef {
    std::string path;
    std::string hash;
};

ArtifactRef artifact_ref(const std::filesystem::path& path);

// Provenance written next to every artifact; with the listed inputs it is
// enough to reproduce the outputs exactly.
struct Manifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<ArtifactRef> inputs;
    std::vector<ArtifactRef> outputs;

    std::string config_hash() const;
    nlohmann::json to_json() const;
};

void write_manifest(const Manifest& m, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dcan
