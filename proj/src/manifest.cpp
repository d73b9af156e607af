#include "dcan/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcan/errors.hpp"

namespace dcan {

std::string git_blob_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-1 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PrerequisiteError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw ConfigError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + path.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("failed writing '" + path.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string file_hash(const std::filesystem::path& path) { return git_blob_hash(read_file(path)); }

ArtifactRef artifact_ref(const std::filesystem::path& path) {
    return {path.lexically_normal().generic_string(), file_hash(path)};
}

std::string Manifest::config_hash() const { return git_blob_hash(config.dump()); }

nlohmann::json Manifest::to_json() const {
    auto refs = [](const std::vector<ArtifactRef>& v) {
        nlohmann::json out = nlohmann::json::array();
        for (const ArtifactRef& r : v) out.push_back({{"path", r.path}, {"hash", r.hash}});
        return out;
    };
    return {{"command", command},  {"seed", seed},           {"config", config}, {"config_hash", config_hash()},
            {"inputs", refs(inputs)}, {"outputs", refs(outputs)}};
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    write_file(path, m.to_json().dump(2) + "\n");
}

}  // namespace dcan
