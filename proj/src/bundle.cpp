#include "ncood/error.hpp"
#include "ncood/tensor_store.hpp"

#include <fstream>
#include <sstream>

namespace ncood {

namespace fs = std::filesystem;

namespace {

constexpr const char* kStandardRoles[] = {"features", "labels", "weights", "bias"};
constexpr std::string_view kTensorPrefix = "tensor.";
constexpr std::string_view kDatasetKey = "dataset_name";

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::string manifest_key(const std::string& role) {
    return is_standard_role(role) ? role : std::string(kTensorPrefix) + role;
}

}  // namespace

bool is_standard_role(const std::string& role) {
    for (const auto* r : kStandardRoles) {
        if (role == r) return true;
    }
    return false;
}

const Tensor& Bundle::at(const std::string& role) const {
    auto it = tensors.find(role);
    if (it == tensors.end()) {
        throw ContractError("bundle \"" + manifest.dataset_name + "\" has no \"" + role + "\" tensor");
    }
    return it->second;
}

void save_tensor(const Tensor& t, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(t, out);
    out.flush();
    if (!out) throw IoError("failed to flush " + path.string());
}

Tensor load_tensor(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_tensor(in);
}

BundleManifest make_manifest(const std::string& dataset_name, const TensorMap& tensors) {
    BundleManifest m;
    m.dataset_name = dataset_name;
    for (const auto& [role, _] : tensors) m.entries[role] = role + ".nct";
    return m;
}

void validate_bundle(const BundleManifest& manifest, const TensorMap& tensors) {
    for (const auto& [role, _] : manifest.entries) {
        if (!tensors.count(role)) {
            throw ConsistencyError("manifest role \"" + role + "\" has no matching tensor");
        }
    }
    auto labels = tensors.find("labels");
    if (labels != tensors.end()) {
        auto features = tensors.find("features");
        if (features == tensors.end()) {
            throw ConsistencyError("bundle has labels but no features");
        }
        if (labels->second.rank() != 1) {
            throw ConsistencyError("labels must be 1-D");
        }
        const auto n = features->second.shape()[0];
        if (labels->second.shape()[0] != n) {
            throw ConsistencyError("labels length " + std::to_string(labels->second.shape()[0]) +
                                   " does not match features rows " + std::to_string(n));
        }
    }
}

std::string format_manifest(const BundleManifest& manifest) {
    std::ostringstream out;
    out << "# ncood bundle manifest\n";
    out << kDatasetKey << " = " << manifest.dataset_name << "\n";
    for (const auto& [role, path] : manifest.entries) {
        out << manifest_key(role) << " = " << path << "\n";
    }
    for (const auto& [key, value] : manifest.metadata) {
        out << key << " = " << value << "\n";
    }
    return out.str();
}

BundleManifest parse_manifest(std::istream& in) {
    BundleManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": expected \"key = value\"");
        }
        const auto key = trim(std::string_view(text).substr(0, eq));
        const auto value = trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": empty key");
        }
        if (key == kDatasetKey) {
            m.dataset_name = value;
        } else if (is_standard_role(key)) {
            m.entries[key] = value;
        } else if (key.starts_with(kTensorPrefix) && key.size() > kTensorPrefix.size()) {
            m.entries[key.substr(kTensorPrefix.size())] = value;
        } else {
            m.metadata[key] = value;
        }
    }
    return m;
}

fs::path write_bundle(const BundleManifest& manifest, const TensorMap& tensors, const fs::path& dir) {
    validate_bundle(manifest, tensors);
    for (const auto& [key, _] : manifest.metadata) {
        if (key == kDatasetKey || is_standard_role(key) || key.starts_with(kTensorPrefix)) {
            throw ContractError("metadata key \"" + key + "\" collides with a reserved manifest key");
        }
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create bundle directory " + dir.string() + ": " + ec.message());

    for (const auto& [role, rel] : manifest.entries) {
        if (fs::path(rel).is_absolute()) {
            throw ContractError("manifest path for \"" + role + "\" must be relative");
        }
        save_tensor(tensors.at(role), dir / rel);
    }
    const auto manifest_path = dir / kManifestFile;
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + manifest_path.string() + " for writing");
    out << format_manifest(manifest);
    if (!out) throw IoError("failed writing " + manifest_path.string());
    return manifest_path;
}

Bundle read_bundle(const fs::path& manifest_path) {
    const auto path = fs::is_directory(manifest_path) ? manifest_path / kManifestFile : manifest_path;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open bundle manifest " + path.string());
    Bundle b;
    b.manifest = parse_manifest(in);
    const auto dir = path.parent_path();
    for (const auto& [role, rel] : b.manifest.entries) {
        const auto file = fs::path(rel).is_absolute() ? fs::path(rel) : dir / rel;
        if (!fs::exists(file)) {
            throw IoError("bundle role \"" + role + "\" references missing file " + file.string());
        }
        try {
            b.tensors.emplace(role, load_tensor(file));
        } catch (const LengthError& e) {
            throw LengthError("bundle role \"" + role + "\": " + e.what(), e.expected(), e.actual());
        } catch (const FormatError& e) {
            throw FormatError("bundle role \"" + role + "\": " + e.what());
        }
    }
    validate_bundle(b.manifest, b.tensors);
    return b;
}

}  // namespace ncood
