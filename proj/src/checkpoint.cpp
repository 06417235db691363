#include "symconv/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "symconv/error.hpp"
#include "symconv/serialize.hpp"

namespace symconv {

namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'S', 'Y', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw FormatError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model,
                     const CheckpointMeta& meta) {
    auto state = model.state();

    Json manifest;
    manifest["schema_version"] = 1;
    manifest["arch"] = Json::parse(meta.arch.to_json());
    manifest["filter_config"] = meta.filter_config;
    manifest["dataset"] = meta.dataset;
    manifest["seed"] = meta.seed;
    manifest["epochs_trained"] = meta.epochs_trained;
    Json entries = Json::array();
    for (const auto& s : state) {
        Json e;
        e["name"] = s.name;
        e["size"] = s.data->size();
        entries.push_back(std::move(e));
    }
    manifest["state"] = std::move(entries);
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(mtext.size()));
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& s : state) {
        Tensor t = Tensor::from_values({s.data->size()}, *s.data);
        write_tensor(out, t);
    }
    if (!out) throw FormatError("short write while saving checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + " is not a checkpoint (bad magic)");
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t mlen = read_u32(in, "manifest length");
    std::string mtext(mlen, '\0');
    if (!in.read(mtext.data(), mlen))
        throw FormatError("checkpoint truncated in manifest: " + path);

    Json manifest;
    try {
        manifest = Json::parse(mtext);
    } catch (const std::exception& e) {
        throw FormatError(std::string("checkpoint manifest does not parse: ") +
                          e.what());
    }

    LoadedCheckpoint loaded;
    loaded.meta.arch = ArchSpec::from_json(manifest.at("arch").dump());
    loaded.meta.filter_config = manifest.value("filter_config", "standard");
    loaded.meta.dataset = manifest.value("dataset", "");
    loaded.meta.seed = manifest.value("seed", std::uint64_t{0});
    loaded.meta.epochs_trained = manifest.value("epochs_trained", 0);
    loaded.model = build_model(loaded.meta.arch,
                               FilterConfig::from_token(loaded.meta.filter_config));

    auto state = loaded.model.state();
    const auto& entries = manifest.at("state");
    if (entries.size() != state.size())
        throw FormatError("checkpoint has " + std::to_string(entries.size()) +
                          " state entries, model expects " +
                          std::to_string(state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) {
        const std::string name = entries[i].at("name").get<std::string>();
        if (name != state[i].name)
            throw FormatError("checkpoint state entry '" + name +
                              "' does not match model entry '" + state[i].name + "'");
        Tensor t = read_tensor_f32(in);
        if (t.size() != state[i].data->size())
            throw FormatError("checkpoint entry '" + name + "' has " +
                              std::to_string(t.size()) + " values, model expects " +
                              std::to_string(state[i].data->size()));
        std::copy(t.data(), t.data() + t.size(), state[i].data->begin());
    }
    return loaded;
}

std::string class_mix_summary(const std::vector<SymmetryClass>& assignments) {
    std::string out;
    std::size_t i = 0;
    while (i < assignments.size()) {
        std::size_t j = i;
        while (j < assignments.size() && assignments[j] == assignments[i]) ++j;
        if (!out.empty()) out += ';';
        out += std::string(to_token(assignments[i])) + ":" + std::to_string(j - i);
        i = j;
    }
    return out;
}

std::vector<ProjectionRow> project_checkpoint(const std::string& src_path,
                                              const FilterConfig& target,
                                              const std::string& out_path) {
    LoadedCheckpoint src = load_checkpoint(src_path);
    for (ConvLayer* conv : src.model.conv_layers())
        for (SymmetryClass cls : conv->impl().assignments())
            if (cls != SymmetryClass::Standard)
                throw ConfigError(
                    "projection source must be an unconstrained checkpoint; " +
                    src_path + " already carries symmetry classes");

    Model projected = build_model(src.meta.arch, target);

    // Non-conv state copies across by name; conv free vectors are rebuilt by
    // projecting each full kernel slice onto its assigned class.
    auto src_state = src.model.state();
    auto dst_state = projected.state();
    if (src_state.size() != dst_state.size())
        throw Error("projection models disagree on state layout");
    std::vector<ConvLayer*> src_convs = src.model.conv_layers();
    std::vector<ConvLayer*> dst_convs = projected.conv_layers();
    for (std::size_t i = 0; i < src_state.size(); ++i) {
        if (src_state[i].name != dst_state[i].name)
            throw Error("projection state entry mismatch: " + src_state[i].name +
                        " vs " + dst_state[i].name);
        if (src_state[i].name.size() > 5 &&
            src_state[i].name.rfind(".free") == src_state[i].name.size() - 5)
            continue;  // handled below
        if (src_state[i].data->size() != dst_state[i].data->size())
            throw Error("projection state size mismatch at " + src_state[i].name);
        *dst_state[i].data = *src_state[i].data;
    }

    std::vector<ProjectionRow> rows;
    for (std::size_t li = 0; li < src_convs.size(); ++li) {
        const ConstrainedConv2dF& a = src_convs[li]->impl();
        ConstrainedConv2dF& b = dst_convs[li]->impl();
        const auto& geom = a.geometry();
        const int kk = geom.kernel_size * geom.kernel_size;
        const int slices = geom.in_slices();

        double resid_sq = 0.0, norm_sq = 0.0;
        std::vector<float> expanded(kk);
        for (int f = 0; f < geom.out_channels; ++f) {
            const TyingMap& map = b.map_for_filter(f);
            const float* full_base = a.free_weights().data() + a.filter_offset(f);
            float* free_base = b.free_weights().data() + b.filter_offset(f);
            for (int s = 0; s < slices; ++s) {
                const float* full = full_base + static_cast<std::size_t>(s) * kk;
                float* proj = free_base +
                              static_cast<std::size_t>(s) * map.free_count();
                for (int o = 0; o < map.free_count(); ++o) {
                    float acc = 0.0f;
                    for (auto [pos, sign] : map.orbits()[o].members)
                        acc += static_cast<float>(sign) * full[pos];
                    proj[o] = acc / static_cast<float>(map.orbits()[o].size());
                }
                map.expand_into(proj, expanded.data());
                for (int p = 0; p < kk; ++p) {
                    const double d = static_cast<double>(full[p]) - expanded[p];
                    resid_sq += d * d;
                    norm_sq += static_cast<double>(full[p]) * full[p];
                }
            }
        }
        ProjectionRow row;
        row.layer = "conv" + std::to_string(li);
        row.class_mix = class_mix_summary(b.assignments());
        row.residual = std::sqrt(resid_sq);
        row.relative = norm_sq > 0.0 ? std::sqrt(resid_sq / norm_sq) : 0.0;
        rows.push_back(std::move(row));
    }

    CheckpointMeta meta = src.meta;
    meta.filter_config = target.token;
    save_checkpoint(out_path, projected, meta);
    return rows;
}

}  // namespace symconv
