#include "edr/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "edr/common.hpp"
#include "edr/csv.hpp"
#include "edr/waveform_io.hpp"

namespace edr::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

namespace {

constexpr int kCheckpointVersion = 1;

struct BlobEntry {
    std::string name;
    std::vector<std::size_t> shape;
    const std::vector<double>* values;
    std::size_t first;
    std::size_t count;
};

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& dir, const nlohmann::json& metrics) {
    std::filesystem::create_directories(dir);
    std::vector<BlobEntry> entries;
    for (const auto& p : param_layout(state.spec)) entries.push_back({p.name, p.shape, &state.params, p.offset, p.size});
    if (!state.adam_m.empty()) {
        entries.push_back({"optimizer.m", {state.adam_m.size()}, &state.adam_m, 0, state.adam_m.size()});
        entries.push_back({"optimizer.v", {state.adam_v.size()}, &state.adam_v, 0, state.adam_v.size()});
    }

    nlohmann::json manifest = nlohmann::json::array();
    std::ofstream bin(dir / "model.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw DataError("cannot write " + (dir / "model.bin").string());
    std::size_t offset = 0;
    for (const auto& e : entries) {
        manifest.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}, {"count", e.count}});
        bin.write(reinterpret_cast<const char*>(e.values->data() + e.first),
                  static_cast<std::streamsize>(e.count * sizeof(double)));
        offset += e.count * sizeof(double);
    }
    if (!bin) throw DataError("short write to " + (dir / "model.bin").string());

    nlohmann::json meta = {{"format", "edr-checkpoint"},
                           {"version", kCheckpointVersion},
                           {"dtype", "float64-le"},
                           {"spec", state.spec.to_json()},
                           {"seed", state.seed},
                           {"epoch", state.epoch},
                           {"step", state.step},
                           {"param_count", state.params.size()},
                           {"metrics", metrics.is_null() ? nlohmann::json::object() : metrics},
                           {"tensors", manifest}};
    std::ofstream js(dir / "model.json", std::ios::trunc);
    if (!js) throw DataError("cannot write " + (dir / "model.json").string());
    js << meta.dump(2) << '\n';
}

ModelState load_checkpoint(const std::filesystem::path& dir) {
    const auto meta_path = dir / "model.json";
    if (!std::filesystem::exists(meta_path)) throw PrerequisiteError(meta_path.string(), "train");
    nlohmann::json meta;
    try {
        std::ifstream in(meta_path);
        meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(meta_path.string() + ": " + e.what());
    }
    if (meta.value("format", "") != "edr-checkpoint") throw DataError(meta_path.string() + ": not a checkpoint");
    if (meta.value("version", 0) != kCheckpointVersion)
        throw DataError(meta_path.string() + ": unsupported checkpoint version " + meta.value("version", nlohmann::json()).dump());

    ModelState s;
    try {
        s.spec = ModelSpec::from_json(meta.at("spec"));
        s.seed = meta.at("seed").get<std::uint64_t>();
        s.epoch = meta.at("epoch").get<std::size_t>();
        s.step = meta.at("step").get<std::uint64_t>();
    } catch (const std::exception& e) {
        throw DataError(meta_path.string() + ": " + e.what());
    }

    const auto bytes = read_file_bytes(dir / "model.bin");
    auto fetch = [&](const nlohmann::json& t) {
        const auto off = t.at("offset").get<std::size_t>();
        const auto count = t.at("count").get<std::size_t>();
        if (off + count * sizeof(double) > bytes.size())
            throw DataError("model.bin too short for tensor " + t.at("name").get<std::string>());
        std::vector<double> v(count);
        std::memcpy(v.data(), bytes.data() + off, count * sizeof(double));
        return v;
    };

    s.params.assign(count_params(s.spec), 0.0);
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& t : meta.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    for (const auto& p : param_layout(s.spec)) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw DataError("checkpoint lacks tensor " + p.name);
        const auto v = fetch(*it->second);
        if (v.size() != p.size) throw DataError("tensor " + p.name + " has the wrong size");
        std::copy(v.begin(), v.end(), s.params.begin() + static_cast<std::ptrdiff_t>(p.offset));
    }
    if (by_name.count("optimizer.m") && by_name.count("optimizer.v")) {
        s.adam_m = fetch(*by_name["optimizer.m"]);
        s.adam_v = fetch(*by_name["optimizer.v"]);
    } else {
        s.adam_m.assign(s.params.size(), 0.0);
        s.adam_v.assign(s.params.size(), 0.0);
    }
    if (!s.finite()) throw NumericError("checkpoint holds non-finite parameters");
    return s;
}

void write_loss_curve(std::span<const EpochRecord> curve, const std::filesystem::path& path) {
    CsvWriter w(path, {"epoch", "split", "mse"});
    for (const auto& r : curve) {
        w.field(r.epoch).field("train").field(r.train_mse).end_row();
        w.field(r.epoch).field("tune").field(r.tune_mse).end_row();
    }
}

}  // namespace edr::nn
