#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "polseg/engine.hpp"

namespace polseg {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'S', 'G', 'B', 'N', 'D', 'L'};

template <typename T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(const std::string& buf, std::size_t& pos, const std::string& what) {
    if (pos + sizeof(T) > buf.size()) throw std::runtime_error("bundle truncated while reading " + what);
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
}

std::uint32_t crc_of(const std::string& buf, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(n)));
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
    nlohmann::json header;
    header["model"] = bundle.model.to_json();
    header["norm"] = bundle.norm.to_json();
    header["meta"] = {{"seed", bundle.meta.seed},
                      {"iterations", bundle.meta.iterations},
                      {"seconds", bundle.meta.seconds},
                      {"loss_curve", bundle.meta.loss_curve}};
    nlohmann::json shapes = nlohmann::json::array();
    for (int i = 0; i < bundle.params.size(); ++i)
        shapes.push_back({{"name", bundle.params.name(i)}, {"rows", bundle.params[i].rows()}, {"cols", bundle.params[i].cols()}});
    header["params"] = shapes;
    const std::string text = header.dump();

    std::string buf(kMagic, sizeof kMagic);
    put(buf, kBundleVersion);
    put(buf, static_cast<std::uint64_t>(text.size()));
    buf += text;
    for (int i = 0; i < bundle.params.size(); ++i) {
        const Mat& m = bundle.params[i];
        buf.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
    }
    put(buf, crc_of(buf, buf.size()));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write bundle " + path.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw std::runtime_error("write failed for bundle " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open bundle " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof kMagic + 16 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
        throw std::runtime_error(path.string() + ": not a model bundle");

    std::size_t pos = sizeof kMagic;
    const auto version = take<std::uint32_t>(buf, pos, "version");
    if (version != kBundleVersion)
        throw std::runtime_error(path.string() + ": unsupported bundle version " + std::to_string(version) +
                                 " (expected " + std::to_string(kBundleVersion) + ")");
    std::size_t crc_pos = buf.size() - sizeof(std::uint32_t);
    std::size_t p2 = crc_pos;
    const auto stored = take<std::uint32_t>(buf, p2, "checksum");
    if (stored != crc_of(buf, crc_pos)) throw std::runtime_error(path.string() + ": checksum mismatch, bundle is corrupt");

    const auto len = take<std::uint64_t>(buf, pos, "header length");
    if (pos + len > crc_pos) throw std::runtime_error(path.string() + ": bundle truncated in header");
    const nlohmann::json header = nlohmann::json::parse(buf.substr(pos, len));
    pos += len;

    ModelBundle b;
    b.model = ModelConfig::from_json(header.at("model"));
    b.norm = NormStats::from_json(header.at("norm"));
    const auto& meta = header.at("meta");
    b.meta.seed = meta.at("seed").get<std::uint64_t>();
    b.meta.iterations = meta.at("iterations").get<int>();
    b.meta.seconds = meta.at("seconds").get<double>();
    b.meta.loss_curve = meta.at("loss_curve").get<std::vector<double>>();
    for (const auto& s : header.at("params")) {
        const auto rows = s.at("rows").get<Eigen::Index>();
        const auto cols = s.at("cols").get<Eigen::Index>();
        const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
        if (pos + bytes > crc_pos) throw std::runtime_error(path.string() + ": bundle truncated in parameters");
        Mat m(rows, cols);
        std::memcpy(m.data(), buf.data() + pos, bytes);
        pos += bytes;
        b.params.add(s.at("name").get<std::string>(), std::move(m));
    }
    if (pos != crc_pos) throw std::runtime_error(path.string() + ": trailing bytes in bundle");

    // The stored names must match what the architecture expects.
    const ParameterSet expected = init_parameters(b.model, 0);
    if (expected.size() != b.params.size())
        throw std::runtime_error(path.string() + ": parameter count does not match the stored architecture");
    for (int i = 0; i < expected.size(); ++i) {
        const Mat& got = b.params.at(expected.name(i));
        if (got.rows() != expected[i].rows() || got.cols() != expected[i].cols())
            throw std::runtime_error(path.string() + ": shape mismatch for " + expected.name(i));
    }
    return b;
}

}  // namespace polseg
