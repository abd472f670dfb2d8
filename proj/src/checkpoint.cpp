#include "scn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace scn {

namespace {

constexpr const char* kFormatName = "scn-checkpoint";

void put_f64(std::ostream& os, double x)
{
    const auto bits = std::bit_cast<std::uint64_t>(x);
    char bytes[8];
    for (int i = 0; i < 8; ++i)
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(bytes, 8);
}

double get_f64(std::istream& is)
{
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8))
        throw ConfigError("checkpoint: truncated binary payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

void put_vec(std::ostream& os, const Vec& v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i)
        put_f64(os, v[i]);
}

Vec get_vec(std::istream& is, Eigen::Index n)
{
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = get_f64(is);
    return v;
}

}  // namespace

TrainedPolicy Checkpoint::trained() const
{
    return TrainedPolicy{unflatten(params, arch), normalizer};
}

Checkpoint make_checkpoint(const TrainedPolicy& p, TrainMode mode, nlohmann::json meta)
{
    return Checkpoint{p.policy.arch(), mode, p.policy.params(), p.normalizer, std::move(meta)};
}

void write_checkpoint(std::ostream& os, const Checkpoint& c)
{
    if (static_cast<std::size_t>(c.params.size()) != c.arch.param_count())
        throw ConfigError("checkpoint: parameter vector does not match the architecture");
    nlohmann::json header = {
        {"format", kFormatName},
        {"version", kCheckpointVersion},
        {"arch", c.arch.to_json()},
        {"mode", std::string(to_string(c.mode))},
        {"param_count", c.params.size()},
        {"normalizer", nullptr},
        {"meta", c.meta},
    };
    if (c.normalizer)
        header["normalizer"] = {{"dim", c.normalizer->dim()}, {"count", c.normalizer->count()}};
    os << header.dump() << '\n';
    put_vec(os, c.params);
    if (c.normalizer) {
        put_vec(os, c.normalizer->mean());
        put_vec(os, c.normalizer->m2());
    }
    if (!os)
        throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw ConfigError("checkpoint: missing header line");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: header is not valid JSON: ") + e.what());
    }
    try {
        if (h.at("format").get<std::string>() != kFormatName)
            throw ConfigError("checkpoint: unknown format '" + h.at("format").get<std::string>() + "'");
        const int version = h.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
        Checkpoint c;
        c.arch = Architecture::from_json(h.at("arch"));
        c.mode = parse_train_mode(h.at("mode").get<std::string>());
        const auto n = h.at("param_count").get<std::int64_t>();
        if (n < 0 || static_cast<std::size_t>(n) != c.arch.param_count())
            throw ConfigError("checkpoint: param_count " + std::to_string(n) + " does not match the architecture ("
                              + std::to_string(c.arch.param_count()) + ")");
        c.params = get_vec(is, n);
        if (const auto& nj = h.at("normalizer"); !nj.is_null()) {
            const int dim = nj.at("dim").get<int>();
            const auto count = nj.at("count").get<std::int64_t>();
            if (dim != c.arch.state_dim)
                throw ConfigError("checkpoint: normalizer dimension does not match the architecture");
            Vec mean = get_vec(is, dim);
            Vec m2 = get_vec(is, dim);
            c.normalizer.emplace(count, std::move(mean), std::move(m2));
        }
        if (h.contains("meta"))
            c.meta = h.at("meta");
        if (is.peek() != std::char_traits<char>::eof())
            throw ConfigError("checkpoint: trailing bytes after payload");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: malformed header: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    write_checkpoint(os, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw MissingArtifactError("checkpoint not found: " + path.string());
    try {
        return read_checkpoint(is);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace scn
