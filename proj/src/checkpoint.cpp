#include "skan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "skan/conv.hpp"

namespace skan {

void BinaryWriter::u8(std::uint8_t v) { raw(&v, 1); }

void BinaryWriter::u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    raw(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    raw(b, 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
}

void BinaryWriter::raw(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os_) throw FormatError("checkpoint: write failed");
}

void BinaryWriter::descriptor(const BasisDescriptor& d) {
    str(std::string(kind_name(d.kind)));
    i32(d.degree_or_grid);
    f64(d.lo);
    f64(d.hi);
    u32(static_cast<std::uint32_t>(d.hyperparams.size()));
    for (const auto& [k, v] : d.hyperparams) {
        str(k);
        f64(v);
    }
}

void BinaryWriter::tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) u64(d);
    for (double v : t.data()) f64(v);
    u8(t.requires_grad() ? 1 : 0);
}

// ---------------------------------------------------------------------------

void BinaryReader::raw(void* data, std::size_t n) {
    is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(is_.gcount());
    if (got != n) {
        throw FormatError("checkpoint: truncated at offset " + std::to_string(offset_ + got) + " (needed " +
                          std::to_string(n) + " bytes, got " + std::to_string(got) + ")");
    }
    offset_ += n;
}

std::uint8_t BinaryReader::u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
}

std::uint32_t BinaryReader::u32() {
    unsigned char b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64() {
    unsigned char b[8];
    raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
    const auto n = u32();
    if (n > (1u << 20)) throw FormatError("checkpoint: implausible string length at offset " + std::to_string(offset_));
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

BasisDescriptor BinaryReader::descriptor() {
    BasisDescriptor d;
    const auto name = str();
    try {
        d.kind = parse_kind(name);
    } catch (const ContractError&) {
        throw FormatError("checkpoint: unknown basis kind '" + name + "' at offset " + std::to_string(offset_));
    }
    d.degree_or_grid = i32();
    d.lo = f64();
    d.hi = f64();
    const auto n = u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto k = str();
        d.hyperparams.emplace_back(std::move(k), f64());
    }
    return d;
}

Tensor BinaryReader::tensor() {
    const auto nd = u32();
    if (nd > 8) throw FormatError("checkpoint: tensor rank " + std::to_string(nd) + " at offset " + std::to_string(offset_));
    Shape shape(nd);
    for (auto& d : shape) d = u64();
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = f64();
    const bool rg = u8() != 0;
    Tensor t = Tensor::from(std::move(shape), std::move(data));
    t.set_requires_grad(rg);
    return t;
}

// ---------------------------------------------------------------------------
// Layer sections

namespace {

void write_geometry(BinaryWriter& out, const ConvGeometry& g) {
    out.u64(g.in_ch);
    out.u64(g.out_ch);
    out.u64(g.kh);
    out.u64(g.kw);
    out.u64(g.stride);
    out.u64(g.padding);
}

ConvGeometry read_geometry(BinaryReader& in) {
    ConvGeometry g;
    g.in_ch = in.u64();
    g.out_ch = in.u64();
    g.kh = in.u64();
    g.kw = in.u64();
    g.stride = in.u64();
    g.padding = in.u64();
    return g;
}

void write_bundles(BinaryWriter& out, const std::vector<EdgeBundle>& bundles) {
    out.u64(bundles.size());
    for (const auto& b : bundles) {
        out.descriptor(b.descriptor);
        out.tensor(b.params);
    }
}

std::vector<EdgeBundle> read_bundles(BinaryReader& in) {
    const auto n = in.u64();
    std::vector<EdgeBundle> out;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto d = in.descriptor();
        out.push_back({std::move(d), in.tensor()});
    }
    return out;
}

void write_nodes(BinaryWriter& out, const std::vector<SelectableNode>& nodes) {
    out.u64(nodes.size());
    for (const auto& n : nodes) {
        out.u64(n.input_index);
        write_bundles(out, n.candidates);
        out.tensor(n.weights);
    }
}

std::vector<SelectableNode> read_nodes(BinaryReader& in) {
    const auto n = in.u64();
    std::vector<SelectableNode> out;
    for (std::uint64_t i = 0; i < n; ++i) {
        SelectableNode node;
        node.input_index = in.u64();
        node.candidates = read_bundles(in);
        node.weights = in.tensor();
        out.push_back(std::move(node));
    }
    return out;
}

}  // namespace

void Layer::write(BinaryWriter& out) const { out.str(kind()); }

void LinearLayer::write(BinaryWriter& out) const {
    out.str(kind());
    out.tensor(weight_);
    out.tensor(bias_);
}

void FixedKANLayer::write(BinaryWriter& out) const {
    out.str(kind());
    out.u64(out_dim_);
    write_bundles(out, bundles_);
}

void SelectableKANLayer::write(BinaryWriter& out) const {
    out.str(kind());
    out.u64(out_dim_);
    write_nodes(out, nodes_);
}

void ConvKANLayer::write(BinaryWriter& out) const {
    out.str(kind());
    write_geometry(out, geom_);
    write_bundles(out, bundles_);
}

void SelectableConvKANLayer::write(BinaryWriter& out) const {
    out.str(kind());
    write_geometry(out, geom_);
    write_nodes(out, nodes_);
}

void ClassicConvLayer::write(BinaryWriter& out) const {
    out.str(kind());
    write_geometry(out, geom_);
    out.tensor(weight_);
    out.tensor(bias_);
    out.u8(relu_ ? 1 : 0);
}

std::unique_ptr<Layer> read_layer(BinaryReader& in) {
    const auto at = in.offset();
    const auto kind = in.str();
    try {
        if (kind == "relu") return std::make_unique<ReLULayer>();
        if (kind == "maxpool2") return std::make_unique<MaxPool2Layer>();
        if (kind == "flatten") return std::make_unique<FlattenLayer>();
        if (kind == "linear") {
            auto w = in.tensor();
            return std::make_unique<LinearLayer>(std::move(w), in.tensor());
        }
        if (kind == "kan") {
            const auto out_dim = in.u64();
            return std::make_unique<FixedKANLayer>(out_dim, read_bundles(in));
        }
        if (kind == "skan") {
            const auto out_dim = in.u64();
            return std::make_unique<SelectableKANLayer>(out_dim, read_nodes(in));
        }
        if (kind == "conv_kan") {
            auto g = read_geometry(in);
            return std::make_unique<ConvKANLayer>(g, read_bundles(in));
        }
        if (kind == "sconv_kan") {
            auto g = read_geometry(in);
            return std::make_unique<SelectableConvKANLayer>(g, read_nodes(in));
        }
        if (kind == "conv") {
            auto g = read_geometry(in);
            auto w = in.tensor();
            auto b = in.tensor();
            const bool relu = in.u8() != 0;
            return std::make_unique<ClassicConvLayer>(g, std::move(w), std::move(b), relu);
        }
    } catch (const ContractError& e) {
        throw FormatError("checkpoint: invalid '" + kind + "' layer at offset " + std::to_string(at) + ": " + e.what());
    }
    throw FormatError("checkpoint: unknown layer kind '" + kind + "' at offset " + std::to_string(at));
}

void write_model(std::ostream& os, const Model& model) {
    BinaryWriter out(os);
    out.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.u32(kCheckpointVersion);
    out.u32(static_cast<std::uint32_t>(model.size()));
    for (std::size_t i = 0; i < model.size(); ++i) model.layer(i).write(out);
}

Model read_model(std::istream& is) {
    BinaryReader in(is);
    char magic[sizeof(kCheckpointMagic)];
    in.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw FormatError("checkpoint: bad magic at offset 0");
    const auto version = in.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " at offset 8");
    }
    const auto count = in.u32();
    Model m;
    for (std::uint32_t i = 0; i < count; ++i) m.add(read_layer(in));
    return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
    write_model(os, model);
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open " + path.string());
    return read_model(is);
}

}  // namespace skan
