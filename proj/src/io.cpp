#include "stv/io.hpp"

#include <fstream>
#include <iterator>

#include "binary.hpp"

namespace stv {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'V', '1'};

using detail::crc32;
using detail::Reader;
using detail::Writer;

void write_plane(Writer& wr, const GrayImage& img) {
    for (double v : img.values()) wr.f64(v);
}

GrayImage read_plane(Reader& rd, std::size_t w, std::size_t h) {
    std::vector<double> values(w * h);
    for (double& v : values) v = rd.f64();
    return GrayImage(w, h, std::move(values));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > UINT32_MAX) throw ContractError(std::string("container: ") + what + " exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
}

Writer header(ContainerKind kind, std::size_t w, std::size_t h) {
    Writer wr;
    for (char c : kMagic) wr.u8(static_cast<std::uint8_t>(c));
    wr.u8(static_cast<std::uint8_t>(kind));
    wr.u32(checked_u32(w, "width"));
    wr.u32(checked_u32(h, "height"));
    return wr;
}

std::vector<std::uint8_t> seal(Writer& wr, std::size_t payload_start) {
    auto& bytes = wr.data();
    const std::uint32_t crc = crc32(bytes.data() + payload_start, bytes.size() - payload_start);
    wr.u32(crc);
    return std::move(bytes);
}

struct Header {
    ContainerKind kind;
    std::size_t width, height, n;
};

// Validates magic, kind, declared size and CRC; leaves the reader at the payload.
Header open(Reader& rd, const std::vector<std::uint8_t>& bytes, ContainerKind expected) {
    for (char c : kMagic)
        if (rd.u8() != static_cast<std::uint8_t>(c)) throw FormatError("not an STV1 container (bad magic)");
    const std::uint8_t kind = rd.u8();
    if (kind > 2) throw FormatError("unknown container kind " + std::to_string(kind));
    Header hd{static_cast<ContainerKind>(kind), rd.u32(), rd.u32(), 0};
    if (hd.kind != expected)
        throw FormatError("container holds kind " + std::to_string(kind) + ", expected " +
                          std::to_string(static_cast<int>(expected)));
    if (hd.width == 0 || hd.height == 0) throw FormatError("container declares an empty raster");
    std::size_t planes = 1, extra = 0;
    if (hd.kind != ContainerKind::raster) {
        hd.n = rd.u32();
        planes = hd.kind == ContainerKind::stack ? hd.n + 1 : hd.n;
        extra = 2;
    }
    const std::size_t payload = (planes * hd.width * hd.height + extra) * 8;
    if (rd.remaining() != payload + 4)
        throw FormatError("container size mismatch: declared payload " + std::to_string(payload) + " bytes, found " +
                          std::to_string(rd.remaining() >= 4 ? rd.remaining() - 4 : 0));
    const std::size_t start = rd.pos();
    if (crc32(bytes.data() + start, payload) != detail::load_u32(bytes.data() + start + payload)) throw FormatError("container CRC mismatch");
    return hd;
}

}  // namespace

std::vector<std::uint8_t> encode(const GrayImage& img) {
    Writer wr = header(ContainerKind::raster, img.width(), img.height());
    const std::size_t start = wr.size();
    write_plane(wr, img);
    return seal(wr, start);
}

std::vector<std::uint8_t> encode(const SpectralStack& stack) {
    stack.validate();
    Writer wr = header(ContainerKind::stack, stack.width(), stack.height());
    wr.u32(checked_u32(stack.size(), "component count"));
    const std::size_t start = wr.size();
    for (const GrayImage& phi : stack.components) write_plane(wr, phi);
    write_plane(wr, stack.residual);
    wr.f64(stack.dt);
    wr.f64(stack.source_mean);
    return seal(wr, start);
}

std::vector<std::uint8_t> encode(const SignatureField& field) {
    Writer wr = header(ContainerKind::signature, field.width(), field.height());
    wr.u32(checked_u32(field.length(), "signature length"));
    const std::size_t start = wr.size();
    for (std::size_t k = 0; k < field.length(); ++k)
        for (std::size_t i = 0; i < field.pixels(); ++i) wr.f64(field.pixel(i)[k]);
    wr.f64(field.p_enh);
    wr.f64(field.enhanced ? 1.0 : 0.0);
    return seal(wr, start);
}

ContainerKind peek_kind(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 5 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw FormatError("not an STV1 container (bad magic)");
    if (bytes[4] > 2) throw FormatError("unknown container kind " + std::to_string(bytes[4]));
    return static_cast<ContainerKind>(bytes[4]);
}

GrayImage decode_raster(const std::vector<std::uint8_t>& bytes) {
    Reader rd(bytes);
    const Header hd = open(rd, bytes, ContainerKind::raster);
    try {
        return read_plane(rd, hd.width, hd.height);
    } catch (const ContractError& e) {
        throw FormatError(std::string("container payload invalid: ") + e.what());
    }
}

SpectralStack decode_stack(const std::vector<std::uint8_t>& bytes) {
    Reader rd(bytes);
    const Header hd = open(rd, bytes, ContainerKind::stack);
    try {
        SpectralStack stack;
        stack.components.reserve(hd.n);
        for (std::size_t k = 0; k < hd.n; ++k) stack.components.push_back(read_plane(rd, hd.width, hd.height));
        stack.residual = read_plane(rd, hd.width, hd.height);
        stack.dt = rd.f64();
        stack.source_mean = rd.f64();
        return stack;
    } catch (const ContractError& e) {
        throw FormatError(std::string("container payload invalid: ") + e.what());
    }
}

SignatureField decode_signature(const std::vector<std::uint8_t>& bytes) {
    Reader rd(bytes);
    const Header hd = open(rd, bytes, ContainerKind::signature);
    SignatureField field(hd.width, hd.height, hd.n);
    for (std::size_t k = 0; k < hd.n; ++k)
        for (std::size_t i = 0; i < field.pixels(); ++i) field.pixel(i)[k] = rd.f64();
    field.p_enh = rd.f64();
    const double flag = rd.f64();
    if (flag != 0.0 && flag != 1.0) throw FormatError("container payload invalid: bad enhanced flag");
    field.enhanced = flag == 1.0;
    return field;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError("cannot read " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("cannot write " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

GrayImage read_raster(const std::filesystem::path& path) {
    try {
        return decode_raster(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_raster(const std::filesystem::path& path, const GrayImage& img) { write_file(path, encode(img)); }

}  // namespace stv
