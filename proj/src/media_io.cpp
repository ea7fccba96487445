#include "collagen/media_io.hpp"

#include <openssl/evp.h>
#include <png.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <system_error>

namespace collagen {

namespace {

extern "C" void png_append(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

extern "C" void png_flush_noop(png_structp) {}

extern "C" [[noreturn]] void png_fail(png_structp png, png_const_charp message) {
    *static_cast<std::string*>(png_get_error_ptr(png)) = message;
    png_longjmp(png, 1);
}

// Fixed filter and fast deflate: encoding dominates dataset writing, and
// fixed settings keep the bytes reproducible.
template <typename Image>
Bytes encode_png_impl(const Image& image, int color_type, int channels) {
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    if (!png) throw Error("png encode failed: out of memory");
    png_infop info = png_create_info_struct(png);
    Bytes out;
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png encode failed: " + message);
    }
    out.reserve(static_cast<std::size_t>(image.width()) * image.height() * channels / 2 + 1024);
    png_set_write_fn(png, &out, png_append, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_set_compression_level(png, 1);
    png_write_info(png, info);
    auto* base = reinterpret_cast<png_bytep>(const_cast<void*>(static_cast<const void*>(image.pixels().data())));
    for (int y = 0; y < image.height(); ++y) {
        rows[static_cast<std::size_t>(y)] = base + static_cast<std::size_t>(y) * image.width() * channels;
    }
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return out;
}

template <typename Image>
Image decode_png_impl(std::span<const std::uint8_t> bytes, png_uint_32 format) {
    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
        throw Error(std::string("png decode failed: ") + desc.message);
    }
    desc.format = format;
    if (desc.width == 0 || desc.height == 0 || desc.width > 1u << 15 || desc.height > 1u << 15) {
        png_image_free(&desc);
        throw Error("png decode failed: unsupported dimensions");
    }
    Image image(static_cast<int>(desc.width), static_cast<int>(desc.height));
    // A neutral black background is only consulted when an alpha source is
    // flattened into RGB.
    png_color background{0, 0, 0};
    if (!png_image_finish_read(&desc, &background, image.pixels().data(), 0, nullptr)) {
        png_image_free(&desc);
        throw Error(std::string("png decode failed: ") + desc.message);
    }
    // libpng reports truncated IDAT streams as warnings.
    if (PNG_IMAGE_FAILED(desc) || (desc.warning_or_error & PNG_IMAGE_WARNING) != 0) {
        throw Error(std::string("png decode failed: ") + desc.message);
    }
    return image;
}

struct DigestCtx {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    ~DigestCtx() { EVP_MD_CTX_free(ctx); }
};

}  // namespace

Bytes encode_png(const RgbImage& image) { return encode_png_impl(image, PNG_COLOR_TYPE_RGB, 3); }
Bytes encode_png(const RgbaImage& image) { return encode_png_impl(image, PNG_COLOR_TYPE_RGBA, 4); }

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
    return decode_png_impl<RgbImage>(bytes, PNG_FORMAT_RGB);
}

RgbaImage decode_png_rgba(std::span<const std::uint8_t> bytes) {
    return decode_png_impl<RgbaImage>(bytes, PNG_FORMAT_RGBA);
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));

    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(tmp.c_str(), "wb"), &std::fclose);
    if (!file) throw Error("cannot write " + tmp.string());
    if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), file.get()) != bytes.size()) {
        file.reset();
        std::filesystem::remove(tmp);
        throw Error("short write to " + tmp.string());
    }
    if (std::fflush(file.get()) != 0 || ::fsync(::fileno(file.get())) != 0) {
        file.reset();
        std::filesystem::remove(tmp);
        throw Error("flush failed for " + tmp.string());
    }
    file.reset();

    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("rename failed for " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    DigestCtx d;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!d.ctx || EVP_DigestInit_ex(d.ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(d.ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(d.ctx, md, &len) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[md[i] >> 4];
        out[2 * i + 1] = hex[md[i] & 15];
    }
    return out;
}

std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

}  // namespace collagen
