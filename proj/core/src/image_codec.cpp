#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include "scalpnet/error.hpp"
#include "scalpnet/image.hpp"

// Format handling sits on libpng/libjpeg. Both are C libraries that report
// errors through setjmp/longjmp, so each wrapper keeps non-trivial C++
// objects out of the jump region and converts failures to scalpnet::Error.

namespace scalpnet {

namespace {

constexpr uint8_t kPngSig[4] = {0x89, 'P', 'N', 'G'};

bool looks_like_png(std::span<const uint8_t> bytes) {
    return bytes.size() >= 4 && std::memcmp(bytes.data(), kPngSig, 4) == 0;
}

bool looks_like_jpeg(std::span<const uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8;
}

struct PngReadState {
    const uint8_t* data;
    size_t size;
    size_t offset;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->offset + count > st->size) png_error(png, "truncated stream");
    std::memcpy(out, st->data + st->offset, count);
    st->offset += count;
}

void png_on_error(png_structp png, png_const_charp) {
    longjmp(png_jmpbuf(png), 1);
}

void png_on_warning(png_structp, png_const_charp) {}

RawImage decode_png(std::span<const uint8_t> bytes) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             png_on_error, png_on_warning);
    if (!png) throw Error("png decoder initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png decoder initialization failed");
    }

    RawImage img;
    std::vector<png_bytep> row_ptrs;
    PngReadState state{bytes.data(), bytes.size(), 0};

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("corrupt or truncated png stream");
    }

    png_set_read_fn(png, &state, png_mem_read);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("unsupported png: 16-bit samples");
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    // Alpha is dropped per the input contract.
    png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("unsupported png channel layout");
    }

    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.channels = channels;
    img.pixels.resize(static_cast<size_t>(width) * height * channels);
    row_ptrs.resize(height);
    const size_t stride = static_cast<size_t>(width) * channels;
    for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = img.pixels.data() + y * stride;

    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
};

void jpeg_on_error(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(mgr->jump, 1);
}

void jpeg_no_output(j_common_ptr) {}

RawImage decode_jpeg(std::span<const uint8_t> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_on_error;
    err.pub.output_message = jpeg_no_output;

    RawImage img;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("corrupt or truncated jpeg stream");
    }

    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);

    if (cinfo.jpeg_color_space == JCS_GRAYSCALE) {
        cinfo.out_color_space = JCS_GRAYSCALE;
    } else {
        cinfo.out_color_space = JCS_RGB;
    }
    jpeg_start_decompress(&cinfo);

    const int channels = cinfo.output_components;
    if (channels != 1 && channels != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("unsupported jpeg channel layout");
    }

    img.width = static_cast<int>(cinfo.output_width);
    img.height = static_cast<int>(cinfo.output_height);
    img.channels = channels;
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * channels);
    const size_t stride = static_cast<size_t>(img.width) * channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

void check_image(const RawImage& img, const char* what) {
    if (img.width < 1 || img.height < 1)
        throw Error(std::string(what) + ": empty image");
    if (img.channels != 1 && img.channels != 3)
        throw Error(std::string(what) + ": channel count must be 1 or 3");
    if (img.pixels.size() != static_cast<size_t>(img.width) * img.height * img.channels)
        throw Error(std::string(what) + ": pixel buffer length mismatch");
}

}  // namespace

RawImage decode_image(std::span<const uint8_t> bytes) {
    if (looks_like_png(bytes)) return decode_png(bytes);
    if (looks_like_jpeg(bytes)) return decode_jpeg(bytes);
    throw Error("unsupported image format: expected png or jpeg");
}

std::vector<uint8_t> encode_png(const RawImage& img) {
    check_image(img, "encode_png");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_on_error, png_on_warning);
    if (!png) throw Error("png encoder initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png encoder initialization failed");
    }

    std::vector<uint8_t> out;
    std::vector<png_bytep> row_ptrs(img.height);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png encoding failed");
    }

    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t count) {
            auto* buf = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(p));
            buf->insert(buf->end(), data, data + count);
        },
        [](png_structp) {});

    const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y)
        row_ptrs[y] = const_cast<png_bytep>(img.pixels.data() + y * stride);

    png_set_rows(png, info, row_ptrs.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::vector<uint8_t> encode_jpeg(const RawImage& img, int quality) {
    check_image(img, "encode_jpeg");

    jpeg_compress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_on_error;
    err.pub.output_message = jpeg_no_output;

    unsigned char* mem = nullptr;
    unsigned long mem_size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        if (mem) free(mem);
        throw Error("jpeg encoding failed");
    }

    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &mem, &mem_size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = img.channels;
    cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);

    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(img.pixels.data() + cinfo.next_scanline * stride);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<uint8_t> out(mem, mem + mem_size);
    jpeg_destroy_compress(&cinfo);
    free(mem);
    return out;
}

}  // namespace scalpnet
