#include "polseg/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace polseg {

namespace {

using Glyph = std::array<unsigned char, 7>;

const std::map<char, Glyph>& font() {
    static const std::map<char, Glyph> f{
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'@', {0x0E, 0x11, 0x01, 0x0D, 0x15, 0x15, 0x0E}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
        {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
        {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    };
    return f;
}

struct Color {
    unsigned char r, g, b;
};

const Color kPalette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14},
                          {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};

class Canvas {
public:
    Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h) * 3, 255) {}

    void set(int x, int y, Color c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        const std::size_t i = static_cast<std::size_t>(y * w_ + x) * 3;
        px_[i] = c.r;
        px_[i + 1] = c.g;
        px_[i + 2] = c.b;
    }

    void line(double x0, double y0, double x1, double y1, Color c, int thick = 1) {
        const int n = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
            const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            for (int dx = -(thick / 2); dx <= thick / 2; ++dx)
                for (int dy = -(thick / 2); dy <= thick / 2; ++dy) set(x + dx, y + dy, c);
        }
    }

    void box(int x, int y, int r, Color c) {
        for (int dx = -r; dx <= r; ++dx)
            for (int dy = -r; dy <= r; ++dy) set(x + dx, y + dy, c);
    }

    static int text_width(const std::string& s, int scale) { return static_cast<int>(s.size()) * 6 * scale; }

    void text(int x, int y, const std::string& s, Color c, int scale = 1, bool vertical = false) {
        int pos = 0;
        for (char raw : s) {
            const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
            auto it = font().find(ch);
            if (it != font().end()) {
                for (int row = 0; row < 7; ++row)
                    for (int col = 0; col < 5; ++col) {
                        if (!(it->second[static_cast<std::size_t>(row)] & (0x10 >> col))) continue;
                        for (int sx = 0; sx < scale; ++sx)
                            for (int sy = 0; sy < scale; ++sy) {
                                const int gx = (pos + col) * scale + sx;
                                const int gy = row * scale + sy;
                                if (vertical) set(x + gy, y - gx, c);
                                else set(x + gx, y + gy, c);
                            }
                    }
            }
            pos += 6;
        }
    }

    void save(const std::filesystem::path& path) const {
        FILE* fp = std::fopen(path.string().c_str(), "wb");
        if (!fp) throw std::runtime_error("cannot write plot " + path.string());
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info || setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            std::fclose(fp);
            throw std::runtime_error("libpng failed writing " + path.string());
        }
        png_init_io(png, fp);
        png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < h_; ++y)
            png_write_row(png, const_cast<png_bytep>(px_.data() + static_cast<std::size_t>(y * w_) * 3));
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
    }

private:
    int w_, h_;
    std::vector<unsigned char> px_;
};

std::string tick_label(double v) {
    char buf[32];
    if (std::abs(v) >= 1000 || (std::abs(v - std::round(v)) < 1e-9 && std::abs(v) >= 1)) std::snprintf(buf, sizeof buf, "%.0f", v);
    else std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

void write_line_plot(const LinePlot& plot, const std::filesystem::path& path) {
    if (plot.width < 200 || plot.height < 150) throw std::invalid_argument("plot: canvas too small");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("plot: series '" + s.name + "' has mismatched x/y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
    if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    Canvas c(plot.width, plot.height);
    const int left = 70, right = plot.width - 20, top = 40, bottom = plot.height - 50;
    const Color black{0, 0, 0}, grey{220, 220, 220};
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / ticks;
        const double fy = ymin + (ymax - ymin) * i / ticks;
        c.line(sx(fx), top, sx(fx), bottom, grey);
        c.line(left, sy(fy), right, sy(fy), grey);
        const std::string lx = tick_label(fx), ly = tick_label(fy);
        c.text(static_cast<int>(sx(fx)) - Canvas::text_width(lx, 1) / 2, bottom + 6, lx, black);
        c.text(left - 6 - Canvas::text_width(ly, 1), static_cast<int>(sy(fy)) - 3, ly, black);
    }
    c.line(left, bottom, right, bottom, black);
    c.line(left, top, left, bottom, black);
    c.text((plot.width - Canvas::text_width(plot.title, 2)) / 2, 10, plot.title, black, 2);
    c.text((left + right - Canvas::text_width(plot.x_label, 1)) / 2, plot.height - 20, plot.x_label, black);
    c.text(8, (top + bottom + Canvas::text_width(plot.y_label, 1)) / 2, plot.y_label, black, 1, true);

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const Color col = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
        for (std::size_t i = 0; i + 1 < s.x.size(); ++i)
            c.line(sx(s.x[i]), sy(s.y[i]), sx(s.x[i + 1]), sy(s.y[i + 1]), col, 2);
        if (s.x.size() <= 50)
            for (std::size_t i = 0; i < s.x.size(); ++i)
                c.box(static_cast<int>(sx(s.x[i])), static_cast<int>(sy(s.y[i])), 2, col);
        const int ly = top + 6 + static_cast<int>(k) * 12;
        const int lx = right - 10 - Canvas::text_width(s.name, 1) - 18;
        c.line(lx, ly + 3, lx + 12, ly + 3, col, 2);
        c.text(lx + 16, ly, s.name, black);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    c.save(path);
}

}  // namespace polseg
