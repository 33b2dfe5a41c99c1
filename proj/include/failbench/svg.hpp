#pragma once

#include <cstdio>
#include <sstream>
#include <string>

namespace failbench {

// Minimal SVG 1.1 writer; enough for the rank, bar, and box figures.
class SvgWriter {
 public:
  SvgWriter(double width, double height) : width_(width), height_(height) {}

  void open_group(const std::string& cls, const std::string& id = "") {
    body_ << "<g class=\"" << escape(cls) << "\"";
    if (!id.empty()) body_ << " id=\"" << escape(id) << "\"";
    body_ << ">\n";
  }
  void close_group() { body_ << "</g>\n"; }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double stroke_width = 1.0) {
    body_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
          << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << fmt(stroke_width) << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
          << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << fmt(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& content, double size = 11.0,
            const std::string& anchor = "start", const std::string& fill = "#222") {
    body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << fmt(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill
          << "\">" << escape(content) << "</text>\n";
  }

  // Provenance line embedded as the figure description.
  void set_desc(std::string desc) { desc_ = std::move(desc); }

  std::string finish() const {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(width_)
       << "\" height=\"" << fmt(height_) << "\" viewBox=\"0 0 " << fmt(width_) << ' '
       << fmt(height_) << "\">\n";
    if (!desc_.empty()) os << "<desc>" << escape(desc_) << "</desc>\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width_) << "\" height=\"" << fmt(height_)
       << "\" fill=\"white\"/>\n"
       << body_.str() << "</svg>\n";
    return os.str();
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
    }
    return out;
  }

 private:
  static std::string fmt(double v) {
    // Fixed short decimals keep the files small and diffable.
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s(buf);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  double width_;
  double height_;
  std::string desc_;
  std::ostringstream body_;
};

}  // namespace failbench
