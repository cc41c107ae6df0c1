#include "cotplan/render.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <vector>

namespace cotplan {

namespace {

constexpr double kBevPixelsPerMetre = 12.0;
constexpr double kBevMargin = 48.0;
constexpr double kTickSpacing = 5.0;

std::string Num(double v) {
  char buf[64];
  auto [end, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  if (ec != std::errc()) return "0";
  std::string s(buf, end);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string XmlEscape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string Lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Box footprint corners (ego x, ego y) in drawing order.
std::array<Point2, 4> Footprint(const LiftedBox& obj,
                                const CameraCalibration* camera) {
  const auto corners = BoxCorners(obj.box);
  // Bottom face in camera coordinates is y = +height/2 (bit 1 set); order
  // the four corners around the rectangle.
  constexpr int kBottom[4] = {2, 3, 7, 6};
  std::array<Point2, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const Vec3& c = corners[kBottom[i]];
    if (camera) {
      const Vec3 e = camera->cam_from_ego.ApplyInverse(c);
      out[i] = {e[0], e[1]};
    } else {
      out[i] = {c[2], -c[0]};
    }
  }
  return out;
}

class BevCanvas {
 public:
  BevCanvas(double x_lo, double x_hi, double y_lo, double y_hi)
      : x_lo_(x_lo), x_hi_(x_hi), y_lo_(y_lo), y_hi_(y_hi) {}

  double Sx(double ego_y) const {
    return kBevMargin + (y_hi_ - ego_y) * kBevPixelsPerMetre;
  }
  double Sy(double ego_x) const {
    return kBevMargin + (x_hi_ - ego_x) * kBevPixelsPerMetre;
  }
  double Width() const {
    return 2 * kBevMargin + (y_hi_ - y_lo_) * kBevPixelsPerMetre;
  }
  double Height() const {
    return 2 * kBevMargin + (x_hi_ - x_lo_) * kBevPixelsPerMetre;
  }
  std::string Pt(const Point2& p) const { return Num(Sx(p.y)) + "," + Num(Sy(p.x)); }

  double x_lo_, x_hi_, y_lo_, y_hi_;
};

std::string PolylinePoints(const BevCanvas& c, const std::vector<Point2>& pts) {
  std::string out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out.push_back(' ');
    out += c.Pt(pts[i]);
  }
  return out;
}

std::uint32_t BigEndian32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace

std::string ClassColor(const std::string& label) {
  const std::string l = Lowercase(label);
  if (l.find("trailer") != std::string::npos) return "#ffd700";
  if (l.find("truck") != std::string::npos) return "#00c853";
  if (l.find("cone") != std::string::npos) return "#ffffff";
  if (l.find("pedestrian") != std::string::npos ||
      l.find("person") != std::string::npos) {
    return "#2979ff";
  }
  if (l.find("car") != std::string::npos) return "#ff4fa3";
  return "#ff9100";
}

std::string RenderBev(const Trajectory& pred, const Trajectory& gt,
                      std::span<const LiftedBox> objects,
                      const CameraCalibration* camera) {
  std::vector<std::array<Point2, 4>> footprints;
  footprints.reserve(objects.size());
  for (const auto& o : objects) footprints.push_back(Footprint(o, camera));

  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  auto extend = [&](const Point2& p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return;
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  };
  for (const auto& p : pred.points) extend(p);
  for (const auto& p : gt.points) extend(p);
  for (const auto& f : footprints) {
    for (const auto& p : f) extend(p);
  }
  // Pad and snap the extent to whole tick intervals.
  auto snap_lo = [](double v) { return std::floor(v / kTickSpacing - 1) * kTickSpacing; };
  auto snap_hi = [](double v) { return std::ceil(v / kTickSpacing + 1) * kTickSpacing; };
  const BevCanvas c(snap_lo(x_lo), snap_hi(x_hi), snap_lo(y_lo), snap_hi(y_hi));

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Num(c.Width()) +
         "\" height=\"" + Num(c.Height()) + "\" viewBox=\"0 0 " +
         Num(c.Width()) + " " + Num(c.Height()) + "\" style=\"background:#ffffff\">\n";

  svg += "<g class=\"axes\" stroke=\"#d0d0d0\" stroke-width=\"1\" "
         "font-family=\"sans-serif\" font-size=\"10\" fill=\"#606060\">\n";
  for (double x = c.x_lo_; x <= c.x_hi_ + 1e-9; x += kTickSpacing) {
    svg += "<line x1=\"" + Num(c.Sx(c.y_hi_)) + "\" y1=\"" + Num(c.Sy(x)) +
           "\" x2=\"" + Num(c.Sx(c.y_lo_)) + "\" y2=\"" + Num(c.Sy(x)) + "\"/>\n";
    svg += "<text x=\"" + Num(c.Sx(c.y_hi_) - 6) + "\" y=\"" + Num(c.Sy(x) + 3) +
           "\" text-anchor=\"end\" stroke=\"none\">" + Num(x) + "</text>\n";
  }
  for (double y = c.y_lo_; y <= c.y_hi_ + 1e-9; y += kTickSpacing) {
    svg += "<line x1=\"" + Num(c.Sx(y)) + "\" y1=\"" + Num(c.Sy(c.x_hi_)) +
           "\" x2=\"" + Num(c.Sx(y)) + "\" y2=\"" + Num(c.Sy(c.x_lo_)) + "\"/>\n";
    svg += "<text x=\"" + Num(c.Sx(y)) + "\" y=\"" + Num(c.Sy(c.x_lo_) + 14) +
           "\" text-anchor=\"middle\" stroke=\"none\">" + Num(y) + "</text>\n";
  }
  svg += "</g>\n";

  if (!footprints.empty()) {
    svg += "<g class=\"objects\" stroke-width=\"1.5\" fill-opacity=\"0.3\">\n";
    for (std::size_t i = 0; i < footprints.size(); ++i) {
      const std::string color = ClassColor(objects[i].label);
      std::string pts;
      for (int k = 0; k < 4; ++k) {
        if (k) pts.push_back(' ');
        pts += c.Pt(footprints[i][k]);
      }
      svg += "<polygon class=\"box\" points=\"" + pts + "\" stroke=\"" + color +
             "\" fill=\"" + color + "\"><title>" +
             XmlEscape(objects[i].label) + "</title></polygon>\n";
    }
    svg += "</g>\n";
  }

  svg += "<polyline class=\"gt\" points=\"" + PolylinePoints(c, gt.points) +
         "\" fill=\"none\" stroke=\"#2e7d32\" stroke-width=\"2\" "
         "stroke-dasharray=\"6,4\"/>\n";
  svg += "<polyline class=\"pred\" points=\"" + PolylinePoints(c, pred.points) +
         "\" fill=\"none\" stroke=\"#d32f2f\" stroke-width=\"2\"/>\n";

  // Ego marker: a triangle pointing forward at the origin.
  const double ex = c.Sx(0.0), ey = c.Sy(0.0);
  svg += "<polygon class=\"ego\" points=\"" + Num(ex) + "," + Num(ey - 8) + " " +
         Num(ex - 5) + "," + Num(ey + 5) + " " + Num(ex + 5) + "," +
         Num(ey + 5) + "\" fill=\"#000000\"/>\n";

  svg += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<line x1=\"10\" y1=\"14\" x2=\"34\" y2=\"14\" stroke=\"#d32f2f\" "
         "stroke-width=\"2\"/>\n<text x=\"40\" y=\"18\">predicted</text>\n";
  svg += "<line x1=\"10\" y1=\"30\" x2=\"34\" y2=\"30\" stroke=\"#2e7d32\" "
         "stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n"
         "<text x=\"40\" y=\"34\">ground truth</text>\n";
  svg += "</g>\n</svg>\n";
  return svg;
}

std::optional<std::pair<int, int>> ReadImageSize(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<unsigned char> head(64 * 1024);
  in.read(reinterpret_cast<char*>(head.data()),
          static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));

  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G',
                                            0x0D, 0x0A, 0x1A, 0x0A};
  if (head.size() >= 24 && std::equal(kPng, kPng + 8, head.begin())) {
    return std::make_pair(static_cast<int>(BigEndian32(&head[16])),
                          static_cast<int>(BigEndian32(&head[20])));
  }
  if (head.size() >= 4 && head[0] == 0xFF && head[1] == 0xD8) {
    std::size_t i = 2;
    while (i + 9 < head.size()) {
      if (head[i] != 0xFF) return std::nullopt;
      const unsigned char marker = head[i + 1];
      const std::size_t len = (std::size_t{head[i + 2]} << 8) | head[i + 3];
      const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 &&
                       marker != 0xC8 && marker != 0xCC;
      if (sof) {
        const int h = (head[i + 5] << 8) | head[i + 6];
        const int w = (head[i + 7] << 8) | head[i + 8];
        return std::make_pair(w, h);
      }
      i += 2 + len;
    }
  }
  return std::nullopt;
}

std::string RenderOverlay(const Frame& frame,
                          const std::filesystem::path& image_file,
                          const Trajectory& pred,
                          std::span<const LiftedBox> boxes) {
  const CameraIntrinsics& k = frame.camera.intrinsics;
  const double qn = frame.camera.cam_from_ego.QuaternionNorm();
  if (!k.Valid() || std::abs(qn - 1.0) > kQuaternionNormTolerance) {
    throw RenderError("bad calibration for frame " + frame.image_path);
  }
  int width = static_cast<int>(std::lround(2 * k.cx));
  int height = static_cast<int>(std::lround(2 * k.cy));
  if (auto size = ReadImageSize(image_file)) {
    std::tie(width, height) = *size;
  }

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" "
         "xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
  svg += "<image href=\"" + XmlEscape(image_file.generic_string()) +
         "\" x=\"0\" y=\"0\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\"/>\n";

  std::vector<PixelPoint> visible;
  for (const auto& p : pred.points) {
    const Vec3 cam = frame.camera.cam_from_ego.Apply({p.x, p.y, 0.0});
    if (!(cam[2] > 0.0)) continue;
    visible.push_back({k.fx * cam[0] / cam[2] + k.cx,
                       k.fy * cam[1] / cam[2] + k.cy});
  }
  svg += "<g class=\"trajectory\" stroke=\"#d32f2f\" fill=\"#d32f2f\">\n";
  if (visible.size() >= 2) {
    std::string pts;
    for (std::size_t i = 0; i < visible.size(); ++i) {
      if (i) pts.push_back(' ');
      pts += Num(visible[i].u) + "," + Num(visible[i].v);
    }
    svg += "<polyline points=\"" + pts +
           "\" fill=\"none\" stroke-width=\"3\"/>\n";
  }
  for (const auto& px : visible) {
    svg += "<circle cx=\"" + Num(px.u) + "\" cy=\"" + Num(px.v) +
           "\" r=\"3\"/>\n";
  }
  svg += "</g>\n";

  for (const auto& b : boxes) {
    Projection proj;
    try {
      proj = ProjectBox(b.box, k);
    } catch (const Detection3DError&) {
      continue;
    }
    svg += "<g class=\"box\" stroke=\"" + ClassColor(b.label) +
           "\" stroke-width=\"2\">\n";
    for (const auto& e : BoxEdges()) {
      const PixelPoint& a = proj.corners[e[0]];
      const PixelPoint& z = proj.corners[e[1]];
      svg += "<line x1=\"" + Num(a.u) + "\" y1=\"" + Num(a.v) + "\" x2=\"" +
             Num(z.u) + "\" y2=\"" + Num(z.v) + "\"/>\n";
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace cotplan
