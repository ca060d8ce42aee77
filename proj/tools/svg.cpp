#include "svg.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

namespace star::cli {

void SvgCanvas::polyline(const std::vector<Eigen::Vector2d>& points, const std::string& role, int pedestrian,
                         const std::string& color) {
    if (points.empty()) return;
    elements_.push_back({false, points, 0.0, role, pedestrian, color, {}});
}

void SvgCanvas::circle(const Eigen::Vector2d& center, double radius, const std::string& role, int pedestrian,
                       const std::string& color, const std::string& title) {
    elements_.push_back({true, {center}, radius, role, pedestrian, color, title});
}

void SvgCanvas::write(std::ostream& out) const {
    double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
    double hi_x = -lo_x, hi_y = -lo_x;
    for (const Element& e : elements_)
        for (const Eigen::Vector2d& p : e.points) {
            lo_x = std::min(lo_x, p.x() - e.radius);
            hi_x = std::max(hi_x, p.x() + e.radius);
            lo_y = std::min(lo_y, p.y() - e.radius);
            hi_y = std::max(hi_y, p.y() + e.radius);
        }
    if (elements_.empty()) lo_x = lo_y = 0.0, hi_x = hi_y = 1.0;
    const double margin = 0.05 * std::max({hi_x - lo_x, hi_y - lo_y, 1.0});
    lo_x -= margin, lo_y -= margin, hi_x += margin, hi_y += margin;
    const double scale = std::min(width_ / (hi_x - lo_x), height_ / (hi_y - lo_y));
    auto px = [&](const Eigen::Vector2d& p) { return (p.x() - lo_x) * scale; };
    auto py = [&](const Eigen::Vector2d& p) { return (hi_y - p.y()) * scale; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
        << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const Element& e : elements_) {
        if (e.is_circle) {
            out << "<circle class=\"" << e.role << "\" data-pedestrian=\"" << e.pedestrian << "\" cx=\""
                << px(e.points[0]) << "\" cy=\"" << py(e.points[0]) << "\" r=\"" << e.radius * scale
                << "\" fill=\"" << e.color << "\" fill-opacity=\"0.6\">";
            if (!e.title.empty()) out << "<title>" << e.title << "</title>";
            out << "</circle>\n";
            continue;
        }
        out << "<polyline class=\"" << e.role << "\" data-pedestrian=\"" << e.pedestrian << "\" fill=\"none\" stroke=\""
            << e.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < e.points.size(); ++k)
            out << (k ? " " : "") << px(e.points[k]) << ',' << py(e.points[k]);
        out << "\"/>\n";
    }
    out << "</svg>\n";
}

} // namespace star::cli
