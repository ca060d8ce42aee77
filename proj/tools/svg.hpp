#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace star::cli {

/// Static SVG drawing in world coordinates; y points up in the output.
class SvgCanvas {
public:
    SvgCanvas(double width, double height) : width_(width), height_(height) {}

    // Every element must be added before write(): the view box is fitted to them.
    void polyline(const std::vector<Eigen::Vector2d>& points, const std::string& role, int pedestrian,
                  const std::string& color);
    void circle(const Eigen::Vector2d& center, double radius, const std::string& role, int pedestrian,
                const std::string& color, const std::string& title = {});
    void write(std::ostream& out) const;

private:
    struct Element {
        bool is_circle = false;
        std::vector<Eigen::Vector2d> points;
        double radius = 0.0;
        std::string role;
        int pedestrian = 0;
        std::string color;
        std::string title;
    };
    double width_;
    double height_;
    std::vector<Element> elements_;
};

} // namespace star::cli
