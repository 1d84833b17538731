"""SVG rendering of one frame: GT, warped previous GT, noised samples, matches."""
import xml.etree.ElementTree as ET

import numpy as np

# boundaries green, dividers red, crossings blue
CLASS_COLORS = {0: "#1f4fd1", 1: "#d12a1f", 2: "#1e9e3a"}
PX_PER_M = 10.0


def _to_px(points, rng_):
    # ego x (forward) points up, ego y (left) points left
    pts = np.asarray(points, dtype=float)
    u = (rng_.half_width - pts[:, 1]) * PX_PER_M
    v = (rng_.half_length - pts[:, 0]) * PX_PER_M
    return " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(u, v))


def _polyline(parent, points, rng_, color, **attrs):
    attrs = {k.replace("_", "-"): str(v) for k, v in attrs.items()}
    ET.SubElement(parent, "polyline", points=_to_px(points, rng_), fill="none", stroke=color, **attrs)


def render_frame_svg(frame, rng_, prev_warped=(), report=None, max_samples=None):
    """Return the SVG document for ``frame`` as a string."""
    width = 2 * rng_.half_width * PX_PER_M
    height = 2 * rng_.half_length * PX_PER_M
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=f"{width:g}",
                     height=f"{height:g}", viewBox=f"0 0 {width:g} {height:g}")
    ET.SubElement(svg, "title").text = f"frame {frame.index} t={frame.timestamp:g}s"
    ET.SubElement(svg, "rect", x="0", y="0", width=f"{width:g}", height=f"{height:g}",
                  fill="white", stroke="black")

    layer = ET.SubElement(svg, "g", id="prev-warped")
    for el in prev_warped:
        _polyline(layer, el.points, rng_, CLASS_COLORS.get(el.cls, "gray"), stroke_width=1.5,
                  stroke_dasharray="6,4", opacity=0.6)

    if report is not None:
        layer = ET.SubElement(svg, "g", id="noised-samples")
        samples = report.batch.samples
        for s in samples[:max_samples] if max_samples else samples:
            _polyline(layer, s.element.points, rng_, CLASS_COLORS.get(s.element.cls, "gray"),
                      stroke_width=0.8, opacity=0.35)
        layer = ET.SubElement(svg, "g", id="matches")
        for m in report.matches:
            if not m.matched:
                continue
            a = np.asarray(frame.elements[m.current_index].points).mean(axis=0)
            b = np.asarray(prev_warped[m.prev_index].points).mean(axis=0)
            _polyline(layer, [a, b], rng_, "black", stroke_width=1)

    layer = ET.SubElement(svg, "g", id="ground-truth")
    for el in frame.elements:
        _polyline(layer, el.points, rng_, CLASS_COLORS.get(el.cls, "gray"), stroke_width=2.5)

    ego = ET.SubElement(svg, "g", id="ego")
    _polyline(ego, [[2.0, 0.0], [-1.0, 1.0], [-1.0, -1.0], [2.0, 0.0]], rng_, "black", stroke_width=1.5)
    return ET.tostring(svg, encoding="unicode")
