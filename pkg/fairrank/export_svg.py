"""Contains helper functions to export metric trends to SVG charts.
"""

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import xml.etree.ElementTree as et

import numpy as np

from .utils import save_xml
from .utils import xml_comment

# Hint for a point in chart coordinates.
Point = Tuple[float, float]

SVG_NS = 'http://www.w3.org/2000/svg'

IDEAL_COLOR = '#d62728'
AXIS_COLOR = '#333333'
GRID_COLOR = '#dddddd'
SERIES_COLORS = ('#1f77b4', '#ff7f0e', '#2ca02c', '#9467bd', '#8c564b',
                 '#e377c2', '#7f7f7f', '#bcbd22', '#17becf')

MARGIN = {'top': 40, 'right': 170, 'bottom': 50, 'left': 60}

# Small number to test whether a range is degenerate.
_EPS = np.finfo(float).eps * 4.0


def svg_root(width: int, height: int) -> et.Element:
    """Return the root 'svg' element with a white background."""
    # A plain attribute keeps children unqualified when serialized.
    svg = et.Element('svg', {'xmlns': SVG_NS,
                             'width': str(width),
                             'height': str(height),
                             'viewBox': f'0 0 {width} {height}'})
    svg.append(svg_rect(0, 0, width, height, fill='white'))
    return svg


def svg_rect(
        x: float, y: float, width: float, height: float,
        fill: str = 'none', stroke: str = 'none',
        stroke_width: float = 1.0) -> et.Element:
    return et.fromstring(
        f'<rect x="{x:.2f}" y="{y:.2f}" width="{width:.2f}"'
        f' height="{height:.2f}" fill="{fill}" stroke="{stroke}"'
        f' stroke-width="{stroke_width}" />')


def svg_line(a: Point, b: Point, stroke: str = AXIS_COLOR) -> et.Element:
    return et.fromstring(
        f'<line x1="{a[0]:.2f}" y1="{a[1]:.2f}" x2="{b[0]:.2f}"'
        f' y2="{b[1]:.2f}" stroke="{stroke}" stroke-width="1" />')


def svg_text(
        text: str, x: float, y: float,
        anchor: str = 'middle', size: int = 11) -> et.Element:
    """Return a 'text' element; the text is escaped by ElementTree."""
    element = et.fromstring(
        f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}"'
        f' font-family="sans-serif" font-size="{size}" />')
    element.text = text
    return element


def svg_polyline(points: Sequence[Point], color: str) -> et.Element:
    """Return a 'g' element with the line and a marker at every point."""
    group = et.fromstring('<g />')
    coords = ' '.join(f'{x:.2f},{y:.2f}' for x, y in points)
    group.append(et.fromstring(
        f'<polyline points="{coords}" fill="none" stroke="{color}"'
        ' stroke-width="2" />'))
    for x, y in points:
        group.append(et.fromstring(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}" />'))
    return group


def _value_range(
        series: Dict[str, Sequence[float]],
        ideal: Optional[float]) -> Tuple[float, float]:
    values = [v for ys in series.values() for v in ys if math.isfinite(v)]
    if ideal is not None:
        values.append(ideal)
    if not values:
        return 0.0, 1.0
    low, high = min(values), max(values)
    if high - low < _EPS:
        low, high = low - 0.5, high + 0.5
    pad = 0.05 * (high - low)
    return low - pad, high + pad


class _Frame:
    """Maps data coordinates to pixels inside the plotting area."""

    def __init__(self, width, height, x_range, y_range):
        self.left = MARGIN['left']
        self.top = MARGIN['top']
        self.width = width - MARGIN['left'] - MARGIN['right']
        self.height = height - MARGIN['top'] - MARGIN['bottom']
        self.x_range = x_range
        self.y_range = y_range

    def x(self, value: float) -> float:
        low, high = self.x_range
        span = high - low if high - low > _EPS else 1.0
        return self.left + (value - low) / span * self.width

    def y(self, value: float) -> float:
        low, high = self.y_range
        return self.top + self.height - (value - low) / (high - low) * self.height

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def right(self) -> float:
        return self.left + self.width


def svg_ideal_box(frame: _Frame, ideal: float) -> et.Element:
    """Return a red box on the y axis around the ideal value."""
    y = frame.y(ideal)
    group = et.fromstring('<g />')
    group.append(svg_rect(frame.left - 42, y - 8, 40, 16,
                          stroke=IDEAL_COLOR, stroke_width=1.5))
    group.append(svg_line((frame.left, y), (frame.right, y), IDEAL_COLOR))
    return group


def _axes(
        frame: _Frame,
        x_ticks: List[Tuple[float, str]],
        x_label: str,
        y_label: str) -> et.Element:
    group = et.fromstring('<g />')
    low, high = frame.y_range
    for i in range(6):
        value = low + (high - low) * i / 5
        y = frame.y(value)
        group.append(svg_line((frame.left, y), (frame.right, y), GRID_COLOR))
        group.append(svg_text(f'{value:.3g}', frame.left - 6, y + 4,
                              anchor='end', size=10))
    for value, label in x_ticks:
        x = frame.x(value)
        group.append(svg_line((x, frame.bottom), (x, frame.bottom + 4)))
        group.append(svg_text(label, x, frame.bottom + 16, size=10))
    group.append(svg_line((frame.left, frame.bottom),
                          (frame.right, frame.bottom)))
    group.append(svg_line((frame.left, frame.top),
                          (frame.left, frame.bottom)))
    group.append(svg_text(x_label, frame.left + frame.width / 2,
                          frame.bottom + 36))
    label = svg_text(y_label, 0, 0)
    label.set('transform', f'translate(14 {frame.top + frame.height / 2:.2f})'
                           ' rotate(-90)')
    group.append(label)
    return group


def _legend(frame: _Frame, names: Sequence[str]) -> et.Element:
    group = et.fromstring('<g />')
    x = frame.right + 16
    for i, name in enumerate(names):
        y = frame.top + 10 + 18 * i
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        group.append(svg_line((x, y), (x + 18, y), color))
        group.append(svg_text(name, x + 24, y + 4, anchor='start', size=10))
    return group


def line_chart(
        title: str,
        x_values: Sequence[float],
        series: Dict[str, Sequence[float]],
        y_label: str,
        ideal: Optional[float] = None,
        x_label: str = 'epsilon',
        x_tick_labels: Optional[Sequence[str]] = None,
        width: int = 720,
        height: int = 400) -> et.Element:
    """Return an 'svg' element with one polyline per series.

    Parameters
    ----------
    - title: chart title.
    - x_values: abscissae shared by all series.
    - series: ordinate values per series name, aligned with x_values.
    - y_label: name of the metric.
    - ideal: value marked by a red box on the y axis, if any.
    - x_tick_labels: tick labels, formatted x values by default.

    """
    if not x_values:
        raise ValueError('A chart needs at least one abscissa')
    for name, ys in series.items():
        if len(ys) != len(x_values):
            raise ValueError(f'Series "{name}" has {len(ys)} values for'
                             f' {len(x_values)} abscissae')
    frame = _Frame(width, height, (min(x_values), max(x_values)),
                   _value_range(series, ideal))
    svg = svg_root(width, height)
    svg.append(et.Comment(xml_comment(f'{title}: {y_label} vs {x_label}')))
    svg.append(svg_text(title, width / 2, 22, size=14))
    labels = (list(x_tick_labels) if x_tick_labels is not None
              else [f'{x:g}' for x in x_values])
    svg.append(_axes(frame, list(zip(x_values, labels)), x_label, y_label))
    if ideal is not None:
        svg.append(svg_ideal_box(frame, ideal))
    for i, (name, ys) in enumerate(series.items()):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        points = [(frame.x(x), frame.y(y))
                  for x, y in zip(x_values, ys) if math.isfinite(y)]
        svg.append(svg_polyline(points, color))
    svg.append(_legend(frame, list(series)))
    return svg


def category_chart(
        title: str,
        categories: Sequence[str],
        series: Dict[str, Sequence[float]],
        y_label: str,
        ideal: Optional[float] = None,
        x_label: str = 'inference service') -> et.Element:
    """Return a line chart over evenly spaced named categories."""
    positions = [float(i) for i in range(len(categories))]
    return line_chart(title, positions, series, y_label, ideal, x_label,
                      x_tick_labels=categories)


def save_chart(chart: et.Element, filename: Union[Path, str]) -> None:
    save_xml(chart, filename)
