"""Figure datasets, sample size at 80% power, and SVG line charts."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape, quoteattr

from .core import Method

TIDY_HEADER = ["figure", "panel", "series", "n", "power"]
FIGURES = (2, 3, 4, 5, 6, 7)
TARGET_POWER = 0.8
DEFAULT_METHOD = Method.BC


class MissingScenarios(LookupError):
    def __init__(self, keys, ids=None):
        self.keys = list(keys)
        self.ids = list(ids) if ids is not None else None
        shown = self.ids if self.ids is not None else self.keys
        super().__init__(f"{len(self.keys)} required scenarios absent: {shown[:10]}")


class UnknownFigure(ValueError):
    pass


class EmptyData(ValueError):
    pass


@dataclass(frozen=True)
class PowerCurve:
    a: float
    b: float
    c_prime: float
    method: Method
    path: str
    points: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        ns = [n for n, _ in self.points]
        if any(n1 >= n2 for n1, n2 in zip(ns, ns[1:])):
            raise ValueError("curve sample sizes must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for _, p in self.points):
            raise ValueError("power values must lie in [0, 1]")


@dataclass(frozen=True)
class TidyRow:
    figure: int
    panel: str
    series: str
    n: float  # the x-axis value; figure 7 stores the X->M weight here
    power: float


def n80(curve: PowerCurve, target: float = TARGET_POWER) -> Optional[int]:
    """Smallest grid sample size whose power reaches ``target``, else None."""
    if not curve.points:
        raise ValueError("empty curve")
    for n, p in curve.points:
        if p >= target:
            return n
    return None


def _key(a, b, c_prime, n, method, path):
    return (float(a), float(b), float(c_prime), int(n), Method(method), path)


class ResultIndex:
    """Lookup of merged result rows by (a, b, c_prime, n, method, path)."""

    def __init__(self, rows: Iterable[dict]):
        self.rows: Dict[tuple, dict] = {}
        for r in rows:
            self.rows[_key(r["a"], r["b"], r["c_prime"], r["n"], r["method"], r["path"])] = r
        self.ns = sorted({k[3] for k in self.rows})

    def power(self, a, b, c_prime, n, method, path) -> float:
        return self.rows[_key(a, b, c_prime, n, method, path)]["power"]

    def curve(self, a, b, c_prime, method=DEFAULT_METHOD, path="ab", ns=None) -> PowerCurve:
        ns = self.ns if ns is None else ns
        missing = [(a, b, c_prime, n) for n in ns if _key(a, b, c_prime, n, method, path) not in self.rows]
        if missing:
            raise MissingScenarios(missing)
        pts = tuple((n, self.power(a, b, c_prime, n, method, path)) for n in ns)
        return PowerCurve(a, b, c_prime, Method(method), path, pts)


def _fmt(v: float) -> str:
    return f"{v:g}"


_PANEL_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
_FIG5_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5)
_FIG6_TRIPLES = ((0.3, -0.3, 0.1), (-0.3, 0.3, 0.1), (0.3, 0.3, -0.1))
_FIG7_A = (-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def _figure_spec(figure_id: int, ns: Sequence[int]):
    """Yield (panel, series, x, (a, b, c_prime, n, method, path)) selections."""
    if figure_id == 2:
        for letter, a in zip(_PANEL_LETTERS, (0.5, 0.4, 0.3, 0.2, 0.1)):
            for b in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
                for n in ns:
                    yield letter, f"b={_fmt(b)}", n, (a, b, 0.0, n, DEFAULT_METHOD, "ab")
    elif figure_id == 3:
        for c in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
            for n in ns:
                yield "A", f"c_prime={_fmt(c)}", n, (0.3, 0.3, c, n, DEFAULT_METHOD, "ab")
    elif figure_id == 4:
        for method in (Method.PER, Method.BC, Method.BCA):
            for n in ns:
                yield "A", method.value, n, (0.3, 0.3, 0.0, n, method, "ab")
    elif figure_id == 5:
        pairs = [(p, q) for i, p in enumerate(_FIG5_LEVELS) for q in _FIG5_LEVELS[i + 1:]]
        for p, q in pairs:
            panel = f"{_fmt(p)}-{_fmt(q)}"
            for a, b in ((p, q), (q, p)):
                for n in ns:
                    yield panel, f"a={_fmt(a)} b={_fmt(b)}", n, (a, b, 0.0, n, DEFAULT_METHOD, "ab")
    elif figure_id == 6:
        for letter, (a, b, c) in zip(_PANEL_LETTERS, _FIG6_TRIPLES):
            for path in ("ab", "c"):
                for n in ns:
                    yield letter, path, n, (a, b, c, n, DEFAULT_METHOD, path)
    elif figure_id == 7:
        for a in _FIG7_A:
            yield "A", "c_prime", a, (a, 0.3, 0.3, 100, DEFAULT_METHOD, "c_prime")
    else:
        raise UnknownFigure(f"no figure {figure_id}; choose from {FIGURES}")


def figure_dataset(results, figure_id: int, manifest=None) -> List[TidyRow]:
    """Project merged results onto the rows one figure plots.

    ``results`` is a :class:`ResultIndex` or an iterable of result rows.
    Figures over sample size use every n present in the results. Figure 7
    plots power against the X->M weight, which it stores in the ``n`` field.
    """
    index = results if isinstance(results, ResultIndex) else ResultIndex(results)
    if figure_id not in FIGURES:
        raise UnknownFigure(f"no figure {figure_id}; choose from {FIGURES}")
    rows, missing = [], []
    for panel, series, x, key in _figure_spec(figure_id, index.ns):
        full = _key(*key)
        if full not in index.rows:
            missing.append(full[:4])
            continue
        rows.append(TidyRow(figure_id, panel, series, x, index.rows[full]["power"]))
    if missing or not rows:
        missing = list(dict.fromkeys(missing))
        ids = None
        if manifest is not None:
            ids = []
            for k in missing:
                try:
                    ids.append(manifest.find(*k))
                except KeyError:
                    pass
        raise MissingScenarios(missing, ids)
    return rows


def table_csv(rows: Iterable[TidyRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TIDY_HEADER)
    for r in rows:
        x = r.n if isinstance(r.n, int) else _fmt(r.n)
        writer.writerow([r.figure, r.panel, r.series, x, repr(float(r.power))])
    return buf.getvalue()


def n80_table(rows: Sequence[TidyRow]) -> List[Tuple[str, str, Optional[int]]]:
    """n80 for every (panel, series) curve of a sample-size figure."""
    grouped = defaultdict(list)
    for r in rows:
        grouped[(r.panel, r.series)].append((int(r.n), r.power))
    out = []
    for (panel, series), pts in grouped.items():
        curve = PowerCurve(0.0, 0.0, 0.0, DEFAULT_METHOD, "ab", tuple(sorted(pts)))
        out.append((panel, series, n80(curve)))
    return out


# chart layout, in SVG user units
WIDTH, HEIGHT = 560, 380
LEFT, RIGHT, TOP, BOTTOM = 60, 150, 30, 50
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def y_pixel(power: float) -> float:
    """Vertical SVG coordinate of a power value."""
    return TOP + (1.0 - power) * (HEIGHT - TOP - BOTTOM)


def x_pixel(x: float, x_min: float, x_max: float) -> float:
    span = (x_max - x_min) or 1.0
    return LEFT + (x - x_min) / span * (WIDTH - LEFT - RIGHT)


def _ticks(xs: Sequence[float], max_ticks: int = 6) -> List[float]:
    if len(xs) <= max_ticks:
        return list(xs)
    stride = -(-(len(xs) - 1) // (max_ticks - 1))
    picked = list(xs[::stride])
    if picked[-1] != xs[-1]:
        picked.append(xs[-1])
    return picked


def render_chart(rows: Sequence[TidyRow], out_path=None, title: str = "", x_label: str = "Sample size (n)") -> str:
    """Draw one panel as a standalone SVG document.

    Each series becomes one ``<polyline>``; the 80% reference is the only
    dashed element. Returns the document text and writes it when
    ``out_path`` is given.
    """
    rows = list(rows)
    if not rows:
        raise EmptyData("nothing to plot")
    series: Dict[str, List[Tuple[float, float]]] = {}
    for r in rows:
        series.setdefault(r.series, []).append((float(r.n), r.power))
    xs = sorted({float(r.n) for r in rows})
    x_min, x_max = xs[0], xs[-1]
    plot_right = WIDTH - RIGHT
    plot_bottom = HEIGHT - BOTTOM

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<line x1="{LEFT}" y1="{plot_bottom}" x2="{plot_right}" y2="{plot_bottom}" stroke="#000000"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{plot_bottom}" stroke="#000000"/>')
    for i in range(6):
        p = i / 5
        y = y_pixel(p)
        out.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="#000000"/>')
        out.append(f'<text x="{LEFT - 7}" y="{y + 4:.2f}" text-anchor="end">{p:.1f}</text>')
    for x in _ticks(xs):
        px = x_pixel(x, x_min, x_max)
        out.append(f'<line x1="{px:.2f}" y1="{plot_bottom}" x2="{px:.2f}" y2="{plot_bottom + 4}" stroke="#000000"/>')
        out.append(f'<text x="{px:.2f}" y="{plot_bottom + 16}" text-anchor="middle">{_fmt(x)}</text>')
    out.append(
        f'<text x="{(LEFT + plot_right) / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(x_label)}</text>'
    )
    out.append(
        f'<text x="16" y="{(TOP + plot_bottom) / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(TOP + plot_bottom) / 2:.2f})">Power</text>'
    )
    ref = y_pixel(TARGET_POWER)
    out.append(
        f'<line x1="{LEFT}" y1="{ref:.2f}" x2="{plot_right}" y2="{ref:.2f}" '
        f'stroke="#555555" stroke-dasharray="6,4" data-power="{TARGET_POWER}"/>'
    )
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{x_pixel(x, x_min, x_max):.2f},{y_pixel(p):.2f}" for x, p in sorted(pts))
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5" '
            f'data-series={quoteattr(name)}/>'
        )
        ly = TOP + 10 + 16 * i
        out.append(f'<line x1="{plot_right + 12}" y1="{ly}" x2="{plot_right + 32}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{plot_right + 36}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    doc = "\n".join(out) + "\n"
    if out_path is not None:
        Path(out_path).write_text(doc)
    return doc


_TITLES = {
    2: "Power of the indirect effect, c'=0",
    3: "Indirect effect, a=b=0.3, varying c'",
    4: "Interval methods, a=b=0.3, c'=0",
    5: "Proximal vs distal arms",
    6: "Suppression",
    7: "Direct effect vs a (n=100, b=0.3, c'=0.3)",
}


def write_figure(results, figure_id: int, out_dir, manifest=None) -> List[Path]:
    """Write the tidy table, per-panel charts and n80 summary for one figure."""
    rows = figure_dataset(results, figure_id, manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    table = out_dir / f"fig{figure_id}.csv"
    table.write_text(table_csv(rows))
    written.append(table)
    panels: Dict[str, List[TidyRow]] = {}
    for r in rows:
        panels.setdefault(r.panel, []).append(r)
    x_label = "X->M weight (a)" if figure_id == 7 else "Sample size (n)"
    for panel, prow in panels.items():
        path = out_dir / f"fig{figure_id}_{panel}.svg"
        render_chart(prow, path, title=f"{_TITLES[figure_id]} [{panel}]", x_label=x_label)
        written.append(path)
    if figure_id != 7:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["figure", "panel", "series", "n80"])
        for panel, series, value in n80_table(rows):
            writer.writerow([figure_id, panel, series, "" if value is None else value])
        summary = out_dir / f"fig{figure_id}_n80.csv"
        summary.write_text(buf.getvalue())
        written.append(summary)
    return written
