"""Study configuration, convergence/locking/stability drivers and CSV/SVG output.

CSV schemas
-----------
``convergence.csv``
    eps, level, h, n_elements, n_dofs, err_Hh, rate_Hh, saturated, rel_Hh,
    err_ah, err_u_L2, err_w_L2, err_M_L2, eps_err_M, err_M_weak,
    eps_err_MI, indicator, residual, time_assembly, time_solve, time_errors
``locking.csv``
    eps, h, err_Hh, rel_Hh, inflation, eps_err_M, err_M_weak, indicator,
    flagged
``stability.csv``
    level, h, n_dofs, korn_min, coercivity_min, coercive, penalty,
    b_continuity, c_min, c_max, sanity
``penalty_sweep.csv``
    level, h, factor, penalty, coercivity_min, coercive
``indicator.csv``
    eps, level, h, factor, argmax, gamma_max, b_max
``solve.csv``
    eps, h, n_elements, n_dofs, penalty, residual, refinements, plus the
    error columns of ``convergence.csv`` when a manufactured case is set

Floats are written with 17 significant digits, so repeated runs agree
bit for bit in every column except the ``time_*`` wall-clock timings.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import CASES, ManufacturedCase, error_report, geometry_indicator, named_case
from .assembly import (
    AssembledSystem,
    FormContext,
    Loads,
    assemble_a,
    assemble_b,
    assemble_c,
    assemble_gram_ah,
    assemble_gram_hh,
    assemble_gram_vh,
    assemble_load,
    default_penalty,
)
from .errors import CoercivityWarning, ConfigError
from .fe_space import FESpace
from .geometry import Chart, ElasticModuli, make_chart
from .mesh import Mesh, read_mesh, rectangle_mesh, refine_uniform
from .solver import b_continuity, max_generalized_eig, min_generalized_eig, solve_mixed

SIDES = ("left", "right", "bottom", "top")
GENERATORS = ("square", "strip")
SATURATION = 1e-10  # relative error below which rates are not meaningful
LOCKING_FLAG = 2.0  # indicator factor above which h³ ≲ ε is considered violated
PENALTY_SWEEP = (0.01, 0.1, 1.0, 10.0)


@dataclass
class StudyConfig:
    """Parameters of a study.

    Attributes
    ----------
    chart, chart_params : str, dict
        Built-in chart name and its keyword parameters.
    generator : {"square", "strip"} or None
        Structured mesh generator; ignored when ``mesh_file`` is set.
    mesh_file : Path or None
        Mesh in the plain-text format of :mod:`koiter_dg.mesh`.
    n : int
        Cells per unit length of the coarsest generated mesh.
    levels : int
        Number of meshes; each is the uniform refinement of the previous.
    pattern : str
        Diagonal pattern of generated meshes.
    width : float
        Height of the strip generator's rectangle ``[0, 1]×[0, width]``.
    markers : dict
        D/S/F marker of each side of generated meshes.
    epsilon : list of float
    mu, lam : float
        Lamé coefficients.
    penalty : float or None
        Absolute penalty constant; ``None`` selects the default.
    penalty_factor : float
        Multiplier of the default penalty when ``penalty`` is ``None``.
    quadrature_degree : int
    case : str or None
        Built-in manufactured case; required by ``converge`` and ``locking``.
    loads : dict
        Constant loads ``p``, ``q`` and ``m`` used by ``solve`` without a case.
    out : Path
    twist_form : {"weak", "literal"}
    """

    chart: str = "plane"
    chart_params: dict = field(default_factory=dict)
    generator: str | None = "square"
    mesh_file: Path | None = None
    n: int = 4
    levels: int = 3
    pattern: str = "right"
    width: float = 0.25
    markers: dict = field(default_factory=dict)
    epsilon: list = field(default_factory=lambda: [1e-3])
    mu: float = 1.0
    lam: float = 1.0
    penalty: float | None = None
    penalty_factor: float = 1.0
    quadrature_degree: int = 10
    case: str | None = None
    loads: dict = field(default_factory=dict)
    out: Path = Path("runs")
    twist_form: str = "weak"

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "StudyConfig":
        """Build and validate a configuration from parsed JSON.

        Relative file paths resolve against ``base_dir``.

        Raises
        ------
        ConfigError
            On unknown keys, wrong types or violated invariants.
        """
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        d = dict(data)
        kw: dict = {}
        known = {"chart", "mesh", "markers", "epsilon", "mu", "lambda", "penalty", "penalty_factor",
                 "quadrature_degree", "case", "loads", "out", "twist_form"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown configuration keys: {', '.join(extra)}")
        base = Path(".") if base_dir is None else Path(base_dir)
        chart = d.get("chart", {})
        if isinstance(chart, str):
            chart = {"name": chart}
        if not isinstance(chart, dict):
            raise ConfigError("chart must be a name or {name, params}")
        kw["chart"] = str(chart.get("name", "plane"))
        kw["chart_params"] = dict(chart.get("params", {}))
        mesh = d.get("mesh", {})
        if not isinstance(mesh, dict):
            raise ConfigError("mesh must be an object")
        if "file" in mesh:
            p = Path(mesh["file"])
            kw["mesh_file"] = p if p.is_absolute() else base / p
            kw["generator"] = None
        else:
            kw["generator"] = mesh.get("generator", "square")
        for key, typ in (("n", int), ("levels", int), ("pattern", str), ("width", float)):
            if key in mesh:
                kw[key] = _typed(mesh[key], typ, f"mesh.{key}")
        if "markers" in d:
            if not isinstance(d["markers"], dict):
                raise ConfigError("markers must map sides to D/S/F")
            kw["markers"] = {str(k): str(v) for k, v in d["markers"].items()}
        if "epsilon" in d:
            eps = d["epsilon"]
            eps = [eps] if isinstance(eps, (int, float)) else eps
            if not isinstance(eps, list) or not eps:
                raise ConfigError("epsilon must be a number or a nonempty list")
            kw["epsilon"] = [_typed(e, float, "epsilon") for e in eps]
        if "mu" in d:
            kw["mu"] = _typed(d["mu"], float, "mu")
        if "lambda" in d:
            kw["lam"] = _typed(d["lambda"], float, "lambda")
        if d.get("penalty") is not None:
            kw["penalty"] = _typed(d["penalty"], float, "penalty")
        if "penalty_factor" in d:
            kw["penalty_factor"] = _typed(d["penalty_factor"], float, "penalty_factor")
        if "quadrature_degree" in d:
            kw["quadrature_degree"] = _typed(d["quadrature_degree"], int, "quadrature_degree")
        if d.get("case") is not None:
            kw["case"] = str(d["case"])
        if "loads" in d:
            if not isinstance(d["loads"], dict):
                raise ConfigError("loads must be an object with p, q, m")
            kw["loads"] = dict(d["loads"])
        if "out" in d:
            p = Path(d["out"])
            kw["out"] = p if p.is_absolute() else base / p
        if "twist_form" in d:
            kw["twist_form"] = str(d["twist_form"])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Check the invariants; raise :class:`ConfigError` on violation."""
        if self.levels < 1:
            raise ConfigError("mesh.levels must be at least 1")
        if self.n < 1:
            raise ConfigError("mesh.n must be at least 1")
        if any(not e > 0 for e in self.epsilon):
            raise ConfigError("every epsilon must be positive")
        if self.mesh_file is not None and not Path(self.mesh_file).is_file():
            raise ConfigError(f"mesh file {self.mesh_file} does not exist")
        if self.mesh_file is None and self.generator not in GENERATORS:
            raise ConfigError(f"mesh.generator must be one of {GENERATORS}")
        if self.width <= 0:
            raise ConfigError("mesh.width must be positive")
        bad = [s for s in self.markers if s not in SIDES]
        if bad:
            raise ConfigError(f"unknown sides in markers: {bad}")
        if any(v not in ("D", "S", "F") for v in self.markers.values()):
            raise ConfigError("markers must be D, S or F")
        if self.case is not None and self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; choose from {sorted(CASES)}")
        if self.twist_form not in ("weak", "literal"):
            raise ConfigError("twist_form must be 'weak' or 'literal'")
        if self.penalty is not None and not self.penalty > 0:
            raise ConfigError("penalty must be positive")
        if not self.penalty_factor > 0:
            raise ConfigError("penalty_factor must be positive")
        if not 1 <= self.quadrature_degree <= 12:
            raise ConfigError("quadrature_degree must lie in 1..12")
        try:
            ElasticModuli(self.mu, self.lam)
            chart = make_chart(self.chart, self.chart_params)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.case is not None:
            c = named_case(self.case, self.epsilon[0], self.moduli, self.chart_params)
            if type(c.chart) is not type(chart):
                raise ConfigError(f"case {self.case!r} needs chart {type(c.chart).__name__}, got {self.chart!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["out"] = str(self.out)
        d["mesh_file"] = None if self.mesh_file is None else str(self.mesh_file)
        return d

    @property
    def moduli(self) -> ElasticModuli:
        return ElasticModuli(self.mu, self.lam)

    def make_chart(self) -> Chart:
        return make_chart(self.chart, self.chart_params)

    def make_case(self, eps: float) -> ManufacturedCase:
        if self.case is None:
            raise ConfigError("this study needs a manufactured 'case'")
        return named_case(self.case, eps, self.moduli, self.chart_params)

    def side_markers(self) -> dict:
        """Markers of generated meshes: the case's layout overridden by ``markers``."""
        mk = dict(left="D", right="D", bottom="D", top="D")
        if self.case is not None:
            mk.update(self.make_case(self.epsilon[0]).markers)
        mk.update(self.markers)
        return mk

    def meshes(self) -> list[Mesh]:
        """Coarsest mesh followed by ``levels − 1`` uniform refinements."""
        if self.mesh_file is not None:
            try:
                mesh = read_mesh(self.mesh_file)
            except OSError as exc:
                raise ConfigError(f"cannot read mesh file: {exc}") from exc
        elif self.generator == "square":
            mesh = rectangle_mesh(self.n, self.n, markers=self.side_markers(), pattern=self.pattern)
        else:
            ny = max(1, round(self.n * self.width))
            mesh = rectangle_mesh(self.n, ny, bounds=((0.0, 1.0), (0.0, self.width)),
                                  markers=self.side_markers(), pattern=self.pattern)
        out = [mesh]
        for _ in range(self.levels - 1):
            out.append(refine_uniform(out[-1]))
        return out

    def penalty_for(self, ctx: FormContext) -> float:
        return float(self.penalty) if self.penalty is not None else default_penalty(ctx, self.penalty_factor)

    def constant_loads(self) -> Loads:
        try:
            return Loads.constant(self.loads.get("p", (0.0, 0.0, 0.0)), self.loads.get("q", (0.0, 0.0, 0.0)),
                                  float(self.loads.get("m", 0.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad loads: {exc}") from exc


def _typed(v, typ, name):
    if typ is float and isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if typ is int and isinstance(v, int) and not isinstance(v, bool):
        return v
    if typ is str and isinstance(v, str):
        return v
    raise ConfigError(f"{name} must be of type {typ.__name__}, got {v!r}")


def load_config(path) -> StudyConfig:
    """Read a JSON configuration file.

    Raises
    ------
    ConfigError
        If the file is missing, is not valid JSON or fails validation.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return StudyConfig.from_dict(data, path.parent)


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def _context(cfg: StudyConfig, mesh: Mesh, chart: Chart) -> FormContext:
    return FormContext(FESpace(mesh, chart), cfg.moduli, cfg.quadrature_degree)


def _rate(e0: float, e1: float, h0: float, h1: float) -> float:
    if e0 <= 0 or e1 <= 0 or h0 == h1:
        return math.nan
    return math.log(e0 / e1) / math.log(h0 / h1)


def run_convergence(cfg: StudyConfig) -> list[dict]:
    """Errors of the manufactured case on every mesh level and each ε.

    ``rate_Hh`` is ``log(e_{k−1}/e_k)/log(h_{k−1}/h_k)`` (``log₂`` of the
    error ratio under uniform refinement).  It is NaN on the first level
    and when the relative error is at round-off, which ``saturated`` flags.
    """
    meshes = cfg.meshes()
    rows = []
    for eps in cfg.epsilon:
        case = cfg.make_case(eps)
        prev = None
        for level, mesh in enumerate(meshes):
            t0 = time.perf_counter()
            ctx = _context(cfg, mesh, case.chart)
            cpen = cfg.penalty_for(ctx)
            a = assemble_a(ctx, cpen, twist=cfg.twist_form)
            b = assemble_b(ctx)
            system = AssembledSystem(a, b, assemble_c(ctx), assemble_load(ctx, case.loads()), cpen, eps,
                                     cfg.moduli, ctx, cfg.twist_form)
            t1 = time.perf_counter()
            sol = solve_mixed(system)
            t2 = time.perf_counter()
            rep = error_report(sol, case, ctx, b, timings={"assembly": t1 - t0, "solve": t2 - t1})
            saturated = rep.rel_Hh < SATURATION
            rate = math.nan if prev is None or saturated else _rate(prev.err_Hh, rep.err_Hh, prev.h, rep.h)
            row = {"eps": eps, "level": level}
            r = rep.row()
            row.update({k: r[k] for k in ("h", "n_elements", "n_dofs", "err_Hh")})
            row.update({"rate_Hh": rate, "saturated": saturated})
            row.update({k: v for k, v in r.items() if k not in row and not k.startswith("time_")})
            row["residual"] = max(sol.residual)
            row.update({k: v for k, v in r.items() if k.startswith("time_")})
            rows.append(row)
            prev = rep
    return rows


def run_locking(cfg: StudyConfig) -> list[dict]:
    """H_h errors on the finest mesh across ``cfg.epsilon`` (sorted descending).

    ``inflation`` is the relative error divided by that of the largest ε.
    Rows whose geometry indicator exceeds :data:`LOCKING_FLAG` are flagged
    as outside the ``h³ ≲ ε`` regime.
    """
    mesh = cfg.meshes()[-1]
    eps_list = sorted(cfg.epsilon, reverse=True)
    case0 = cfg.make_case(eps_list[0])
    ctx = _context(cfg, mesh, case0.chart)
    cpen = cfg.penalty_for(ctx)
    a = assemble_a(ctx, cpen, twist=cfg.twist_form)
    b = assemble_b(ctx)
    c = assemble_c(ctx)
    g_hh = assemble_gram_hh(ctx)
    rows = []
    for eps in eps_list:
        case = cfg.make_case(eps)
        system = AssembledSystem(a, b, c, assemble_load(ctx, case.loads()), cpen, eps, cfg.moduli, ctx, cfg.twist_form)
        rep = error_report(solve_mixed(system), case, ctx, b, g_hh)
        rows.append({
            "eps": eps,
            "h": rep.h,
            "err_Hh": rep.err_Hh,
            "rel_Hh": rep.rel_Hh,
            "inflation": rep.rel_Hh / rows[0]["rel_Hh"] if rows else 1.0,
            "eps_err_M": rep.eps_err_M,
            "err_M_weak": rep.err_M_weak,
            "indicator": rep.indicator,
            "flagged": rep.indicator > LOCKING_FLAG,
        })
    return rows


def run_stability(cfg: StudyConfig, sweep: Sequence[float] = PENALTY_SWEEP) -> tuple[list[dict], list[dict]]:
    """Discrete Korn, coercivity, continuity and compliance constants per level.

    Returns
    -------
    rows : list of dict
        One row per level, see ``stability.csv``.  ``sanity`` is the
        smallest eigenvalue of the pencil ``(G_Hh, G_Hh)`` and must be 1.
    sweep_rows : list of dict
        Smallest eigenvalue of ``(A, G_Hh)`` for penalties ``factor ×``
        the default on every level.

    Warns
    -----
    CoercivityWarning
        For every level where the configured penalty is not coercive.
    """
    chart = cfg.make_chart()
    rows, sweep_rows = [], []
    for level, mesh in enumerate(cfg.meshes()):
        ctx = _context(cfg, mesh, chart)
        g_hh = assemble_gram_hh(ctx)
        g_ah = assemble_gram_ah(ctx)
        g_vh = assemble_gram_vh(ctx)
        cpen = cfg.penalty_for(ctx)
        h = float(mesh.h_tau.max())
        korn = float(min_generalized_eig(g_ah, g_hh)[0])
        coer = float(min_generalized_eig(assemble_a(ctx, cpen, twist=cfg.twist_form), g_hh)[0])
        if coer <= 0:
            warnings.warn(f"level {level}: penalty {cpen:.4g} is not coercive (min eigenvalue {coer:.3e})",
                          CoercivityWarning, stacklevel=2)
        c = assemble_c(ctx)
        rows.append({
            "level": level,
            "h": h,
            "n_dofs": ctx.space.ndof,
            "korn_min": korn,
            "coercivity_min": coer,
            "coercive": coer > 0,
            "penalty": cpen,
            "b_continuity": b_continuity(assemble_b(ctx), g_hh, g_vh),
            "c_min": float(min_generalized_eig(c, g_vh)[0]),
            "c_max": max_generalized_eig(c, g_vh),
            "sanity": float(min_generalized_eig(g_hh, g_hh)[0]),
        })
        base = default_penalty(ctx)
        for f in sweep:
            lam = float(min_generalized_eig(assemble_a(ctx, f * base, twist=cfg.twist_form), g_hh)[0])
            sweep_rows.append({"level": level, "h": h, "factor": f, "penalty": f * base,
                               "coercivity_min": lam, "coercive": lam > 0})
    return rows, sweep_rows


def run_indicator(cfg: StudyConfig) -> list[dict]:
    """Geometry indicator ``1 + ε⁻¹max_τ(h³|Γ|₂ + h⁵|b|₃)`` per level and ε."""
    chart = cfg.make_chart()
    rows = []
    for level, mesh in enumerate(cfg.meshes()):
        for eps in cfg.epsilon:
            ind = geometry_indicator(mesh, chart, eps)
            rows.append({
                "eps": eps,
                "level": level,
                "h": float(mesh.h_tau.max()),
                "factor": ind["factor"],
                "argmax": ind["argmax"],
                "gamma_max": float(ind["gamma_term"].max()),
                "b_max": float(ind["b_term"].max()),
            })
    return rows


def run_solve(cfg: StudyConfig) -> list[dict]:
    """Solve once per ε on the finest mesh; report errors when a case is set."""
    mesh = cfg.meshes()[-1]
    chart = cfg.make_case(cfg.epsilon[0]).chart if cfg.case else cfg.make_chart()
    ctx = _context(cfg, mesh, chart)
    cpen = cfg.penalty_for(ctx)
    a = assemble_a(ctx, cpen, twist=cfg.twist_form)
    b = assemble_b(ctx)
    c = assemble_c(ctx)
    rows = []
    for eps in cfg.epsilon:
        case = cfg.make_case(eps) if cfg.case else None
        loads = case.loads() if case else cfg.constant_loads()
        system = AssembledSystem(a, b, c, assemble_load(ctx, loads), cpen, eps, cfg.moduli, ctx, cfg.twist_form)
        sol = solve_mixed(system)
        row = {
            "eps": eps,
            "h": float(mesh.h_tau.max()),
            "n_elements": mesh.n_elements,
            "n_dofs": system.n_uw + system.n_m,
            "penalty": cpen,
            "residual": max(sol.residual),
            "refinements": sol.refinements,
        }
        if case:
            r = error_report(sol, case, ctx, b).row()
            row.update({k: v for k, v in r.items() if k not in row and not k.startswith("time_")})
        else:
            row["max_w"] = float(np.abs(sol.uw).max(initial=0.0))
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows: Sequence[dict], path) -> Path:
    """Write ``rows`` with the key order of the first row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return path
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def loglog_svg(series: dict, xlabel: str, ylabel: str, title: str = "", size=(480, 360)) -> str:
    """Log-log line plot as an SVG document with ticks at powers of two.

    Parameters
    ----------
    series : dict
        ``label -> (x, y)``; nonpositive or non-finite points are dropped.
    """
    pts = {}
    for label, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
        if ok.any():
            pts[label] = (np.log2(x[ok]), np.log2(y[ok]))
    w, h = size
    left, right, top, bottom = 70, 130, 30, 50
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
           'font-family="sans-serif" font-size="11">',
           f'<rect width="{w}" height="{h}" fill="white"/>']
    if title:
        out.append(f'<text x="{w / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>')
    if not pts:
        out.append("</svg>")
        return "\n".join(out)
    allx = np.concatenate([p[0] for p in pts.values()])
    ally = np.concatenate([p[1] for p in pts.values()])
    x0, x1 = math.floor(allx.min()), math.ceil(allx.max())
    y0, y1 = math.floor(ally.min()), math.ceil(ally.max())
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    pw, ph = w - left - right, h - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    xstep = max(1, math.ceil((x1 - x0) / 8))
    ystep = max(1, math.ceil((y1 - y0) / 8))
    for k in range(x0, x1 + 1, xstep):
        out.append(f'<line x1="{sx(k):.1f}" y1="{top + ph}" x2="{sx(k):.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(k):.1f}" y="{top + ph + 18}" text-anchor="middle">2^{k}</text>')
    for k in range(y0, y1 + 1, ystep):
        out.append(f'<line x1="{left - 5}" y1="{sy(k):.1f}" x2="{left}" y2="{sy(k):.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{sy(k) + 4:.1f}" text-anchor="end">2^{k}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{h - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (label, (lx, ly)) in enumerate(pts.items()):
        col = PALETTE[i % len(PALETTE)]
        order = np.argsort(lx)
        path = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(lx[order], ly[order]))
        out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b in zip(lx, ly):
            out.append(f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="3" fill="{col}"/>')
        ly_ = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly_}" x2="{left + pw + 30}" y2="{ly_}" stroke="{col}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly_ + 4}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def convergence_plot(rows: Sequence[dict]) -> str:
    series = {}
    for eps in dict.fromkeys(r["eps"] for r in rows):
        sel = [r for r in rows if r["eps"] == eps]
        h = [r["h"] for r in sel]
        series[f"H_h, ε={eps:g}"] = (h, [r["err_Hh"] for r in sel])
        series[f"εM, ε={eps:g}"] = (h, [r["eps_err_M"] for r in sel])
    return loglog_svg(series, "h", "error", "convergence")


def locking_plot(rows: Sequence[dict]) -> str:
    eps = [r["eps"] for r in rows]
    return loglog_svg({"relative H_h error": (eps, [r["rel_Hh"] for r in rows])}, "ε", "error", "locking sweep")
