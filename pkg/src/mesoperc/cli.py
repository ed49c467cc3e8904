"""Command-line experiment runner.

Every subcommand reads an optional TOML scenario (``--config``) whose keys
match the long option names; options given on the command line win. Outputs
go to ``--out`` (default ``.``): ``summary.json`` (with the full scenario, so
a run can be repeated exactly), ``table.csv`` and, for drawings,
``figure.svg``.

Lattice sources are built-in torus names (regular, symmetric90, k7, fig1) or
mesh files. Marked domains are either built-in (rhombus, parallelogram, rectangle,
triangle, triangle-lattice) or a mesoscopic window ``T_{delta,N}`` of a torus.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import conformal, io, lattices, packing
from .mesh import InvalidTriangulationError, subdivide, validate
from .percolation import core as perc
from .render import Style, render

KINDS = ("validate", "subdivide", "pack", "modulus", "cardy", "cardy-compare", "crossing", "observable", "contour",
         "rsw", "render")
STOCHASTIC = ("cardy-compare", "crossing", "observable", "contour", "rsw")
BUILTIN_DOMAINS = ("rhombus", "parallelogram", "rectangle", "triangle", "triangle-lattice")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    kind: str
    lattice: Optional[str] = None
    domain: Optional[str] = None
    delta: float = 1.0
    N: int = 1
    level: int = 0
    window: Optional[list] = None
    marks: Optional[list] = None
    rho: Optional[float] = None
    p: float = 0.5
    trials: int = 10_000
    seed: Optional[int] = None
    threads: Optional[int] = None
    out: str = "."
    method: str = "auto"
    exhaustive: bool = False
    length: int = 2
    side: int = 16
    scales: Optional[list] = None
    angles: list = field(default_factory=lambda: [0.0, 90.0])
    aspect: float = 2.0
    height: float = 1.0
    circles: bool = True

    def check(self) -> None:
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown experiment kind {self.kind!r}")
        if self.kind in STOCHASTIC and self.seed is None:
            raise ScenarioError(f"{self.kind} is stochastic: a seed is required")
        if self.kind in STOCHASTIC and not self.exhaustive and self.trials < 1:
            raise ScenarioError("trials must be positive")
        if self.kind in ("validate", "subdivide", "pack", "render", "rsw") and not self.lattice:
            raise ScenarioError(f"{self.kind} needs a lattice")
        if self.kind.startswith("cardy") and self.rho is None and self.domain is None and self.lattice is None:
            raise ScenarioError(f"{self.kind} needs rho or a domain")
        if self.kind == "cardy-compare" and self.domain is None and self.lattice is None:
            raise ScenarioError("cardy-compare needs a domain to sample")
        if self.N < 1 or self.level < 0 or self.delta <= 0:
            raise ScenarioError("need N >= 1, level >= 0 and delta > 0")
        if not 0.0 <= self.p <= 1.0:
            raise ScenarioError("p must lie in [0, 1]")


# --------------------------------------------------------------------------
# inputs


def load_lattice(src: str):
    """(Triangulation, Embedding) from a built-in torus name or a mesh file."""
    try:
        return lattices.builtin_torus(src)
    except KeyError:
        pass
    path = Path(src)
    if not path.exists():
        raise ScenarioError(f"unknown lattice {src!r} (not a built-in name or a file)")
    return io.load_mesh(path)


def _window(sc: Scenario, e) -> tuple:
    if sc.window is not None:
        if len(sc.window) != 4:
            raise ScenarioError("window is x0 y0 x1 y1")
        return tuple(float(x) for x in sc.window)
    P = np.abs(e.periods).sum(axis=0)
    return (0.0, 0.0, float(P[0]), float(P[1]))


def build_domain(sc: Scenario, three: bool = False):
    """Marked domain of the scenario, refined by ``sc.level``."""
    if sc.domain in (None, "mesoscopic") and sc.lattice:
        t, e = load_lattice(sc.lattice)
        if t.topology == "torus":
            x0, y0, x1, y1 = _window(sc, e)
            L = lattices.build_mesoscopic(t, e, sc.delta, sc.N, (x0, y0, x1, y1))
            if three:
                # lower right, top middle, lower left: far apart on the coarse boundary
                targets = [complex(x1, y0), complex(0.5 * (x0 + x1), y1), complex(x0, y0)]
                marks = lattices.nearest_boundary_marks(L.coarse, L.coarse_embedding, targets)
                d = lattices.MarkedTriangleDomain(L.triangulation, L.embedding, marks)
            else:
                d = L.domain()
        else:
            if not sc.marks:
                raise ScenarioError("a disk mesh needs marks")
            cls = lattices.MarkedTriangleDomain if three else lattices.MarkedRectangleDomain
            d = cls(t, e, tuple(sc.marks))
    elif sc.domain == "rhombus":
        d = lattices.rhombus_domain()
    elif sc.domain == "parallelogram":
        d = lattices.parallelogram_domain(sc.length)
    elif sc.domain == "rectangle":
        d = lattices.rectangle_lattice_domain(sc.aspect, sc.side)
    elif sc.domain == "triangle":
        d = lattices.triangle_domain()
    elif sc.domain == "triangle-lattice":
        d = lattices.triangle_lattice_domain(sc.side)
    else:
        raise ScenarioError(f"unknown domain {sc.domain!r}; use one of {BUILTIN_DOMAINS} or a lattice")
    want = 3 if three else 4
    if len(d.marks) != want:
        raise ScenarioError(f"{sc.kind} needs a domain with {want} marks")
    return d.refined(sc.level) if sc.level > 0 else d


# --------------------------------------------------------------------------
# experiments; each returns (summary dict, csv header, csv rows, svg or None, one-line text)


def _validate(sc):
    t, e = load_lattice(sc.lattice)
    rep = validate(t, e)
    rows = [(i, m) for i, m in enumerate(rep.violations)]
    s = {"ok": rep.ok, "errors": rep.violations, "n_vertices": t.n_vertices, "n_faces": t.n_faces,
         "topology": t.topology}
    return s, ("index", "error"), rows, None, f"validate: {'ok' if rep.ok else 'INVALID'} V={t.n_vertices} F={t.n_faces}"


def _subdivide(sc):
    t, e = load_lattice(sc.lattice)
    for _ in range(max(sc.level, 1)):
        t, e = subdivide(t, e)
    Path(sc.out, "mesh.txt").write_text(io.write_mesh(t, e, with_shifts=e.periods is not None))
    s = {"n_vertices": t.n_vertices, "n_faces": t.n_faces, "mesh": "mesh.txt"}
    rows = [(v, e.coords[v, 0], e.coords[v, 1]) for v in range(t.n_vertices)]
    return s, ("vertex", "x", "y"), rows, None, f"subdivide: V={t.n_vertices} F={t.n_faces}"


def _pack(sc):
    t, e = load_lattice(sc.lattice)
    if t.topology == "torus" and sc.N > 1:
        t, e, _ = lattices.refine_with_parents(t, e, sc.N)
    cp, res = packing.pack(t, e)
    s = dict(cp.to_json(), residual=res.residual, sweeps=res.sweeps, newton_steps=res.newton_steps)
    rows = [(v, r, c.real, c.imag) for v, (r, c) in enumerate(zip(cp.radii, cp.centers))]
    svg = render(t, e, cp, Style(circles=sc.circles))
    tau = "" if cp.tau is None else f" tau={cp.tau.real:.6f}{cp.tau.imag:+.6f}i"
    return s, ("vertex", "radius", "x", "y"), rows, svg, f"pack: residual={res.residual:.3e}{tau}"


def _modulus(sc):
    d = build_domain(sc)
    r = conformal.modulus(d, 0)
    if sc.level > 0:
        base = build_domain(Scenario(**{**asdict(sc), "level": sc.level - 1}))
        prev = conformal.modulus(base, 0).rho
        err = abs(r.rho - prev)
    else:
        err = float("nan")
    s = dict(r.to_json(), level=sc.level, error=err, cardy=conformal.cardy(r.rho))
    return s, ("vertex", "u"), r.potential_rows(), None, f"modulus: rho={r.rho:.10f} error={err:.3e}"


def _cardy(sc):
    rho = sc.rho
    if rho is None:
        rho = conformal.modulus(build_domain(sc), 0).rho
    target = conformal.cardy(rho)
    s = {"rho": rho, "cardy": target}
    line = f"{sc.kind}: rho={rho:.10f} C={target:.10f}"
    if sc.kind == "cardy-compare":
        d = build_domain(sc)
        est = perc.crossing_probability(d, perc.CrossingSpec.from_domain(d), sc.trials, sc.seed, sc.p,
                                        sc.threads, sc.exhaustive, sc.method)
        s.update(estimate=est.estimate, half_width=est.half_width, trials=est.trials,
                 within_ci=bool(abs(est.estimate - target) <= est.half_width))
        line += f" estimate={est.estimate:.5f} +- {est.half_width:.5f}"
    return s, ("rho", "cardy"), [(rho, target)], None, line


def _crossing(sc):
    d = build_domain(sc)
    est = perc.crossing_probability(d, perc.CrossingSpec.from_domain(d), sc.trials, sc.seed, sc.p,
                                    sc.threads, sc.exhaustive, sc.method)
    s = {"estimate": est.estimate, "half_width": est.half_width, "hits": est.hits, "trials": est.trials,
         "n_vertices": d.triangulation.n_vertices}
    line = f"crossing: p={est.estimate:.5f} +- {est.half_width:.5f} ({est.trials} trials)"
    if sc.rho is not None:
        s["target"] = conformal.cardy(sc.rho)
        line += f" target={s['target']:.5f}"
    return s, ("estimate", "half_width", "hits", "trials"), [(est.estimate, est.half_width, est.hits, est.trials)], None, line


def _observable(sc):
    d = build_domain(sc, three=True)
    field_ = perc.estimate_H(d, sc.trials, sc.seed, sc.p, sc.threads, sc.exhaustive)
    pred = conformal.predict_H(d, 0)
    H = field_.H
    dev = np.abs(H - pred.faces)
    hw = field_.half_width
    rows = [(f, field_.Ha[f], field_.Hb[f], field_.Hc[f], H[f].real, H[f].imag, pred.faces[f].real,
             pred.faces[f].imag, hw[:, f].max()) for f in range(len(H))]
    s = {"max_deviation": float(dev.max()), "mean_deviation": float(dev.mean()), "trials": field_.trials,
         "n_faces": len(H), "path_error": pred.path_error}
    header = ("face", "Ha", "Hb", "Hc", "H_re", "H_im", "h_re", "h_im", "half_width")
    return s, header, rows, None, f"observable: max|H-h|={dev.max():.4f} mean={dev.mean():.4f}"


def _contour(sc):
    d = build_domain(sc, three=True)
    t, e = d.triangulation, d.embedding
    field_ = perc.estimate_H(d, sc.trials, sc.seed, sc.p, sc.threads, sc.exhaustive)
    z = e.coords[:, 0] + 1j * e.coords[:, 1]
    zc = np.mean(z[list(d.marks)])
    radius = 0.5 * float(np.min(np.abs(z[t.boundary] - zc)))
    cyc = perc.dual_cycle(t, np.abs(z - zc) <= radius)
    pos = perc.face_centroids(t, e)
    I = perc.contour_integral(field_, lambda w: w, cyc, t, pos)
    s = {"integral": I, "magnitude": abs(I), "length": len(cyc) - 1, "trials": field_.trials}
    return s, ("face",), [(int(f),) for f in cyc], None, f"contour: |I|={abs(I):.5f} ({len(cyc) - 1} faces)"


def _rsw(sc):
    t, e = load_lattice(sc.lattice)
    scales = [tuple(x) for x in (sc.scales or [[sc.delta, sc.N]])]
    rows = perc.rsw_harness((t, e), scales, sc.aspect, sc.height, sc.angles, sc.trials, sc.seed,
                            threads=sc.threads)
    tab = [(r.delta, r.N, r.angle, r.aspect, r.estimate, r.half_width, r.trials) for r in rows]
    est = [r.estimate for r in rows]
    s = {"rows": [asdict(r) for r in rows], "min": min(est), "max": max(est)}
    return (s, ("delta", "N", "angle", "aspect", "estimate", "half_width", "trials"), tab, None,
            f"rsw: {len(rows)} rectangles, estimates in [{min(est):.4f}, {max(est):.4f}]")


def _render(sc):
    t, e = load_lattice(sc.lattice)
    if sc.N > 1:
        t, e, _ = lattices.refine_with_parents(t, e, sc.N)
    svg = render(t, e, style=Style(circles=False))
    rows = [(v, e.coords[v, 0], e.coords[v, 1]) for v in range(t.n_vertices)]
    s = {"n_vertices": t.n_vertices, "n_faces": t.n_faces}
    return s, ("vertex", "x", "y"), rows, svg, f"render: {t.n_edges} edges"


RUNNERS = {"validate": _validate, "subdivide": _subdivide, "pack": _pack, "modulus": _modulus, "cardy": _cardy,
           "cardy-compare": _cardy,
           "crossing": _crossing, "observable": _observable, "contour": _contour, "rsw": _rsw, "render": _render}


def run(sc: Scenario) -> int:
    """Run one scenario, write its artifacts and print a one-line summary; returns the exit status."""
    try:
        sc.check()
        out = Path(sc.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        summary, header, rows, svg, line = RUNNERS[sc.kind](sc)
    except (ScenarioError, InvalidTriangulationError, ValueError, RuntimeError, OSError) as exc:
        print(f"mesoperc {sc.kind}: error: {exc}", file=sys.stderr)
        return 2
    doc = {"scenario": asdict(sc), "result": summary, "seconds": time.perf_counter() - t0}
    io.write_json(out / "summary.json", doc)
    io.write_csv(out / "table.csv", header, rows)
    if svg is not None:
        (out / "figure.svg").write_text(svg)
    print(line)
    if sc.kind == "validate" and not summary["ok"]:
        return 1
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mesoperc", description="Percolation on mesoscopic lattices.")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="TOML scenario file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)
        p.add_argument("--lattice", help="built-in torus name or mesh file")
        p.add_argument("--domain", help="rhombus, parallelogram, rectangle, triangle, triangle-lattice or mesoscopic")
        p.add_argument("--delta", type=float)
        p.add_argument("--N", type=int)
        p.add_argument("--level", type=int)
        p.add_argument("--window", type=float, nargs=4)
        p.add_argument("--marks", type=int, nargs="+")
        p.add_argument("--rho", type=float)
        p.add_argument("--p", type=float)
        p.add_argument("--method", choices=("auto", "explore", "flood"))
        p.add_argument("--exhaustive", action="store_true", default=None)
        p.add_argument("--length", type=int)
        p.add_argument("--side", type=int, help="triangle-lattice side, or rows of the rectangle domain")
        p.add_argument("--aspect", type=float)
        p.add_argument("--height", type=float)
        p.add_argument("--angles", type=float, nargs="+")
        p.add_argument("--scales", type=float, nargs="+", help="delta N pairs for rsw")
        p.add_argument("--no-circles", dest="circles", action="store_false", default=None)
    return ap


def scenario_from_args(argv) -> Scenario:
    args = vars(_parser().parse_args(argv))
    cfg = {}
    if args.get("config"):
        try:
            with open(args["config"], "rb") as fh:
                cfg = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ScenarioError(f"config parse error: {exc}") from None
    known = {f.name for f in fields(Scenario)}
    unknown = set(cfg) - known
    if unknown:
        raise ScenarioError(f"config parse error: unknown keys {sorted(unknown)}")
    merged = dict(cfg)
    for k, v in args.items():
        if k in known and v is not None:
            merged[k] = v
    merged["kind"] = args["kind"]
    sc_ = merged.get("scales")
    if sc_ is not None and sc_ and not isinstance(sc_[0], (list, tuple)):
        if len(sc_) % 2:
            raise ScenarioError("scales are delta N pairs")
        merged["scales"] = [[float(sc_[i]), int(sc_[i + 1])] for i in range(0, len(sc_), 2)]
    return Scenario(**merged)


def main(argv=None) -> int:
    try:
        sc = scenario_from_args(sys.argv[1:] if argv is None else argv)
    except ScenarioError as exc:
        print(f"mesoperc: error: {exc}", file=sys.stderr)
        return 2
    return run(sc)


if __name__ == "__main__":
    sys.exit(main())
