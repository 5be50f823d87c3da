"""Command-line front end: configuration, cached corrector solves, reports, CSV and SVG output."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import tempfile
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
from filelock import FileLock

from . import __version__
from . import asymptotics as asy
from . import checks
from . import corrector as cor
from . import curvature as cv
from . import reduced_energy as re
from .bubble import DomainError

TOOL = "yamabe_blowup"
DIGITS = 12


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class StudyConfig:
    n: int = 8
    seed: int = 1
    scale: float = 1.0
    curvature_file: str | None = None
    higher_order: bool = True
    grid_nr: int = 400
    grid_nt: int = 400
    r_max: float = 1000.0
    t_max: float = 1000.0
    beta: float = 8.0
    tol: float = 1e-8
    eps_min: float = 1e-6
    eps_max: float = 1e-2
    eps_points: int = 9
    lambda_a: float = 0.1
    lambda_b: float = 10.0
    landscape_eps: float = 1e-4
    landscape_points: int = 201
    phi: float | None = None
    lam: float = 1.0
    radius: float = 1.0
    h_exponent: float = 2.0
    normal_coeff: float = 0.0
    n_radial: int = 32
    n_angular: int = 256
    replicates: int = 2
    tail_eps_min: float = 1e-9
    tail_eps_max: float = 1e-5
    delta: float | None = None
    profile_points: int = 41
    out: str = "out"

    def validate(self) -> "StudyConfig":
        bad = []
        if not 5 <= self.n <= 40:
            bad.append("n must lie in [5, 40]")
        if self.scale <= 0:
            bad.append("scale must be positive")
        if not 0 < self.eps_min < self.eps_max < 1:
            bad.append("need 0 < eps_min < eps_max < 1")
        if self.eps_points < 4:
            bad.append("eps_points must be at least 4")
        if not 0 < self.lambda_a < self.lambda_b:
            bad.append("need 0 < lambda_a < lambda_b")
        if self.tol <= 0:
            bad.append("tol must be positive")
        if not 0 < self.tail_eps_min < self.tail_eps_max < 1:
            bad.append("need 0 < tail_eps_min < tail_eps_max < 1")
        if self.delta is not None and self.delta <= 0:
            bad.append("delta must be positive")
        if self.phi is not None and self.phi >= 0:
            bad.append("phi must be negative")
        if min(self.lam, self.radius, self.landscape_eps) <= 0:
            bad.append("lam, radius and landscape_eps must be positive")
        if min(self.n_radial, self.n_angular, self.replicates, self.profile_points) < 2:
            bad.append("sample counts must be at least 2")
        try:
            self.grid()
        except (ValueError, DomainError) as exc:
            bad.append(str(exc))
        if bad:
            raise UsageError("; ".join(bad))
        return self

    def grid(self) -> cor.RadialGrid:
        return cor.RadialGrid(self.grid_nr, self.grid_nt, self.r_max, self.t_max, self.beta, self.beta)

    def eps_grid(self) -> np.ndarray:
        return np.geomspace(self.eps_max, self.eps_min, self.eps_points)

    def settings(self) -> asy.RemainderSettings:
        return asy.RemainderSettings(radius=self.radius, h_exponent=self.h_exponent,
                                     normal_coeff=self.normal_coeff, n_radial=self.n_radial,
                                     n_angular=self.n_angular, replicates=self.replicates,
                                     seed=self.seed)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "StudyConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def hash(self) -> str:
        """Digest of every field except the output location."""
        d = asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path) -> StudyConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a flat key-value object")
    return StudyConfig.from_mapping(data)


# ------------------------------------------------------------------ output

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if not np.isfinite(x) else float(f"{x:.{DIGITS}g}")
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{DIGITS}g}"
    return str(x)


class Emitter:
    def __init__(self, cfg: StudyConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    @property
    def stamp(self) -> str:
        return f"{TOOL} {__version__} config={self.cfg.hash()}"

    def report(self, payload: dict, passed: bool) -> Path:
        doc = {"tool": TOOL, "version": __version__, "command": self.command,
               "config_hash": self.cfg.hash(), "config": asdict(self.cfg),
               "status": "PASS" if passed else "FAIL", "payload": _num(payload)}
        doc["config"].pop("out")
        return self._write(f"{self.command}.json", json.dumps(doc, sort_keys=True, indent=2) + "\n")

    def table(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        buf.write(f"# {self.stamp}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return self._write(name, buf.getvalue())

    def svg(self, name: str, series: dict, *, title: str, xlabel: str, ylabel: str,
            xlog=True, ylog=True, markers=()) -> Path:
        return self._write(name, svg_plot(series, title=title, xlabel=xlabel, ylabel=ylabel,
                                          xlog=xlog, ylog=ylog, markers=markers, stamp=self.stamp))

    def _write(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        self.files.append(path)
        return path


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#000000")


def svg_plot(series: dict, *, title: str, xlabel: str, ylabel: str, xlog=True, ylog=True,
             markers=(), stamp: str = "", width: int = 640, height: int = 420) -> str:
    """Minimal standalone SVG line plot; each axis linear or log10."""
    tx = np.log10 if xlog else (lambda a: np.asarray(a, dtype=float))
    ty = np.log10 if ylog else (lambda a: np.asarray(a, dtype=float))
    pts = {}
    for label, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y) & ((x > 0) if xlog else True) & ((y > 0) if ylog else True)
        pts[label] = (tx(x[ok]), ty(y[ok]))
    X = np.concatenate([p[0] for p in pts.values()] + [tx(np.array([m[0] for m in markers]))] if markers
                       else [p[0] for p in pts.values()])
    Y = np.concatenate([p[1] for p in pts.values()])
    x0, x1 = float(X.min()), float(X.max())
    y0, y1 = float(Y.min()), float(Y.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    L, R, T, B = 70, 150, 40, 50
    sx = lambda v: L + (v - x0) / (x1 - x0) * (width - L - R)
    sy = lambda v: height - B - (v - y0) / (y1 - y0) * (height - T - B)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f"<!-- {stamp} -->",
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
           f'<rect x="{L}" y="{T}" width="{width - L - R}" height="{height - T - B}" fill="none" stroke="black"/>']
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        xl = f"1e{xv:.2g}" if xlog else f"{xv:.3g}"
        yl = f"1e{yv:.2g}" if ylog else f"{yv:.3g}"
        out.append(f'<text x="{sx(xv):.1f}" y="{height - B + 16}" text-anchor="middle" font-size="10">{xl}</text>')
        out.append(f'<text x="{L - 6}" y="{sy(yv) + 3:.1f}" text-anchor="end" font-size="10">{yl}</text>')
    out.append(f'<text x="{(L + width - R) / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{(T + height - B) / 2:.1f}" font-size="12" '
               f'transform="rotate(-90 16 {(T + height - B) / 2:.1f})" text-anchor="middle">{ylabel}</text>')
    for i, (label, (x, y)) in enumerate(pts.items()):
        c = _COLORS[i % len(_COLORS)]
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{width - R + 8}" y="{T + 14 * (i + 1)}" font-size="11" fill="{c}">{label}</text>')
    for xm, label in markers:
        xv = sx(float(tx(np.array([xm]))[0]))
        out.append(f'<line x1="{xv:.2f}" y1="{T}" x2="{xv:.2f}" y2="{height - B}" stroke="gray" '
                   f'stroke-dasharray="4 3"/>')
        out.append(f'<text x="{xv + 3:.2f}" y="{T + 12}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------- workflow

def build_curvature(cfg: StudyConfig) -> cv.CurvatureData:
    if cfg.curvature_file:
        curv = cv.load_curvature(cfg.curvature_file)
        if curv.n != cfg.n:
            raise UsageError(f"curvature file has n={curv.n}, config says n={cfg.n}")
        return curv
    return cv.random_admissible(cfg.seed, cfg.scale, cfg.n, higher_order=cfg.higher_order)


def corrector_for(cfg: StudyConfig, curv: cv.CurvatureData):
    """Cached solve keyed by curvature content, grid and tolerance; returns ``(sol, from_cache)``."""
    grid = cfg.grid()
    key = cor.cache_key(curv, grid, cfg.tol)
    cache = Path(cfg.out) / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"corrector-{key[:32]}.npz"
    with FileLock(str(cache / ".lock")):
        if path.exists():
            return cor.load_solution(path, key), True
        sol = cor.solve_corrector(curv, grid, cfg.tol)
        cor.save_solution(sol, path, key)
        return sol, False


def cmd_constants(cfg: StudyConfig) -> int:
    em = Emitter(cfg, "constants")
    n = cfg.n
    mi = re.moment_integrals(n)
    gaps = mi.relative_gaps()
    rows, ok = [], True
    for k in sorted(mi.closed):
        good = gaps[k] < 1e-8
        ok &= good
        rows.append((k, mi.closed[k], mi.quadrature[k], gaps[k], "PASS" if good else "FAIL"))
    A, Aq, C = re.const_A(n), re.const_A_quadrature(n), re.const_C(n)
    a_ok = abs(A - Aq) <= 1e-8 * abs(A)
    rows.append(("A", A, Aq, abs(A - Aq) / abs(A), "PASS" if a_ok else "FAIL"))
    rows.append(("C", C, C, 0.0, "PASS" if C > 0 else "FAIL"))
    printed = re.b_log_coefficient(n)
    sym, num = re.log_coefficient_symbolic(n), re.log_coefficient_numeric(n)
    for label, val in (("B_log_symbolic", sym), ("B_log_numeric", num)):
        gap = abs(val - printed) / abs(printed)
        rows.append((label, printed, val, gap, "PASS" if gap < 1e-10 else "FAIL"))
        ok &= gap < 1e-10
    ok &= a_ok and C > 0
    em.table("constants.csv", ["quantity", "closed_form", "oracle", "relative_gap", "status"], rows)
    eps = np.concatenate([[0.0], cfg.eps_grid()[::-1]])
    B = re.const_B(n, eps)
    ok &= B[0] == 0.0
    em.table("constants_B.csv", ["eps", "B"], zip(eps, B))
    em.report({"n": n, "moments": {k: {"closed": mi.closed[k], "quadrature": mi.quadrature[k],
                                       "gap": gaps[k]} for k in mi.closed},
               "A": A, "C": C, "B_log_coefficient": printed, "B_linear_coefficient": re.b_linear_coefficient(n),
               "B_log_symbolic": sym, "B_log_numeric": num,
               "B": {_fmt(e): b for e, b in zip(eps, B)}}, ok)
    return 0 if ok else 1


def cmd_corrector(cfg: StudyConfig) -> int:
    em = Emitter(cfg, "corrector")
    curv = build_curvature(cfg)
    sol, cached = corrector_for(cfg, curv)
    rep = cor.check_properties(sol)
    rich = cor.richardson_order(cfg.n, cfg.grid())
    exp = rep.expected_decay(cfg.n)
    status = {
        "uvq_orthogonality": abs(rep.uvq_integral) < 1e-4 * rep.v_norm,
        "v_lap_v_negative": rep.v_lap_v < 0,
        "decay_tau0": abs(rep.decay_exponents[0] - exp[0]) <= 0.3,
        "decay_tau1": abs(rep.decay_exponents[1] - exp[1]) <= 0.3,
        "refinement_order": abs(rich["orders"][-1] - 2.0) <= 0.3,
        "kernel_projection": rep.kernel_defects <= cfg.tol,
    }
    ok = all(status.values())
    em.table("corrector_properties.csv", ["property", "status"],
             [(k, "PASS" if v else "FAIL") for k, v in status.items()])
    print(f"corrector {'served from cache' if cached else 'solved'}: {curv.content_hash()[:16]}")
    em.report({"curvature_hash": curv.content_hash(),
               "uvq_integral": rep.uvq_integral, "v_boundary_l2": rep.v_norm,
               "v_lap_v": rep.v_lap_v, "v_lap_v_by_parts": rep.v_lap_v_by_parts,
               "boundary_identity": rep.boundary_identity,
               "decay_exponents": {f"tau{k}": v for k, v in rep.decay_exponents.items()},
               "expected_decay": {f"tau{k}": v for k, v in exp.items()},
               "refinement": rich, "kernel_defect": rep.kernel_defects,
               "algebraic_residual": sol.residuals["algebraic"],
               "checks": {k: "PASS" if v else "FAIL" for k, v in status.items()}}, ok)
    return 0 if ok else 1


def cmd_landscape(cfg: StudyConfig) -> int:
    em = Emitter(cfg, "landscape")
    n = cfg.n
    if cfg.phi is not None:
        ph, source = cfg.phi, "config"
    else:
        curv = build_curvature(cfg)
        sol, _ = corrector_for(cfg, curv)
        ph, source = re.phi(curv, sol).value, curv.content_hash()
    interval = (cfg.lambda_a, cfg.lambda_b)
    mx = re.maximize(ph, n, interval)
    lam, I, dI = re.landscape(ph, n, cfg.landscape_eps, interval, cfg.landscape_points)
    em.table("landscape.csv", ["lambda", "I_eps", "dI_dlambda"], zip(lam, I, dI))
    markers = [(mx.lam, "lambda*")]
    em.svg("landscape.svg", {"I_eps": (lam, I)}, title=f"reduced energy, n={n}, eps={cfg.landscape_eps:g}",
           xlabel="lambda", ylabel="I_eps(lambda)", ylog=False, markers=markers)
    inside = cfg.lambda_a <= mx.closed_form <= cfg.lambda_b
    agree = abs(mx.golden - mx.closed_form) <= 1e-6 * mx.closed_form if inside else True
    ok = (mx.interior == inside) and agree
    em.report({"phi": ph, "phi_source": source, "C": re.const_C(n), "lambda_star_closed": mx.closed_form,
               "lambda_star_golden": mx.golden, "lambda_max": mx.lam, "interior": mx.interior,
               "eps": cfg.landscape_eps}, ok)
    return 0 if ok else 1


def scaling_verdict(study: asy.ScalingStudy) -> dict:
    if study.n == 8:
        lt = study.log_test
        return {"log_model_significant": bool(lt is not None and lt.significant()),
                "corrected_slope_in_band": bool(lt is not None and abs(lt.corrected_slope - 0.75) <= 0.15)}
    return {"composite_slope_in_band": abs(study.composite_slope - 0.75) <= 0.10}


def cmd_scaling(cfg: StudyConfig) -> int:
    em = Emitter(cfg, "scaling")
    curv = build_curvature(cfg)
    sol, _ = corrector_for(cfg, curv)
    st = asy.scaling_study(curv, sol, cfg.lam, cfg.eps_grid(), cfg.settings())
    header = ["eps", "delta", *asy.QUANTITIES, "composite"]
    em.table("scaling.csv", header, st.rows())
    series = {k: (st.eps, st.values[k]) for k in asy.QUANTITIES}
    series["composite"] = (st.eps, st.composite)
    em.svg("scaling.svg", series, title=f"remainder norms, n={cfg.n}", xlabel="eps", ylabel="norm")
    verdict = scaling_verdict(st)
    ok = all(verdict.values())
    lt = st.log_test
    em.report({"slopes": st.slopes, "slope_ci95": st.slope_ci, "delta_slopes": st.delta_slopes,
               "stderr": {k: v for k, v in st.stderr.items()},
               "log_test": None if lt is None else {"f_stat": lt.f_stat, "p_value": lt.p_value,
                                                    "corrected_slope": lt.corrected_slope,
                                                    "log_power": lt.log_power},
               "verdict": {k: "PASS" if v else "FAIL" for k, v in verdict.items()}}, ok)
    return 0 if ok else 1


def cmd_profile(cfg: StudyConfig) -> int:
    em = Emitter(cfg, "profile")
    curv = build_curvature(cfg)
    sol, _ = corrector_for(cfg, curv)
    delta = cfg.delta if cfg.delta is not None else cfg.lam * cfg.eps_max ** 0.25
    prof = re.assemble_profile(delta, curv, sol)
    s = np.linspace(0.0, cfg.radius, cfg.profile_points)
    Z, T = np.meshgrid(s, s, indexing="ij")
    y = np.zeros((Z.size, cfg.n))
    y[:, 0] = Z.ravel()
    y[:, -1] = T.ravel()
    vals = prof(y)
    em.table("profile.csv", ["z1", "t", "value"], zip(y[:, 0], y[:, -1], vals))
    lo = min(float(vals.min()), prof.sample_min(cfg.radius, seed=cfg.seed))
    ok = lo > 0
    em.report({"delta": delta, "min": lo, "max": float(vals.max()),
               "center": float(prof(np.zeros((1, cfg.n)))[0])}, ok)
    return 0 if ok else 1


def _emission_checks(cfg: StudyConfig) -> list:
    """Rerun ``constants`` twice in scratch directories and compare the bytes."""
    blobs = []
    stamp_ok = True
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            c = replace(cfg, out=tmp)
            cmd_constants(c)
            files = sorted(Path(tmp).glob("*.*"))
            for f in files:
                text = f.read_text(encoding="utf-8")
                stamp_ok &= c.hash() in text and __version__ in text
            blobs.append([f.read_bytes() for f in files])
    same = blobs[0] == blobs[1]
    return [checks.Check("cli", "files_embed_hash_and_version", float(stamp_ok), 1.0, stamp_ok),
            checks.Check("cli", "rerun_byte_identical", float(same), 1.0, same)]


def run_suites(cfg: StudyConfig) -> list:
    curv = build_curvature(cfg)
    sol, _ = corrector_for(cfg, curv)
    out = []
    out += checks.bubble_suite(cfg.n, cfg.seed)
    out += checks.curvature_suite(curv, cfg.seed)
    out += checks.corrector_suite(curv, sol, cfg.seed)
    out += checks.reduced_energy_suite(curv, sol, cfg.seed, (cfg.lambda_a, cfg.lambda_b))
    st = replace(cfg.settings(), n_angular=128, n_radial=24)
    out += checks.asymptotics_suite(curv, sol, cfg.lam, (cfg.tail_eps_max, cfg.tail_eps_min), st, cfg.seed)
    out += _emission_checks(cfg)
    return out


def cmd_verify(cfg: StudyConfig) -> int:
    em = Emitter(cfg, "verify")
    results = run_suites(cfg)
    ok = all(c.passed for c in results)
    suites = {}
    for c in results:
        suites.setdefault(c.suite, True)
        suites[c.suite] &= c.passed
    em.table("verify.csv", ["suite", "name", "value", "limit", "status"],
             [(c.suite, c.name, c.value, c.limit, "PASS" if c.passed else "FAIL") for c in results])
    em.report({"suites": {k: "PASS" if v else "FAIL" for k, v in suites.items()},
               "checks": [c.row() for c in results]}, ok)
    for k, v in suites.items():
        print(f"{k:16s} {'PASS' if v else 'FAIL'}")
    return 0 if ok else 1


COMMANDS = {
    "constants": cmd_constants,
    "corrector": cmd_corrector,
    "landscape": cmd_landscape,
    "scaling": cmd_scaling,
    "verify": cmd_verify,
    "profile": cmd_profile,
}

_FLAG_FIELDS = {"n": int, "seed": int, "scale": float, "eps_min": float, "eps_max": float,
                "eps_points": int, "lambda_a": float, "lambda_b": float, "out": str, "tol": float}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="yamabe-blowup", description="Blow-up ansatz studies.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON file with StudyConfig fields")
    for name, typ in _FLAG_FIELDS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any other config field (JSON value)")
    return p


def resolve_config(args) -> StudyConfig:
    cfg = load_config(args.config) if args.config else StudyConfig()
    over = {k: getattr(args, k) for k in _FLAG_FIELDS if getattr(args, k) is not None}
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            over[key] = json.loads(raw)
        except json.JSONDecodeError:
            over[key] = raw
    return StudyConfig.from_mapping({**asdict(cfg), **over}).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except (UsageError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        code = COMMANDS[args.command](cfg)
    except (DomainError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except cor.CacheCorruption as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: {'PASS' if code == 0 else 'FAIL'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
