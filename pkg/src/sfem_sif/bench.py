"""Benchmark studies: single runs, density/alpha/method sweeps, reference store.

All percent-style errors are relative: ``K*/K*_ref - 1``.  The reference
K* of each specimen is built here from the code itself (see
:func:`build_reference`) and stored as JSON with its provenance; nothing
else in the package carries a "true" SIF value.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .elasticity import Material
from .fracture import (CodProfile, SifEstimate, VceConfig, extract_cod, mcci,
                       oscillation_index, richardson_extrapolate, vce)
from .mesh import SpecimenSpec, as_density, build_specimen_mesh
from .smoothing import (GlobalStiffness, Method, assemble_fem, assemble_ns,
                        combine_alpha)
from .io import DOMAIN_HEADER, NODE_HEADER, domain_rows, node_rows, write_csv
from .solver import (AnalysisCase, FieldSolution, build_case, recover_domain_stresses,
                     solve)

DEFAULT_ALPHA = {"SEN": 0.42, "CEN": 0.40}
SWEEP_RANGE = (Fraction(1, 32), Fraction(1, 2))
REFERENCE_DENSITIES = (Fraction(1, 64), Fraction(1, 128))
CANONICAL_DENSITY = Fraction(1, 8)
OUTPUT_ENV = "SFEM_SIF_OUTPUT"
EXTRACTIONS = ("MCCI", "VCE")


class UsageError(ValueError):
    """Invalid run configuration."""


class ReferenceError(RuntimeError):
    """Reference store missing, rejected or inconsistent."""


class SweepAborted(RuntimeError):
    def __init__(self, message, rows):
        super().__init__(message)
        self.rows = rows


@dataclass
class RunConfig:
    specimen: str = "SEN"
    element: str = "T3"
    method: str = "FEM"
    alpha: float | None = None
    pattern: str = "P2"
    tip_modified: bool = False
    densities: tuple = ("1/8",)
    extractions: tuple = ("MCCI",)
    E: float = 1.0
    nu: float = 0.3
    t: float = 1.0
    sigma: float = 1.0
    a: float = 1.0
    output_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.densities, (str, int, float, Fraction)):
            self.densities = (self.densities,)
        if isinstance(self.extractions, str):
            self.extractions = (self.extractions,)
        try:
            self.densities = tuple(as_density(d) for d in self.densities)
            self.extractions = tuple(e.strip().upper() for e in self.extractions)
            self.method_obj()
            self.material()
            for d in self.densities:
                self.spec(d)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        bad = [e for e in self.extractions if e not in EXTRACTIONS]
        if bad:
            raise UsageError(f"unknown extraction(s) {bad}; choose from {EXTRACTIONS}")
        if self.method.upper() != "FEM" and self.element.upper() != "T3":
            raise UsageError(f"{self.method} is defined for T3 elements only")

    def method_obj(self) -> Method:
        return Method(self.method, self.alpha)

    def material(self) -> Material:
        return Material(self.E, self.nu, self.t)

    def spec(self, density) -> SpecimenSpec:
        return SpecimenSpec(self.specimen, density, self.pattern, self.tip_modified,
                            self.element, self.a)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def _coerce(name, text):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise UsageError(f"unknown config key {name!r}")
    if name in ("densities", "extractions"):
        return tuple(v.strip() for v in str(text).split(",") if v.strip())
    if name == "tip_modified":
        return str(text).strip().lower() in ("1", "true", "yes", "on")
    if name in ("E", "nu", "t", "sigma", "a"):
        return float(text)
    if name == "alpha":
        return None if str(text).strip() in ("", "none") else float(text)
    if name == "jobs":
        return int(text)
    return str(text).strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, **overrides) -> RunConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def output_root(cfg: RunConfig | None = None) -> Path:
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, "sfem_out"))


# ---------------------------------------------------------------- reference

@dataclass(frozen=True)
class Reference:
    specimen: str
    K_star: float
    cod_x: tuple          # canonical abscissae, x / a
    cod_v: tuple          # half opening, v E / (sigma a)
    provenance: dict = field(default_factory=dict)

    def cod_profile(self, mat: Material, sigma: float, a: float) -> CodProfile:
        scale = sigma * a / mat.E
        return CodProfile(np.array(self.cod_x) * a, np.array(self.cod_v) * scale)


def _sif(specimen, density, element="T3", pattern="P2", mat=None, method=None):
    mat = mat or Material()
    mesh = build_specimen_mesh(SpecimenSpec(specimen, density, pattern, element=element))
    sol = solve(build_case(mesh, mat, method or Method("FEM")))
    return mesh, sol, mcci(sol)


def build_reference(specimen: str, *, t3_densities=REFERENCE_DENSITIES,
                    t6_densities=(Fraction(1, 16), Fraction(1, 32)),
                    cod_density=Fraction(1, 64), pattern: str = "P2",
                    tolerance: float = 0.005, material: Material | None = None) -> Reference:
    """Self-convergent reference K* and crack-opening profile.

    K* is the linear-in-h extrapolation of FEM-T3 closure-integral values
    on the two finest meshes.  It is accepted only if the same
    extrapolation from T6 meshes (a different discretization) agrees to
    ``tolerance``.  The opening profile comes from a fine T6 mesh.
    """
    specimen = specimen.upper()
    mat = material or Material()
    t3 = [_sif(specimen, d, "T3", pattern, mat)[2] for d in t3_densities]
    t6 = [_sif(specimen, d, "T6", pattern, mat)[2] for d in t6_densities]
    k_t3 = richardson_extrapolate(*t3)
    k_t6 = richardson_extrapolate(*t6)
    delta = abs(k_t6 - k_t3) / abs(k_t3)
    raw_t6 = t6[-1].K_star
    provenance = {
        "method": "FEM", "extraction": "MCCI", "pattern": pattern,
        "material": {"E": mat.E, "nu": mat.nu, "t": mat.t},
        "t3_densities": [str(Fraction(d)) for d in t3_densities],
        "t3_K_star": [e.K_star for e in t3],
        "t6_densities": [str(Fraction(d)) for d in t6_densities],
        "t6_K_star": [e.K_star for e in t6],
        "t6_extrapolated_K_star": k_t6,
        "cross_check_delta": delta,
        "cross_check_tolerance": tolerance,
        "t6_finest_raw_delta": abs(raw_t6 - k_t3) / abs(k_t3),
        "cod_source": f"T6 h/a={Fraction(cod_density)}",
        "cod_abscissae": f"crack-face nodes of h/a={CANONICAL_DENSITY}",
    }
    if not delta <= tolerance:
        raise ReferenceError(
            f"{specimen}: T3 reference K*={k_t3:.6f} and T6 cross-check "
            f"K*={k_t6:.6f} differ by {delta:.3%} > {tolerance:.2%}; reference rejected")
    mesh, sol, _ = _sif(specimen, cod_density, "T6", pattern, mat)
    cod = extract_cod(mesh, sol)
    x = np.arange(int(1 / CANONICAL_DENSITY)) * float(CANONICAL_DENSITY)
    v = cod.at(x) * mat.E  # sigma = a = 1 in reference builds
    return Reference(specimen, float(k_t3), tuple(float(s) for s in x),
                     tuple(float(s) for s in v), provenance)


class ReferenceStore:
    """Directory of per-specimen JSON reference files; write-once."""

    def __init__(self, root):
        self.root = Path(root) / "reference"

    def path(self, specimen: str) -> Path:
        return self.root / f"{specimen.upper()}.json"

    @staticmethod
    def encode(ref: Reference) -> str:
        return json.dumps(asdict(ref), indent=1, sort_keys=True) + "\n"

    def save(self, ref: Reference) -> Path:
        path = self.path(ref.specimen)
        text = self.encode(ref)
        if path.exists():
            if path.read_text() != text:
                raise ReferenceError(f"{path} exists with different content; "
                                     f"reference stores are immutable, delete it to rebuild")
            return path
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text)
        tmp.replace(path)
        return path

    def load(self, specimen: str) -> Reference:
        path = self.path(specimen)
        if not path.exists():
            raise ReferenceError(f"reference missing for {specimen.upper()} "
                                 f"(expected {path}); run build-reference first")
        data = json.loads(path.read_text())
        if not data.get("provenance"):
            raise ReferenceError(f"{path} has no provenance record")
        return Reference(data["specimen"], data["K_star"], tuple(data["cod_x"]),
                         tuple(data["cod_v"]), data["provenance"])

    def has(self, specimen: str) -> bool:
        return self.path(specimen).exists()


# ------------------------------------------------------------------ running

@dataclass
class CaseRun:
    config: RunConfig
    density: Fraction
    case: AnalysisCase
    solution: FieldSolution
    estimates: list

    @property
    def mesh(self):
        return self.case.mesh

    def cod(self) -> CodProfile:
        return extract_cod(self.mesh, self.solution)


def solve_config(cfg: RunConfig, density) -> tuple:
    mesh = build_specimen_mesh(cfg.spec(density))
    case = build_case(mesh, cfg.material(), cfg.method_obj(), cfg.sigma)
    return case, solve(case)


def extract(case: AnalysisCase, sol: FieldSolution, extraction: str) -> SifEstimate:
    if extraction == "VCE":
        return vce(case, sol, VceConfig())
    return mcci(sol)


def sif_row(cfg: RunConfig, est: SifEstimate, ref: Reference | None) -> dict:
    return {
        "specimen": cfg.specimen.upper(), "method": est.method,
        "element": cfg.element.upper(), "pattern": cfg.pattern.upper(),
        "tip_mod": bool(cfg.tip_modified), "h_over_a": est.h_over_a,
        "extraction": est.extraction, "G": est.G, "K": est.K, "K_star": est.K_star,
        "err_vs_ref": None if ref is None else est.K_star / ref.K_star - 1.0,
    }


def run_case(cfg: RunConfig, density=None, reference: Reference | None = None) -> tuple:
    """Solve one density and extract every configured SIF; returns (rows, run)."""
    density = cfg.densities[0] if density is None else as_density(density)
    case, sol = solve_config(cfg, density)
    ests = [extract(case, sol, e) for e in cfg.extractions]
    rows = [sif_row(cfg, e, reference) for e in ests]
    return rows, CaseRun(cfg, density, case, sol, ests)


def _rows_only(args):
    cfg, density, reference = args
    return run_case(cfg, density, reference)[0]


def _check_sweep_densities(densities):
    lo, hi = SWEEP_RANGE
    bad = [str(d) for d in densities if not lo <= d <= hi]
    if bad:
        raise UsageError(f"sweep densities must lie in [{lo}, {hi}]: {bad}")


def loglog_slope(h, err) -> float:
    h, err = np.asarray(h, float), np.abs(np.asarray(err, float))
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class DensitySweep:
    rows: list
    slope: float | None
    slope_exempt: bool


def sweep_density(cfg: RunConfig, reference: Reference) -> DensitySweep:
    """Convergence table over ``cfg.densities`` plus the log-log error slope."""
    if len(cfg.densities) < 3:
        raise UsageError("a density sweep needs at least 3 densities")
    _check_sweep_densities(cfg.densities)
    rows = []
    jobs = [(cfg, d, reference) for d in cfg.densities]
    try:
        if cfg.jobs > 1:
            with ProcessPoolExecutor(cfg.jobs) as pool:
                for r in pool.map(_rows_only, jobs):
                    rows.extend(r)
        else:
            for job in jobs:
                rows.extend(_rows_only(job))
    except Exception as exc:
        raise SweepAborted(f"density sweep aborted: {exc}", rows) from exc
    first = [r for r in rows if r["extraction"] == rows[0]["extraction"]]
    slope = loglog_slope([r["h_over_a"] for r in first], [r["err_vs_ref"] for r in first])
    return DensitySweep(rows, slope, cfg.method_obj().name == "ALPHA")


@dataclass
class AlphaSweep:
    rows: list
    optimum: float


def default_alpha_grid():
    return tuple(np.round(np.arange(30, 71) / 100, 2))


def sweep_alpha(cfg: RunConfig, reference: Reference, grid=None) -> AlphaSweep:
    """K*(alpha) on one mesh; the optimum minimises |K*/K*_ref - 1|."""
    if reference is None:
        raise ReferenceError("alpha sweep needs a reference")
    if cfg.element.upper() != "T3":
        raise UsageError("alpha sweeps need T3 meshes")
    grid = default_alpha_grid() if grid is None else tuple(float(g) for g in grid)
    if any(not 0 <= g <= 1 for g in grid):
        raise UsageError("alpha grid must lie in [0, 1]")
    density = cfg.densities[0]
    mesh = build_specimen_mesh(cfg.spec(density))
    mat = cfg.material()
    K_fem = assemble_fem(mesh, mat).matrix
    K_ns = assemble_ns(mesh, mat).matrix
    rows = []
    for alpha in grid:
        case = build_case(mesh, mat, Method("ALPHA", alpha), cfg.sigma)
        case.stiffness = GlobalStiffness(combine_alpha(K_fem, K_ns, alpha), case.method)
        sol = solve(case)
        est = mcci(sol)
        rows.append({"alpha": alpha, "h_over_a": est.h_over_a, "K_star": est.K_star,
                     "err_vs_ref": est.K_star / reference.K_star - 1.0, "U": sol.energy})
    best = min(rows, key=lambda r: abs(r["err_vs_ref"]))
    return AlphaSweep(rows, best["alpha"])


COMPARE_METHODS = ("FEM", "ES", "NS", "ALPHA")


def compare_methods(cfg: RunConfig, reference: Reference) -> list[dict]:
    """Per density: error of every method/element and pattern / tip-mod deltas.

    Deltas are differences of K* relative to the reference K*:
    ``P1 - P2`` and ``tip-modified - plain`` (on the configured pattern).
    """
    alpha = cfg.alpha if cfg.alpha is not None else DEFAULT_ALPHA[cfg.specimen.upper()]
    base = cfg.with_(element="T3", tip_modified=False, extractions=("MCCI",))
    ref = reference.K_star
    table = []
    for d in cfg.densities:
        row = {"h_over_a": float(d)}
        for name in COMPARE_METHODS:
            m = base.with_(method=name, alpha=alpha if name == "ALPHA" else None)
            k = run_case(m, d)[0][0]["K_star"]
            k_p1 = run_case(m.with_(pattern="P1"), d)[0][0]["K_star"]
            k_tip = run_case(m.with_(tip_modified=True), d)[0][0]["K_star"]
            row[f"err_{name}"] = k / ref - 1
            row[f"dpattern_{name}"] = (k_p1 - k) / ref
            row[f"dtipmod_{name}"] = (k_tip - k) / ref
        for element in ("T6", "Q4"):
            try:
                spec = base.with_(element=element, method="FEM")
            except UsageError:
                row[f"err_{element}"] = None
                continue
            row[f"err_{element}"] = run_case(spec, d)[0][0]["K_star"] / ref - 1
        table.append(row)
    return table


def compare_header():
    cols = ["h_over_a"] + [f"err_{m}" for m in COMPARE_METHODS] + ["err_T6", "err_Q4"]
    cols += [f"dpattern_{m}" for m in COMPARE_METHODS]
    cols += [f"dtipmod_{m}" for m in COMPARE_METHODS]
    return cols


def cod_rows(run: CaseRun, reference: Reference) -> list[dict]:
    """Opening along the crack face against the reference profile."""
    cod = run.cod()
    cfg = run.config
    ref = reference.cod_profile(cfg.material(), cfg.sigma, cfg.a)
    v_ref = ref.at(cod.x)
    return [{"x_over_a": x / cfg.a, "v": v, "v_ref": vr, "ratio": v / vr}
            for x, v, vr in zip(cod.x, cod.v, v_ref)]


def cod_summary(run: CaseRun, reference: Reference) -> dict:
    rows = cod_rows(run, reference)
    v = np.array([r["v"] for r in rows])
    vr = np.array([r["v_ref"] for r in rows])
    return {"max_ratio": float(v.max() / vr.max()), "tip_ratio": rows[-1]["ratio"],
            "oscillation_index": oscillation_index(run.cod())
            if len(rows) >= 4 else None}


def export_fields(cfg: RunConfig, density=None, normalize: bool = False,
                  directory=None) -> tuple[Path, Path]:
    """Write ``nodes.csv`` and ``domains.csv`` for one solved case."""
    density = cfg.densities[0] if density is None else as_density(density)
    case, sol = solve_config(cfg, density)
    stresses = recover_domain_stresses(case, sol.u)
    tag = (f"{cfg.specimen}_{cfg.method_obj().tag}_{cfg.element}_{cfg.pattern}"
           f"{'_tip' if cfg.tip_modified else ''}_h{density.numerator}-{density.denominator}")
    out = Path(directory) if directory else output_root(cfg) / "fields" / tag
    out.mkdir(parents=True, exist_ok=True)
    nodes_path, dom_path = out / "nodes.csv", out / "domains.csv"
    write_csv(nodes_path, NODE_HEADER, node_rows(case.mesh, sol.u))
    scale = 1.0 / cfg.sigma if normalize else 1.0
    write_csv(dom_path, DOMAIN_HEADER, domain_rows(stresses, scale))
    return nodes_path, dom_path
