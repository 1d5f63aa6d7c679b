"""Epsilon-sweep engine: solve the plate family, apply both convergence
notions and compare against the limit kinematics."""

import csv
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .fem3d import assemble, l2_norm, shear_norm, solve, stationarity_residual, total_energy
from .material import ElasticityTensor, KappaEnergyParams, kl_moduli_from_lame
from .mesh import build_plate_mesh, build_section_mesh
from .plate2d import director_gap, fit_rm, l2_tensor, section_bases, solve_kl, thickness_resultant
from .scaling import (DomainFamily, LoadSpec, domain_at, fiber_average, load_sequence, pullback,
                      scaled_components)
from .solvers import SolverError, SolverOptions

log = logging.getLogger(__name__)

CSV_HEADER = ["epsilon", "energy", "e_kl", "shear", "rm_res", "rate_flags"]
TRACKED = ("e_kl", "shear", "rm_res")


@dataclass(frozen=True)
class Thresholds:
    e_kl_max: float = 0.05
    shear_rate_min: float = 0.9
    director_max: float = 0.05
    rm_res_max: float = 0.05
    gap_ratio_min: float = 3.0
    residual_max: float = 1e-10
    bound_factor: float = 3.0


@dataclass(frozen=True)
class SweepConfig:
    family: DomainFamily = DomainFamily()
    material: ElasticityTensor = ElasticityTensor.isotropic(0.0, 1.0)
    kappa: float = 0.0
    ladder: tuple = ()
    nx: int = 16
    ny: int = 16
    nz: int = 1
    load: LoadSpec = LoadSpec(amplitude=(0.0, 0.0, 1.0e-7))
    solver: SolverOptions = SolverOptions()
    thresholds: Thresholds = Thresholds()

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not self.ladder:
            object.__setattr__(self, "ladder", default_ladder(self.family))
        lad = tuple(float(e) for e in self.ladder)
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise ValueError("epsilon ladder must be strictly decreasing")
        for e in lad:
            if not 0 < e <= self.family.eps_r:
                raise ValueError(f"ladder entry {e} outside (0, eps_r]")
        object.__setattr__(self, "ladder", lad)

    def with_kappa(self, kappa):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["kappa"] = kappa
        return SweepConfig(**d)


def default_ladder(family, levels=5):
    return tuple(family.eps_r * 2.0**-k for k in range(levels))


@dataclass
class SweepRow:
    epsilon: float
    status: str = "ok"
    energy: float = math.nan
    e_kl: float = math.nan
    shear: float = math.nan
    rm_res: float = math.nan
    director_gap: float = math.nan
    residual: float = math.nan
    norm_inplane: float = math.nan
    norm_transverse: float = math.nan
    norm_scaled: float = math.nan
    rate_flags: str = ""
    seconds: float = 0.0


@dataclass
class ConvergenceReport:
    kappa: float
    rows: list
    rates: dict = field(default_factory=dict)
    checklist: dict = field(default_factory=dict)
    reference_gap: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(item["pass"] is not False for item in self.checklist.values())

    @property
    def failed_rows(self):
        return [r for r in self.rows if r.status != "ok"]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([repr(r.epsilon), repr(r.energy), repr(r.e_kl), repr(r.shear),
                            repr(r.rm_res), r.rate_flags])

    def to_dict(self, include_timings=True):
        rows = [asdict(r) for r in self.rows]
        timings = {repr(r["epsilon"]): r.pop("seconds") for r in rows}
        out = {
            "kappa": self.kappa,
            "rows": rows,
            "rates": self.rates,
            "checklist": self.checklist,
            "reference_gap": self.reference_gap,
            "passed": self.passed,
            "meta": self.meta,
        }
        if include_timings:
            out["timings"] = timings
        return out

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def estimate_rate(eps, values):
    """Least-squares slope of log(value) against log(eps); None if undefined."""
    e = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = np.isfinite(v) & (v > 0) & (e > 0)
    if keep.sum() < 3:
        return None
    slope, _ = np.polyfit(np.log(e[keep]), np.log(v[keep]), 1)
    return float(slope)


def kl_reference(config):
    """Discrete clamped plate deflection for the eps_r load, or None if anisotropic."""
    mat = config.material
    if not mat.is_isotropic:
        return None
    fam = config.family
    moduli = kl_moduli_from_lame(mat.lam, mat.mu, fam.h_r)
    load_r = load_sequence(config.load, fam, fam.eps_r)
    sec = build_section_mesh(fam.ell_r, config.nx, config.ny)
    return solve_kl(sec, moduli, thickness_resultant(load_r, fam.h_r), config.solver)


def solve_at(config, eps, kappa=None):
    """Assemble and solve the problem at eps; returns (system, field)."""
    fam = config.family
    box = domain_at(fam, eps)
    mesh = build_plate_mesh(box.ell, box.half_thickness, config.nx, config.ny, config.nz)
    params = KappaEnergyParams(config.kappa if kappa is None else kappa, eps, fam.eps_r)
    system = assemble(mesh, config.material, params, load_sequence(config.load, fam, eps))
    return system, solve(system, config.solver)


def scaled_field(field, family):
    return scaled_components(pullback(field, family), field.eps, family.eps_r).scaled


def measure(config, eps, kl=None, kappa=None):
    """One ladder row: solve, pull back, scale, and evaluate every metric."""
    row = SweepRow(epsilon=eps)
    t0 = time.perf_counter()
    fam = config.family
    try:
        system, u = solve_at(config, eps, kappa)
    except SolverError as exc:
        log.warning("eps=%g failed: %s", eps, exc)
        row.status = f"failed: {exc}"
        row.seconds = time.perf_counter() - t0
        return row, None
    row.residual = stationarity_residual(system, u)
    # the 1/eps prefactor, normalized so that eps = eps_r gives F^r
    row.energy = total_energy(system, u) * fam.eps_r / eps
    us = scaled_field(u, fam)
    row.norm_transverse = _component_norm(us, [2])
    row.norm_inplane = _component_norm(us, [0, 1])
    row.norm_scaled = l2_norm(us)
    row.shear = shear_norm(us)
    state, row.rm_res = fit_rm(us)
    row.director_gap = director_gap(state)
    if kl is not None:
        bx, by = section_bases(kl.mesh)
        w_avg = fiber_average(us).tensors[2]
        ref = l2_tensor(bx, by, kl.tensor)
        row.e_kl = l2_tensor(bx, by, w_avg - kl.tensor) / ref if ref > 0 else math.nan
    row.seconds = time.perf_counter() - t0
    return row, u


def _component_norm(field, which):
    from .fem3d import DisplacementField3D

    comps = field.components
    for c in range(3):
        if c not in which:
            comps[c] = np.zeros_like(comps[c])
    return l2_norm(DisplacementField3D.from_components(field.mesh, comps))


def _flag_rows(rows):
    prev = None
    for r in rows:
        if r.status != "ok":
            r.rate_flags = "failed"
            continue
        if prev is None:
            r.rate_flags = "first"
        else:
            dec = [m for m in TRACKED if getattr(r, m) < getattr(prev, m)]
            r.rate_flags = ";".join(f"{m}_dec" for m in dec) or "none_dec"
        prev = r


def _strictly_decreasing(values):
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(v)) and np.all(np.diff(v) < 0))


def _item(ok, value=None, note=""):
    return {"pass": None if ok is None else bool(ok), "value": value, "note": note}


def acceptance_checks(report, thresholds):
    """Per-criterion flags for a finished sweep; None marks an undefined check."""
    th = thresholds
    ok_rows = not report.failed_rows
    out = {"all_rows_solved": _item(ok_rows, len(report.failed_rows))}
    res = report.column("residual")
    out["stationarity"] = _item(ok_rows and bool(np.all(res <= th.residual_max)),
                                float(np.nanmax(res)) if np.isfinite(res).any() else None)
    last = report.rows[-1]
    if report.kappa == 0:
        ekl = report.column("e_kl")
        out["e_kl_decreasing"] = _item(_strictly_decreasing(ekl) if len(ekl) > 1 else None)
        out["e_kl_final"] = _item(bool(last.e_kl <= th.e_kl_max), last.e_kl)
        out["shear_decreasing"] = _item(_strictly_decreasing(report.column("shear"))
                                        if len(report.rows) > 1 else None)
        rate = report.rates.get("shear")
        out["shear_rate"] = _item(None if rate is None else rate >= th.shear_rate_min, rate)
        out["director_final"] = _item(bool(last.director_gap <= th.director_max), last.director_gap)
    else:
        rm = report.column("rm_res")
        out["rm_res_decreasing"] = _item(_strictly_decreasing(rm) if len(rm) > 1 else None)
        out["rm_res_final"] = _item(bool(last.rm_res <= th.rm_res_max), last.rm_res)
        ratio = None
        if report.reference_gap:
            ratio = last.director_gap / report.reference_gap
        out["shear_retained"] = _item(None if ratio is None else ratio >= th.gap_ratio_min, ratio,
                                      "director gap relative to the kappa = 0 run at the smallest eps")
    return out


def run_sweep(config, recipe=True):
    """Solve every ladder entry and assemble the ConvergenceReport."""
    started = time.perf_counter()
    kl = kl_reference(config)
    rows = []
    for eps in config.ladder:
        row, _ = measure(config, eps, kl)
        rows.append(row)
        log.info("eps=%g e_kl=%.3e shear=%.3e rm=%.3e (%.1fs)", eps, row.e_kl, row.shear,
                 row.rm_res, row.seconds)
    _flag_rows(rows)
    report = ConvergenceReport(kappa=config.kappa, rows=rows)
    eps = [r.epsilon for r in rows]
    for name in TRACKED + ("director_gap",):
        report.rates[name] = estimate_rate(eps, [getattr(r, name) for r in rows])
    if config.kappa > 0:
        ref, _ = measure(config, config.ladder[-1], None, kappa=0.0)
        report.reference_gap = ref.director_gap if ref.status == "ok" else None
    report.checklist = acceptance_checks(report, config.thresholds)
    if recipe:
        for k, v in validate_recipe(config, rows).items():
            report.checklist[f"recipe_{k}"] = v
    report.meta = {
        "config": describe(config),
        "versions": {"thinplate": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "kl_center_deflection": None if kl is None else float(kl.evaluate(0.0, 0.0)["w"]),
    }
    report.meta["total_seconds"] = time.perf_counter() - started
    return report


def describe(config):
    m = config.material
    return {
        "ell_r": config.family.ell_r, "h_r": config.family.h_r, "eps_r": config.family.eps_r,
        "material": {"lambda": m.lam, "mu": m.mu} if m.is_isotropic else {"voigt": m.matrix().tolist()},
        "kappa": config.kappa, "ladder": list(config.ladder),
        "mesh": {"nx": config.nx, "ny": config.ny, "nz": config.nz},
        "load": {"profile": config.load.profile, "amplitude": list(config.load.amplitude),
                 "exponents": list(config.load.exponents)},
        "solver": asdict(config.solver),
        "thresholds": asdict(config.thresholds),
    }


def validate_recipe(config, rows=None):
    """Programmatic checks of the two-step construction; returns name -> item."""
    fam = config.family
    out = {}
    tiny = domain_at(fam, fam.eps_r * 1e-12).half_thickness
    out["family_limit_is_section"] = _item(tiny <= 1e-10 * fam.h_r, tiny)
    box = domain_at(fam, fam.eps_r)
    out["domain_at_eps_r"] = _item(box.ell == fam.ell_r and box.half_thickness == fam.h_r)
    first = config.ladder[0]
    out["ladder_starts_at_eps_r"] = _item(first == fam.eps_r, first)
    out["problem_at_eps_r"] = _item(_same_problem(config, first))
    if rows is None:
        rows = [measure(config, e)[0] for e in config.ladder]
    norms = np.array([r.norm_scaled for r in rows], dtype=float)
    if np.all(np.isfinite(norms)) and np.all(norms > 0):
        spread = float(norms.max() / norms.min())
        out["scaled_norms_bounded"] = _item(spread <= config.thresholds.bound_factor, spread)
    else:
        out["scaled_norms_bounded"] = _item(False, None, "missing or zero scaled norms")
    return out


def _same_problem(config, eps):
    """Is the assembled system at eps bit-identical to kappa = 0 with the real load?"""
    fam = config.family
    try:
        box = domain_at(fam, eps)
    except ValueError:
        return False
    mesh = build_plate_mesh(box.ell, box.half_thickness, config.nx, config.ny, config.nz)
    a = assemble(mesh, config.material, KappaEnergyParams(config.kappa, eps, fam.eps_r),
                 load_sequence(config.load, fam, eps))
    mesh_r = build_plate_mesh(fam.ell_r, fam.h_r, config.nx, config.ny, config.nz)
    b = assemble(mesh_r, config.material, KappaEnergyParams(0.0, fam.eps_r, fam.eps_r),
                 load_sequence(config.load, fam, fam.eps_r))
    return (a.K.shape == b.K.shape and np.array_equal(a.K.indptr, b.K.indptr)
            and np.array_equal(a.K.indices, b.K.indices) and np.array_equal(a.K.data, b.K.data)
            and np.array_equal(a.f, b.f))
