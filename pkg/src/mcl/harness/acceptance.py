"""Acceptance criteria A1–A14, each reduced to one pass/fail verdict with a short detail line."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable

from .. import chernweil as cw, geometry as geo, spectral as sp
from .config import ExperimentConfig
from .experiments import builtin_config, run_experiment


@dataclass
class Verdict:
    id: str
    title: str
    passed: bool
    detail: str
    runtime: float = 0.0

    def line(self) -> str:
        return f"{self.id:<4} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.detail} ({self.runtime:.1f}s)"


_CACHE: dict = {}


def _run(name: str, **params):
    key = (name, tuple(sorted(params.items())))
    if key not in _CACHE:
        cfg = builtin_config(name)
        if params:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "params": {**cfg.params, **params}}, name=name)
        _CACHE[key] = run_experiment(cfg)
    return _CACHE[key]


def _rows(report, *prefixes):
    return [r for r in report.rows if any(r.name.startswith(p) for p in prefixes)]


def a1():
    worst = max(abs(cw.beta_integral(k) - (-1) ** (k - 1) * math.factorial(k - 1) ** 2 / math.factorial(2 * k - 1))
                for k in range(1, 9))
    return worst < 1e-12, f"max error {worst:.1e} over k=1..8"


def a2():
    ok = True
    for k in range(1, 9):
        tc, tch = cw.form_constants(k)
        rhs = tch * ((-1) ** (k - 1) * math.factorial(k - 1))
        ok &= tc.coef == rhs.coef and tc.power == rhs.power
    return ok, "exact rational identity for k=1..8"


def a3():
    v = geo.integrate_unstable(1, geo.QuadratureSpec(order=16))
    err = abs(v - (-2j * math.pi))
    return err < 1e-9, f"value {v:.12f}, error {err:.1e}"


def a4():
    t0 = time.perf_counter()
    v = geo.integrate_unstable(2, geo.QuadratureSpec(order=48))
    dt = time.perf_counter() - t0
    rel = abs(v / (-24 * math.pi ** 2) - 1)
    unit = abs(cw.tc_constant(2) * v - 1)
    return rel < 1e-4 and unit < 1e-4 and dt < 60, f"value {v.real:.10f}, rel error {rel:.1e}, tc*value-1 {unit:.1e}, {dt:.1f}s"


def a5():
    quad = geo.QuadratureSpec(order=64)
    flag = sp.Flag.standard(2)
    c = geo.coorientation()
    details = []
    ok = c == -1 or c == 1
    for m in range(-3, 4):
        g = geo.gm_map(m)
        integral = geo.tc_integral(g, 1, quad)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            count = geo.signed_count(geo.find_preimages(g, flag, 1))
        ok &= abs(integral - (-m)) < 1e-9 and count == -m
        details.append(f"{m}:{count}")
    return ok, f"calibrated sign {c}; counts " + " ".join(details)


def a6():
    t0 = time.perf_counter()
    rep = _run("duality-s3")
    dt = time.perf_counter() - t0
    s = rep.summary
    integral = complex(s.get("integral_re") or 0, s.get("integral_im") or 0)
    ok = rep.passed and abs(integral - 1) < 1e-3 and s.get("signed_count") == 1 and dt < 120
    return ok, f"integral {integral.real:.12f}, count {s.get('signed_count')}, {dt:.1f}s"


def a7():
    g = geo.diag_power_map((1, 2))
    report = geo.transversality_check(g, sp.Flag.standard(2))
    thetas = sorted(float(h.point[0]) for h in report.forbidden if h.index_set == sp.IndexSet((2,)))
    expected = [math.pi / 2, 3 * math.pi / 2]
    located = len(thetas) == 2 and all(abs(a - b) < 1e-6 for a, b in zip(thetas, expected))
    rep = _run("duality-negative-control")
    ok = not report.passed and located and rep.status == "INVALID-HYPOTHESIS"
    return ok, f"S(U_{{2}}) hits at theta = {', '.join(f'{t:.9f}' for t in thetas)}; status {rep.status}"


def a8():
    rep = _run("flow-u3")
    rows = {r.name: r for r in rep.rows}
    need = ["ODE residual", "unitarity drift", "f-monotonicity violations",
            "limit = incidence classification (random seeds)"]
    ok = all(rows[k].passed for k in need)
    ok &= rows["ODE residual"].computed < 1e-6 and rows["unitarity drift"].computed < 1e-8
    return ok, (f"ODE {rows['ODE residual'].computed:.1e}, drift {rows['unitarity drift'].computed:.1e}, "
                f"monotone violations {rows['f-monotonicity violations'].computed}, "
                f"limit mismatches {rows['limit = incidence classification (random seeds)'].computed}")


def a9():
    bad = []
    total = 0
    for n in range(1, 5):
        flag = sp.Flag.standard(n)
        for I in sp.all_index_sets(n):
            total += 1
            if sp.morse_index(I, flag) != sp.unstable_dim(I):
                bad.append(f"n={n} {I}")
    return not bad, f"{total - len(bad)}/{total} critical points match"


def a10():
    lin = _run("bvp-linear")
    cub = _run("bvp-cubic")
    pieces = {
        "linear": _rows(lin, "closed-form linear solution"),
        "shooting": _rows(cub, "BVP vs shooting oracle"),
        "bound": _rows(cub, "solution bound"),
        "slopes": _rows(cub, "decay slopes") + _rows(lin, "decay slopes"),
    }
    ok = all(rows and all(r.passed for r in rows) for rows in pieces.values())
    ok &= pieces["linear"][0].computed < 1e-10 and pieces["shooting"][0].computed < 1e-8
    return ok, (f"linear {pieces['linear'][0].computed:.1e}, shooting {pieces['shooting'][0].computed:.1e}, "
                f"bound violations {pieces['bound'][0].computed} ({pieces['bound'][0].note}), "
                f"worst slope {pieces['slopes'][0].computed:.4f} vs {pieces['slopes'][0].reference:.4f}")


def a11():
    lin = _run("bvp-linear")
    cub = _run("bvp-cubic")
    rows = _rows(lin, "Dulac") + _rows(cub, "Dulac corner", "Dulac rejects")
    ok = bool(rows) and all(r.passed for r in rows)
    scalar = _rows(lin, "Dulac scalar")[0]
    return ok, f"scalar closed form error {scalar.computed:.1e}; corner and y0=0 rejection rows pass"


def a12():
    reps = [_run("bvp-linear"), _run("bvp-cubic"), _run("bvp-coupled", problems=200)]
    counts = [_rows(r, "transversality scan")[0].computed for r in reps]
    x = _run("bvp-xtrans")
    anti = _rows(x, "tangencies on the anti-diagonal")[0]
    found = _rows(x, "tangencies detected")[0]
    ok = all(c == 0 for c in counts) and anti.passed and found.passed
    return ok, f"symmetric tangency counts {counts}; xtrans {found.computed} hits, max |y1+y2| {anti.computed:.1e}"


def a13():
    rep = _run("reduction")
    ok = rep.passed
    row = _rows(rep, "reduction stays unitary")[0]
    return ok, f"max unitarity residual {row.computed:.1e} ({row.note}); exact and kernel rows pass"


def a14():
    digests = []
    for name, params in (("duality-gm3", {}), ("bvp-cubic", {"problems": 50}), ("flow-u3", {"seeds": 10})):
        first = run_experiment(_with(name, params)).canonical_json()
        second = run_experiment(_with(name, params)).canonical_json()
        digests.append(first == second)
    return all(digests), f"identical canonical reports: {digests}"


def _with(name, params):
    cfg = builtin_config(name)
    return ExperimentConfig.from_dict({**cfg.to_dict(), "params": {**cfg.params, **params}, "seed": 7}, name=name)


CRITERIA: dict[str, tuple[str, Callable]] = {
    "A1": ("beta integrals", a1),
    "A2": ("tc/tch constant relation", a2),
    "A3": ("unstable integral k=1", a3),
    "A4": ("unstable integral k=2", a4),
    "A5": ("duality k=1", a5),
    "A6": ("duality k=2", a6),
    "A7": ("negative control", a7),
    "A8": ("flow suite", a8),
    "A9": ("Morse indices", a9),
    "A10": ("BVP suite", a10),
    "A11": ("Dulac map", a11),
    "A12": ("transversality scan", a12),
    "A13": ("symplectic reduction", a13),
    "A14": ("reproducibility", a14),
}


def check(cid: str) -> Verdict:
    title, fn = CRITERIA[cid]
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failed criterion, reported as such
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    return Verdict(cid, title, bool(passed), detail, time.perf_counter() - t0)


def run_all() -> list[Verdict]:
    return [check(cid) for cid in CRITERIA]
