"""Reproduction report for the two- and three-time trapped-ion experiment."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import scenario
from .estimate import lgi_k, marginal, populations, sweep
from .io import complex_pair
from .qmodel import basis_projectors

STAT_K = 4.0
STAT_FRACTION = 0.95


@dataclass
class Flag:
    criterion: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "passed": self.passed, "detail": self.detail}


@dataclass
class ReproReport:
    n_trajectories: int
    seed: int
    grid: list[float]
    convention: str
    tables: dict[str, list[dict]] = field(default_factory=dict)
    flags: list[Flag] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.flags)

    def to_dict(self, include_runtime: bool = False) -> dict:
        # runtime is left out by default so that reports are byte-stable
        doc = {
            "n_trajectories": self.n_trajectories,
            "seed": self.seed,
            "grid": self.grid,
            "ry_convention": self.convention,
            "convention_scores": scenario.convention_scores(),
            "flags": [f.to_dict() for f in self.flags],
            "notes": self.notes,
            "tables": self.tables,
        }
        if include_runtime:
            doc["runtime_s"] = self.runtime_s
        return doc


def _qpd_rows(exact, sampled) -> list[dict]:
    sem_re, sem_im = sampled.sem()
    rows = []
    for idx in np.ndindex(*exact.index_shape):
        rows.append({
            "index": list(idx),
            "exact": complex_pair(exact.values[idx]),
            "estimate": complex_pair(sampled.values[idx]),
            "sem_re": float(sem_re[idx]),
            "sem_im": float(sem_im[idx]),
        })
    return rows


def negative_entries(q) -> list[tuple[int, ...]]:
    """Index tuples with negative real part."""
    return [idx for idx, v in q.entries.items() if v.real < 0]


def _fraction_within(rows) -> float:
    ok = [r.estimate.within(r.exact, STAT_K) for r in rows]
    return float(np.mean(ok))


def fig3_report(n: int = scenario.PAPER_TRAJECTORIES, seed: int = 0, grid=None) -> ReproReport:
    t0 = time.perf_counter()
    grid = scenario.default_grid() if grid is None else np.asarray(grid, dtype=float)
    conv = scenario.select_ry_convention()
    rep = ReproReport(n, seed, [float(t) for t in grid], conv)
    rep.notes.append(
        f"R_y convention '{conv}' selected by the exact oracle: K(0.74 pi) = "
        + ", ".join(f"{k}: {v:.4f}" for k, v in scenario.convention_scores().items())
    )
    rep.notes.append(
        "The convention that violates the LGI puts the negative real QPD entries at (0,0,1) and (1,0,1); "
        "the published indices (0,1,0) and (1,1,0) belong to the non-violating convention."
    )
    rep.notes.append(
        "Fig. 3(e): the caption names the marginal at t2 while the text discusses t3; "
        "marginals are tabulated at every time."
    )

    # (a), (b) correlation sweeps
    for tag, n_times in (("3a", 2), ("3b", 3)):
        rows = sweep(
            grid,
            lambda th, nt=n_times: scenario.correlation_exact(th, nt),
            lambda k, th, nt=n_times: scenario.sampled_correlation(th, nt, n, scenario.grid_seed(seed, k, nt)),
        )
        rep.tables[tag] = [
            {"theta": r.theta, "exact": complex_pair(r.exact), "estimate": complex_pair(r.estimate.value),
             "sem_re": r.estimate.sem_re, "sem_im": r.estimate.sem_im}
            for r in rows
        ]
        frac = _fraction_within(rows)
        rep.flags.append(Flag(f"{tag}: sampled correlation within 4 SEM (n={n})", frac >= STAT_FRACTION,
                              f"{frac:.1%} of grid points"))
        if n_times == 2:
            err = max(abs(r.exact - (np.cos(r.theta) - 1j * np.sin(r.theta))) for r in rows)
            rep.flags.append(Flag("C3: two-time correlation closed form", err < 1e-12, f"max error {err:.2e}"))

    # (c), (d) QPDs at the highlighted angles
    q2, q2s = scenario.qpd_exact(scenario.THETA_STAR_2, 2), scenario.sampled_qpd(
        scenario.THETA_STAR_2, 2, n, scenario.grid_seed(seed, 0, 20))
    q3, q3s = scenario.qpd_exact(scenario.THETA_STAR_3, 3), scenario.sampled_qpd(
        scenario.THETA_STAR_3, 3, n, scenario.grid_seed(seed, 0, 30))
    rep.tables["3c"] = _qpd_rows(q2, q2s)
    rep.tables["3d"] = _qpd_rows(q3, q3s)
    neg = [float(q3.values[i].real) for i in ((0, 1, 0), (1, 1, 0))]
    other = "literal" if conv == "mirrored" else "mirrored"
    rep.flags.append(Flag(
        "C7: three-time QPD negativity at (0,1,0) and (1,1,0)", all(v < 0 for v in neg),
        f"Re Q = {neg[0]:.4f}, {neg[1]:.4f}; negative entries {negative_entries(q3)} under '{conv}', "
        f"{negative_entries(scenario.qpd_exact(scenario.THETA_STAR_3, 3, other))} under '{other}'",
    ))

    # (e) marginals and the projective baseline
    norm_err, marg_err, e_rows = 0.0, 0.0, []
    for th in grid:
        chans3 = scenario.channels(th, 3)
        for nt in (2, 3):
            q = scenario.qpd_exact(th, nt)
            norm_err = max(norm_err, abs(q.values.sum() - 1.0))
            for t in range(nt):
                m = marginal(q, t)
                pop = populations(scenario.initial_state(), basis_projectors(2), chans3[:t])
                marg_err = max(marg_err, float(np.max(np.abs(m.probs - pop))), m.imag_residue)
        q3t = scenario.qpd_exact(th, 3)
        proj = scenario.projective_qpd(th, 3)
        e_rows.append({
            "theta": float(th),
            "qpd_marginal_t2": marginal(q3t, 1).probs.tolist(),
            "qpd_marginal_t3": marginal(q3t, 2).probs.tolist(),
            "projective_marginal_t2": marginal(proj, 1).probs.tolist(),
            "projective_marginal_t3": marginal(proj, 2).probs.tolist(),
        })
    rep.tables["3e"] = e_rows
    rep.flags.append(Flag("C5: exact QPD normalization and marginals", max(norm_err, marg_err) < 1e-12,
                          f"sum error {norm_err:.2e}, marginal error {marg_err:.2e}"))
    stat_ok = []
    for qe, qs in ((q2, q2s), (q3, q3s)):
        tot = qs.total()
        stat_ok.append(tot.within(1.0, STAT_K))
        for t in range(qe.n_times):
            me, ms = marginal(qe, t), marginal(qs, t)
            stat_ok.extend(abs(ms.probs - me.probs) <= STAT_K * ms.sem + 1e-12)
    rep.flags.append(Flag(f"C5: sampled QPD sums and marginals within 4 SEM (n={n})", all(stat_ok),
                          f"{sum(map(bool, stat_ok))}/{len(stat_ok)} checks"))
    dev = max(abs(r["qpd_marginal_t3"][0] - 0.5) for r in e_rows)
    flat = max(abs(v - 0.5) for r in e_rows for v in r["projective_marginal_t3"])
    rep.flags.append(Flag("C6: back-action contrast at t3", dev > 0.3 and flat < 1e-12,
                          f"QPD deviation from 1/2 up to {dev:.3f}; projective deviation {flat:.1e}"))

    # (f) Leggett-Garg
    f_rows = []
    for k, th in enumerate(grid):
        qs = scenario.sampled_qpd(th, 3, n, scenario.grid_seed(seed, k, 40))
        mc = lgi_k(qs)
        f_rows.append({
            "theta": float(th),
            "k_exact": scenario.lgi_exact(th).k,
            "k_projective": lgi_k(scenario.projective_qpd(th, 3)).k,
            "k_estimate": mc.k,
            "k_sem": mc.sem,
        })
    rep.tables["3f"] = f_rows
    k_star = scenario.lgi_exact(scenario.THETA_STAR_3).k
    closed = scenario.lgi_closed_form(scenario.THETA_STAR_3)
    rep.flags.append(Flag(
        "C8: oracle LGI violation at 0.74 pi",
        abs(k_star - closed) < 1e-12 and abs(k_star - 1.208) <= 0.005 and k_star > 1.0
        and abs(k_star - scenario.REPORTED_K) <= 0.06,
        f"K = {k_star:.4f} (closed form {closed:.4f}, reported {scenario.REPORTED_K})",
    ))
    if any(abs(th) < 1e-15 for th in grid):
        k0 = scenario.lgi_exact(0.0).k
        c0 = scenario.correlation_exact(0.0, 2)
        rep.flags.append(Flag("C9: theta = 0 row", abs(k0 + 1) < 1e-12 and abs(c0 - 1) < 1e-12,
                              f"K = {k0:.12f}, C_ZZ = {c0.real:.12f}"))
    rep.runtime_s = time.perf_counter() - t0
    return rep
