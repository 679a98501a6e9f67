"""Figures for run directories and studies (Agg backend, files only)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_run(record, out_dir, audit=None) -> dict:
    """Norm history, energy budget and initial/final profiles of a run."""
    out_dir = Path(out_dir)
    t = np.asarray(record.times)
    paths = {}

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, label in (("l2", "L2"), ("n", "N"), ("linf", "Linf")):
        ax.plot(t, record.series(name), label=label)
    for s in record.config.norm_exponents:
        ax.plot(t, record.series(f"hdot_{s:g}"), "--", lw=1, label=f"Hdot^{s:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.legend(fontsize=8)
    ax.set_title(f"{record.config.variant}, eps={record.config.eps:g} ({record.status})")
    paths["norms"] = str(_save(fig, out_dir / "norms.png"))

    if audit is not None:
        fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        kin = [b.kinetic for b in audit.budgets]
        a1.plot(t, kin, label="kinetic")
        a1.plot(t, [b.dissipation_n for b in audit.budgets], label="int ||u||_N^2")
        a1.plot(t, [b.dissipation_eps for b in audit.budgets], label="eps int ||ell^1/2 u||^2")
        a1.legend(fontsize=8)
        a2.semilogy(t, np.abs([b.residual for b in audit.budgets]) + 1e-300)
        a2.set_ylabel("|residual|")
        a2.set_xlabel("t")
        paths["energy"] = str(_save(fig, out_dir / "energy.png"))

    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = record.grid.x
    ax.plot(x, record.field_at(0).samples, label=f"t={t[0]:g}")
    ax.plot(x, record.final.samples, label=f"t={t[-1]:g}")
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    paths["profiles"] = str(_save(fig, out_dir / "profiles.png"))
    return paths


def plot_kernel_studies(studies: Sequence, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in studies:
        ax.loglog(s.times, s.norms, "o-", ms=3,
                  label=f"{s.generator}, p={s.derivative_order:g}: slope {s.slope:.4f}")
    ax.set_xlabel("tau")
    ax.set_ylabel("kernel norm")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_family(study, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    eps = np.asarray(study.eps[:-1])
    ax.loglog(eps, study.consecutive, "o-", label="consecutive")
    ax.loglog(eps, study.to_zero, "s--", label="to eps=0")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup_t L2 distance")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_twins(reports: Sequence, labels: Sequence[str], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for r, lab in zip(reports, labels):
        line, = ax.semilogy(r.times, np.maximum(r.w_sq, 1e-300), label=lab)
        ax.semilogy(r.times, r.envelope, ":", color=line.get_color())
    ax.set_xlabel("t")
    ax.set_ylabel("||w||^2 (dotted: envelope)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_compare(rec_a, rec_b, path) -> Path:
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 5))
    for r in (rec_a, rec_b):
        a1.plot(r.times, r.series("l2"), label=r.config.variant)
        a2.plot(r.grid.x, r.final.samples, label=r.config.variant)
    a1.set_xlabel("t")
    a1.set_ylabel("L2")
    a2.set_xlabel("x")
    a1.legend(fontsize=8)
    return _save(fig, path)
