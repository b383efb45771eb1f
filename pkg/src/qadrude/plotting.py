"""Optional PNG rendering of ensemble spectra and peak trends.

Only used when a run config sets ``figures = true``; the CSV and JSON outputs
are the primary artifacts.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        raise RuntimeError("figures = true needs matplotlib (pip install 'artifact[figures]')") from None

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_spectra(spectra: dict, title: str, path) -> Path:
    """One curve per temperature with a one-sigma band; ``spectra`` maps T to Spectrum."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for T in sorted(spectra):
        sp = spectra[T]
        (line,) = ax.plot(sp.omega, sp.sigma, label=f"{T:g} K")
        if sp.n_realizations > 1:
            ax.fill_between(sp.omega, sp.sigma - sp.std, sp.sigma + sp.std,
                            color=line.get_color(), alpha=0.2, lw=0)
    ax.set_xlabel(r"$\hbar\omega$ (eV)")
    ax.set_ylabel(r"Re $\sigma$ / $\sigma_0$")
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_peak_trend(rows, title: str, path) -> Path:
    """Peak location and width against k_B T for each pipeline."""
    from .analysis import thermal_energy

    plt = _pyplot()
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(4.5, 5.0), sharex=True)
    for pipe in sorted({r.pipeline for r in rows}):
        sel = sorted((r for r in rows if r.pipeline == pipe), key=lambda r: r.T)
        kT = thermal_energy([r.T for r in sel])
        top.errorbar(kT, [r.omega_p_mean for r in sel], [r.omega_p_std for r in sel],
                     marker="o", capsize=2, label=pipe)
        bottom.errorbar(kT, [r.width_mean for r in sel], [r.width_std for r in sel],
                        marker="o", capsize=2, label=pipe)
    if rows:
        kT = np.linspace(0, thermal_energy(max(r.T for r in rows)), 2)
        bottom.plot(kT, kT, "k--", lw=1, label=r"$k_BT$")
    top.set_ylabel(r"$\hbar\omega_p$ (eV)")
    bottom.set_ylabel(r"$\hbar\Delta\omega_p$ (eV)")
    bottom.set_xlabel(r"$k_BT$ (eV)")
    top.set_title(title)
    top.legend(fontsize="small")
    bottom.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_figures(averaged: dict, cfg, outdir) -> list[Path]:
    """Spectra per (material, pipeline) and a peak-trend figure per material."""
    from .analysis import peak_stats_from_metadata

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in cfg.materials:
        rows = []
        for pipe in cfg.pipelines:
            group = {T: averaged[(name, T, pipe)] for T in cfg.temperatures
                     if (name, T, pipe) in averaged}
            if group:
                paths.append(plot_spectra(group, f"{name} ({pipe})",
                                          outdir / f"{name}_{pipe}_spectra.png"))
            rows.extend(r for r in (peak_stats_from_metadata(sp) for sp in group.values()) if r)
        if rows:
            paths.append(plot_peak_trend(rows, name, outdir / f"{name}_peaks.png"))
    return paths
