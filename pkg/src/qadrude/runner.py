"""End-to-end experiment execution and the output manifest.

Layout under ``cfg.output``::

    config.resolved.txt
    spectra/<material>_T<T>_<pipeline>.csv   (+ .json metadata)
    peaks/<material>_peaks.csv
    fits/<material>_<pipeline>_fit.json
    figures/*.png                             (only with figures = true)
    manifest.json

Realizations are computed in a bounded process pool and reduced in a fixed
order, so numeric output does not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import PeakStats, ensemble_average, fit_peak_vs_vrms, peak_stats, write_peak_table
from .conductivity import Spectrum, _jsonable
from .config import ExperimentConfig, dump_config
from .errors import SpectrumError
from .field import SimulationBox
from .materials import get_material
from .pipeline import RunSettings, run_dynamic, run_static

log = logging.getLogger(__name__)

WORKERS_ENV = "QADRUDE_WORKERS"


@dataclass(frozen=True)
class Task:
    i_mat: int
    i_T: int
    i_real: int
    pipeline: str
    material: str
    T: float
    seed: int


@dataclass
class Manifest:
    """Relative path -> sha256 of every artifact, plus completion status."""

    root: Path
    files: dict = field(default_factory=dict)
    complete: bool = False
    error: str | None = None

    def add(self, path: Path) -> None:
        rel = Path(path).relative_to(self.root).as_posix()
        self.files[rel] = sha256(path)

    def write(self, config: dict) -> Path:
        path = self.root / "manifest.json"
        body = {"version": __version__, "complete": self.complete, "error": self.error,
                "config": config, "files": dict(sorted(self.files.items()))}
        path.write_text(json.dumps(_jsonable(body), indent=2) + "\n")
        return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def settings_from_config(cfg: ExperimentConfig) -> RunSettings:
    return RunSettings(window_factor=cfg.window_factor, eta=cfg.eta, omega_max=cfg.omega_max,
                       omega_step=cfg.omega_step, dt=cfg.dt, t_max=cfg.t_max,
                       record_stride=cfg.record_stride, max_phase=cfg.max_phase,
                       coupling_form=cfg.coupling_form, amplitude_factor=cfg.amplitude_factor,
                       frozen=cfg.frozen)


def box_for(cfg: ExperimentConfig, material: str) -> SimulationBox:
    return SimulationBox.for_material(get_material(material), cfg.N, cfg.L)


def plan_tasks(cfg: ExperimentConfig) -> list[Task]:
    tasks = []
    for i_mat, name in enumerate(cfg.materials):
        for i_T, T in enumerate(cfg.temperatures):
            for pipe in cfg.pipelines:
                for r in range(cfg.n_realizations(pipe)):
                    tasks.append(Task(i_mat, i_T, r, pipe, name, T,
                                      cfg.realization_seed(i_mat, i_T, r, pipe)))
    return tasks


def run_task(cfg: ExperimentConfig, task: Task):
    m = get_material(task.material)
    box = box_for(cfg, task.material)
    st = settings_from_config(cfg)
    if task.pipeline == "static":
        res = run_static(m, box, task.T, task.seed, st)
    else:
        res = run_dynamic(m, box, task.T, task.seed, st)["dynamic"]
    return res.spectrum, res.diagnostics


def resolve_workers(cfg: ExperimentConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return cfg.workers


def _execute(cfg: ExperimentConfig, tasks: list[Task], workers: int) -> list:
    if workers == 1:
        return [run_task(cfg, t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_task, [cfg] * len(tasks), tasks))


def _stem(name: str, T: float, pipeline: str) -> str:
    return f"{name}_T{T:g}_{pipeline}"


def _diagnostic_summary(diags: list[dict]) -> dict:
    out = {}
    for key in ("max_residual_eV", "orthonormality_error", "hermiticity_error",
                "max_norm_drift", "truncation_bound_sigma0"):
        vals = [d[key] for d in diags if d.get(key) is not None]
        if vals:
            out[key if key.startswith("max_") else "max_" + key] = float(np.max(vals))
    ipr = [d["mean_ipr_per_nm2"] for d in diags if "mean_ipr_per_nm2" in d]
    if ipr:
        out["mean_ipr_per_nm2"] = float(np.mean(ipr))
    return out


def run_experiment(cfg: ExperimentConfig, output=None, workers: int | None = None) -> Manifest:
    """Run every (material, T, pipeline, realization) task and write the artifacts.

    On failure the manifest is still written, marked incomplete, and the
    exception is re-raised.
    """
    root = Path(output if output is not None else cfg.output)
    root.mkdir(parents=True, exist_ok=True)
    if not os.access(root, os.W_OK):
        raise PermissionError(f"output directory {root} is not writable")
    manifest = Manifest(root)
    resolved = cfg.to_dict()
    provenance = {"config": resolved, "version": __version__}
    try:
        cfg_path = root / "config.resolved.txt"
        cfg_path.write_text(dump_config(cfg, header=f"qadrude {__version__} resolved configuration"))
        manifest.add(cfg_path)
        for sub in ("spectra", "peaks", "fits"):
            (root / sub).mkdir(exist_ok=True)

        tasks = plan_tasks(cfg)
        n_workers = workers if workers is not None else resolve_workers(cfg)
        log.info("running %d realizations on %d worker(s)", len(tasks), n_workers)
        results = _execute(cfg, tasks, n_workers)

        averaged: dict = {}
        for i_mat, name in enumerate(cfg.materials):
            m = get_material(name)
            rows: list[PeakStats] = []
            for pipe in cfg.pipelines:
                points = []
                for i_T, T in enumerate(cfg.temperatures):
                    sel = [(t, r) for t, r in zip(tasks, results)
                           if (t.i_mat, t.i_T, t.pipeline) == (i_mat, i_T, pipe)]
                    sel.sort(key=lambda tr: tr[0].i_real)
                    spectra = [r[0] for _, r in sel]
                    avg = ensemble_average(spectra)
                    avg.metadata.update(provenance)
                    avg.metadata["diagnostics"] = _diagnostic_summary([r[1] for _, r in sel])
                    try:
                        ps = peak_stats(spectra, T, material=name)
                        rows.append(ps)
                        points.append((T, ps.omega_p_mean))
                        avg.metadata["peak"] = ps.row()
                        avg.metadata["peak_spread"] = (
                            "std of per-realization peaks; the peak of the averaged "
                            "spectrum is the alternative and is not reported")
                    except SpectrumError as exc:
                        avg.metadata["peak_error"] = str(exc)
                        log.warning("%s T=%g %s: %s", name, T, pipe, exc)
                    csv, meta = avg.write(root / "spectra" / _stem(name, T, pipe))
                    manifest.add(csv)
                    manifest.add(meta)
                    averaged[(name, T, pipe)] = avg
                fit_path = root / "fits" / f"{name}_{pipe}_fit.json"
                fit_body = dict(provenance, material=name, pipeline=pipe, points=points)
                try:
                    fit_body["fit"] = fit_peak_vs_vrms(points, m).to_dict()
                except ValueError as exc:
                    fit_body["fit"] = None
                    fit_body["fit_error"] = str(exc)
                fit_path.write_text(json.dumps(_jsonable(fit_body), indent=2) + "\n")
                manifest.add(fit_path)
            peaks = root / "peaks" / f"{name}_peaks.csv"
            write_peak_table(rows, peaks)
            manifest.add(peaks)

        if cfg.figures:
            from .plotting import render_figures
            for path in render_figures(averaged, cfg, root / "figures"):
                manifest.add(path)
        manifest.complete = True
    except BaseException as exc:
        manifest.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest.write(resolved)
    return manifest


def read_manifest(root) -> dict:
    return json.loads((Path(root) / "manifest.json").read_text())


def load_spectrum(root, material: str, T: float, pipeline: str) -> Spectrum:
    return Spectrum.read(Path(root) / "spectra" / _stem(material, T, pipeline))


__all__ = ["Manifest", "Task", "run_experiment", "plan_tasks", "read_manifest", "load_spectrum",
           "sha256", "settings_from_config", "box_for"]
