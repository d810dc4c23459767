"""
Emission Runner

Runs the configured spectrum methods for one parameter set, sweeps over
(lambda_c, alpha) grids, and holds the canned deviation-table and figure
presets.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .analytic import rwa_spectrum, trwa_spectrum, uniform_grid
from .ansatz import initial_state
from .artifacts import (
    config_hash,
    read_spectrum,
    save_state,
    write_checkpoints,
    write_deviation_table,
    write_manifest,
    write_peak_report,
    write_spectrum,
    write_trajectory,
)
from .dynamics import conservation_drifts, is_accepted, propagate
from .errors import ConfigurationError, EmissionError, PropagationError
from .model import discretize_bath
from .peaks import compare
from .types import (
    DiscretizedBath,
    GridKind,
    Method,
    MethodOutcome,
    MultiD1State,
    RunConfig,
    RunOutcome,
    SpectrumResult,
    SweepPointResult,
    SweepSpec,
    validate_run_config,
)

logger = logging.getLogger(__name__)

# max sigma^2 and multiplicity M for omega_c = omega0, Nb = 500, t_f = 300
TABLE1_REFERENCE: Dict[Tuple[float, float], Tuple[float, int]] = {
    (0.0, 0.05): (0.0010, 3),
    (0.0, 0.1): (0.0016, 6),
    (0.0, 0.2): (0.0015, 10),
    (0.1, 0.05): (0.0010, 3),
    (0.1, 0.1): (0.0015, 6),
    (0.1, 0.2): (0.0011, 12),
    (0.3, 0.05): (0.0018, 4),
    (0.3, 0.1): (0.0044, 6),
    (0.3, 0.2): (0.0023, 12),
    (0.5, 0.05): (0.0041, 4),
    (0.5, 0.1): (0.0047, 10),
    (0.5, 0.2): (0.0043, 12),
}

SCALE_PRESETS: Dict[str, Dict[str, Any]] = {
    "desk": {"bath.n_modes": 100, "integrator.t_f": 100.0},
    "paper": {"bath.n_modes": 500, "integrator.t_f": 300.0},
}

FIGURE_CAVITY_COUPLINGS = {"fig1": 0.0, "fig2": 0.1, "fig3": 0.3, "fig4": 0.5}
FIGURE_ALPHAS = (0.05, 0.1, 0.2)


class EmissionRunner:
    """Executes the requested methods for one configuration and writes the artifacts"""

    def __init__(self, config: RunConfig, output_dir: Optional[Path] = None):
        self.config = config
        self.params = config.model
        self.run_id = config.output.run_id or config_hash(config)[:12]
        base = Path(output_dir) if output_dir is not None else Path(config.output.directory)
        self.output_dir = base / self.run_id
        self._bath: Optional[DiscretizedBath] = None

    @property
    def bath(self) -> DiscretizedBath:
        if self._bath is None:
            self._bath = discretize_bath(
                self.params, self.config.bath.n_modes, self.config.bath.omega_max
            )
        return self._bath

    def spectrum_grid(self):
        """Grid for the analytic methods: uniform on (0, omega_max] or the bath modes"""
        grid = self.config.spectrum
        if grid.kind == GridKind.BATH:
            return self.bath
        return uniform_grid(grid.n_points, grid.omega_max)

    def run(self, restart: Optional[MultiD1State] = None) -> RunOutcome:
        """Run every configured method; failures are recorded per method"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.info(
            f"Run {self.run_id}: methods={[m.value for m in self.config.methods]}, "
            f"lambda_c={self.params.lambda_c}, alpha={self.params.alpha}"
        )

        if restart is not None and Method.MULTID1 in self.config.methods:
            self.check_restart(restart)

        outcomes = []
        for method in self.config.methods:
            try:
                if method == Method.MULTID1:
                    outcome = self.run_multid1(restart)
                else:
                    outcome = self.run_analytic(method)
            except EmissionError as exc:
                logger.error(f"{method.value} failed: {exc}")
                outcome = MethodOutcome(method=method, status="failed", error=str(exc))
                if isinstance(exc, PropagationError) and exc.partial is not None:
                    path = write_trajectory(exc.partial, self.output_dir / "trajectory_partial.csv")
                    outcome.artifacts.append(str(path))
                    outcome.sigma2_max = exc.partial.sigma2_max
            outcomes.append(outcome)
            logger.info(f"{method.value}: {outcome.status}")

        artifacts = [Path(a) for o in outcomes for a in o.artifacts]
        results = {o.method.value: o.model_dump(mode="json", exclude={"artifacts"}) for o in outcomes}
        manifest = write_manifest(self.output_dir / "manifest.json", self.config, artifacts, results)
        return RunOutcome(
            run_id=self.run_id,
            output_dir=str(self.output_dir),
            methods=outcomes,
            manifest=str(manifest),
        )

    def check_restart(self, restart: MultiD1State) -> None:
        if restart.n_bath != self.bath.n_modes:
            raise ConfigurationError(
                f"restart snapshot has Nb={restart.n_bath}, config has {self.bath.n_modes}",
                ["bath.n_modes"],
            )

    def run_multid1(self, restart: Optional[MultiD1State] = None) -> MethodOutcome:
        """Propagate the multi-D1 state to t_f; the final bath occupations are the spectrum"""
        ansatz = self.config.ansatz
        integrator = self.config.integrator
        if restart is not None:
            self.check_restart(restart)
            initial = restart
            logger.info(f"Restarting multi-D1 propagation from t={restart.time}")
        else:
            initial = initial_state(ansatz.multiplicity, self.bath, ansatz.noise_scale, ansatz.seed)

        stride = max(1, int(round(integrator.output_every / integrator.dt)))
        record = propagate(
            initial,
            self.params,
            self.bath,
            integrator.t_f,
            integrator.dt,
            output_stride=stride,
            eps=integrator.regularization,
            n_checkpoints=integrator.n_checkpoints,
        )

        snapshot = record.spectrum_snapshot
        spectrum = SpectrumResult(
            method=Method.MULTID1,
            frequencies=self.bath.frequencies,
            values=snapshot.values[1:],
            metadata={
                "method": Method.MULTID1.value,
                "params": self.params.model_dump(),
                "grid": "bath",
                "measure": "lambda_k^2",
                "run_id": self.run_id,
                "t_f": snapshot.time,
                "multiplicity": initial.multiplicity,
                "sigma2_max": record.sigma2_max,
                "stationarity": record.stationarity,
            },
        )
        frequencies = np.concatenate(([self.params.omega_c], self.bath.frequencies))
        artifacts = [
            write_spectrum(spectrum, self.output_dir / "spectrum_multid1.csv"),
            write_trajectory(record, self.output_dir / "trajectory.csv"),
            write_checkpoints(record, frequencies, self.output_dir / "checkpoints.csv"),
            save_state(record.final_state, self.output_dir / "final_state.json"),
        ]
        return MethodOutcome(
            method=Method.MULTID1,
            artifacts=[str(a) for a in artifacts],
            sigma2_max=record.sigma2_max,
            diagnostics={
                "stationarity": record.stationarity,
                "drifts": conservation_drifts(record),
                "accepted": is_accepted(record),
            },
        )

    def analytic_spectrum(self, method: Method) -> SpectrumResult:
        grid = self.spectrum_grid()
        if method == Method.TRWA:
            spectrum = trwa_spectrum(grid, self.params)
        elif method == Method.RWA:
            spectrum = rwa_spectrum(grid, self.params)
        else:
            raise ConfigurationError(f"{method.value} is not an analytic method", ["methods"])
        spectrum.metadata["run_id"] = self.run_id
        return spectrum

    def run_analytic(self, method: Method) -> MethodOutcome:
        spectrum = self.analytic_spectrum(method)
        path = write_spectrum(spectrum, self.output_dir / f"spectrum_{method.value}.csv")
        diagnostics = {"eta": spectrum.metadata["eta"]} if "eta" in spectrum.metadata else {}
        return MethodOutcome(method=method, artifacts=[str(path)], diagnostics=diagnostics)


# Sweeps ======================================================================


def sweep_point_config(
    base: RunConfig, spec: SweepSpec, lambda_c: float, alpha: float
) -> RunConfig:
    """Multi-D1 configuration of one sweep point"""
    multiplicity = spec.multiplicity_for(lambda_c, alpha) or base.ansatz.multiplicity
    return base.with_updates(
        {
            "model.lambda_c": lambda_c,
            "model.alpha": alpha,
            "ansatz.multiplicity": multiplicity,
            "methods": [Method.MULTID1.value],
            "output.run_id": f"lc{lambda_c:g}_a{alpha:g}",
        }
    )


def _run_sweep_point(config_data: Dict[str, Any], output_dir: str) -> Dict[str, Any]:
    """Worker entry point; takes and returns plain data so it pickles"""
    config = validate_run_config(config_data)
    point = SweepPointResult(
        lambda_c=config.model.lambda_c,
        alpha=config.model.alpha,
        multiplicity=config.ansatz.multiplicity,
    )
    try:
        outcome = EmissionRunner(config, Path(output_dir)).run()
        method = outcome.methods[0]
        point.sigma2_max = method.sigma2_max
        point.status = method.status
        point.error = method.error
    except EmissionError as exc:
        point.status = "failed"
        point.error = str(exc)
    return point.model_dump()


def sweep(
    spec: SweepSpec,
    base: RunConfig,
    output_dir: Optional[Path] = None,
    jobs: int = 1,
) -> List[SweepPointResult]:
    """Run every sweep point (concurrently when jobs > 1) and write the deviation table"""
    output_dir = Path(output_dir) if output_dir is not None else Path(base.output.directory)
    output_dir.mkdir(parents=True, exist_ok=True)
    configs = [sweep_point_config(base, spec, lc, a) for lc, a in spec.points()]
    payloads = [c.model_dump(mode="json") for c in configs]
    logger.info(f"Sweep over {len(configs)} point(s) with {jobs} job(s)")

    if jobs <= 1 or len(configs) == 1:
        raw = [_run_sweep_point(p, str(output_dir)) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_run_sweep_point, payloads, [str(output_dir)] * len(payloads)))

    results = [SweepPointResult.model_validate(r) for r in raw]
    for r in results:
        if r.status != "ok":
            logger.error(f"Sweep point lambda_c={r.lambda_c}, alpha={r.alpha} failed: {r.error}")
        else:
            logger.info(
                f"Sweep point lambda_c={r.lambda_c}, alpha={r.alpha}: max sigma^2={r.sigma2_max:.4g}"
            )
    write_deviation_table(
        [r.model_dump() for r in results], output_dir / "deviation_table.csv"
    )
    return results


# Presets =====================================================================


def scaled_config(base: RunConfig, scale: str) -> RunConfig:
    if scale not in SCALE_PRESETS:
        raise ConfigurationError(f"unknown scale {scale!r}", ["scale"])
    return base.with_updates(SCALE_PRESETS[scale])


def table1_spec() -> SweepSpec:
    """The deviation-table grid with its per-cell multiplicities"""
    return SweepSpec(
        lambda_c_values=sorted({lc for lc, _ in TABLE1_REFERENCE}),
        alpha_values=sorted({a for _, a in TABLE1_REFERENCE}),
        multiplicity_overrides=[
            {"lambda_c": lc, "alpha": a, "multiplicity": m}
            for (lc, a), (_, m) in TABLE1_REFERENCE.items()
        ],
    )


def table1(
    base: RunConfig, scale: str = "desk", output_dir: Optional[Path] = None, jobs: int = 1
) -> List[SweepPointResult]:
    """Reproduce the deviation table at the given scale"""
    config = scaled_config(base.with_updates({"model.omega_c": base.model.omega0}), scale)
    return sweep(table1_spec(), config, output_dir, jobs)


def figure_configs(base: RunConfig, scale: str = "desk") -> Dict[str, RunConfig]:
    """One configuration per figure panel: resonant cavity, three reservoir couplings"""
    config = scaled_config(base, scale)
    panels = {}
    for figure, lambda_c in FIGURE_CAVITY_COUPLINGS.items():
        for panel, alpha in zip("abc", FIGURE_ALPHAS):
            multiplicity = TABLE1_REFERENCE[(lambda_c, alpha)][1]
            name = f"{figure}{panel}"
            panels[name] = config.with_updates(
                {
                    "model.omega_c": config.model.omega0,
                    "model.lambda_c": lambda_c,
                    "model.alpha": alpha,
                    "ansatz.multiplicity": multiplicity,
                    "output.run_id": name,
                }
            )
    return panels


def figures(
    base: RunConfig,
    scale: str = "desk",
    output_dir: Optional[Path] = None,
    panels: Optional[List[str]] = None,
) -> Dict[str, RunOutcome]:
    """Spectra of all three methods for each figure panel, plus a peak report per panel"""
    output_dir = Path(output_dir) if output_dir is not None else Path(base.output.directory)
    configs = figure_configs(base, scale)
    if panels:
        unknown = sorted(set(panels) - set(configs))
        if unknown:
            raise ConfigurationError(f"unknown figure panels {unknown}", ["panels"])
        configs = {name: configs[name] for name in panels}

    outcomes = {}
    for name, config in configs.items():
        runner = EmissionRunner(config, output_dir)
        outcome = runner.run()
        spectra = []
        for method in outcome.methods:
            if method.ok:
                path = runner.output_dir / f"spectrum_{method.method.value}.csv"
                spectra.append(read_spectrum(path))
        if spectra:
            reports = compare(spectra, config.spectrum.peak_threshold)
            write_peak_report(reports, runner.output_dir / "peaks.csv")
        outcomes[name] = outcome
    return outcomes
