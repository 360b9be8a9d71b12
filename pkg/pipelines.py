"""
Pipelines

Scenario dispatch and the simulate / stratify / regularity / summarize
drivers behind the CLI. Each driver records its steps (name, duration,
status, detail) in the manager's step log, which is embedded in the JSON
summaries.
"""

import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from config_manager import CATALOG_SCENARIOS, CURVE_SCENARIOS, RunConfig
from covering import recursive_covering, volume_exponent
from curve_flow import circle_curve, ellipse_curve, evolve_curve
from density import density_ratio_check, gaussian_density_limit
from errors import InvalidInputError, OutOfRangeError, StrataflowError
from model_catalog import ModelKind, make_model
from regularity import (
    bad_set_volume_exponent,
    calibrate_epsilon,
    critical_exponent,
    lp_curvature_norm,
    lp_inverse_regscale,
    regularity_field,
    sharpness_study,
)
from reports import aggregate_summaries, write_csv, write_json
from rotsym_flow import dumbbell_profile, evolve_rotsym, sphere_profile
from simulator import StopRule, singular_summary
from spacetime import SpacetimePoint
from strata import (
    StratConfig,
    bad_scale_bound,
    decomposition_class_bound,
    energy_decomposition,
    scale_signature,
    stratum_grid,
)
from track_format import read_track, write_track
from varifold import FlowTrack, stack_spacetime_samples

logger = logging.getLogger(__name__)

STEP_LOG_LIMIT = 100
CATALOG_SURFACE_RESOLUTION = 48
# epsilon-regularity calibration is fitted on the first few sample points only
CALIBRATION_POINTS = 20
INVERSE_SCALE_SAMPLES = 64


def catalog_times() -> np.ndarray:
    """Uniform grid on [-2, 2] merged with a geometric approach -2^{-k/8} to t=0"""
    uniform = np.linspace(-2.0, 2.0, 33)
    geometric = -(2.0 ** (-np.arange(0, 161) / 8.0))
    return np.unique(np.round(np.concatenate([uniform, geometric]), 15))


def _catalog_track(config: RunConfig) -> FlowTrack:
    scenario = config.scenario
    kind = scenario["type"]
    defaults = {"plane": 1, "shrinking-circle": 1, "quasistatic-plane": 1, "shrinking-sphere": 2, "cylinder": 2}
    n = scenario.get("n") or defaults[kind]
    resolution = int(scenario["resolution"]) if n == 1 else min(int(scenario["resolution"]), CATALOG_SURFACE_RESOLUTION)
    if kind == "plane":
        model = make_model(ModelKind.STATIC_PLANE, n, resolution=resolution)
    elif kind == "quasistatic-plane":
        model = make_model(ModelKind.QUASISTATIC_PLANE, n, T=0.0, resolution=resolution)
    elif kind in ("shrinking-circle", "shrinking-sphere"):
        model = make_model(ModelKind.SHRINKER_SPHERE, n, resolution=resolution)
    else:
        if n < 2:
            raise InvalidInputError("cylinder scenario needs n >= 2")
        model = make_model(ModelKind.SHRINKER_CYLINDER, n, j=1, resolution=resolution)
    track = model.as_track(catalog_times())
    return track.with_slices(track.slices, provenance={"model": model.label(), "scenario": kind})


def build_scenario(config: RunConfig) -> FlowTrack:
    """FlowTrack of the configured scenario: analytic catalog track or simulated flow"""
    scenario = config.scenario
    kind = scenario["type"]
    if kind in CATALOG_SCENARIOS:
        return _catalog_track(config)

    stop = StopRule.from_dict(scenario.get("stop") or {})
    radii = [float(r) for r in scenario.get("radii") or [1.0]]
    resolution = int(scenario["resolution"])
    dt_max = scenario.get("dt_max")
    emit_dt = float(scenario.get("emit_dt", 0.05))
    if kind in CURVE_SCENARIOS:
        if kind == "circle":
            initial = circle_curve(radii[0], vertices=resolution)
        else:
            if len(radii) < 2:
                raise InvalidInputError("ellipse scenario needs two radii")
            initial = ellipse_curve(radii[0], radii[1], vertices=resolution)
        flow = evolve_curve(initial, dt_max, stop, emit_dt=emit_dt)
    else:
        if kind == "sphere":
            initial = sphere_profile(radii[0], vertices=resolution)
        else:
            bell, neck = float(scenario["bell_radius"]), float(scenario["neck_radius"])
            initial = dumbbell_profile(bell, neck, vertices=resolution)
        flow = evolve_rotsym(initial, dt_max, stop, n_theta=int(scenario["n_theta"]), emit_dt=emit_dt)
    provenance = dict(flow.provenance)
    provenance["scenario"] = kind
    return flow.with_slices(flow.slices, provenance=provenance)


def sample_points(flow: FlowTrack, count: int, seed: int) -> List[SpacetimePoint]:
    """Recorded singular points first, then seeded random support samples"""
    points = [p for p in flow.singular_points if flow.t_min <= p.t <= flow.t_max]
    rows = stack_spacetime_samples(flow)
    if len(rows) and count > len(points):
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(rows), size=min(count - len(points), len(rows)), replace=False)
        points.extend(SpacetimePoint.from_array(rows[i]) for i in sorted(picks))
    return points[:count]


class PipelineManager:
    """Runs pipelines and keeps the step log"""

    def __init__(self):
        self.step_log: List[Dict[str, Any]] = []
        self.run_logger = None

    def set_run_logger(self, run_logger) -> None:
        self.run_logger = run_logger

    def _trace(self, message: str, **kwargs) -> None:
        if self.run_logger:
            self.run_logger.debug(message, **kwargs)

    def add_step(self, step: Dict[str, Any]) -> None:
        self.step_log.append(step)
        if len(self.step_log) > STEP_LOG_LIMIT:
            self.step_log = self.step_log[-STEP_LOG_LIMIT:]

    @contextmanager
    def step(self, name: str, **detail) -> Iterator[Dict[str, Any]]:
        """Time a step; the yielded dict collects extra detail"""
        record: Dict[str, Any] = {"name": name, "detail": dict(detail)}
        start = time.perf_counter()
        try:
            yield record["detail"]
            record["status"] = "ok"
        except StrataflowError as e:
            record["status"] = "error"
            record["detail"]["error"] = str(e)
            raise
        finally:
            record["duration_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
            self.add_step(record)
            self._trace(
                "Pipeline step", name=name, status=record.get("status", "error"), duration_ms=record["duration_ms"]
            )

    def steps_since(self, mark: int) -> List[Dict[str, Any]]:
        """Steps for artifacts; durations stay in the run log so artifacts are reproducible"""
        return [{k: v for k, v in step.items() if k != "duration_ms"} for step in self.step_log[mark:]]

    def simulate(self, config: RunConfig, out_dir: Optional[Path] = None) -> Path:
        """Build the scenario and write its track with the config hash"""
        out_dir = Path(out_dir or config.out)
        mark = len(self.step_log)
        with self.step("simulate", scenario=config.scenario_type) as detail:
            flow = build_scenario(config)
            detail["slices"] = len(flow.slices)
            detail["singular_times"] = list(flow.singular_times)
        with self.step("write_track"):
            path = write_track(flow, out_dir / "track.txt", config.hash)
        summary = {
            "scenario": config.scenario_type,
            "slices": len(flow.slices),
            "t_min": flow.t_min,
            "t_max": flow.t_max,
            "mass_bound": flow.mass_bound,
            "singular_times": list(flow.singular_times),
            "provenance": dict(flow.provenance),
            "steps": self.steps_since(mark),
        }
        if flow.has_curvature and flow.closed:
            summary["singular"] = singular_summary(flow)
        write_json(summary, out_dir / "simulate-summary.json", config.hash)
        logger.info(f"Simulation written to {path}")
        return path

    def stratify(self, track: Path, config: RunConfig, out_dir: Optional[Path] = None) -> Dict[str, Any]:
        """Membership grid, signatures, decomposition, coverings and exponent fits"""
        out_dir = Path(out_dir or config.out)
        mark = len(self.step_log)
        strat = config.stratification
        with self.step("read_track", path=str(track)):
            flow = read_track(track)
        cfg = StratConfig(
            n=flow.n,
            gamma=float(strat["gamma"]),
            delta=float(strat["delta"]),
            q=int(strat["q"]),
            eta=float(strat["eta"][0]),
            epsilon=float(strat["epsilon"]),
            beta_max=int(strat["beta_max"]),
            mass_bound=flow.mass_bound,
            localized=bool(strat["localized"]),
        )
        js = [int(j) for j in strat["j"] if 0 <= int(j) <= flow.n + 1]
        etas = [float(e) for e in strat["eta"]]
        beta = int(strat["beta"])
        rs = [cfg.gamma ** k for k in range(beta + 1)]
        points = sample_points(flow, config.points, config.seed)

        with self.step("stratum_grid", points=len(points), js=js) as detail:
            report = stratum_grid(flow, points, js, etas, rs, gamma=cfg.gamma)
            detail.update(report.summary())

        with self.step("signatures", beta=cfg.beta_max) as detail:
            signatures, signed = [], []
            for X in points:
                try:
                    signatures.append(scale_signature(flow, X, cfg, cfg.beta_max))
                    signed.append(X)
                except OutOfRangeError:
                    logger.debug(f"Signature scales leave the flow at t={X.t:.6g}")
            max_count, bound, ok = bad_scale_bound(cfg, signatures)
            detail.update({"signed_points": len(signed), "max_count": max_count, "bound": bound, "ok": ok})
        report.signatures = signatures

        classes = {}
        for b in range(1, cfg.beta_max + 1):
            count = len(energy_decomposition(signed, signatures, b)) if signed else 0
            classes[b] = {"classes": count, "bound": decomposition_class_bound(b, cfg.Q)}

        coverings, exponents = {}, {}
        radii = [float(r) for r in config.regularity["radii"]]
        for j in js:
            with self.step("covering", j=j) as detail:
                covering = recursive_covering(flow, points, j, cfg, beta, report=report)
                detail["counts"] = covering.counts
            coverings[j] = {"counts": covering.counts, "ratios": covering.level_ratios()}
            members = report.members(j, etas[0], rs[-1])
            exponents[j] = None
            if members:
                exponents[j] = volume_exponent(members, radii, N=flow.N, cells_per_radius=config.grid).as_dict()

        singular_exponent = None
        if flow.singular_points:
            singular = list(flow.singular_points)
            singular_exponent = volume_exponent(singular, radii, N=flow.N, cells_per_radius=config.grid).as_dict()

        densities = []
        for X in flow.singular_points:
            try:
                limit = gaussian_density_limit(flow, X, localized=cfg.localized)
                densities.append({"t": X.t, "theta": limit.value, "converged": limit.converged})
            except OutOfRangeError:
                continue
        ratios = []
        for X in points:
            try:
                ratio, bound_4l = density_ratio_check(flow, X, 0.5)
                ratios.append(ratio <= bound_4l)
            except OutOfRangeError:
                continue

        write_csv(report.to_rows(), out_dir / "strata.csv", config.hash)
        covering_rows = [dict(row, j=j) for j in js for row in _covering_rows(coverings[j]["counts"], cfg.gamma)]
        write_csv(covering_rows, out_dir / "covering.csv", config.hash)
        summary = {
            "strat_config": cfg.as_dict(),
            "strata": report.summary(),
            "bad_scale_bound": {"max_count": max_count, "bound": bound, "ok": ok},
            "decomposition": classes,
            "coverings": coverings,
            "stratum_exponents": exponents,
            "singular_set_exponent": singular_exponent,
            "singular_densities": densities,
            "density_ratio_ok": all(ratios),
            "steps": self.steps_since(mark),
        }
        write_json(summary, out_dir / "strata-summary.json", config.hash)
        return summary

    def regularity(self, track: Path, config: RunConfig, out_dir: Optional[Path] = None) -> Dict[str, Any]:
        """Regularity field, L^p tables, bad-set exponent and sharpness verdicts"""
        out_dir = Path(out_dir or config.out)
        mark = len(self.step_log)
        reg = config.regularity
        with self.step("read_track", path=str(track)):
            flow = read_track(track)
        points = sample_points(flow, config.points, config.seed)
        support = [X for X in points if X not in flow.singular_points]

        with self.step("regularity_field", points=len(support)) as detail:
            field_ = regularity_field(flow, support)
            detail["domination_violations"] = len(field_.domination_violations())

        nonempty = [s for s in flow.slices if not s.is_empty]
        t_mid = nonempty[len(nonempty) // 2].t
        stride = max(1, nonempty[len(nonempty) // 2].size // INVERSE_SCALE_SAMPLES)
        lp_rows = []
        with self.step("lp_norms", p=list(reg["p"])):
            for p in reg["p"]:
                p = float(p)
                lp_rows.append(
                    {
                        "p": p,
                        "t": t_mid,
                        "A_slice": lp_curvature_norm(flow, p, "slice", t=t_mid),
                        "A_spacetime": lp_curvature_norm(flow, p, "spacetime"),
                        "inverse_rM_slice": lp_inverse_regscale(flow, p, "slice", t=t_mid, stride=stride),
                    }
                )

        radii = [float(r) for r in reg["radii"]]
        bad_exponent = None
        if any(field_.bad(r) for r in radii):
            try:
                bad_exponent = bad_set_volume_exponent(flow, support, radii, field_, config.grid).as_dict()
            except InvalidInputError as e:
                logger.warning(f"Bad-set exponent skipped: {e}")

        epsilon = None
        r_eps = radii[len(radii) // 2]
        with self.step("calibrate_epsilon", r=r_eps) as detail:
            epsilon, table = calibrate_epsilon(flow, support[:CALIBRATION_POINTS], r_eps, int(reg["k"]))
            detail["epsilon"] = epsilon

        verdicts = []
        kind = config.scenario_type
        if kind in ("cylinder", "shrinking-sphere"):
            k = 2 if kind == "cylinder" else 1
            for p in reg["p"]:
                if abs(float(p) - critical_exponent(flow.n, k)) < 1e-12:
                    continue
                with self.step("sharpness", k=k, p=float(p)):
                    verdicts.append(sharpness_study(flow.n, k, float(p)).as_dict())

        write_csv(field_.to_rows(), out_dir / "regularity.csv", config.hash)
        write_csv(lp_rows, out_dir / "lp-norms.csv", config.hash)
        summary = {
            "points": len(support),
            "domination_violations": field_.domination_violations(),
            "bad_set_counts": {f"{r:g}": len(field_.bad(r)) for r in radii},
            "bad_set_exponent": bad_exponent,
            "epsilon": {"r": r_eps, "k": int(reg["k"]), "calibrated": epsilon, "table": table},
            "sharpness": verdicts,
            "steps": self.steps_since(mark),
        }
        write_json(summary, out_dir / "regularity-summary.json", config.hash)
        return summary

    def summarize(self, paths: Sequence[Path], out_dir: Path, expected: Optional[str] = None) -> Path:
        with self.step("summarize", files=len(paths)):
            merged = aggregate_summaries(paths, expected)
        target = Path(out_dir) / "run-summary.json"
        write_json(merged["artifacts"], target, merged["config_hash"])
        return target


def _covering_rows(counts: Sequence[int], gamma: float) -> List[Dict[str, Any]]:
    return [{"level": k, "radius": gamma ** k, "count": c} for k, c in enumerate(counts)]


# Global pipeline manager instance
pipeline_manager = PipelineManager()
