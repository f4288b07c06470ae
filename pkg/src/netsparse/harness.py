"""Closed-loop experiment runner: plant -> encoder -> in-network aggregation ->
decoder -> bound evaluation, with CSV traces and per-figure plot data.

Scenario config files are flat ``key = value`` text (``#`` starts a comment);
keys are the field names of :class:`ScenarioConfig`.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import types
import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ._linalg import spectral_norm
from .bounds import bounds_from_snapshots, corollary2_coefficients, lemma3_bound
from .comm_graph import (
    FIGURE3_EDGES,
    MessageLog,
    SeededMatrixGen,
    distributed_measure,
    read_edge_list,
    star_edges,
    validate,
    write_messages_csv,
)
from .errors import ConfigError, InvariantViolation, MissingTrace
from .plant import InputProcess, build_consensus_model, step
from .protocol import LinkParams, Mode, frame, unframe
from .receiver import ReceiverState
from .transmitter import TransmitterState

log = logging.getLogger(__name__)

DOMINANCE_RTOL = 1e-9


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    subsystems: int = 30
    alpha: float = 0.05
    uncertainty_fraction: float = 0.0
    active_inputs: tuple[int, ...] = (13, 15)
    atoms: int = 30
    h_backward: int = 10
    h_forward: int = 5
    oversampling: float = 1.3
    steps: int = 200
    seed: int = 0
    graph: str = "star"  # star | figure3 | edge-list file | inline "1-0, 2-1, ..."
    omp_tol: float | None = None
    ridge: float = 1e-6
    convergence_tol: float = 1e-6
    max_outer_iters: int = 50
    atom_reuse: bool = True
    omp_signed_correlation: bool = False
    recovery: str = "lstsq"
    refresh_period: int = 0

    def __post_init__(self):
        if self.subsystems < 1:
            raise ConfigError("subsystems must be >= 1")
        bad = [i for i in self.active_inputs if not 1 <= i <= self.subsystems]
        if bad:
            raise ConfigError(f"active inputs {bad} outside 1..{self.subsystems}")
        if self.h_backward < 1:
            raise ConfigError("h_backward must be >= 1 so the receiver has a warm-up history")
        if self.h_forward < 0:
            raise ConfigError("h_forward must be >= 0")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.oversampling <= 0:
            raise ConfigError("oversampling must be positive")

    def link_params(self) -> LinkParams:
        return LinkParams(
            atoms=self.atoms,
            h_backward=self.h_backward,
            h_forward=self.h_forward,
            oversampling=self.oversampling,
            omp_tol=self.omp_tol,
            ridge=self.ridge,
            convergence_tol=self.convergence_tol,
            max_outer_iters=self.max_outer_iters,
            seed=self.seed,
            atom_reuse=self.atom_reuse,
            omp_signed_correlation=self.omp_signed_correlation,
            recovery=self.recovery,
            refresh_period=self.refresh_period,
        )

    def edges(self) -> list[tuple[int, int]]:
        g = self.graph.strip()
        if g == "star":
            return list(star_edges(self.subsystems))
        if g == "figure3":
            return list(FIGURE3_EDGES)
        if Path(g).is_file():
            return read_edge_list(g)
        try:
            return [tuple(int(v) for v in e.split("-")) for e in g.replace(" ", "").split(",") if e]
        except ValueError:
            raise ConfigError(f"cannot interpret graph {self.graph!r}") from None

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


PRESETS = {
    "scenario1": ScenarioConfig(name="scenario1"),
    "scenario2": ScenarioConfig(
        name="scenario2", active_inputs=(2, 4, 26, 28), uncertainty_fraction=0.025
    ),
}


def _parse_value(raw: str, typ):
    raw = raw.strip()
    origin = typing.get_origin(typ)
    args = typing.get_args(typ)
    if origin in (typing.Union, types.UnionType):
        if raw.lower() in ("none", ""):
            return None
        return _parse_value(raw, next(a for a in args if a is not type(None)))
    if origin is tuple:
        return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
    if typ is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    return typ(raw)


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    hints = typing.get_type_hints(ScenarioConfig)
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in hints:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(raw, hints[key])
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None
    base = base or ScenarioConfig()
    return replace(base, **values)


def dump_config(config: ScenarioConfig) -> str:
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(i) for i in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def resolve_scenario(name_or_path: str) -> ScenarioConfig:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    if Path(name_or_path).is_file():
        return load_config(name_or_path)
    raise ConfigError(f"unknown scenario {name_or_path!r}; presets: {sorted(PRESETS)}")


TRACE_HEADER = (
    "k",
    "mode",
    "s",
    "s_hat",
    "p",
    "x_norm",
    "err_norm",
    "nsr_db",
    "delta_s",
    "delta_D",
    "delta_Dhat",
    "delta_XXhat",
    "pinv_factor_z",
    "pinv_factor_DY",
    "bound_tho0",
    "bound_tho1",
    "lemma3_bound",
    "lemma3_bound_partial",
    "theta_recursive",
    "corollary2_beta",
    "corollary2_gamma",
    "dominance_ok",
    "messages",
    "rounds",
    "scalars_sent",
    "cumulative_scalars",
    "baseline_scalars",
)


@dataclass
class StepTrace:
    k: int
    mode: str
    p: int
    x_norm: float
    err_norm: float
    messages: int
    rounds: int
    scalars_sent: int
    cumulative_scalars: int
    baseline_scalars: int
    s: int | None = None
    s_hat: int | None = None
    bounds: dict = field(default_factory=dict)
    lemma3_bound_partial: float | None = None
    theta_recursive: float | None = None
    dominance_ok: bool | None = None

    @property
    def nsr_db(self) -> float | None:
        if not self.x_norm > 0:
            return None
        if self.err_norm == 0:
            return -math.inf
        return 20.0 * math.log10(self.err_norm / self.x_norm)

    @property
    def compressed(self) -> bool:
        return self.mode == "compressed"

    def row(self) -> list[str]:
        vals = dict(
            k=self.k,
            mode=self.mode,
            s=self.s,
            s_hat=self.s_hat,
            p=self.p,
            x_norm=self.x_norm,
            err_norm=self.err_norm,
            nsr_db=self.nsr_db,
            lemma3_bound_partial=self.lemma3_bound_partial,
            theta_recursive=self.theta_recursive,
            dominance_ok=None if self.dominance_ok is None else int(self.dominance_ok),
            messages=self.messages,
            rounds=self.rounds,
            scalars_sent=self.scalars_sent,
            cumulative_scalars=self.cumulative_scalars,
            baseline_scalars=self.baseline_scalars,
        )
        vals.update(self.bounds)
        return [_fmt(vals.get(col)) for col in TRACE_HEADER]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return f"{v:.17g}"
    return str(v)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trace: list[StepTrace]
    summary: dict
    message_logs: list[tuple[int, MessageLog]] = field(default_factory=list)
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def compressed_steps(self) -> list[StepTrace]:
        return [t for t in self.trace if t.compressed]


def run_scenario(
    config: ScenarioConfig, out_dir: str | Path | None = None, strict_bounds: bool = False
) -> ScenarioResult:
    """Run ``config.steps`` steps of the closed loop.

    Protocol invariants (message count, rounds, frame round trip) raise
    :class:`InvariantViolation`. Steps where the realised error exceeds the
    tho0 bound are flagged in the trace and counted in the summary; with
    ``strict_bounds`` the first one raises instead.
    """
    L = config.subsystems
    model = build_consensus_model(L, config.alpha, config.uncertainty_fraction, config.seed)
    inputs = InputProcess(frozenset(config.active_inputs), config.seed, model.input_sizes)
    graph = validate(config.edges(), L)
    params = config.link_params()
    tx = TransmitterState(params, model.nominal_A)
    rx = ReceiverState(params, model.nominal_A, model.block_sizes)
    tx_gen = SeededMatrixGen(params.seed)
    n = model.n
    norm_a = spectral_norm(model.nominal_A)
    x0_norm = float(np.linalg.norm(model.initial_state))
    window_len = max(params.h_backward, 1)

    x = model.initial_state.copy()
    errors: list[float] = []
    theta_rec: list[float] = []
    trace: list[StepTrace] = []
    logs: list[tuple[int, MessageLog]] = []
    cumulative = 0
    for k in range(config.steps):
        out = tx.encode_step(x, k)
        mlog = None
        if out.mode == Mode.COMPRESSED:
            y, mlog = distributed_measure(graph, tx_gen, k, out.p, model.split(x))
            if len(mlog) != L or mlog.rounds != graph.max_path_len:
                raise InvariantViolation(
                    f"step {k}: {len(mlog)} messages in {mlog.rounds} rounds, "
                    f"expected {L} in {graph.max_path_len}"
                )
            logs.append((k, mlog))
            out = out.with_payload(y)
        wire = frame(out)
        x_hat = rx.decode_step(k, unframe(wire))
        err = float(np.linalg.norm(x - x_hat))
        cumulative += out.p
        row = StepTrace(
            k=k,
            mode="compressed" if out.mode == Mode.COMPRESSED else ("warmup" if k < params.h_backward else "full"),
            p=out.p,
            x_norm=float(np.linalg.norm(x)),
            err_norm=err,
            messages=len(mlog) if mlog else 0,
            rounds=mlog.rounds if mlog else 0,
            scalars_sent=out.p,
            cumulative_scalars=cumulative,
            baseline_scalars=n * (k + 1),
        )
        if out.mode == Mode.COMPRESSED:
            report = bounds_from_snapshots(tx.last, rx.last)
            past = errors[::-1][:window_len]
            past_rec = theta_rec[::-1][:window_len]
            l3 = lemma3_bound(past, norm_a, params.h_backward, params.h_forward, "closed")
            l3p = lemma3_bound(past, norm_a, params.h_backward, params.h_forward, "partial")
            l3_rec = max(
                lemma3_bound(past_rec, norm_a, params.h_backward, params.h_forward, form)
                for form in ("closed", "partial")
            )
            beta, gamma = corollary2_coefficients(
                report.delta_s, report.delta_D, report.delta_Dhat, report.pinv_factor_DY,
                x0_norm, norm_a, params.h_forward,
            )
            report = replace(report, lemma3_bound=l3, corollary2_beta=beta, corollary2_gamma=gamma)
            row.s = tx.last.dictionary.sparsity
            row.s_hat = rx.last.dictionary.sparsity
            row.bounds = report.as_dict()
            row.lemma3_bound_partial = l3p
            row.theta_recursive = report.delta_s + (report.delta_D + report.delta_Dhat + l3_rec) * report.pinv_factor_z
            row.dominance_ok = err <= report.bound_tho0 + DOMINANCE_RTOL * (1.0 + report.bound_tho0)
            if strict_bounds and not row.dominance_ok:
                raise InvariantViolation(
                    f"step {k}: error {err:.6g} exceeds bound {report.bound_tho0:.6g}"
                )
            theta_rec.append(row.theta_recursive)
        else:
            theta_rec.append(err)
        errors.append(err)
        trace.append(row)
        x = step(model, x, inputs.sample(k))

    result = ScenarioResult(config, trace, summarize(trace, n, config), logs)
    if out_dir is not None:
        result.paths = write_outputs(result, out_dir)
    return result


def summarize(trace: list[StepTrace], n: int, config: ScenarioConfig) -> dict:
    comp = [t for t in trace if t.compressed]
    nsr = [t.nsr_db for t in comp if t.nsr_db is not None]
    K = len(trace)
    total = trace[-1].cumulative_scalars if trace else 0
    return {
        "scenario": config.name,
        "seed": config.seed,
        "steps": K,
        "n": n,
        "compressed_steps": len(comp),
        "max_nsr_db": max(nsr) if nsr else None,
        "mean_nsr_db": float(np.mean([v for v in nsr if math.isfinite(v)])) if nsr else None,
        "mean_s": float(np.mean([t.s for t in comp])) if comp else None,
        "mean_s_hat": float(np.mean([t.s_hat for t in comp])) if comp else None,
        "cumulative_scalars": total,
        "baseline_scalars": n * K,
        "compression_ratio": total / (n * K) if K else None,
        "compressed_ratio": float(np.mean([t.p for t in comp]) / n) if comp else None,
        "dominance_violations": sum(1 for t in comp if not t.dominance_ok),
        "max_error_to_bound": max((t.err_norm / t.bounds["bound_tho0"] for t in comp if t.bounds["bound_tho0"] > 0), default=None),
    }


def write_trace(trace: list[StepTrace], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t in trace:
            w.writerow(t.row())


def write_outputs(result: ScenarioResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trace": out / "trace.csv",
        "summary": out / "summary.json",
        "messages": out / "messages.csv",
        "config": out / "config.txt",
    }
    write_trace(result.trace, paths["trace"])
    paths["summary"].write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    write_messages_csv(paths["messages"], result.message_logs)
    paths["config"].write_text(dump_config(result.config))
    return paths


PLOT_FILES = {
    "sparsity": ("sparsity.csv", ("k", "phase", "s", "s_hat")),
    "error_bound": ("error_bound.csv", ("k", "err_norm", "bound_tho0", "bound_tho1")),
    "scaled_error": ("scaled_error.csv", ("k", "nsr_db")),
    "bandwidth": ("bandwidth.csv", ("k", "p", "cumulative_scalars", "baseline_scalars")),
}


def emit_plot_data(trace_path: str | Path, out_dir: str | Path) -> dict[str, Path]:
    """Split a trace into one CSV per figure: sparsity, error vs bound,
    scaled error in dB and bandwidth. Non-compressed rows appear only in the
    sparsity (marked by phase) and bandwidth files.
    """
    trace_path = Path(trace_path)
    if not trace_path.is_file():
        raise MissingTrace(f"no trace at {trace_path}")
    with trace_path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for key, (fname, cols) in PLOT_FILES.items():
        path = out / fname
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                compressed = r["mode"] == "compressed"
                if key == "sparsity":
                    w.writerow((r["k"], r["mode"], r["s"], r["s_hat"]))
                elif key == "bandwidth":
                    w.writerow([r[c] for c in cols])
                elif compressed:
                    w.writerow([r[c] for c in cols])
        written[key] = path
    return written


def config_dict(config: ScenarioConfig) -> dict:
    return asdict(config)
