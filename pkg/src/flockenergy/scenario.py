"""Scenario files, runs, traces and plot-ready data.

A scenario file is flat ``key = value`` text; ``#`` starts a comment and list
values are comma separated. Traces are CSV with a header row, one row per
step; summaries are ``key = value`` reports. Floats are written with
``repr`` so reruns with the same seed are byte-identical.

Random streams: replica ``k`` of master seed ``S`` draws from
``Philox(SeedSequence(S, spawn_key=(k,)))``.
"""

from __future__ import annotations

import csv
import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, flocking, lower_bound, swarm
from .graphs import WeightedGraph, random_component_graph

MODES = ("flock", "ras-replay", "lower-bound", "swarm")
OUT_ENV = "FLOCKENERGY_OUT"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ScenarioConfig:
    mode: str = "flock"
    seed: int = 0
    replicas: int = 1
    out: str = ""
    steps: int = 1000
    s_values: list[float] = field(default_factory=lambda: [0.5, 1.0])
    alphas: list[float] = field(default_factory=lambda: [0.1, 0.03, 0.01])
    n: int = 10
    m: int = 1
    rho: float = 0.1
    a: typing.Optional[float] = None
    r: float = 0.5
    eps_o: float = 0.05
    theta: typing.Optional[float] = None
    p: float = 1.0
    graph: str = "path"
    rows: int = 30
    cols: int = 30
    pinned: list[int] = field(default_factory=lambda: [0])
    rel_cutoff: float = 1e-10
    rounds: int = 2
    sweep_param: str = ""
    sweep_values: list[float] = field(default_factory=list)

    def validate(self) -> "ScenarioConfig":
        def need(ok: bool, name: str, msg: str) -> None:
            if not ok:
                raise ConfigError(name, msg)

        need(self.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
        need(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        need(self.replicas >= 1, "replicas", "must be >= 1")
        need(self.steps >= 0, "steps", "must be >= 0")
        need(all(0 < s <= 1 for s in self.s_values) and self.s_values, "s_values",
             "each value must lie in (0, 1]")
        need(all(a > 0 for a in self.alphas), "alphas", "must be positive")
        need(self.n >= 1, "n", "must be >= 1")
        need(1 <= self.m <= self.n, "m", "must lie in [1, n]")
        if self.mode == "flock":
            need(0 < self.r <= 1, "r", "must lie in (0, 1]")
            need(self.eps_o > 0, "eps_o", "must be positive")
            need(self.a is None or 0 < self.a <= 1 / max(self.n, 2), "a",
                 "must lie in (0, 1/n] so every degree is admissible")
        if self.mode == "ras-replay":
            need(0 < self.rho <= 0.5, "rho", "must lie in (0, 1/2]")
            need(self.n >= 2, "n", "must be >= 2")
        if self.mode == "lower-bound":
            need(0 < self.rho < 0.25, "rho", "must lie in (0, 1/4)")
            need(self.n >= 2, "n", "must be >= 2")
            need(self.m == 1 or self.n % self.m == 0, "m", "n/m must be an integer")
            need(self.rounds >= 1, "rounds", "must be >= 1")
        if self.mode == "swarm":
            need(0 < self.p <= 1, "p", "must lie in (0, 1]")
            need(self.graph in ("path", "grid"), "graph", "must be path or grid")
            need(self.graph != "path" or bool(self.pinned), "pinned", "must be nonempty")
            size = self.n if self.graph == "path" else self.rows * self.cols
            need(all(0 <= v < size for v in self.pinned), "pinned", "vertex out of range")
        if self.sweep_param:
            need(self.sweep_param in _field_types(), "sweep_param", "unknown parameter")
            need(bool(self.sweep_values), "sweep_values", "must be nonempty")
        return self


def _field_types() -> dict[str, object]:
    return typing.get_type_hints(ScenarioConfig)


def _parse_value(name: str, kind, text: str):
    text = text.strip()
    origin = typing.get_origin(kind)
    try:
        if origin is list:
            (inner,) = typing.get_args(kind)
            return [inner(v) for v in text.split(",") if v.strip()] if text else []
        if origin is typing.Union:
            if text.lower() in ("", "none"):
                return None
            inner = next(k for k in typing.get_args(kind) if k is not type(None))
            return inner(text)
        if kind is int:
            return int(text, 0)
        return kind(text)
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse {text!r}: {exc}") from None


def parse_config(text: str) -> ScenarioConfig:
    types = _field_types()
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(key, "unknown key")
        values[key] = _parse_value(key, types[key], val)
    return ScenarioConfig(**values).validate()


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, list):
        return ", ".join(_format_value(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def serialize_config(config: ScenarioConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(config, f.name))}\n"
                   for f in dataclasses.fields(config))


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    return rows[0], data


def write_summary(path: Path, items: dict[str, object]) -> None:
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in items.items()))


def read_summary(path: Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _energy_columns(s_values) -> list[str]:
    return [f"energy_s{_fmt(float(s))}" for s in s_values]


def _step_energies(lengths: np.ndarray, s_values, mode: str = "sum") -> list[float]:
    if lengths.size == 0:
        return [0.0 for _ in s_values]
    if mode == "max":
        return [float(lengths.max() ** s) for s in s_values]
    return [float(np.sum(lengths ** s)) for s in s_values]


def _trace_flock(cfg: ScenarioConfig, rng: np.random.Generator):
    fc = flocking.FlockConfig(cfg.n, cfg.r, cfg.eps_o, cfg.a, cfg.steps, cfg.theta)
    x0, v0 = flocking.sample_initial(fc, rng)
    run = flocking.simulate(fc, x0, v0)
    switch_times = set(run.switches.times)
    header = ["t", "switch", "n_flocks", "vel_diameter", "max_block", "dirichlet", "qnorm2"]
    header += _energy_columns(cfg.s_values)
    rows = []
    q = fc.q
    for t in range(run.T + 1):
        g = run.graphs[t]
        v = run.v[t]
        lengths = np.concatenate([core.block_lengths(v[:, c], g.edges) for c in range(3)])
        diam = max(float(flocking.velocity_diameter(v, f)) for f in g.components)
        dirich = sum(core.dirichlet_form(v[:, c], g) for c in range(3))
        rows.append([t, int(t in switch_times), g.n_components, diam,
                     float(lengths.max()) if lengths.size else 0.0, dirich,
                     core.q_norm2(v, q)] + _step_energies(lengths, cfg.s_values))
    stab = flocking.detect_stabilization(run)
    m_max = max(g.n_components for g in run.graphs)
    summary = {"t_stable": stab.t_stable, "stabilized": int(stab.stabilized),
               "n_switches": len(run.switches), "max_flocks": m_max}
    for s in cfg.s_values:
        summary[f"bound_theorem2_s{_fmt(float(s))}"] = core.theorem2_bound(cfg.n, m_max, fc.rho, s)
    return header, rows, summary, None


def _trace_ras(cfg: ScenarioConfig, rng: np.random.Generator):
    n = cfg.n
    a = cfg.rho if cfg.a is None else cfg.a
    graphs = [random_component_graph(n, cfg.m, rng, extra=2.0 / n) for _ in range(cfg.steps)]
    deg_max = max((int(g.degrees.max()) if g.n_edges else 0) for g in graphs) if graphs else 0
    a = min(a, 1.0 / (deg_max + 1))
    x0 = rng.standard_normal(n)
    q = np.full(n, 1.0 / a)
    var = core.q_norm2(x0 - core.q_mean(x0, q), q)
    x0 = x0 / np.sqrt(var) if var > 0 else x0
    run = core.run_agreement(graphs, a, x0)
    header = ["t", "n_components", "max_block", "block_sum", "dirichlet", "qnorm2", "diameter"]
    header += _energy_columns(cfg.s_values)
    rows = []
    for t, g in enumerate(graphs):
        x = run.states[t]
        lengths = run.ledger.per_step[t]
        rows.append([t, g.n_components, float(lengths.max()) if lengths.size else 0.0,
                     float(lengths.sum()), core.dirichlet_form(x, g), core.q_norm2(x, q),
                     float(np.ptp(x))] + _step_energies(lengths, cfg.s_values))
    cover = core.check_cover_length(run.history()) if graphs else None
    summary = {"rho": float(a), "variance": core.q_norm2(x0 - core.q_mean(x0, q), q)}
    if cover is not None:
        summary.update({"t_c": cover.t_c, "cover_length": cover.status,
                        "cover_lhs": cover.lhs, "cover_rhs": cover.rhs})
    for s in cfg.s_values:
        summary[f"bound_theorem2_s{_fmt(float(s))}"] = core.theorem2_bound(n, cfg.m, float(a), s)
    return header, rows, summary, None


def _trace_lower_bound(cfg: ScenarioConfig, rng: np.random.Generator):
    header = ["t", "diameter", "block_sum"] + _energy_columns(cfg.s_values)
    summary: dict[str, object] = {}
    if cfg.m == 1:
        model = lower_bound.PathSpectralModel(cfg.n, cfg.rho)
        d = lower_bound.simulate_path(model)
        rows = [[t + 1, float(v), float(v)] + [float(v) ** s for s in cfg.s_values]
                for t, v in enumerate(d)]
        for s in cfg.s_values:
            key = _fmt(float(s))
            summary[f"energy_s{key}"] = lower_bound.measured_path_energy(model, s)
            summary[f"bound_path_s{key}"] = lower_bound.path_energy_bound(model, s)
            summary[f"bound_theorem3_s{key}"] = lower_bound.theorem3_bound(cfg.n, 1, cfg.rho, s)
        return header, rows, summary, None
    sched = lower_bound.build_recursive_schedule(cfg.n, cfg.m, cfg.rho, cfg.s_values[0],
                                                 cfg.rel_cutoff)
    rep = lower_bound.replay_schedule(sched, rounds=cfg.rounds)
    rows = [[t, float(l.max()) if l.size else 0.0, float(l.sum())]
            + _step_energies(l, cfg.s_values) for t, l in enumerate(rep.ledger.per_step)]
    summary.update({"phase1_energy": rep.phase1_energy, "max_components": rep.max_components,
                    "replay_rounds": cfg.rounds})
    for s in cfg.s_values:
        key = _fmt(float(s))
        e = lower_bound.schedule_energy(sched, s).total
        summary[f"energy_s{key}"] = e
        summary[f"bound_theorem3_s{key}"] = lower_bound.theorem3_bound(cfg.n, cfg.m, cfg.rho, s)
        summary[f"fitted_c_theorem3_s{key}"] = lower_bound.fit_theorem3_constant(
            e, cfg.n, cfg.m, cfg.rho, s)
    return header, rows, summary, None


def _swarm_config(cfg: ScenarioConfig, replica: int):
    if cfg.graph == "grid":
        sc, x0 = swarm.grid_scenario(cfg.rows, cfg.cols, cfg.p, cfg.seed, cfg.steps, cfg.a)
        sc.replica = replica
        return sc, x0
    sc = swarm.SwarmConfig(WeightedGraph.path(cfg.n), cfg.pinned, p=cfg.p, a=cfg.a,
                           seed=cfg.seed, replica=replica, max_steps=cfg.steps)
    return sc, None


def _trace_swarm(cfg: ScenarioConfig, replica: int):
    sc, x0 = _swarm_config(cfg, replica)
    run = swarm.run_swarm(sc, x0=x0, keep_trajectory=False)
    header = list(swarm.SwarmRun.COLUMNS) + ["max_edge"] + _energy_columns(cfg.s_values)
    rows = []
    for t, row in enumerate(run.rows):
        lengths = run.ledger.per_step[t] if t < len(run.ledger) else np.zeros(0)
        rows.append([int(row[0]), row[1], row[2], row[3], int(row[4]), run.max_edge[t]]
                    + _step_energies(lengths, cfg.s_values, "max"))
    summary: dict[str, object] = {"nu": sc.nu, "d": sc.d, "rho": sc.rho,
                                  "contraction_c": sc.contraction_rate}
    for alpha in cfg.alphas:
        st = run.stats(alpha)
        key = _fmt(float(alpha))
        summary[f"N_alpha{key}"] = st.N_alpha
        summary[f"K_alpha{key}"] = st.K_alpha
        summary[f"T_alpha{key}"] = st.T_alpha
        if alpha < 1:
            summary[f"bound_theorem4_eps{key}"] = swarm.theorem4_bound(
                sc.graph.n, sc.d, sc.p, sc.rho, alpha)
    pos = run.base_positions()
    is_pinned = np.zeros(sc.graph.n, dtype=int)
    is_pinned[sc.pinned] = 1
    positions = [[i, is_pinned[i], *pos[i]] for i in range(sc.graph.n)]
    return header, rows, summary, positions


def run_scenario(config: ScenarioConfig, out: str | os.PathLike | None = None) -> dict[str, object]:
    """Run every replica, write ``trace_r<k>.csv`` files and ``summary.txt``.

    Returns the summary mapping. Measured s-energies are the column sums of
    the per-step energy columns, averaged over replicas.
    """
    config.validate()
    out_dir = Path(out or config.out or os.environ.get(OUT_ENV, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scenario.cfg").write_text(serialize_config(config))
    energies = {s: [] for s in config.s_values}
    summary: dict[str, object] = {"mode": config.mode, "seed": config.seed,
                                  "replicas": config.replicas}
    extra: dict[str, object] = {}
    for k in range(config.replicas):
        rng = swarm.replica_rng(config.seed, k)
        if config.mode == "flock":
            header, rows, extra, pos = _trace_flock(config, rng)
        elif config.mode == "ras-replay":
            header, rows, extra, pos = _trace_ras(config, rng)
        elif config.mode == "lower-bound":
            header, rows, extra, pos = _trace_lower_bound(config, rng)
        else:
            header, rows, extra, pos = _trace_swarm(config, k)
        write_csv(out_dir / f"trace_r{k}.csv", header, rows)
        if pos is not None:
            write_csv(out_dir / f"final_positions_r{k}.csv",
                      ["robot", "pinned", "X", "Y", "Z"], pos)
        for j, s in enumerate(config.s_values):
            col = header.index(_energy_columns([s])[0])
            energies[s].append(sum(r[col] for r in rows))
    for s in config.s_values:
        key = f"energy_s{_fmt(float(s))}"
        if config.mode == "lower-bound" and key in extra:
            summary[key] = extra.pop(key)
            summary[f"trace_{key}"] = float(np.mean(energies[s]))
        else:
            summary[key] = float(np.mean(energies[s]))
    summary.update(extra)
    write_summary(out_dir / "summary.txt", summary)
    return summary


def run_sweep(config: ScenarioConfig, out: str | os.PathLike | None = None) -> Path:
    """Run the scenario for each ``sweep_values`` entry and tabulate energies."""
    config.validate()
    if not config.sweep_param:
        raise ConfigError("sweep_param", "required for a sweep")
    out_dir = Path(out or config.out or os.environ.get(OUT_ENV, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = _field_types()[config.sweep_param]
    table = []
    for value in config.sweep_values:
        v = int(value) if kind is int else float(value)
        sub = dataclasses.replace(config, sweep_param="", sweep_values=[],
                                  **{config.sweep_param: v})
        summ = run_scenario(sub, out_dir / f"{config.sweep_param}_{v}")
        table.append([v] + [summ[f"energy_s{_fmt(float(s))}"] for s in config.s_values])
    write_csv(out_dir / "sweep.csv", [config.sweep_param] + _energy_columns(config.s_values), table)
    return out_dir / "sweep.csv"


def emit_plot_data(run_dir: str | os.PathLike, out: str | os.PathLike | None = None) -> list[Path]:
    """Turn a run directory into per-figure CSV files.

    Writes ``diameter_vs_t.csv`` (with a ``log10_diameter`` column),
    ``energy_vs_param.csv`` when a sweep table exists, and
    ``positions_pinned.csv`` / ``positions_free.csv`` for swarm runs.
    """
    run_dir = Path(run_dir)
    traces = sorted(run_dir.glob("trace_r*.csv"))
    if not traces and not (run_dir / "sweep.csv").exists():
        raise FileNotFoundError(f"no traces in {run_dir}")
    out_dir = Path(out) if out else run_dir / "plot"
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if traces:
        header, data = read_csv(traces[0])
        col = "vel_diameter" if "vel_diameter" in header else "diameter"
        rows = []
        if col in header and len(data):
            j = header.index(col)
            for t, d in zip(data[:, 0], data[:, j]):
                rows.append([int(t), float(d), float(np.log10(max(d, 1e-300)))])
        path = out_dir / "diameter_vs_t.csv"
        write_csv(path, ["t", "diameter", "log10_diameter"], rows)
        written.append(path)
    if (run_dir / "sweep.csv").exists():
        header, data = read_csv(run_dir / "sweep.csv")
        path = out_dir / "energy_vs_param.csv"
        write_csv(path, header, data.tolist())
        written.append(path)
    positions = sorted(run_dir.glob("final_positions_r*.csv"))
    if positions:
        header, data = read_csv(positions[0])
        pinned = data[data[:, 1] == 1] if len(data) else data
        free = data[data[:, 1] == 0] if len(data) else data
        for name, part in (("positions_pinned.csv", pinned), ("positions_free.csv", free)):
            path = out_dir / name
            write_csv(path, ["robot", "X", "Y", "Z"],
                      [[int(r[0]), r[2], r[3], r[4]] for r in part])
            written.append(path)
    return written
