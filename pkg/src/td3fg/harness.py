"""Experiment configuration, presets, the training loop and result files.

Config files are plain ``key = value`` lines (``#`` starts a comment).
Tuple-valued keys take comma-separated values; environment physics
overrides use an ``env.`` prefix, e.g. ``env.drag = 0.1``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .agent import (
    ReplayBuffer,
    TrainCfg,
    logged_weights,
    make_agent_nets,
    preload_demos,
    select_action,
    train_step,
    variant_spec,
)
from .demos import BatchConfig, DemoSet, NetConfig, generate_demo_set, load_demos, parse_mix, pretrain_generator
from .env import EnvSpec, Transition, make_env, make_spec
from .errors import InvalidConfigError, NumericError, UnknownPresetError
from .explore import OUState
from .nn import MlpNet, forward
from .schedules import ScheduleSet

log = logging.getLogger(__name__)

CSV_HEADER = [
    "step", "mean_return", "fr", "hr", "cc", "tc",
    "alpha", "beta", "gamma_w", "delta_w", "critic_loss", "actor_loss",
]


@dataclass
class ExperimentConfig:
    name: str = "td3fg"
    env: str = "corridor-walker"
    env_overrides: dict = field(default_factory=dict)
    variant: str = "td3fg"
    total_steps: int = 50_000
    warmup_steps: int = 1_000
    eval_every: int = 1_000
    eval_episodes: int = 5
    # schedules
    T1: int = 10_000
    T2: int = 5_000
    T3: int = 5_000
    theta_offset: float = 0.2
    bc_scale: float = 1.0
    # TD3
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    smoothing_sigma: float = 0.2
    smoothing_clip: float = 0.5
    batch_size: int = 64
    hidden: tuple = (32, 64, 32)
    actor_hidden_activation: str = "tanh"
    lr_actor: float = 1e-4
    lr_critic: float = 1e-4
    l2_coef: float = 1e-4
    buffer_capacity: int = 100_000
    expl_noise: float = 0.1
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_mu: float = 0.0
    # demonstrations
    demo_file: str = ""
    demo_mix: str = "expert:60,suboptimal:30,failing:10"
    demo_seed: int = 0
    preload_demos: bool = False
    preload_best_k: int = 10
    preload_n: int = 1_000
    # generator pretraining; 20k at desk scale, 50k in the full-size preset
    pretrain_iters: int = 20_000
    pretrain_lr: float = 1e-4
    pretrain_n_traj: int = 10
    pretrain_n_trans: int = 64
    seeds: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "runs"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self) -> None:
        if self.total_steps <= 0:
            raise InvalidConfigError("total_steps must be positive")
        if self.warmup_steps < 0:
            raise InvalidConfigError("warmup_steps must be non-negative")
        if self.eval_every <= 0 or self.eval_episodes < 1:
            raise InvalidConfigError("eval_every and eval_episodes must be positive")
        if not self.seeds:
            raise InvalidConfigError("seed list is empty")
        variant_spec(self.variant)
        self.schedules()
        self.train_cfg()
        self.env_spec()
        parse_mix(self.demo_mix)

    def schedules(self) -> ScheduleSet:
        return ScheduleSet(self.T1, self.T2, self.T3, self.theta_offset, self.bc_scale)

    def train_cfg(self) -> TrainCfg:
        return TrainCfg(
            self.gamma, self.tau, self.policy_delay, self.smoothing_sigma, self.smoothing_clip, self.batch_size, self.variant
        )

    def env_spec(self) -> EnvSpec:
        return make_spec(self.env, **self.env_overrides)

    def net_cfg(self) -> NetConfig:
        return NetConfig(self.hidden, self.actor_hidden_activation, "tanh", self.pretrain_lr, self.l2_coef)

    def with_total_steps(self, total_steps) -> ExperimentConfig:
        """Rescale the step budget, keeping horizons proportional to it."""
        ratio = total_steps / self.total_steps
        scale = lambda n: max(int(round(n * ratio)), 1)  # noqa: E731
        return replace(self, total_steps=int(total_steps), T1=scale(self.T1), T2=scale(self.T2), T3=scale(self.T3))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "env_overrides":
                lines.extend(f"env.{k} = {v!r}" for k, v in sorted(value.items()))
                continue
            lines.append(f"{f.name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, base: ExperimentConfig | None = None) -> ExperimentConfig:
        base = base or cls()
        types = {f.name: type(getattr(base, f.name)) for f in fields(base)}
        updates: dict = {}
        env_overrides = dict(base.env_overrides)
        spec_fields = {f.name: f.type for f in fields(EnvSpec)}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep:
                raise InvalidConfigError(f"line {lineno}: expected 'key = value'")
            if key.startswith("env."):
                name = key[4:]
                if name not in spec_fields:
                    raise InvalidConfigError(f"line {lineno}: unknown environment field {name!r}")
                env_overrides[name] = _parse_scalar(value, spec_fields[name])
                continue
            if key not in types:
                raise InvalidConfigError(f"line {lineno}: unknown config key {key!r}")
            updates[key] = _parse_value(value, types[key], lineno)
        return replace(base, env_overrides=env_overrides, **updates)

    @classmethod
    def load(cls, path, base: ExperimentConfig | None = None) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text(), base)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(value: str, typ):
    typ = {"int": int, "float": float, "str": str, "bool": bool}.get(typ, typ) if isinstance(typ, str) else typ
    if typ is bool:
        lowered = value.lower()
        if lowered not in ("true", "false", "1", "0", "yes", "no"):
            raise InvalidConfigError(f"cannot parse boolean {value!r}")
        return lowered in ("true", "1", "yes")
    if typ is int:
        return int(float(value)) if "e" in value.lower() else int(value)
    if typ is float:
        return float(value)
    return value.strip("'\"")


def _parse_value(value: str, typ, lineno):
    try:
        if typ is tuple:
            return tuple(int(v) for v in value.split(",") if v.strip())
        return _parse_scalar(value, typ)
    except ValueError as exc:
        raise InvalidConfigError(f"line {lineno}: {exc}") from None


_PRESETS = {
    "td3": dict(variant="td3"),
    "td3fg": dict(variant="td3fg"),
    "bcft": dict(variant="bcft"),
    "ddpgfd_like": dict(variant="preload_buffer", preload_demos=True),
    "td3fg_qfilter": dict(variant="td3fg_qfilter"),
    "td3fg_noise": dict(variant="td3fg_noise"),
    "td3fg_noise_only": dict(variant="td3fg_noise_only"),
    "td3fg_buffer": dict(variant="td3fg", preload_demos=True),
    # full-size recipe; not exercised by the test suite
    "paper": dict(
        variant="td3fg",
        total_steps=750_000,
        T1=600_000,
        T2=300_000,
        T3=300_000,
        hidden=(256, 512, 256),
        buffer_capacity=1_000_000,
        preload_n=10_000,
        pretrain_iters=50_000,
        pretrain_n_trans=640,
        warmup_steps=10_000,
        eval_every=5_000,
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name) -> ExperimentConfig:
    """Desk-scale configuration for a baseline or ablation."""
    if name not in _PRESETS:
        raise UnknownPresetError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    return ExperimentConfig(name=name, **_PRESETS[name])


@dataclass
class EvalRecord:
    step: int
    mean_return: float
    fr: float
    hr: float
    cc: float
    tc: float
    alpha: float
    beta: float
    gamma_w: float
    delta_w: float
    critic_loss: float
    actor_loss: float

    def as_row(self) -> list:
        return [getattr(self, name) for name in CSV_HEADER]

    def same_as(self, other: EvalRecord) -> bool:
        return all(
            a == b or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))
            for a, b in zip(self.as_row(), other.as_row())
        )


@dataclass
class RunLog:
    config: dict
    seed: int
    records: list[EvalRecord] = field(default_factory=list)
    n_updates: int = 0
    aborted_at: int | None = None
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)

    @property
    def final_return(self) -> float:
        return self.records[-1].mean_return if self.records else float("nan")

    @property
    def best_return(self) -> float:
        return max((r.mean_return for r in self.records), default=float("nan"))

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "final_return": self.final_return,
            "best_return": self.best_return,
            "n_updates": self.n_updates,
            "aborted_at": self.aborted_at,
        }

    def to_json(self, include_timing=True) -> str:
        payload = {
            "config": self.config,
            "seed": self.seed,
            "summary": self.summary(),
            "records": [dataclasses.asdict(r) for r in self.records],
            "error": self.error,
        }
        if include_timing:
            payload["wall_time"] = self.wall_time
        return json.dumps(payload, indent=1, sort_keys=True)


class EvalResult(NamedTuple):
    mean_return: float
    fr: float
    hr: float
    cc: float
    tc: float


def _episode_seed(seed, i) -> int:
    return int(np.random.SeedSequence([int(seed), int(i)]).generate_state(1)[0])


def evaluate(actor: MlpNet, spec: EnvSpec, episodes, seed) -> EvalResult:
    """Mean return and reward components of noise-free rollouts."""
    if episodes < 1:
        raise InvalidConfigError("episodes must be at least 1")
    totals = np.zeros(5)
    for i in range(episodes):
        env = make_env(spec)
        obs = env.reset(_episode_seed(seed, i))
        done = False
        while not done:
            obs, reward, done, info = env.step(forward(actor, obs))
            totals[0] += reward
            totals[1:] += info["components"]
    return EvalResult(*(float(v) for v in totals / episodes))


def load_or_generate_demos(config: ExperimentConfig) -> DemoSet:
    if config.demo_file:
        return load_demos(config.demo_file)
    return generate_demo_set(config.env_spec(), config.demo_mix, config.demo_seed)


def _int_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def run_experiment(config: ExperimentConfig, seed=None, demos: DemoSet | None = None, return_agent=False):
    """Train one variant for ``config.total_steps`` environment steps.

    Evaluation happens every ``eval_every`` steps and after the last step.
    With ``return_agent=True`` the trained :class:`AgentNets` is returned
    alongside the :class:`RunLog`.
    """
    seed = config.seeds[0] if seed is None else int(seed)
    started = time.perf_counter()
    spec = config.env_spec()
    vspec = variant_spec(config.variant)
    schedules = config.schedules()
    cfg = config.train_cfg()
    s_init, s_gen, s_env, s_explore, s_train, s_eval, s_preload = np.random.SeedSequence(seed).spawn(7)

    use_preload = vspec.preload or config.preload_demos
    if demos is None and (vspec.needs_generator or use_preload):
        demos = load_or_generate_demos(config)
    generator = None
    if vspec.needs_generator:
        generator, _ = pretrain_generator(
            demos,
            config.pretrain_iters,
            BatchConfig(config.pretrain_n_traj, config.pretrain_n_trans),
            config.net_cfg(),
            seed=_int_seed(s_gen),
        )
    nets = make_agent_nets(
        spec.obs_dim, spec.act_dim, config.hidden, s_init,
        config.lr_actor, config.lr_critic, config.l2_coef, config.actor_hidden_activation, generator,
    )
    if vspec.bc_init:
        nets.actor.load_params_from(generator)
        nets.target_actor.load_params_from(generator)
    buffer = ReplayBuffer(config.buffer_capacity, spec.obs_dim, spec.act_dim)
    if use_preload:
        preload_demos(buffer, demos, config.preload_best_k, config.preload_n, np.random.default_rng(s_preload))

    env_rng = np.random.default_rng(s_env)
    explore_rng = np.random.default_rng(s_explore)
    train_rng = np.random.default_rng(s_train)
    eval_seed = _int_seed(s_eval)
    ou = OUState.at_mean(spec.act_dim, config.ou_theta, config.ou_mu, config.ou_sigma)

    runlog = RunLog(config=config.to_dict(), seed=seed)
    env = make_env(spec)
    obs = env.reset(int(env_rng.integers(2**31)))
    critic_losses: list[float] = []
    actor_losses: list[float] = []
    t = 0
    try:
        for t in range(config.total_steps):
            if t < config.warmup_steps:
                action = explore_rng.uniform(-1.0, 1.0, spec.act_dim)
            else:
                action = select_action(nets, obs, t, config.variant, schedules, ou, config.expl_noise, explore_rng)
            obs_next, reward, done, info = env.step(action)
            buffer.push(Transition(obs, info["action"], reward, obs_next, done, info["components"]))
            obs = obs_next
            if done:
                obs = env.reset(int(env_rng.integers(2**31)))
                ou.reset()
            if t >= config.warmup_steps and len(buffer) >= cfg.batch_size:
                metrics = train_step(nets, buffer, t, cfg, schedules, train_rng)
                critic_losses.append(metrics["critic_loss"])
                if metrics["actor_updated"]:
                    actor_losses.append(metrics["actor_loss"])
            step = t + 1
            if step % config.eval_every == 0 or step == config.total_steps:
                result = evaluate(nets.actor, spec, config.eval_episodes, eval_seed)
                w = logged_weights(config.variant, schedules, step)
                runlog.records.append(
                    EvalRecord(
                        step, *result, w["alpha"], w["beta"], w["gamma"], w["delta"],
                        _mean(critic_losses), _mean(actor_losses),
                    )
                )
                critic_losses.clear()
                actor_losses.clear()
    except NumericError as exc:
        runlog.aborted_at = t
        runlog.error = f"numeric error at step {t}: {exc}"
        log.error("run %s seed %d aborted: %s", config.name, seed, runlog.error)
    runlog.n_updates = nets.n_updates
    runlog.wall_time = time.perf_counter() - started
    if return_agent:
        return runlog, nets
    return runlog


def _mean(values) -> float:
    return float(np.mean(values)) if values else float("nan")


# result files


def emit_csv(runlog: RunLog, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in runlog.records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in record.as_row()])
    return path


def read_csv(path) -> list[EvalRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise InvalidConfigError(f"{path}: unexpected CSV header {header}")
        return [EvalRecord(int(row[0]), *(float(v) for v in row[1:])) for row in reader]


SVG_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def emit_svg_curves(runlogs, path, labels=None, title="mean evaluation return") -> Path:
    """Line chart of mean return against environment step, one series per run."""
    runlogs = list(runlogs)
    if not runlogs:
        raise InvalidConfigError("no run logs to plot")
    series = []
    for i, rl in enumerate(runlogs):
        records = rl.records if isinstance(rl, RunLog) else rl
        label = labels[i] if labels else (f"{rl.config.get('name', 'run')} seed {rl.seed}" if isinstance(rl, RunLog) else f"run {i}")
        series.append((label, [(r.step, r.mean_return) for r in records if math.isfinite(r.mean_return)]))
    points = [p for _, pts in series for p in pts]
    width, height, pad = 640, 400, 50
    x_max = max((p[0] for p in points), default=1) or 1
    y_lo = min((p[1] for p in points), default=0.0)
    y_hi = max((p[1] for p in points), default=1.0)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return pad + (width - 2 * pad) * x / x_max

    def sy(y):
        return height - pad - (height - 2 * pad) * (y - y_lo) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">step (0 to {x_max})</text>',
        f'<text x="{pad - 4}" y="{pad}" text-anchor="end" font-size="10">{y_hi:.1f}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-size="10">{y_lo:.1f}</text>',
    ]
    for i, (label, pts) in enumerate(series):
        color = SVG_COLORS[i % len(SVG_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"><title>{label}</title></polyline>')
        out.append(f'<text x="{width - pad + 4}" y="{pad + 14 * i}" font-size="10" fill="{color}">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path


def run_sweep(config: ExperimentConfig, seeds=None, out_dir=None, jobs=1) -> list[RunLog]:
    """Run every seed, writing ``seed<k>.csv``/``seed<k>.json`` plus ``curves.svg``
    and ``summary.json`` under ``out_dir``."""
    seeds = tuple(config.seeds if seeds is None else seeds)
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            logs = list(pool.map(run_experiment, [config] * len(seeds), seeds))
    else:
        logs = [run_experiment(config, s) for s in seeds]
    for rl in logs:
        emit_csv(rl, out / f"seed{rl.seed}.csv")
        (out / f"seed{rl.seed}.json").write_text(rl.to_json())
    emit_svg_curves(logs, out / "curves.svg")
    finals = [rl.final_return for rl in logs]
    summary = {
        "name": config.name,
        "seeds": list(seeds),
        "final_returns": finals,
        "median_final_return": float(np.median(finals)),
        "median_best_return": float(np.median([rl.best_return for rl in logs])),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return logs
