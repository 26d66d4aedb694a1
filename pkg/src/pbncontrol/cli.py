"""Command-line entry point.

    pbncontrol simulate   --spec net.spec --steps 20 --seed 1
    pbncontrol attractors --spec net.spec
    pbncontrol train      --config pbn10 --out runs/pbn10
    pbncontrol eval       --config pbn10 --out runs/pbn10
    pbncontrol baseline   --config pbn10 --episodes 1000
    pbncontrol infer      --expression data.csv --no-self > inferred.spec

``--config`` takes a run-config JSON path, the bare name of a shipped
config (pbn10, pbn20, melanoma), or a manifest.json written by ``train``. The output directory defaults to
$PBNCONTROL_OUT, then ./pbncontrol-out.

Exit codes: 0 success, 2 bad input or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mlp
from .agent import TrainConfig, config_dict, evaluate, metrics_to_csv, random_baseline, train
from .attractors import (
    DEFAULT_MAX_STEPS,
    DEFAULT_ROLLOUTS,
    DEFAULT_STG_LIMIT,
    Attractor,
    closed_set_from,
    estimate_attractor_frequencies,
    find_attractors,
    find_attractors_sampled,
    least_frequent,
)
from .data import fixture_path
from .env import ControlConfig
from .inference import InferenceError, binarize, build_pbn, read_expression_csv, select_predictors
from .pbn import PBNSpec, SpecError, dumps_spec, parse_spec, state_to_str, step_natural, str_to_state

log = logging.getLogger("pbncontrol")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
SHIPPED_CONFIGS = ("pbn10", "pbn20", "melanoma")


class ConfigError(Exception):
    pass


def git_blob_sha1(data: bytes) -> str:
    """Content hash as computed by ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunConfig:
    """Everything a train/eval/baseline run needs.

    Exactly one of ``spec`` (PBN spec path) or ``expression`` (CSV to infer a
    network from) is set. ``target`` is "auto-least-frequent" or a list of
    state bitstrings forming one attractor.
    """
    spec: Path | None = None
    expression: Path | None = None
    infer: dict = field(default_factory=dict)
    target: str | list[str] = "auto-least-frequent"
    rollouts: int = DEFAULT_ROLLOUTS
    max_steps: int = DEFAULT_MAX_STEPS
    eval_episodes: int = 10_000
    baseline_cap: int = 100_000
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, d: dict, base: Path) -> "RunConfig":
        known = {"spec", "expression", "infer", "target", "rollouts", "max_steps", "eval_episodes",
                 "baseline_cap", "train"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if ("spec" in d) == ("expression" in d):
            raise ConfigError("config needs exactly one of 'spec' or 'expression'")
        try:
            tcfg = TrainConfig.from_dict(d.get("train", {}))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"train: {e}") from None
        run = cls(
            spec=_resolve(base, d["spec"]) if "spec" in d else None,
            expression=_resolve(base, d["expression"]) if "expression" in d else None,
            infer=dict(d.get("infer", {})),
            target=d.get("target", "auto-least-frequent"),
            rollouts=int(d.get("rollouts", DEFAULT_ROLLOUTS)),
            max_steps=int(d.get("max_steps", DEFAULT_MAX_STEPS)),
            eval_episodes=int(d.get("eval_episodes", 10_000)),
            baseline_cap=int(d.get("baseline_cap", 100_000)),
            train=tcfg,
        )
        if isinstance(run.target, str) and run.target != "auto-least-frequent":
            raise ConfigError("target must be 'auto-least-frequent' or a list of state bitstrings")
        bad = set(run.infer) - {"k", "top", "allow_self", "binary"}
        if bad:
            raise ConfigError(f"unknown infer fields: {sorted(bad)}")
        return run

    def to_dict(self) -> dict:
        d = {"target": self.target, "rollouts": self.rollouts, "max_steps": self.max_steps,
             "eval_episodes": self.eval_episodes, "baseline_cap": self.baseline_cap,
             "train": config_dict(self.train)}
        if self.spec is not None:
            d["spec"] = str(self.spec)
        else:
            d["expression"] = str(self.expression)
            d["infer"] = self.infer
        return d


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise ConfigError(f"referenced file does not exist: {p}")
    return p


def load_run_config(name: str) -> RunConfig:
    path = Path(name)
    if not path.exists() and name in SHIPPED_CONFIGS:
        path = Path(str(fixture_path(f"{name}.json")))
    if not path.exists():
        raise ConfigError(f"no such config: {name}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} col {e.colno}: {e.msg}") from None
    if "command" in d and "config" in d:
        d = d["config"]          # a run manifest: replay its recorded config
    return RunConfig.from_dict(d, path.parent)


@dataclass
class Prepared:
    spec: PBNSpec
    spec_text: str
    attractors: list[Attractor]
    target: Attractor
    control: ControlConfig


def read_spec(path: Path) -> tuple[PBNSpec, str]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(str(e)) from None
    return parse_spec(text), text


def infer_from_expression(path: Path, infer: dict) -> PBNSpec:
    m = read_expression_csv(path)
    bits = binarize(m, infer.get("binary", False))
    selected = select_predictors(bits, infer.get("k", 3), infer.get("top", 10),
                                 infer.get("allow_self", True), m.genes)
    return build_pbn(selected)


def attractors_of(spec: PBNSpec, rollouts: int, max_steps: int, rng) -> list[Attractor]:
    if spec.n <= DEFAULT_STG_LIMIT:
        return find_attractors(spec)
    log.info("n = %d exceeds the exact STG limit; sampling attractors", spec.n)
    return find_attractors_sampled(spec, rollouts, max_steps, rng)


def prepare(run: RunConfig, seed: int) -> Prepared:
    """Load or infer the network and resolve the control target."""
    if run.spec is not None:
        spec, text = read_spec(run.spec)
    else:
        spec = infer_from_expression(run.expression, run.infer)
        text = dumps_spec(spec)
    rng = np.random.default_rng(seed)
    atts = attractors_of(spec, run.rollouts, run.max_steps, rng)
    if run.target == "auto-least-frequent":
        est = estimate_attractor_frequencies(spec, atts, run.rollouts, run.max_steps, rng)
        target = least_frequent(atts, est)
    else:
        target = _explicit_target(spec, run.target, atts)
    cfg = run.train
    control = ControlConfig(target, cfg.horizon, cfg.success_reward,
                            atts if cfg.reward_mode == "full" else None, reward_mode=cfg.reward_mode)
    return Prepared(spec, text, atts, target, control)


def _explicit_target(spec: PBNSpec, states: list[str], atts: list[Attractor]) -> Attractor:
    try:
        wanted = tuple(sorted(str_to_state(s) for s in states))
    except ValueError as e:
        raise ConfigError(f"target: {e}") from None
    if any(len(s) != spec.n for s in states):
        raise ConfigError(f"target states must have {spec.n} bits")
    for a in atts:
        if a.states == wanted:
            return a
    if closed_set_from(spec, wanted[0]) == wanted:
        return Attractor(len(atts), wanted)
    raise ConfigError(f"target {states} is not an attractor of the network")


def output_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get("PBNCONTROL_OUT") or "pbncontrol-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_config(args) -> RunConfig:
    if args.config:
        run = load_run_config(args.config)
        if args.spec:
            run.spec, run.expression = Path(args.spec), None
    elif args.spec:
        run = RunConfig(spec=Path(args.spec))
    else:
        raise ConfigError("either --config or --spec is required")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if getattr(args, "iterations", None) is not None:
        overrides["iterations"] = args.iterations
    if overrides:
        d = config_dict(run.train)
        d.update(overrides)
        try:
            run.train = TrainConfig.from_dict(d)
        except ValueError as e:
            raise ConfigError(f"train: {e}") from None
    return run


# -- commands --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec, _ = read_spec(Path(args.spec))
    rng = np.random.default_rng(args.seed)
    if args.initial is not None:
        if len(args.initial) != spec.n:
            raise ConfigError(f"--initial must have {spec.n} bits")
        s = str_to_state(args.initial)
    else:
        s = int(rng.integers(0, 2 ** spec.n))
    print(state_to_str(s, spec.n))
    for _ in range(args.steps):
        s = step_natural(spec, s, rng)
        print(state_to_str(s, spec.n))
    return 0


def cmd_attractors(args) -> int:
    spec, _ = read_spec(Path(args.spec))
    rng = np.random.default_rng(args.seed)
    if spec.n > DEFAULT_STG_LIMIT and not args.sampled:
        raise ConfigError(f"network has {spec.n} nodes; exact analysis is limited to n <= "
                          f"{DEFAULT_STG_LIMIT}. Re-run with --sampled for Monte Carlo-only mode.")
    atts = (find_attractors_sampled(spec, args.rollouts, args.max_steps, rng) if args.sampled
            else find_attractors(spec))
    est = estimate_attractor_frequencies(spec, atts, args.rollouts, args.max_steps, rng)
    target = least_frequent(atts, est)
    rows = [["attractor_id", "size", "states", "frequency", "suggested_target"]]
    for a in atts:
        rows.append([a.index, len(a), " ".join(a.to_strings(spec.n)), repr(float(est.frequencies[a.index])),
                     int(a.index == target.index)])
    rows.append(["timeout", "", "", repr(est.timeout_fraction), 0])
    stream = sys.stdout
    if args.out:
        path = output_dir(args.out) / "attractors.csv"
        stream = open(path, "w", newline="")
    try:
        csv.writer(stream, lineterminator="\n").writerows(rows)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def cmd_train(args) -> int:
    run = _run_config(args)
    cfg = run.train
    prep = prepare(run, cfg.seed)
    out = output_dir(args.out)
    log.info("target attractor: %s", " ".join(prep.target.to_strings(prep.spec.n)))
    res = train(prep.spec, prep.control, cfg)
    (out / "metrics.csv").write_text(metrics_to_csv(res.metrics))
    mlp.save_params(out / "checkpoint.npz", res.params)
    (out / "spec.json").write_text(prep.spec_text)
    manifest = {
        "command": "train",
        "seed": cfg.seed,
        "config": run.to_dict(),
        "spec_sha1": git_blob_sha1(prep.spec_text.encode()),
        "target": prep.target.to_strings(prep.spec.n),
        "attractors": [a.to_strings(prep.spec.n) for a in prep.attractors],
    }
    if run.expression is not None:
        manifest["expression_sha1"] = git_blob_sha1(Path(run.expression).read_bytes())
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    last = res.metrics[-1] if res.metrics else None
    if last is not None:
        print(f"final epoch {last.epoch}: success {last.success_rate:.3f}, "
              f"interventions {last.mean_interventions:.2f}")
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    run = _run_config(args)
    prep = prepare(run, run.train.seed)
    out = output_dir(args.out)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.npz"
    if not ckpt.exists():
        raise ConfigError(f"no checkpoint at {ckpt}; run 'train' first or pass --checkpoint")
    params = mlp.load_params(ckpt)
    if params.sizes[0] != prep.spec.n or params.sizes[-1] != prep.spec.n + 1:
        raise ConfigError(f"checkpoint shape {params.sizes} does not match a {prep.spec.n}-gene network")
    episodes = args.episodes or run.eval_episodes
    res = evaluate(prep.spec, params, prep.control, episodes, horizon=run.train.horizon, seed=run.train.seed)
    report = {"episodes": episodes, "horizon": run.train.horizon, "success_rate": res.success_rate,
              "mean_interventions": res.mean_interventions, "std_interventions": res.std_interventions,
              "histogram": res.histogram}
    (out / "eval.json").write_text(json.dumps(report, indent=1) + "\n")
    print(f"success {res.success_rate:.4f} over {episodes} episodes at H={run.train.horizon}; "
          f"interventions {res.mean_interventions:.2f} +- {res.std_interventions:.2f}")
    return 0


def cmd_baseline(args) -> int:
    run = _run_config(args)
    prep = prepare(run, run.train.seed)
    episodes = args.episodes or 1_000
    rng = np.random.default_rng(run.train.seed)
    res = random_baseline(prep.spec, prep.control, episodes, run.baseline_cap, rng)
    H = run.train.horizon
    report = {"episodes": episodes, "cap": run.baseline_cap, "mean_interventions": res.mean,
              "std_interventions": res.std, "reached": float(res.reached.mean()),
              "success_within_horizon": res.success_rate(H), "horizon": H}
    if args.out or os.environ.get("PBNCONTROL_OUT"):
        (output_dir(args.out) / "baseline.json").write_text(json.dumps(report, indent=1) + "\n")
    print(f"random interventions: {res.mean:.1f} +- {res.std:.1f} to reach the target "
          f"({res.reached.mean():.3f} within cap {run.baseline_cap}); success within H={H}: "
          f"{res.success_rate(H):.4f}")
    return 0


def cmd_infer(args) -> int:
    infer = {"k": args.k, "top": args.top, "allow_self": not args.no_self, "binary": args.binary}
    try:
        spec = infer_from_expression(Path(args.expression), infer)
    except OSError as e:
        raise ConfigError(str(e)) from None
    genes = read_expression_csv(args.expression).genes
    text = dumps_spec(spec, genes=genes)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbncontrol", description="Control of probabilistic Boolean networks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only print results")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="print a natural trajectory")
    s.add_argument("--spec", required=True)
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--initial", help="start state bitstring (random if omitted)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("attractors", parents=[common],
                       help="list attractors and their natural frequencies (CSV)")
    s.add_argument("--spec", required=True)
    s.add_argument("--rollouts", type=int, default=DEFAULT_ROLLOUTS)
    s.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sampled", action="store_true", help="Monte Carlo attractor search only")
    s.add_argument("--out")
    s.set_defaults(func=cmd_attractors)

    for name, func, helptext in (("train", cmd_train, "train a controller"),
                                 ("eval", cmd_eval, "evaluate a trained controller greedily"),
                                 ("baseline", cmd_baseline, "random-intervention baseline")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--config", help="run-config JSON, or pbn10 / pbn20 / melanoma")
        s.add_argument("--spec", help="network spec (overrides the config's)")
        s.add_argument("--seed", type=int)
        s.add_argument("--horizon", type=int)
        s.add_argument("--out")
        if name == "train":
            s.add_argument("--iterations", type=int)
        if name == "eval":
            s.add_argument("--checkpoint")
        if name in ("eval", "baseline"):
            s.add_argument("--episodes", type=int)
        s.set_defaults(func=func)

    s = sub.add_parser("infer", parents=[common], help="infer a PBN spec from an expression CSV")
    s.add_argument("--expression", required=True)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--no-self", action="store_true", help="exclude a gene from its own predictors")
    s.add_argument("--binary", action="store_true", help="input is already 0/1")
    s.add_argument("--out", help="write the spec here instead of stdout")
    s.set_defaults(func=cmd_infer)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, SpecError, InferenceError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:       # noqa: BLE001 - surfaced as a runtime failure exit code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
