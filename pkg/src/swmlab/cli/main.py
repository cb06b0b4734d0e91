"""Command-line interface.

    swmlab train     --config facility8 --algo swm-ap --seeds 3 [key=value ...]
    swmlab gradcheck [--draws 10] [--corrupt]
    swmlab oracle    --env facility [--config PATH] [--checkpoint CKPT]
    swmlab plotdata  --target 4.0 [--out comparison.csv] RUNDIR [RUNDIR ...]
    swmlab confusion --checkpoint CKPT [--config PATH] [--prefix N]

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
``--config`` takes a path or the name of a bundled file (facility8,
facility32, team4). Trailing ``section.key=value`` pairs override any
config field. SWMLAB_THREADS caps worker parallelism; identical runs
produce byte-identical metrics at any setting.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..checkpoint import load_checkpoint, save_checkpoint
from ..envs.base import make_env
from ..envs.facility import facility_expected_reward, oracle_best_placement
from ..exceptions import (
    ConfigError,
    ConfigurationError,
    ContractViolation,
    InstanceTooLargeError,
)
from .config import (
    ALGOS,
    ENVS,
    ExperimentConfig,
    apply_overrides,
    builtin_config_path,
    config_hash,
    parse_config_file,
    parse_config_text,
    serialize_config,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

TEAM_ORACLE_BUDGET = 5000  # partition sequences; beyond this the instance is refused


@dataclass
class RunManifest:
    config_hash: str
    build: str
    started: str
    finished: str = ""
    algo: str = ""
    env: str = ""
    seeds: list[int] = field(default_factory=list)
    seed_paths: dict = field(default_factory=dict)
    status: str = "running"

    def write(self, path: Path) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        os.replace(tmp, path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _parse_seeds(text: str) -> list[int]:
    """A bare count N means seeds 0..N-1; a comma list is taken verbatim."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"--seeds got no usable value in {text!r}")
    values = [int(p) for p in parts]
    if len(values) == 1 and "," not in text:
        n = values[0]
        if n < 1:
            raise ConfigError("--seeds count must be >= 1")
        return list(range(n))
    return values


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if path.is_file():
            cfg = parse_config_file(path)
        elif "/" in args.config or args.config.endswith(".toml"):
            raise FileNotFoundError(f"config file not found: {args.config}")
        else:
            cfg = parse_config_text(builtin_config_path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    if getattr(args, "algo", None):
        cfg.run.algo = args.algo
    if getattr(args, "env", None):
        cfg.run.env = args.env
    if getattr(args, "epochs", None) is not None:
        cfg.run.epochs = args.epochs
    if getattr(args, "seeds", None):
        cfg.run.seeds = _parse_seeds(args.seeds)
    apply_overrides(cfg, list(getattr(args, "overrides", []) or []))
    cfg.validate()
    return cfg


def _trainer_stores(trainer) -> dict:
    return {
        "posterior": trainer.posterior.store,
        "prior": trainer.prior.store,
        "model": trainer.model.store,
        "policy": trainer.policy.pol_store,
        "value": trainer.policy.val_store,
    }


def cmd_train(args) -> int:
    from ..trainer.diagnostics import trait_confusion
    from ..trainer.loop import Trainer
    from ..trainer.metrics import write_metrics_csv

    cfg = _load_config(args)
    chash = config_hash(cfg)
    run_dir = Path(args.out) / cfg.run.name
    if run_dir.exists() and not args.force:
        print(f"error: {run_dir} exists; pass --force to overwrite", file=sys.stderr)
        return EXIT_USAGE
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.toml").write_text(
        f"# config_hash={chash}\n" + serialize_config(cfg)
    )

    manifest = RunManifest(
        config_hash=chash,
        build=f"swmlab-{__version__}",
        started=_now(),
        algo=cfg.run.algo,
        env=cfg.run.env,
        seeds=list(cfg.run.seeds),
    )
    try:
        for seed in cfg.run.seeds:
            seed_dir = run_dir / f"seed{seed}"
            seed_dir.mkdir(exist_ok=True)
            trainer = Trainer(cfg, seed)
            rows = [trainer.run_epoch() for _ in range(cfg.run.epochs)]
            write_metrics_csv(seed_dir / "metrics.csv", rows, config_hash=chash)
            save_checkpoint(seed_dir / "checkpoint.bin", _trainer_stores(trainer), chash)
            paths = {"metrics": f"seed{seed}/metrics.csv", "checkpoint": f"seed{seed}/checkpoint.bin"}
            if cfg.run.algo == "swm-ap":
                cm = trait_confusion(
                    trainer.posterior,
                    trainer.env,
                    cfg.run.eval_episodes,
                    np.random.default_rng(seed * 1_000_003 + 99),
                )
                payload = json.loads(cm.to_json())
                payload["config_hash"] = chash
                (seed_dir / "confusion.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
                paths["confusion"] = f"seed{seed}/confusion.json"
            manifest.seed_paths[str(seed)] = paths
            last = rows[-1]
            print(
                f"seed {seed}: {cfg.run.epochs} epochs, {last.env_steps} env steps, "
                f"final return {last.eval_return_mean:.3f} +/- {last.eval_return_std:.3f}"
            )
        manifest.status = "ok"
        return EXIT_OK
    except BaseException:
        manifest.status = "failed"
        raise
    finally:
        manifest.finished = _now()
        manifest.write(run_dir / "manifest.json")
        print(f"wrote {run_dir}")


def cmd_gradcheck(args) -> int:
    from .verify import gradcheck_suite

    reports = gradcheck_suite(n_draws=args.draws, corrupt=args.corrupt)
    ok = True
    for name, rep in reports.items():
        status = "ok" if rep.max_rel_err < 1e-4 else "FAIL"
        ok &= status == "ok"
        print(
            f"{name}: max rel err {rep.max_rel_err:.3e} over {rep.n_checked} scalars "
            f"(worst {rep.worst_param}{list(rep.worst_index)}, "
            f"analytic {rep.analytic:.6e}, numeric {rep.numeric:.6e}) {status}"
        )
    print("GRADCHECK " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_RUNTIME


def _team_oracle(cfg: ExperimentConfig, seed: int) -> tuple[list[int], float]:
    env = make_env("team", cfg.env_config())
    n_seq = env.n_actions ** env.episode_decisions
    if n_seq > TEAM_ORACLE_BUDGET:
        raise InstanceTooLargeError(
            f"{n_seq} partition sequences exceed the oracle budget {TEAM_ORACLE_BUDGET}"
        )
    best_val = -np.inf
    best_seq: tuple[int, ...] = ()
    for seq in itertools.product(range(env.n_actions), repeat=env.episode_decisions):
        rng = np.random.default_rng(seed)
        env.reset(rng)
        total, _ = env.run_pre_phase(rng)
        for action in seq:
            _, r, _, _ = env.decision_step(action, rng)
            total += r
        if total > best_val + 1e-12:
            best_val, best_seq = total, seq
    return list(best_seq), float(best_val)


class CheckpointMismatch(Exception):
    """Checkpoint and config describe different builds; a usage error."""


def _load_matching_checkpoint(trainer, cfg: ExperimentConfig, path: str) -> str:
    try:
        ckpt_hash = load_checkpoint(path, _trainer_stores(trainer))
    except ContractViolation as exc:
        raise CheckpointMismatch(str(exc)) from exc
    if ckpt_hash != config_hash(cfg):
        raise CheckpointMismatch(
            f"checkpoint hash {ckpt_hash} does not match config hash {config_hash(cfg)}"
        )
    return ckpt_hash


def _greedy_run(cfg: ExperimentConfig, seed: int, checkpoint: str):
    """Greedy episode of a checkpointed policy on the seed's instance."""
    from ..trainer.loop import Trainer, _roll_episode

    trainer = Trainer(cfg, seed)
    _load_matching_checkpoint(trainer, cfg, checkpoint)
    env = make_env(cfg.run.env, cfg.env_config())
    episode = _roll_episode(
        env,
        trainer.policy,
        trainer._acting_tracker(),
        np.random.default_rng(seed),
        greedy=True,
    )
    return episode.traj


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    seed = cfg.run.seeds[0]
    if cfg.run.env == "facility":
        env = make_env("facility", cfg.env_config())
        env.reset(np.random.default_rng(seed))
        placement, value = oracle_best_placement(env.config, env.state)
        cells = [r * env.config.grid_side + c for r, c in placement]
        print(f"brute-force best placement: cells {cells} (expected return {value!r})")
        if args.checkpoint:
            traj = _greedy_run(cfg, seed, args.checkpoint)
            g = cfg.facility.grid_side
            placed = [(a // g, a % g) for a in (s.action for s in traj.steps)]
            env.reset(np.random.default_rng(seed))
            greedy_value = facility_expected_reward(env.state, placed)
            print(
                f"checkpoint greedy placement: cells {[s.action for s in traj.steps]} "
                f"(expected return {greedy_value!r}, gap {value - greedy_value!r})"
            )
    else:
        seq, value = _team_oracle(cfg, seed)
        print(f"brute-force best partition sequence: {seq} (return {value!r})")
        if args.checkpoint:
            traj = _greedy_run(cfg, seed, args.checkpoint)
            print(
                f"checkpoint greedy sequence: {[s.action for s in traj.steps]} "
                f"(return {traj.total_reward!r}, gap {value - traj.total_reward!r})"
            )
    return EXIT_OK


def cmd_plotdata(args) -> int:
    from ..trainer.metrics import read_metrics_csv, steps_to_target

    lines = ["algo,seed,steps_to_target,final_return_mean,final_return_std"]
    hashes = []
    for run_dir in args.runs:
        run_path = Path(run_dir)
        manifest_path = run_path / "manifest.json"
        if not manifest_path.is_file():
            print(f"error: no manifest at {manifest_path}", file=sys.stderr)
            return EXIT_USAGE
        manifest = json.loads(manifest_path.read_text())
        hashes.append(manifest["config_hash"])
        for seed in manifest["seeds"]:
            csv_path = run_path / f"seed{seed}" / "metrics.csv"
            if not csv_path.is_file():
                print(f"error: missing {csv_path}", file=sys.stderr)
                return EXIT_USAGE
            rows = read_metrics_csv(csv_path)
            steps = steps_to_target(rows, args.target)
            lines.append(
                ",".join(
                    [
                        manifest["algo"],
                        str(seed),
                        "NA" if steps is None else str(steps),
                        repr(rows[-1].eval_return_mean),
                        repr(rows[-1].eval_return_std),
                    ]
                )
            )
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n" + f"# config_hashes={','.join(hashes)}\n")
    print(f"wrote {out} ({len(lines) - 1} rows)")
    return EXIT_OK


def cmd_confusion(args) -> int:
    from ..trainer.diagnostics import trait_confusion
    from ..trainer.loop import Trainer

    cfg = _load_config(args)
    seed = cfg.run.seeds[0]
    trainer = Trainer(cfg, seed)
    ckpt_hash = _load_matching_checkpoint(trainer, cfg, args.checkpoint)
    tracker = trainer.prior if args.prefix is not None else trainer.posterior
    cm = trait_confusion(
        tracker,
        trainer.env,
        args.episodes,
        np.random.default_rng(seed * 1_000_003 + 7),
        use_prefix=args.prefix,
    )
    payload = json.loads(cm.to_json())
    payload["config_hash"] = ckpt_hash
    payload["prefix"] = args.prefix
    Path(args.out).write_text(json.dumps(payload, sort_keys=True) + "\n")
    print(
        f"accuracy raw {cm.accuracy_raw():.4f}, aligned {cm.accuracy_aligned():.4f} "
        f"over {cm.total} agents; wrote {args.out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p, with_overrides=True):
        p.add_argument("--config", help="config file path or bundled name")
        p.add_argument("--algo", choices=ALGOS)
        p.add_argument("--env", choices=ENVS)
        p.add_argument("--seeds", help="count N (seeds 0..N-1) or comma list")
        p.add_argument("--epochs", type=int)
        if with_overrides:
            p.add_argument("overrides", nargs="*", metavar="key=value")

    p_train = sub.add_parser("train", help="run an algorithm over the configured seeds")
    add_config_flags(p_train)
    p_train.add_argument("--out", default="runs", help="parent directory for run output")
    p_train.add_argument("--force", action="store_true", help="overwrite an existing run dir")
    p_train.set_defaults(func=cmd_train)

    p_grad = sub.add_parser("gradcheck", help="finite-difference check of all losses")
    p_grad.add_argument("--draws", type=int, default=10)
    p_grad.add_argument("--corrupt", action="store_true", help="negative control: must fail")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_oracle = sub.add_parser("oracle", help="brute-force optimum vs checkpoint policy")
    add_config_flags(p_oracle)
    p_oracle.add_argument("--checkpoint", help="compare this policy against the optimum")
    p_oracle.set_defaults(func=cmd_oracle)

    p_plot = sub.add_parser("plotdata", help="emit steps-to-target comparison CSV")
    p_plot.add_argument("runs", nargs="+", metavar="RUNDIR")
    p_plot.add_argument("--target", type=float, required=True)
    p_plot.add_argument("--out", default="comparison.csv")
    p_plot.set_defaults(func=cmd_plotdata)

    p_conf = sub.add_parser("confusion", help="trait confusion matrix of a checkpoint")
    add_config_flags(p_conf)
    p_conf.add_argument("--checkpoint", required=True)
    p_conf.add_argument("--prefix", type=int, default=None, help="prior tracker at this prefix")
    p_conf.add_argument("--episodes", type=int, default=200)
    p_conf.add_argument("--out", default="confusion.json")
    p_conf.set_defaults(func=cmd_confusion)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (
        ConfigError,
        ConfigurationError,
        InstanceTooLargeError,
        CheckpointMismatch,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
