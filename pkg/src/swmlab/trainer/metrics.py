"""Run metrics: CSV emission and sample-efficiency accounting.

Floats are written with repr so that equal runs produce byte-identical
files; ``env_steps`` counts real principal decisions only.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

__all__ = [
    "MetricsRow",
    "CSV_HEADER",
    "write_metrics_csv",
    "read_metrics_csv",
    "steps_to_target",
]

CSV_HEADER = (
    "epoch,env_steps,eval_return_mean,eval_return_std,"
    "swm_state_loss,swm_reward_loss,prior_loss,trait_acc,wall_secs"
)


@dataclass
class MetricsRow:
    epoch: int
    env_steps: int
    eval_return_mean: float
    eval_return_std: float
    swm_state_loss: float
    swm_reward_loss: float
    prior_loss: float
    trait_acc: float
    wall_secs: float

    def to_csv_line(self) -> str:
        vals = []
        for f in fields(self):
            v = getattr(self, f.name)
            vals.append(str(int(v)) if f.name in ("epoch", "env_steps") else repr(float(v)))
        return ",".join(vals)


def write_metrics_csv(path, rows: list[MetricsRow], config_hash: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv_line() + "\n")
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")


def read_metrics_csv(path) -> list[MetricsRow]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected metrics header: {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 9:
                continue
            rows.append(
                MetricsRow(
                    epoch=int(parts[0]),
                    env_steps=int(parts[1]),
                    **{
                        f.name: float(v)
                        for f, v in zip(fields(MetricsRow)[2:], parts[2:])
                    },
                )
            )
    return rows


def steps_to_target(rows: list[MetricsRow], target: float) -> int | None:
    """First env-step count where the 3-point trailing mean return >= target."""
    for i, row in enumerate(rows):
        window = [r.eval_return_mean for r in rows[max(0, i - 2) : i + 1]]
        if sum(window) / len(window) >= target:
            return row.env_steps
    return None
