"""swmlab: trait-aware social world models for incentive mechanism learning.

A principal repeatedly deploys discrete mechanisms (facility placements or
team partitions) over a population of rule-based background agents whose
responses are governed by hidden per-agent traits. The package provides:

- ``numerics``: a minimal dense-tensor reverse-mode autodiff engine, MLP and
  LSTM cells, Adam, categorical utilities, and a finite-difference checker.
- ``envs``: the facility-location and team-structure environments with
  brute-force oracles.
- ``swm``: the social world model (posterior trait tracker + trait-conditioned
  dynamics/reward predictor) and imagined-rollout generation.
- ``policy``: the online prior trait tracker, the mechanism policy, and PPO.
- ``trainer``: replay buffers, the epoch loop, baselines, metrics, and trait
  confusion diagnostics.
- ``cli``: experiment configuration and the ``swmlab`` command-line tool.
"""

__version__ = "0.1.0"
