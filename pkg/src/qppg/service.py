"""FastAPI service exposing training, evaluation and capacity estimation.

Requests run synchronously; keep episode counts modest when calling over HTTP
(full multi-seed reproductions are better run through the CLI).
"""

from __future__ import annotations

import dataclasses
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import harness
from .harness import ExperimentConfig

app = FastAPI(title="qppg", description="Quantum-preconditioned policy gradient experiments")


class TrainRequest(BaseModel):
    env: str = "quantum"
    agent: str = "qppg"
    episodes: int = Field(default=100, ge=1)
    seeds: list[int] = [42]
    noise_level: float = 0.03
    width: int = 16
    alpha: float = 0.002
    gamma: float = 0.99
    xi: float = 0.1
    save_params: bool = False


class SeedResult(BaseModel):
    seed: int
    episodes_to_success: int | None
    mean_reward: float
    final_moving_avg: float
    failed: bool
    params_path: str | None = None


class TrainResponse(BaseModel):
    runs: list[SeedResult]


class EvaluateRequest(BaseModel):
    params_path: str
    noise_level: float = 0.15
    episodes: int = Field(default=100, ge=1)


class EvaluateResponse(BaseModel):
    noise_level: float
    success_fraction: float
    mean_return: float


class CapacityRequest(BaseModel):
    n_antennas: int = 4
    p_max: float = 1.0
    sigma2_low: float = 0.05
    sigma2_high: float = 0.2
    pilot_snr_db: float = 10.0
    samples: int = Field(default=200_000, ge=1)
    seed: int = 0


class CapacityResponse(BaseModel):
    ergodic_capacity_bits: float
    stderr: float
    throughput_ceiling_bits: float


def _config_from(req: TrainRequest) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            env=req.env,
            agent=req.agent,
            episodes=req.episodes,
            seeds=tuple(req.seeds),
            noise_level=req.noise_level,
            width=req.width,
            alpha=req.alpha,
            gamma=req.gamma,
            xi=req.xi,
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/train", response_model=TrainResponse)
def train(req: TrainRequest) -> TrainResponse:
    cfg = _config_from(req)
    runs = []
    for seed in cfg.seeds:
        record, agent = harness.train_one_seed(cfg, seed)
        params_path = None
        if req.save_params:
            fd = tempfile.NamedTemporaryFile(
                prefix=f"{cfg.env}_{cfg.agent}_seed{seed}_", suffix=".params", delete=False
            )
            fd.close()
            harness.save_params(
                fd.name, agent.layout, agent.theta,
                metadata={"agent": cfg.agent, "env": cfg.env, "width": cfg.width, "seed": seed},
            )
            params_path = fd.name
        runs.append(
            SeedResult(
                seed=seed,
                episodes_to_success=record.episodes_to_success,
                mean_reward=float(np.mean(record.rewards)),
                final_moving_avg=record.moving_avg[-1],
                failed=record.failed,
                params_path=params_path,
            )
        )
    return TrainResponse(runs=runs)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest) -> EvaluateResponse:
    if not Path(req.params_path).is_file():
        raise HTTPException(status_code=404, detail=f"no parameter file at {req.params_path}")
    header, theta = harness.load_params(req.params_path)
    cfg = ExperimentConfig(
        env=header.get("env", "quantum"),
        agent=header.get("agent", "qppg"),
        width=header.get("width", 16),
    )
    env = harness.make_env(cfg, rng_seed=0)
    agent = harness.make_agent(cfg, env, np.random.default_rng(0))
    if theta.shape[0] != agent.theta.shape[0]:
        raise HTTPException(status_code=422, detail="parameter dimension mismatch")
    agent.theta = theta
    if cfg.agent == "qdqn":
        agent.target_theta = theta.copy()
    fraction, mean_return = harness.evaluate_policy(cfg, agent, req.noise_level, episodes=req.episodes)
    return EvaluateResponse(noise_level=req.noise_level, success_fraction=fraction, mean_return=mean_return)


@app.post("/capacity", response_model=CapacityResponse)
def capacity(req: CapacityRequest) -> CapacityResponse:
    mean, stderr = harness.ergodic_capacity(
        n_antennas=req.n_antennas,
        p_max=req.p_max,
        sigma2_range=(req.sigma2_low, req.sigma2_high),
        samples=req.samples,
        rng=np.random.default_rng(req.seed),
    )
    ceiling = harness.throughput_ceiling(
        n_antennas=req.n_antennas,
        p_max=req.p_max,
        sigma2_range=(req.sigma2_low, req.sigma2_high),
        pilot_snr_db=req.pilot_snr_db,
        rng=np.random.default_rng(req.seed),
    )
    return CapacityResponse(ergodic_capacity_bits=mean, stderr=stderr, throughput_ceiling_bits=ceiling)
