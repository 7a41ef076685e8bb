"""HTTP advisor: live draft recommendations and what-if exploration.

The service holds immutable snapshots of trained models and team statistics
loaded at startup; no request mutates shared state, so identical requests
yield identical responses. Draft states are replayed through the veto machine
and rejected with a step diagnosis when illegal.
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .domain import ActionKind, DomainError, MapId, VetoState, apply_decision, decider, new_veto
from .features import TeamRecord, build_context
from .training import TrainedPolicy

DEFAULT_PORT = 8720


class AdvisorError(Exception):
    def __init__(self, status: int, code: str, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.step = step


class DecisionDTO(BaseModel):
    team: str
    action: str = Field(pattern="^(ban|pick)$")
    map: str


class DraftStateDTO(BaseModel):
    team_a: str
    team_b: str
    decisions: list[DecisionDTO] = Field(default_factory=list)
    requesting_team: Optional[str] = None
    model_id: Optional[str] = None


class WhatIfRequest(BaseModel):
    state: DraftStateDTO
    hypothetical: DecisionDTO


class MapProbability(BaseModel):
    map: str
    probability: float


class RecommendationDTO(BaseModel):
    model_id: str
    variant: str
    kind: str  # "pick", "ban", or "decider"
    team_to_act: Optional[str]
    mask_applied: bool = True
    cold_start: bool = False
    probabilities: list[MapProbability] = Field(default_factory=list)
    decider: Optional[str] = None


class ModelDescriptor(BaseModel):
    id: str
    variant: str
    reward_kind: str
    d: int
    config_hash: str


def _replay(state: DraftStateDTO) -> VetoState:
    try:
        veto = new_veto(state.team_a, state.team_b)
    except DomainError as exc:
        raise AdvisorError(422, "illegal_draft_state", str(exc), step=0)
    for index, decision in enumerate(state.decisions):
        if decision.map not in MapId.__members__:
            raise AdvisorError(
                422, "illegal_draft_state", f"unknown map {decision.map!r}", step=index
            )
        try:
            veto = apply_decision(
                veto, decision.team, ActionKind(decision.action), MapId[decision.map]
            )
        except DomainError as exc:
            raise AdvisorError(422, "illegal_draft_state", str(exc), step=index)
    return veto


def _apply_hypothetical(veto: VetoState, hypothetical: DecisionDTO) -> VetoState:
    if hypothetical.map not in MapId.__members__:
        raise AdvisorError(
            422, "illegal_hypothetical", f"unknown map {hypothetical.map!r}", step=veto.step
        )
    try:
        return apply_decision(
            veto, hypothetical.team, ActionKind(hypothetical.action), MapId[hypothetical.map]
        )
    except DomainError as exc:
        raise AdvisorError(422, "illegal_hypothetical", str(exc), step=veto.step)


def create_app(
    models: Mapping[str, TrainedPolicy], team_stats: Mapping[str, TeamRecord]
) -> FastAPI:
    app = FastAPI(title="veto draft advisor")
    models = dict(models)
    team_stats = dict(team_stats)

    @app.exception_handler(AdvisorError)
    async def advisor_error_handler(_: Request, exc: AdvisorError):
        body = {"code": exc.code, "message": exc.message}
        if exc.step is not None:
            body["step"] = exc.step
        return JSONResponse(status_code=exc.status, content=body)

    def resolve_model(model_id: Optional[str]) -> tuple[str, TrainedPolicy]:
        if model_id is None:
            if len(models) == 1:
                return next(iter(models.items()))
            raise AdvisorError(
                404, "unknown_model", "model_id required when several models are loaded"
            )
        if model_id not in models:
            raise AdvisorError(404, "unknown_model", f"no model named {model_id!r}")
        return model_id, models[model_id]

    def recommend_for(veto: VetoState, model_id: Optional[str]) -> RecommendationDTO:
        name, model = resolve_model(model_id)
        if veto.complete:
            return RecommendationDTO(
                model_id=name,
                variant=model.variant.value,
                kind="decider",
                team_to_act=None,
                decider=decider(veto).name,
            )
        team, kind = veto.expected_turn()
        opponent = veto.opponent_of(team)
        cold_start = team not in team_stats or opponent not in team_stats
        context = build_context(
            team_stats.get(team, TeamRecord()),
            team_stats.get(opponent, TeamRecord()),
            veto.available,
        )
        if kind is ActionKind.PICK:
            dist = model.pick_distribution(context, masked=True)
        else:
            dist = model.ban_distribution(context, masked=True)
        order = sorted(
            (MapId(i) for i in np.flatnonzero(dist.probs > 0.0)),
            key=lambda m: (-dist.probs[m], m.name),
        )
        return RecommendationDTO(
            model_id=name,
            variant=model.variant.value,
            kind=kind.value,
            team_to_act=team,
            cold_start=cold_start,
            probabilities=[
                MapProbability(map=m.name, probability=float(dist.probs[m])) for m in order
            ],
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "models": len(models), "teams": len(team_stats)}

    @app.get("/models")
    async def list_models():
        return [
            ModelDescriptor(
                id=name,
                variant=model.variant.value,
                reward_kind=model.config.reward_kind.value,
                d=int(model.pick_params.theta.size),
                config_hash=model.config.hash(),
            )
            for name, model in sorted(models.items())
        ]

    @app.post("/draft/recommend", response_model=RecommendationDTO)
    async def draft_recommend(state: DraftStateDTO):
        veto = _replay(state)
        return recommend_for(veto, state.model_id)

    @app.post("/draft/what-if", response_model=RecommendationDTO)
    async def draft_what_if(request: WhatIfRequest):
        veto = _replay(request.state)
        advanced = _apply_hypothetical(veto, request.hypothetical)
        return recommend_for(advanced, request.state.model_id)

    return app
