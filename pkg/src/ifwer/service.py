"""HTTP+JSON service for interactive sessions.

Sessions live in memory keyed by an opaque token.  Every mutation is
appended to a per-session journal file (when a journal directory is
configured), and on restart the service replays those journals, so the
full interaction history backing each result is always on disk.  Views
are immutable snapshots refreshed after each mutation and served without
locking; mutations are serialized per session and a concurrent mutation
gets a retry signal instead of blocking.
"""

from __future__ import annotations

import json
import secrets
import threading
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .errors import ConfigError, DomainError, IfwerError, JournalError, StateError
from .session import Session, SessionConfig, replay
from .shrinkers import make_strategy, run_until_stop
from .simulation import GridSpec, TreeSpec, gen_grid, gen_tree, make_scorer


class CreateSessionRequest(BaseModel):
    pvalues: Optional[list] = None
    covariates: Optional[list] = None
    generator: Optional[dict] = None
    config: dict


class ExcludeRequest(BaseModel):
    indices: list


class AutoRequest(BaseModel):
    strategy: str = "lowest_score"
    params: dict = Field(default_factory=dict)
    scorer: str = "neg_g"
    steps: int = 1


class SessionHolder:
    def __init__(self, token: str, session: Session, pvalues, covariates,
                 journal_path: Optional[Path]):
        self.token = token
        self.session = session
        self.pvalues = [float(x) for x in pvalues]
        self.covariates = [[float(c) for c in row] for row in covariates]
        self.journal_path = journal_path
        self.lock = threading.Lock()
        self.view_json = session.view().to_dict()
        self._flushed_lines = 0
        self.flush()

    def refresh_view(self):
        self.view_json = self.session.view().to_dict()

    def flush(self):
        if self.journal_path is None:
            return
        lines = self.session.journal().splitlines()
        if self._flushed_lines == 0:
            self.journal_path.write_text("\n".join(lines) + "\n")
        elif len(lines) > self._flushed_lines:
            with self.journal_path.open("a") as fh:
                for ln in lines[self._flushed_lines:]:
                    fh.write(ln + "\n")
        self._flushed_lines = len(lines)


def _generate_data(spec: dict):
    spec = dict(spec)
    kind = spec.pop("kind", "grid")
    seed = spec.pop("seed", 0)
    rng = np.random.default_rng(seed)
    if kind == "grid":
        if "disc_center" in spec and spec["disc_center"] is not None:
            spec["disc_center"] = tuple(spec["disc_center"])
        pvalues, covariates, _ = gen_grid(GridSpec(**spec), rng)
    elif kind == "tree":
        if spec.get("non_null_nodes") is not None:
            spec["non_null_nodes"] = tuple(spec["non_null_nodes"])
        pvalues, covariates, _ = gen_tree(TreeSpec(**spec), rng)
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")
    return pvalues, covariates


def create_app(journal_dir: Optional[Path] = None,
               static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="interactive FWER sessions")
    sessions: dict = {}
    app.state.sessions = sessions

    if journal_dir is not None:
        journal_dir = Path(journal_dir)
        journal_dir.mkdir(parents=True, exist_ok=True)
        _recover(journal_dir, sessions)

    def holder_for(session_id: str) -> SessionHolder:
        holder = sessions.get(session_id)
        if holder is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return holder

    def mutate(holder: SessionHolder, fn):
        if not holder.lock.acquire(blocking=False):
            raise HTTPException(
                status_code=409, detail={"error": "busy", "retry": True}
            )
        try:
            return fn()
        except StateError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (DomainError, ConfigError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        finally:
            holder.refresh_view()
            holder.flush()
            holder.lock.release()

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        try:
            config = SessionConfig.from_dict(body.config)
            if body.generator is not None:
                pvalues, covariates = _generate_data(body.generator)
            elif body.pvalues is not None:
                pvalues = body.pvalues
                covariates = (
                    body.covariates
                    if body.covariates is not None
                    else [[] for _ in pvalues]
                )
            else:
                raise ConfigError("provide either pvalues or a generator spec")
        except (IfwerError, KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        token = secrets.token_hex(8)
        journal_path = journal_dir / f"{token}.journal" if journal_dir else None
        try:
            session = Session(pvalues, covariates, config)
        except IfwerError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        holder = SessionHolder(token, session, pvalues, covariates, journal_path)
        if journal_dir is not None:
            inputs_path = journal_dir / f"{token}.inputs.json"
            inputs_path.write_text(
                json.dumps({"pvalues": holder.pvalues, "covariates": holder.covariates})
            )
        sessions[token] = holder
        return {"session_id": token, "view": holder.view_json}

    @app.get("/sessions/{session_id}/view")
    def get_view(session_id: str):
        return holder_for(session_id).view_json

    @app.post("/sessions/{session_id}/exclude")
    def exclude(session_id: str, body: ExcludeRequest):
        holder = holder_for(session_id)

        def step():
            outcome = holder.session.exclude(body.indices)
            return {"stopped": outcome.stopped}

        result = mutate(holder, step)
        result["view"] = holder.view_json
        return result

    @app.post("/sessions/{session_id}/auto")
    def auto(session_id: str, body: AutoRequest):
        holder = holder_for(session_id)

        def step():
            session = holder.session
            if session.stopped:
                raise StateError("session already stopped")
            covariates = np.asarray(holder.covariates, dtype=float)
            if covariates.ndim == 1:
                covariates = covariates.reshape(session.n, -1)
            parent = (
                covariates[:, 0].astype(np.int64) if covariates.shape[1] >= 1 else None
            )
            strategy = make_strategy(
                body.strategy,
                parent=parent,
                batch_size=int(body.params.get("batch_size", 1)),
                cone_d=int(body.params.get("cone_d", 5)),
                cone_delta=float(body.params.get("cone_delta", 0.05)),
            )
            scorer = make_scorer(body.scorer, body.strategy, covariates)
            if body.steps < 1:
                raise DomainError("steps must be >= 1")
            status = run_until_stop(
                session, strategy, scorer, max_steps=body.steps
            )
            return {"status": status, "stopped": session.stopped}

        result = mutate(holder, step)
        result["view"] = holder.view_json
        return result

    @app.post("/sessions/{session_id}/adjusted-start")
    def adjusted_start(session_id: str):
        holder = holder_for(session_id)

        def step():
            holder.session.adjusted_start()
            return {"stopped": holder.session.stopped}

        result = mutate(holder, step)
        result["view"] = holder.view_json
        return result

    @app.get("/sessions/{session_id}/journal", response_class=PlainTextResponse)
    def journal(session_id: str):
        return holder_for(session_id).session.journal()

    @app.get("/sessions/{session_id}/result")
    def result(session_id: str):
        holder = holder_for(session_id)
        session = holder.session
        if not session.stopped:
            raise HTTPException(status_code=409, detail="session still active")
        return {"rejected": sorted(int(i) for i in session.rejections)}

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def _recover(journal_dir: Path, sessions: dict):
    for journal_path in sorted(journal_dir.glob("*.journal")):
        token = journal_path.stem
        inputs_path = journal_dir / f"{token}.inputs.json"
        if not inputs_path.exists():
            continue
        try:
            inputs = json.loads(inputs_path.read_text())
            session = replay(
                journal_path.read_text(), inputs["pvalues"], inputs["covariates"]
            )
        except (IfwerError, ValueError, KeyError):
            continue  # unreadable journals are skipped, not fatal
        holder = SessionHolder(
            token, session, inputs["pvalues"], inputs["covariates"], journal_path
        )
        sessions[token] = holder
