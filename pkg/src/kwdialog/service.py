"""HTTP facade for the cue -> response loop.

Endpoints (JSON over HTTP/1.1, versioned under /v1):

    GET  /v1/health                      -> {status, models: [{name, loaded}]}
    POST /v1/sessions                    -> {session_id}
    POST /v1/sessions/{id}/keywords      -> {keywords: [{text, source, score}]}
    POST /v1/sessions/{id}/responses     -> {responses: [{text, score, group}], degenerate}
    POST /v1/sessions/{id}/commit        -> {ok, history_length}

Sessions live in memory (optional JSON-lines persistence log) and evict
after an idle TTL. In deterministic mode every per-request seed derives
from (base seed, session counter, request counter) so replaying a request
sequence against a fresh service reproduces the bodies byte for byte.
"""

from __future__ import annotations

import itertools
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .corpus import Vocabulary, detokenize, tokenize
from .decode import DecodeConfig, diverse_beam_search
from .embeddings import EmbeddingTable
from .keywords import KeywordSuggestion, extractive_suggest, generative_suggest
from .model import DialogModel, load_model

MAX_CONTEXT_TURNS = 5


@dataclass
class Session:
    id: str
    index: int
    history: list[tuple[str, str]] = field(default_factory=list)  # (speaker, text)
    created: float = 0.0
    last_active: float = 0.0
    request_counter: int = 0

    def context_ids(self, vocab: Vocabulary) -> list[list[int]]:
        turns = [text for _, text in self.history][-MAX_CONTEXT_TURNS:]
        return [tokenize(t, vocab) for t in turns]


def merge_suggestions(
    extractive: list[KeywordSuggestion], generative: list[KeywordSuggestion]
) -> list[KeywordSuggestion]:
    """Union of both predictors' suggestions, deduplicated by text; when both
    propose a word the generative one wins."""
    merged: dict[str, KeywordSuggestion] = {}
    for s in extractive:
        merged[s.text] = s
    for s in generative:
        merged[s.text] = s
    return list(merged.values())


class UtteranceBody(BaseModel):
    partner_utterance: str


class ResponsesBody(BaseModel):
    keywords: list[str]
    num: int = 3


class CommitBody(BaseModel):
    text: str


@dataclass
class EngineConfig:
    response_checkpoint: str | None = None
    base_checkpoint: str | None = None
    kwpred_checkpoint: str | None = None
    multi_checkpoint: str | None = None
    embeddings_path: str | None = None
    seed: int = 0
    deterministic: bool = True
    beams: int = 10
    groups: int = 2
    diversity_penalty: float = 5.5
    max_new_tokens: int = 32
    session_ttl: float = 24 * 3600.0
    persist_path: str | None = None


class Engine:
    """Owns the loaded models and the session store.

    Model inference is re-entrant over the read-only checkpoints; session
    mutation is serialized per session via one lock (desk scale).
    """

    def __init__(self, config: EngineConfig):
        self.config = config
        self.lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.session_counter = itertools.count()
        self.response_model: DialogModel | None = None
        self.base_model: DialogModel | None = None
        self.kwpred_model: DialogModel | None = None
        self.multi_model: DialogModel | None = None
        self.vocab: Vocabulary | None = None
        self.table: EmbeddingTable | None = None
        self.response_meta: dict = {}
        self._persist_fh = None
        if config.persist_path:
            self._persist_fh = Path(config.persist_path).open("a", encoding="utf-8")

    def load(self) -> None:
        from .embeddings import load_table

        cfg = self.config
        if cfg.response_checkpoint:
            self.response_model, self.vocab, self.response_meta = load_model(cfg.response_checkpoint)
        if cfg.base_checkpoint:
            self.base_model, vocab, _ = load_model(cfg.base_checkpoint)
            self.vocab = self.vocab or vocab
        if cfg.kwpred_checkpoint:
            self.kwpred_model, vocab, _ = load_model(cfg.kwpred_checkpoint)
            self.vocab = self.vocab or vocab
        if cfg.multi_checkpoint:
            self.multi_model, _, _ = load_model(cfg.multi_checkpoint)
        if cfg.embeddings_path:
            self.table = load_table(cfg.embeddings_path)

    @property
    def ready(self) -> bool:
        return self.response_model is not None and self.vocab is not None

    def model_status(self) -> list[dict]:
        return [
            {"name": "response", "loaded": self.response_model is not None},
            {"name": "base", "loaded": self.base_model is not None},
            {"name": "kwpred", "loaded": self.kwpred_model is not None},
            {"name": "multi", "loaded": self.multi_model is not None},
            {"name": "embeddings", "loaded": self.table is not None},
        ]

    def _now(self) -> float:
        return 0.0 if self.config.deterministic else time.time()

    def evict_idle(self) -> None:
        if self.config.deterministic:
            return
        cutoff = time.time() - self.config.session_ttl
        with self.lock:
            stale = [sid for sid, s in self.sessions.items() if s.last_active < cutoff]
            for sid in stale:
                del self.sessions[sid]

    def create_session(self) -> Session:
        with self.lock:
            index = next(self.session_counter)
            sid = f"s{index:06d}" if self.config.deterministic else uuid.uuid4().hex
            session = Session(id=sid, index=index, created=self._now(), last_active=self._now())
            self.sessions[sid] = session
        self._persist({"event": "create", "session": sid})
        return session

    def get_session(self, sid: str) -> Session:
        self.evict_idle()
        session = self.sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def _request_seed(self, session: Session) -> int:
        session.request_counter += 1
        return self.config.seed * 1_000_003 + session.index * 4_099 + session.request_counter

    def _persist(self, record: dict) -> None:
        if self._persist_fh:
            self._persist_fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._persist_fh.flush()

    def suggest_keywords(self, session: Session, utterance: str) -> list[KeywordSuggestion]:
        with self.lock:
            session.history.append(("partner", utterance))
            session.last_active = self._now()
            seed = self._request_seed(session)
        context = session.context_ids(self.vocab)
        decode = DecodeConfig(
            strategy="diverse-beam", beams=self.config.beams, groups=self.config.groups,
            diversity_penalty=self.config.diversity_penalty,
            max_new_tokens=self.config.max_new_tokens, seed=seed,
        )
        extractive: list[KeywordSuggestion] = []
        generative: list[KeywordSuggestion] = []
        if self.base_model is not None and self.table is not None:
            extractive = extractive_suggest(context, self.base_model, self.vocab, self.table, decode)
        if self.kwpred_model is not None:
            generative = generative_suggest(context, self.kwpred_model, self.vocab, decode)
        merged = merge_suggestions(extractive, generative)
        self._persist({"event": "keywords", "session": session.id, "utterance": utterance,
                       "suggestions": [s.text for s in merged]})
        return merged

    def generate_responses(self, session: Session, keywords: list[str], num: int) -> tuple[list[dict], bool]:
        with self.lock:
            session.last_active = self._now()
            seed = self._request_seed(session)
        context = session.context_ids(self.vocab)
        model = self.response_model
        if len(keywords) > 1 and self.multi_model is not None:
            model = self.multi_model
        decode = DecodeConfig(
            strategy="diverse-beam", beams=self.config.beams, groups=self.config.groups,
            diversity_penalty=self.config.diversity_penalty,
            max_new_tokens=self.config.max_new_tokens, seed=seed,
        )
        hypotheses = diverse_beam_search(model, context, keywords, self.vocab, decode)
        seen: set[str] = set()
        out: list[dict] = []
        for hyp in hypotheses:
            text = detokenize(hyp.tokens, self.vocab)
            if text in seen or not text:
                continue
            seen.add(text)
            out.append({"text": text, "score": hyp.normalized_score, "group": hyp.group})
            if len(out) == num:
                break
        degenerate = len(out) < num
        self._persist({"event": "responses", "session": session.id, "keywords": keywords,
                       "responses": [o["text"] for o in out]})
        return out, degenerate

    def commit(self, session: Session, text: str) -> int:
        with self.lock:
            session.history.append(("user", text))
            session.last_active = self._now()
        self._persist({"event": "commit", "session": session.id, "text": text})
        return len(session.history)


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="kwdialog", version="0.1.0")
    app.state.engine = engine

    @app.get("/v1/health")
    def health():
        return {"status": "ok" if engine.ready else "loading", "models": engine.model_status()}

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        if not engine.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        session = engine.create_session()
        return {"session_id": session.id}

    @app.post("/v1/sessions/{sid}/keywords")
    def keywords(sid: str, body: UtteranceBody):
        if not engine.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        if not body.partner_utterance.strip():
            raise HTTPException(status_code=422, detail="empty utterance")
        session = engine.get_session(sid)
        suggestions = engine.suggest_keywords(session, body.partner_utterance.strip())
        return {
            "keywords": [
                {"text": s.text, "source": s.source, "score": s.score} for s in suggestions
            ]
        }

    @app.post("/v1/sessions/{sid}/responses")
    def responses(sid: str, body: ResponsesBody):
        if not engine.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        cleaned = [k.strip().lower() for k in body.keywords if k.strip()]
        if not 1 <= len(cleaned) <= 3:
            raise HTTPException(status_code=422, detail="need between 1 and 3 keywords")
        if not 1 <= body.num <= engine.config.beams:
            raise HTTPException(status_code=422, detail="num out of range")
        session = engine.get_session(sid)
        out, degenerate = engine.generate_responses(session, cleaned, body.num)
        return {"responses": out, "degenerate": degenerate}

    @app.post("/v1/sessions/{sid}/commit")
    def commit(sid: str, body: CommitBody):
        if not engine.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        if not body.text.strip():
            raise HTTPException(status_code=422, detail="empty text")
        session = engine.get_session(sid)
        length = engine.commit(session, body.text.strip())
        return {"ok": True, "history_length": length}

    return app
