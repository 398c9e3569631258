"""Run registry: provenance rows for every command plus the logged training/eval rows."""
import logging
from datetime import datetime, timezone

from sqlalchemy import Engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from config import RunConfig
from db import get_engine
from deps import get_db
from models import EvalRecord, PretrainStep, Run

logger = logging.getLogger(__name__)


def start_run(db: Session, command: str, seed: int | None, config_echo: str, digest: str | None = None) -> Run:
    run = Run(command=command, seed=seed, config_echo=config_echo, config_digest=digest, status="running")
    db.add(run)
    db.commit()
    db.refresh(run)
    return run


def finish_run(db: Session, run: Run, status: str) -> Run:
    if status not in ("ok", "failed"):
        raise ValueError(f"unknown run status {status!r}")
    run.status = status
    run.finished_at = datetime.now(timezone.utc)
    db.commit()
    return run


def record_step(db: Session, run: Run, row: dict) -> None:
    db.add(PretrainStep(run_id=run.id, **{k: row[k] for k in ("step", "lr", "l_sd", "l_s1", "l_s2", "total")}))
    db.commit()


def record_eval(db: Session, run: Run, row: dict) -> None:
    db.add(EvalRecord(run_id=run.id, **{k: row[k] for k in ("epoch", "split", "precision", "recall", "f1", "iou")}))
    db.commit()


class RunRecorder:
    """Best-effort registry writer used by the commands.

    Every call is a no-op when the recorder is disabled or has no reachable
    registry; artifacts on disk never depend on it. An engine built here from
    `url` is disposed on finish.
    """

    def __init__(self, command: str, config: RunConfig | None = None, seed: int | None = None,
                 enabled: bool = True, url: str | None = None, engine: Engine | None = None):
        self.command = command
        self.db: Session | None = None
        self.run: Run | None = None
        self._owned: Engine | None = None
        if not enabled:
            return
        if engine is None and url is None:
            logger.debug("no registry location for %s, not recording", command)
            return
        try:
            if engine is None:
                engine = self._owned = get_engine(url)
            self.db = get_db(engine)
            echo = config.canonical() if config else ""
            self.run = start_run(self.db, command, seed, echo, config.digest() if config else None)
        except (SQLAlchemyError, ImportError) as e:
            logger.warning("run registry unavailable, continuing without it: %s", e)
            self._close()

    @property
    def active(self) -> bool:
        return self.run is not None

    def step(self, row: dict) -> None:
        self._guard(record_step, row)

    def eval(self, row: dict) -> None:
        self._guard(record_eval, row)

    def finish(self, ok: bool) -> None:
        if self.active:
            self._guard(lambda db, run, status: finish_run(db, run, status), "ok" if ok else "failed")
        self._close()

    def _guard(self, fn, arg) -> None:
        if not self.active:
            return
        try:
            fn(self.db, self.run, arg)
        except SQLAlchemyError as e:
            logger.warning("run registry write failed, disabling it: %s", e)
            self._close()

    def _close(self) -> None:
        if self.db is not None:
            self.db.close()
        if self._owned is not None:
            self._owned.dispose()
        self.db = None
        self.run = None
        self._owned = None

    def __enter__(self) -> "RunRecorder":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.finish(ok=exc_type is None)
