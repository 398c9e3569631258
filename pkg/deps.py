import os

from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session

from db import SessionLocal, init_db


def get_db(engine: Engine) -> Session:
    """Open a registry session, creating the tables on first use."""
    init_db(engine)
    return SessionLocal(bind=engine)


def worker_count() -> int:
    """Worker threads for view generation, capped by SADL_THREADS."""
    raw = os.getenv("SADL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
