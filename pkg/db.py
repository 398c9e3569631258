import os
from pathlib import Path

from dotenv import load_dotenv
from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker

load_dotenv()

DB_URL_ENV = "SADL_DB_URL"
REGISTRY_FILE = "sadl_runs.db"

Base = declarative_base()

SessionLocal = sessionmaker(autoflush=False, autocommit=False)


def registry_url(out_dir: str | Path | None, url: str | None = None) -> str | None:
    """Where a run is recorded: an explicit url, then SADL_DB_URL, then a sqlite file in `out_dir`.

    Any SQLAlchemy url works, e.g. postgresql+psycopg://user@host/sadl for a shared registry.
    """
    url = url or os.getenv(DB_URL_ENV)
    if url:
        return url
    if out_dir is None:
        return None
    return f"sqlite:///{Path(out_dir).resolve() / REGISTRY_FILE}"


def get_engine(url: str) -> Engine:
    return create_engine(url, pool_pre_ping=True)


def init_db(engine: Engine) -> Engine:
    import models  # noqa: F401  registers the tables on Base

    # Create tables if they don't exist
    Base.metadata.create_all(bind=engine)
    return engine
