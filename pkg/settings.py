import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    OUTPUT_DIR: str = "reports"
    LOG_LEVEL: str = "INFO"
    DEFAULT_SEED: int = 20240607

    QUAD_TARGET_REL_ERROR: float = 1e-8
    QUAD_MAX_SUBDIVISIONS: int = 8
    QUAD_SPLIT_RADIUS: float = 0.1

    POLE_EXCLUSION: float = 1e-8
    LATTICE_POLE_EXCLUSION: float = 1e-3
    BLOWUP_CAP: float = 1e8

    CORPUS_PATH: str = os.path.join(os.path.dirname(__file__), "data", "manufactured_solutions.json")

    class Config:
        env_file = ".env"

@lru_cache()
def get_settings():
    # If running tests, load .env.test
    if os.getenv("PYTHON_ENV") == "test":
        load_dotenv(".env.test")
    else:
        load_dotenv(".env")
    return Settings()
