import os

# Try to load .env locally; ignore if package is missing
try:
    from dotenv import load_dotenv  # type: ignore
except Exception:
    load_dotenv = None

if load_dotenv:
    load_dotenv()

class Settings:
    LOG_LEVEL: str = os.getenv("CONLAB_LOG_LEVEL", "INFO")
    WORKERS: int = int(os.getenv("CONLAB_WORKERS", "4"))
    API_TOKEN: str | None = os.getenv("CONLAB_API_TOKEN")
    MAX_UPLOAD_BYTES: int = int(os.getenv("CONLAB_MAX_UPLOAD_BYTES", "1048576"))

    def seed_override(self) -> int | None:
        # read at call time so a run picks up the current environment
        raw = os.getenv("CONLAB_SEED")
        if raw is None or not raw.strip():
            return None
        return int(raw.strip())

settings = Settings()
