import os, sys, tempfile, shutil
from pathlib import Path
from typing import Optional

from fastapi import UploadFile

from ..config import settings

def save_upload_to_tmp(upload: UploadFile, limit: Optional[int] = None) -> str:
    """Spool an uploaded scenario to a temp file; refuses bodies above the limit."""
    limit = settings.MAX_UPLOAD_BYTES if limit is None else limit
    fd, path = tempfile.mkstemp(prefix="incoming_", suffix=f"_{os.path.basename(upload.filename or 'scenario')}")
    with os.fdopen(fd, "wb") as f:
        shutil.copyfileobj(upload.file, f)
    if os.path.getsize(path) > limit:
        os.remove(path)
        raise ValueError(f"upload exceeds {limit} bytes")
    return path

def resolve_output(out: Optional[str], default_name: str) -> Optional[Path]:
    """None or '-' means stdout; a directory gets default_name inside it."""
    if out is None or out == "-":
        return None
    p = Path(out)
    if p.is_dir():
        p = p / default_name
    return p

def write_output(text: str, out: Optional[str], default_name: str = "out.csv") -> Optional[Path]:
    p = resolve_output(out, default_name)
    if p is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    p.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps "\n" line endings on every platform
    with open(p, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return p
