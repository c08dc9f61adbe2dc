import hmac
from typing import Optional

from fastapi import Header, HTTPException

from ..config import settings

def require_token():
    """Header check against CONLAB_API_TOKEN; open when no token is configured."""
    async def _dep(x_api_token: Optional[str] = Header(None)):
        expected = settings.API_TOKEN
        if not expected:
            return None
        if not x_api_token:
            raise HTTPException(status_code=401, detail="X-API-Token header required")
        if not hmac.compare_digest(x_api_token, expected):
            raise HTTPException(status_code=403, detail="Invalid API token")
        return x_api_token
    return _dep
