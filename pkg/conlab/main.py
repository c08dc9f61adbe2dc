# conlab/main.py
from fastapi import FastAPI, UploadFile, File, Form, HTTPException, BackgroundTasks, Depends
from fastapi.responses import JSONResponse, RedirectResponse, PlainTextResponse
from typing import Optional, Dict
import os
import uuid
import traceback

from .logging_setup import setup_logging
from .errors import ConlabError
from .models import JobStatus
from .processing.metrics import matrix_csv
from .processing.pipeline import run_simulation, compare_defenses
from .utils.files import save_upload_to_tmp
from .utils.parse import load_scenario
from .web.deps import require_token

# ----------------- Config -----------------
logger = setup_logging()

# ----------------- App -----------------
app = FastAPI(
    title="conlab",
    version="1.0.0",
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url="/openapi.json",
)

@app.get("/", include_in_schema=False)
def root():
    return RedirectResponse(url="/docs")

# ----------------- Jobs Store -----------------
JOBS: Dict[str, JobStatus] = {}   # rid -> queued | running | done (result) | error (error)

def _load(upload: UploadFile):
    try:
        tmp = save_upload_to_tmp(upload)
    except ValueError as e:
        raise HTTPException(status_code=413, detail=str(e))
    try:
        return load_scenario(tmp)
    except ConlabError as e:
        raise HTTPException(status_code=422, detail=str(e))
    finally:
        os.remove(tmp)

def _simulate(scenario, seed: Optional[int]) -> Dict:
    trace, result = run_simulation(scenario, seed=seed)
    return {
        "scenario_id": result.scenario_id,
        "seed": result.seed,
        "digest": trace.digest(),
        "metrics": result.as_dict(),
        "trace_csv": trace.to_csv(),
    }

# ----------------- API -----------------
@app.post("/v1/simulate")
async def simulate(
    scenario: UploadFile = File(...),
    seed: Optional[int] = Form(None),
    token=Depends(require_token()),
):
    s = _load(scenario)
    extra = {"scenario": s.scenario_id, "seed": seed, "defense": s.defense.kind.value}
    try:
        return JSONResponse(content=_simulate(s, seed), status_code=200)
    except ConlabError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.exception("Unhandled error", extra=extra)
        raise HTTPException(status_code=500, detail=str(e))

@app.post("/v1/simulate_async")
async def simulate_async(
    background: BackgroundTasks,
    scenario: UploadFile = File(...),
    seed: Optional[int] = Form(None),
    token=Depends(require_token()),
):
    s = _load(scenario)
    rid = str(uuid.uuid4())
    JOBS[rid] = JobStatus(status="queued")

    def _work():
        extra = {"scenario": s.scenario_id, "seed": seed, "defense": s.defense.kind.value, "rid": rid}
        JOBS[rid] = JobStatus(status="running")
        try:
            JOBS[rid] = JobStatus(status="done", result=_simulate(s, seed))
        except Exception as e:
            logger.error("Async job failed: %s\n%s", e, traceback.format_exc(), extra=extra)
            JOBS[rid] = JobStatus(status="error", error=str(e))

    background.add_task(_work)
    return JSONResponse({"job_id": rid, "status": "queued"}, status_code=202)

@app.get("/v1/jobs/{rid}")
async def get_job_status(rid: str, token=Depends(require_token())):
    data = JOBS.get(rid)
    if data is None:
        return JSONResponse({"message": "not found"}, status_code=404)
    return JSONResponse(data.model_dump(exclude_none=True), status_code=200)

@app.post("/v1/compare")
async def compare(
    scenario: UploadFile = File(...),
    defenses: str = Form("none,wait_before_reply,delay_first_k,collaborative,probabilistic"),
    seed: Optional[int] = Form(None),
    token=Depends(require_token()),
):
    s = _load(scenario)
    names = [d.strip() for d in defenses.split(",") if d.strip()]
    try:
        results = compare_defenses(s, names, seed=seed)
    except (ConlabError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.exception("Unhandled error", extra={"scenario": s.scenario_id, "seed": seed, "defense": "-"})
        raise HTTPException(status_code=500, detail=str(e))
    return PlainTextResponse(matrix_csv(results), media_type="text/csv")
