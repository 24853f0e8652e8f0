"""HTTP facade: lookalike retrieval, task dispensing, ranking collection.

Retrieval serves nearest neighbors under the loaded head's embedding (or the
raw base embedding when no head is configured). Task dispatch hands each
worker tasks they have neither completed nor been shown before, up to a
quota. Submitted rankings are validated, appended durably to a JSONL file
before the 201 response, and duplicates are rejected with 409. Static assets
(the annotation UI) are served from an optional directory at the root path.
"""

import json
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import NotFoundError, ParseError
from .jsonl import append_jsonl
from .projection import load_head, project_set
from .store import load_embeddings, top_k_similar
from .tasks import load_tasks

DEFAULT_WORKER_QUOTA = 10
MAX_K = 100


@dataclass
class ServiceConfig:
    embeddings_path: str
    tasks_path: str
    rankings_out_path: str
    head_path: str | None = None
    static_dir: str | None = None
    worker_quota: int = DEFAULT_WORKER_QUOTA
    normalize_embeddings: bool = True


class RankingSubmission(BaseModel):
    worker_id: str
    order: list[str]


def _load_completed(path: str) -> set[tuple[str, str]]:
    """(worker_id, task_id) pairs already persisted.

    A malformed final line is a torn write from a crash mid-append; the
    response for it was never sent, so it is skipped rather than fatal.
    Corruption anywhere else is an error.
    """
    completed: set[tuple[str, str]] = set()
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except FileNotFoundError:
        return completed
    for i, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            completed.add((obj["worker_id"], obj["task_id"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            if i == len(lines) - 1:
                continue
            raise ParseError(f"corrupt rankings line: {exc}", path=path, line=i + 1) from None
    return completed


def create_app(config: ServiceConfig) -> FastAPI:
    base = load_embeddings(config.embeddings_path, normalize=config.normalize_embeddings)
    head = load_head(config.head_path) if config.head_path else None
    retrieval_set = project_set(head, base) if head is not None else base
    tasks = load_tasks(config.tasks_path)
    tasks_by_id = {t.task_id: t for t in tasks}

    state_lock = threading.Lock()
    completed = _load_completed(config.rankings_out_path)
    dispatched: dict[str, set[str]] = {}

    app = FastAPI(title="lookalike service")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.get("/health")
    def health():
        return {"status": "ok", "items": len(base), "tasks": len(tasks)}

    @app.get("/lookalike/{item_id}")
    def lookalike(item_id: str, k: int = 6):
        if not 1 <= k <= MAX_K:
            return JSONResponse(
                status_code=400, content={"error": f"k must be in [1, {MAX_K}]"}
            )
        try:
            results = top_k_similar(retrieval_set, item_id, k, exclude_same_identity=True)
        except NotFoundError:
            return JSONResponse(
                status_code=404, content={"error": f"unknown item {item_id!r}"}
            )
        return [{"item_id": item, "distance": dist} for item, dist in results]

    @app.get("/tasks/next")
    def next_task(worker_id: str):
        if not worker_id:
            return JSONResponse(status_code=400, content={"error": "worker_id required"})
        with state_lock:
            seen = dispatched.setdefault(worker_id, set())
            done = {tid for (wid, tid) in completed if wid == worker_id}
            if len(seen | done) >= config.worker_quota:
                return Response(status_code=204)
            for task in tasks:
                if task.task_id in seen or task.task_id in done:
                    continue
                seen.add(task.task_id)
                return {
                    "task_id": task.task_id,
                    "query_id": task.query_id,
                    "candidates": list(task.candidates),
                    "presentation_order": list(task.presentation_order),
                }
            return Response(status_code=204)

    @app.post("/tasks/{task_id}/rankings", status_code=201)
    def submit_ranking(task_id: str, submission: RankingSubmission):
        task = tasks_by_id.get(task_id)
        if task is None:
            return JSONResponse(
                status_code=404, content={"error": f"unknown task {task_id!r}"}
            )
        if not submission.worker_id:
            return JSONResponse(status_code=400, content={"error": "worker_id required"})
        if sorted(submission.order) != sorted(task.candidates):
            return JSONResponse(
                status_code=400,
                content={"error": "order must be a permutation of the task's candidates"},
            )
        key = (submission.worker_id, task_id)
        with state_lock:
            if key in completed:
                return JSONResponse(
                    status_code=409,
                    content={"error": "ranking already submitted for this task"},
                )
            # durable before we acknowledge: fsync'd append, then respond
            append_jsonl(
                config.rankings_out_path,
                {
                    "worker_id": submission.worker_id,
                    "task_id": task_id,
                    "order": list(submission.order),
                },
                fsync=True,
            )
            completed.add(key)
        return {"status": "created"}

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="static")

    return app
