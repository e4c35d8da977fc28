"""HTTP session service for interactive segmentation.

A session caches the uploaded image's feature pyramid; scribble updates
accumulate monotonically and each accepted update reruns the segmentation
warm-started from the previous solution.  Updates within a session are
serialized; sessions are independent and safe to use concurrently.
"""

import argparse
import base64
import io
import secrets
import threading

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from PIL import Image

from .dataterms import Scribbles, rasterize_polylines
from .driver import SolverConfig, run_iseg
from .errors import SubminError
from .pyramid import build_pyramid

DEFAULT_PORT = 7430
DEFAULT_MAX_DIM = 1024
MIN_DIM = 32  # coarsest stride; smaller images have no coarsest level


class Session:
    def __init__(self, image, pyramid):
        self.image = image
        self.pyramid = pyramid
        self.fg = np.zeros((0, 2), dtype=np.int64)
        self.bg = np.zeros((0, 2), dtype=np.int64)
        self.last_solution = None
        self.mask_png = None
        self.revision = 0
        self.lock = threading.Lock()


def _mask_to_png(mask):
    img = (np.asarray(mask, dtype=bool)).astype(np.uint8) * 255
    buf = io.BytesIO()
    Image.fromarray(img, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def create_app(max_dim=DEFAULT_MAX_DIM, allow_origin=None, solver_config=None):
    app = FastAPI(title="submin interactive segmentation")
    app.state.sessions = {}
    app.state.store_lock = threading.Lock()
    app.state.max_dim = max_dim
    app.state.solver_config = solver_config

    if allow_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[allow_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def get_session(session_id):
        with app.state.store_lock:
            return app.state.sessions.get(session_id)

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        try:
            img = Image.open(io.BytesIO(body))
            img.load()
        except Exception:
            return JSONResponse({"error": "not a decodable image"}, status_code=400)
        w, h = img.size
        if w > app.state.max_dim or h > app.state.max_dim:
            return JSONResponse(
                {"error": f"image {w}x{h} exceeds limit {app.state.max_dim}"},
                status_code=413,
            )
        if w < MIN_DIM or h < MIN_DIM:
            return JSONResponse(
                {"error": f"image {w}x{h} is below the minimum {MIN_DIM}"},
                status_code=400,
            )
        image = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        cfg = app.state.solver_config or SolverConfig()
        pyramid = build_pyramid(image, cfg.pyramid)
        session_id = secrets.token_hex(16)
        with app.state.store_lock:
            app.state.sessions[session_id] = Session(image, pyramid)
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/scribbles")
    async def add_scribbles(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=422)
        if_match = request.headers.get("if-match")

        with session.lock:
            if if_match is not None and if_match != str(session.revision):
                return JSONResponse(
                    {"error": "revision conflict", "revision": session.revision},
                    status_code=409,
                )
            try:
                fg_new = rasterize_polylines(payload.get("foreground", []))
                bg_new = rasterize_polylines(payload.get("background", []))
            except (TypeError, ValueError, IndexError):
                return JSONResponse({"error": "malformed polylines"}, status_code=422)
            if fg_new.size == 0 and bg_new.size == 0:
                return JSONResponse({"error": "update adds no scribble points"}, status_code=422)
            h, w = session.image.shape[:2]
            for pts in (fg_new, bg_new):
                if pts.size and (
                    (pts[:, 0] < 0).any() or (pts[:, 0] >= w).any()
                    or (pts[:, 1] < 0).any() or (pts[:, 1] >= h).any()
                ):
                    return JSONResponse(
                        {"error": "scribbles out of image bounds"}, status_code=422
                    )
            fg = np.concatenate([session.fg, fg_new]) if fg_new.size else session.fg
            bg = np.concatenate([session.bg, bg_new]) if bg_new.size else session.bg
            if fg.size == 0 or bg.size == 0:
                return JSONResponse(
                    {"error": "need at least one foreground and one background scribble"},
                    status_code=422,
                )
            fg = np.unique(fg, axis=0)
            bg = np.unique(bg, axis=0)

            cfg = app.state.solver_config or SolverConfig()
            try:
                result = run_iseg(
                    session.image,
                    Scribbles(foreground=fg, background=bg),
                    cfg=cfg,
                    pyramid=session.pyramid,
                    initial=session.last_solution,
                )
            except SubminError as err:
                return JSONResponse({"error": str(err)}, status_code=500)

            session.fg = fg
            session.bg = bg
            session.last_solution = result.solution
            session.mask_png = _mask_to_png(result.mask)
            session.revision += 1
            return {
                "mask": base64.b64encode(session.mask_png).decode("ascii"),
                "revision": session.revision,
            }

    @app.get("/sessions/{session_id}/mask")
    async def get_mask(session_id: str):
        session = get_session(session_id)
        if session is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        with session.lock:
            if session.mask_png is None:
                return JSONResponse({"error": "no mask yet"}, status_code=409)
            return Response(content=session.mask_png, media_type="image/png")

    @app.delete("/sessions/{session_id}", status_code=204)
    async def delete_session(session_id: str):
        with app.state.store_lock:
            session = app.state.sessions.pop(session_id, None)
        if session is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return Response(status_code=204)

    return app


def main(argv=None):
    parser = argparse.ArgumentParser(prog="submin-serve",
                                     description="interactive segmentation service")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--host", type=str, default="127.0.0.1")
    parser.add_argument("--allow-origin", type=str, default=None,
                        help="CORS origin allowed to call the API (the UI)")
    parser.add_argument("--max-dim", type=int, default=DEFAULT_MAX_DIM)
    args = parser.parse_args(argv)

    import uvicorn

    app = create_app(max_dim=args.max_dim, allow_origin=args.allow_origin)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    main()
