"""Process entry point.

Environment configuration:

    DSI_SIDECAR_CHECKPOINTS  checkpoint root directory (required)
    DSI_SIDECAR_PORT         listen port (default 8600)
    DSI_SIDECAR_HOST         bind address (default 127.0.0.1)
    DSI_SIDECAR_DEVICE       torch device (default cpu)
    DSI_SIDECAR_SECRET       optional shared secret for X-Auth-Token
    DSI_SIDECAR_THREADS      torch thread count (default 1)
"""

from __future__ import annotations

import os
import sys

import uvicorn

from .service import create_app


def main() -> int:
    checkpoints = os.environ.get("DSI_SIDECAR_CHECKPOINTS")
    if not checkpoints:
        print("DSI_SIDECAR_CHECKPOINTS is not set", file=sys.stderr)
        return 1
    app = create_app(
        checkpoints,
        device=os.environ.get("DSI_SIDECAR_DEVICE", "cpu"),
        shared_secret=os.environ.get("DSI_SIDECAR_SECRET"),
        torch_threads=int(os.environ.get("DSI_SIDECAR_THREADS", "1")),
    )
    uvicorn.run(
        app,
        host=os.environ.get("DSI_SIDECAR_HOST", "127.0.0.1"),
        port=int(os.environ.get("DSI_SIDECAR_PORT", "8600")),
        log_level="info",
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
