"""Runnable service entrypoint.

Configuration comes from flags and environment variables; flags win.

    --bind / RXTROPIC_BIND                     host:port, default 127.0.0.1:8000
    --store / RXTROPIC_STORE                   store path (required)
    --session-ttl-minutes / RXTROPIC_SESSION_TTL_MINUTES   default 480
    --duplicate-window-days / RXTROPIC_DUP_WINDOW_DAYS     default 30
    --ui-dir / RXTROPIC_UI_DIR                 static web console assets

Startup failures (occupied port, unopenable store, store held by another
process) exit nonzero.
"""

from __future__ import annotations

import argparse
import os
import sqlite3
import sys

import uvicorn

from .api import ServiceConfig, build_app
from .errors import RxError
from .store import StoreLock


def _parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind must be host:port, got {bind!r}")
    return host, int(port)


def parse_config(argv: list[str] | None = None) -> ServiceConfig:
    env = os.environ
    parser = argparse.ArgumentParser(prog="rxtropic-server", description=__doc__)
    parser.add_argument("--bind", default=env.get("RXTROPIC_BIND", "127.0.0.1:8000"))
    parser.add_argument("--store", default=env.get("RXTROPIC_STORE"))
    parser.add_argument(
        "--session-ttl-minutes",
        type=int,
        default=int(env.get("RXTROPIC_SESSION_TTL_MINUTES", "480")),
    )
    parser.add_argument(
        "--duplicate-window-days",
        type=int,
        default=int(env.get("RXTROPIC_DUP_WINDOW_DAYS", "30")),
    )
    parser.add_argument("--ui-dir", default=env.get("RXTROPIC_UI_DIR"))
    args = parser.parse_args(argv)
    if not args.store:
        parser.error("--store (or RXTROPIC_STORE) is required")
    host, port = _parse_bind(args.bind)
    return ServiceConfig(
        store_path=args.store,
        host=host,
        port=port,
        session_ttl_minutes=args.session_ttl_minutes,
        duplicate_window_days=args.duplicate_window_days,
        ui_dir=args.ui_dir,
    )


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    lock = StoreLock(config.store_path)
    try:
        lock.acquire()
    except RxError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: cannot open store at {config.store_path}: {exc}", file=sys.stderr)
        return 1
    try:
        app = build_app(config)
        server = uvicorn.Server(
            uvicorn.Config(app, host=config.host, port=config.port, log_level="warning")
        )
        server.run()
        return 0 if server.started else 1
    except (OSError, sqlite3.Error, RxError, SystemExit) as exc:
        code = exc.code if isinstance(exc, SystemExit) else 1
        print(f"error: {exc}", file=sys.stderr)
        return int(code or 1)
    finally:
        lock.release()


if __name__ == "__main__":
    sys.exit(main())
