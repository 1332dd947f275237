"""Run-time and audit logs: separate JSON-lines files with size-based rotation."""

from __future__ import annotations

import json
import logging
import os
import time
from logging.handlers import RotatingFileHandler
from typing import Optional


class _JsonLines(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry = {"ts": round(record.created, 6), "level": record.levelname, "msg": record.getMessage()}
        entry.update(getattr(record, "fields", {}))
        return json.dumps(entry, default=str)


def _logger(name: str, path: Optional[str], max_bytes: int, backups: int) -> logging.Logger:
    log = logging.getLogger(name)
    log.propagate = False
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    if path is None:
        log.addHandler(logging.NullHandler())
    else:
        h = RotatingFileHandler(path, maxBytes=max_bytes, backupCount=backups, encoding="utf-8")
        h.setFormatter(_JsonLines())
        log.addHandler(h)
    log.setLevel(logging.INFO)
    return log


class NodeLogs:
    def __init__(self, node_id: str, log_dir: Optional[str], max_bytes: int = 1 << 20, backups: int = 3):
        if log_dir is not None:
            os.makedirs(log_dir, exist_ok=True)
        path = (lambda kind: None) if log_dir is None else (lambda kind: os.path.join(log_dir, f"{node_id}.{kind}.jsonl"))
        self.runtime = _logger(f"kvgraph.{node_id}.runtime", path("runtime"), max_bytes, backups)
        self.audit = _logger(f"kvgraph.{node_id}.audit", path("audit"), max_bytes, backups)

    def info(self, msg: str, **fields):
        self.runtime.info(msg, extra={"fields": fields})

    def error(self, msg: str, **fields):
        self.runtime.error(msg, extra={"fields": fields})

    def statement(self, **fields):
        fields.setdefault("at", time.time())
        self.audit.info("statement", extra={"fields": fields})

    def close(self):
        for log in (self.runtime, self.audit):
            for h in list(log.handlers):
                h.close()
                log.removeHandler(h)
