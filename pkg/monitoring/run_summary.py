"""Run Summary -- JSONL event log and per-command summary files.

Every CLI command records:
    - start / end / failure events in an append-only ``events.jsonl``
    - a machine-readable ``summary_<command>.json`` (counts, timings,
      config hash, outputs)
    - the output files it created, so a failed run can remove them

Usage::

    from monitoring.run_summary import RunSummary
    rs = RunSummary(out_dir, "gen-pairs", config_hash="ab12...")
    rs.register_output(path)
    rs.count("pairs", 1200)
    rs.write_summary()
"""

import json
import logging
import os
import threading
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from core.exceptions import MetricsReadError, MetricsWriteError

logger = logging.getLogger(__name__)


class RunSummary:
    """Thread-safe event log plus summary for one command invocation.

    Attributes:
        out_dir: Directory receiving the event log and summary.
        command: Subcommand name, used in event records and the summary file name.
    """

    def __init__(self, out_dir: str, command: str, config_hash: str = "") -> None:
        self.out_dir = out_dir
        self.command = command
        self.config_hash = config_hash
        self.events_path = os.path.join(out_dir, "events.jsonl")
        self._lock = threading.Lock()
        self._counts: Dict[str, Any] = {}
        self._timings: Dict[str, float] = {}
        self._outputs: List[str] = []
        self._started = time.time()
        os.makedirs(out_dir, exist_ok=True)

    def _write_event(self, event: Dict[str, Any]) -> None:
        """Append *event* to the JSONL log with a UTC ``ts`` field.

        Raises:
            MetricsWriteError: If the file cannot be opened or written to.
        """
        event["ts"] = datetime.now(timezone.utc).isoformat()
        try:
            with self._lock:
                with open(self.events_path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(event, ensure_ascii=False) + "\n")
        except OSError as exc:
            raise MetricsWriteError(f"Failed to write event to {self.events_path}: {exc}") from exc

    # ----------------------------------------------------------------
    # Recording
    # ----------------------------------------------------------------

    def record_event(self, event_name: str, **kwargs: Any) -> None:
        self._write_event({"event": event_name, "command": self.command, **kwargs})

    def count(self, name: str, value: Any) -> None:
        with self._lock:
            self._counts[name] = value

    def timing(self, name: str, seconds: float) -> None:
        with self._lock:
            self._timings[name] = round(seconds, 3)

    def register_output(self, path: str) -> str:
        """Remember a file this command creates; returns the path for chaining."""
        with self._lock:
            if path not in self._outputs:
                self._outputs.append(path)
        return path

    @property
    def outputs(self) -> List[str]:
        with self._lock:
            return list(self._outputs)

    # ----------------------------------------------------------------
    # Completion
    # ----------------------------------------------------------------

    def discard_outputs(self) -> List[str]:
        """Delete every registered output that exists; returns the removed paths."""
        removed = []
        for path in self.outputs:
            if os.path.isfile(path):
                try:
                    os.remove(path)
                    removed.append(path)
                except OSError as exc:
                    logger.warning(f"Could not remove partial output {path}: {exc}")
        if removed:
            logger.info(f"Removed {len(removed)} partial output(s)")
        return removed

    def summary(self, status: str = "completed") -> Dict[str, Any]:
        with self._lock:
            return {
                "command": self.command,
                "status": status,
                "config_hash": self.config_hash,
                "counts": dict(sorted(self._counts.items())),
                "timings": {**self._timings, "total_s": round(time.time() - self._started, 3)},
                "outputs": [os.path.basename(p) for p in self._outputs],
            }

    def write_summary(self, status: str = "completed") -> str:
        """Write ``summary_<command>.json`` and log an end event.

        Raises:
            MetricsWriteError: If the summary cannot be written.
        """
        path = os.path.join(self.out_dir, f"summary_{self.command}.json")
        payload = self.summary(status)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as exc:
            raise MetricsWriteError(f"Failed to write summary {path}: {exc}") from exc
        self.record_event(f"command_{status}", counts=payload["counts"], total_s=payload["timings"]["total_s"])
        return path

    # ----------------------------------------------------------------
    # Query
    # ----------------------------------------------------------------

    def read_events(self, event_type: Optional[str] = None, limit: int = 100) -> List[Dict[str, Any]]:
        """Most recent events, optionally filtered by ``event`` name.

        Raises:
            MetricsReadError: If the log exists but cannot be read.
        """
        events: List[Dict[str, Any]] = []
        if not os.path.exists(self.events_path):
            return events
        try:
            with open(self.events_path, "r", encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        ev = json.loads(line)
                    except json.JSONDecodeError:
                        continue
                    if event_type is None or ev.get("event") == event_type:
                        events.append(ev)
        except OSError as exc:
            raise MetricsReadError(f"Failed to read events from {self.events_path}: {exc}") from exc
        return events[-limit:]
