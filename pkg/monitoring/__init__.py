"""Per-command run summaries and the JSONL event log."""
