#!/usr/bin/env python3
"""
Reference external scorer for ``run-pipeline --scorer external``.

Speaks the pair-scorer protocol on stdin/stdout: announces itself with a
handshake line, then answers every request line with one response line.

    python scripts/constant_scorer.py --probability 0.7
    python scripts/constant_scorer.py --table scores.json      # {pair_id: probability}
    python scripts/constant_scorer.py --malformed-at 3         # smoke-test error handling
"""

import argparse
import json
import sys

PROTOCOL = {"protocol": "pair-scorer", "version": 1}


def main():
    parser = argparse.ArgumentParser(description="Constant-probability pair scorer")
    parser.add_argument("--probability", type=float, default=0.5)
    parser.add_argument("--table", default=None, help="JSON object of pair_id -> probability")
    parser.add_argument("--malformed-at", type=int, default=None,
                        help="emit a garbage line for the N-th request (0-based)")
    args = parser.parse_args()

    table = {}
    if args.table:
        with open(args.table, "r", encoding="utf-8") as f:
            table = json.load(f)

    out = sys.stdout
    out.write(json.dumps(PROTOCOL) + "\n")
    out.flush()

    for n, line in enumerate(sys.stdin):
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        pair_id = request["pair_id"]
        if args.malformed_at is not None and n == args.malformed_at:
            out.write("not json\n")
        else:
            probability = table.get(pair_id, args.probability)
            out.write(json.dumps({"pair_id": pair_id, "probability": probability}) + "\n")
        out.flush()


if __name__ == "__main__":
    main()
