"""Shared test plumbing."""

import os
import subprocess
import sys


def run_with_threads(script: str, n: int) -> str:
    """Run ``script`` in a fresh interpreter with ``n`` numba threads; returns its last stdout line."""
    env = dict(os.environ, NUMBA_NUM_THREADS=str(n))
    out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip().splitlines()[-1]
