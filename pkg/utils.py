import dataclasses
import json
import time
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np
import psutil


class Logger:
    def __init__(self, config=None, verbose=True):
        self.config = config
        self.verbose = verbose
        self.start_time = time.time()
        self.log = {}

    def _memory(self):
        try:
            memory_stats = jax.device_get(jax.devices()[0].memory_stats())
        except Exception:
            memory_stats = None
        device_memory = memory_stats["peak_bytes_in_use"] / 1024**3 if memory_stats else None
        ram_usage = psutil.Process().memory_info().rss / 1024**3
        return device_memory, ram_usage

    def log_stage(self, stage, **metrics):
        """Record metrics of one processing stage and print a progress line."""
        self.log.setdefault(stage, []).append(to_builtin(metrics))
        if not self.verbose:
            return

        device_memory, ram_usage = self._memory()
        memory = f"ram {ram_usage:.1f}G" if device_memory is None else f"gpu {device_memory:.1f}G ram {ram_usage:.1f}G"
        fields = " ".join(f"{key}:{_short(value)}" for key, value in metrics.items())
        print(f"[{time.strftime('%H:%M:%S')} {memory}] {stage} {fields}".rstrip())

    def get_results(self):
        """Return all results."""
        return {**self.log, "total_time": time.time() - self.start_time}


def _short(value):
    if isinstance(value, float):
        return f"{value:.4g}"
    return value


def to_builtin(d):
    """Recursively convert jax/numpy values and dataclasses to JSON-ready Python objects."""
    if dataclasses.is_dataclass(d) and not isinstance(d, type):
        return to_builtin(dataclasses.asdict(d))
    if isinstance(d, dict):
        return {k: to_builtin(v) for k, v in d.items()}
    elif isinstance(d, (list, tuple)):
        return [to_builtin(v) for v in d]
    elif isinstance(d, (jnp.ndarray, np.ndarray)):
        return d.tolist()
    elif isinstance(d, np.generic):
        return d.item()
    else:
        return d


def save_results(results, path):
    """Write a JSON results file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_builtin(results), f, indent=2)
    return path
