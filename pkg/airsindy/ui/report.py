"""JSON/CSV artifact writers and the per-run manifest."""
import hashlib
import json
import logging
import math
import os
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from airsindy import __version__


def _jsonable(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return _finite_or_none(float(value))
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, pd.Timestamp):
        return value.isoformat()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if hasattr(value, 'value'):
        return value.value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _finite_or_none(x):
    return x if math.isfinite(x) else None


def _clean(obj):
    """Replaces non-finite floats with None so the output is strict JSON."""
    if isinstance(obj, float):
        return _finite_or_none(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_clean(obj), f, indent=2, sort_keys=True, default=_jsonable, allow_nan=False)
        f.write('\n')
    return path


def write_frame(path, frame):
    frame.to_csv(path, index=False, lineterminator='\n')
    return path


def sha256_of(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest:
    """
    Collects the artifacts of one CLI command and writes ``manifest.json``.

    The creation timestamp is the only field that differs between identical runs.
    """

    def __init__(self, out_dir, command, config):
        self.out_dir = out_dir
        self.command = command
        self.config = config
        self.artifacts = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def add(self, path):
        self.artifacts.append(path)
        return path

    def json(self, name, obj):
        return self.add(write_json(self.path(name), obj))

    def frame(self, name, frame):
        return self.add(write_frame(self.path(name), frame))

    def write(self):
        entries = [
            {'file': os.path.basename(p), 'sha256': sha256_of(p)}
            for p in sorted(self.artifacts)
        ]
        manifest = {
            'tool': 'airsindy',
            'version': __version__,
            'command': self.command,
            'config': self.config,
            'artifacts': entries,
            'created': datetime.now(timezone.utc).isoformat(),
        }
        path = write_json(self.path('manifest.json'), manifest)
        logging.info(f"Wrote {len(entries)} artifacts and manifest to {self.out_dir}")
        return path
