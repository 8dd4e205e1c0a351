"""File cache for enumerated ray sets.

Ray enumeration is by far the most expensive step and its result is
reused by the vertex, min-rank and table commands. Entries are keyed by
(n, d, sign vector, engine version); the engine version is a digest of
the enumeration source, so any change to the algorithm invalidates old
entries automatically.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import os
from pathlib import Path

from .cones import Ray


def _engine_version() -> str:
    src = Path(__file__).with_name("cones.py").read_bytes()
    return hashlib.sha256(src).hexdigest()[:12]


def _key(n: int, d: int, signs) -> str:
    sig = "".join({1: "p", -1: "m", 0: "z"}[s] for s in signs)
    return f"rays_n{n}_d{d}_{sig}_{_engine_version()}.json.gz"


def load_rays(cache_dir, n: int, d: int, signs) -> tuple[Ray, ...] | None:
    path = Path(cache_dir) / _key(n, d, signs)
    if not path.exists():
        return None
    data = json.loads(gzip.decompress(path.read_bytes()))
    return tuple(
        Ray(coords=tuple(r["coords"]), tight_set=tuple(r["tight"])) for r in data
    )


def store_rays(cache_dir, n: int, d: int, signs, rays) -> None:
    path = Path(cache_dir) / _key(n, d, signs)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = [{"coords": list(r.coords), "tight": list(r.tight_set)} for r in rays]
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(gzip.compress(json.dumps(data, separators=(",", ":")).encode()))
    os.replace(tmp, path)


def default_cache_dir() -> str | None:
    return os.environ.get("OKSOS_CACHE")


def bundled_data_dir() -> Path:
    """Read-only ray sets shipped with the package for the heaviest pairs."""
    return Path(__file__).with_name("data") / "rays"


def load_bundled_rays(n: int, d: int, signs) -> tuple[Ray, ...] | None:
    root = bundled_data_dir()
    if not root.is_dir():
        return None
    return load_rays(root, n, d, signs)
