"""On-disk formats: columnar binary dumps, CSV tables, and the artifact cache.

The binary layout is a magic string, a little-endian uint32 header length,
a JSON header naming each column with its shape, then the column blocks as
little-endian float64 in header order.  Everything else is plain text.
"""

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"SHOG\x01"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_of(data) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# -- columnar binary ----------------------------------------------------------

def write_columnar(path, header: dict, columns: dict):
    """Write named float64 arrays after a JSON header describing them."""
    cols = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in columns.items()}
    head = dict(header)
    head["columns"] = [
        {"name": k, "shape": list(v.shape)} for k, v in cols.items()
    ]
    blob = canonical_json(head).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for v in cols.values():
            fh.write(v.tobytes())


def read_columnar(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a columnar dump")
        (hlen,) = struct.unpack("<I", fh.read(4))
        head = json.loads(fh.read(hlen).decode())
        columns = {}
        for spec in head.pop("columns"):
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            columns[spec["name"]] = data.reshape(shape).copy()
    return head, columns


def save_jump_stream(path, stream, *, alpha, dim, delta, horizon, seed):
    vectors = np.asarray(stream.vectors, dtype=float).reshape(-1, dim)
    write_columnar(
        path,
        {"kind": "jump_stream", "alpha": float(alpha), "d": int(dim),
         "delta": float(delta), "T": float(horizon), "seed": int(seed)},
        {"t": np.asarray(stream.times, dtype=float), "y": vectors},
    )


def save_paths(path, result, *, alpha, delta, seed, eps=None):
    """Dump a simulated batch: shared times plus per-path state blocks."""
    head = {"kind": "paths", "alpha": float(alpha), "d": None,
            "delta": float(delta), "T": float(result.times[-1]),
            "seed": int(seed)}
    if hasattr(result, "position"):
        head["d"] = int(result.position.shape[-1])
        head["eps"] = float(result.eps if eps is None else eps)
        cols = {"t": result.times, "y": result.position,
                "fast": result.fast_state, "potential": result.potential_integral}
    else:
        head["d"] = int(result.dim)
        cols = {"t": result.times, "y": result.unwrapped()}
        for name, values in result.functionals.items():
            cols[name] = values
    write_columnar(path, head, cols)


# -- plain-text tables --------------------------------------------------------

def _fmt(x) -> str:
    return "%.17g" % float(x)


def path_table_csv(result) -> str:
    """Long-form per-step table of a path dump."""
    if hasattr(result, "position"):
        states, extra = result.position, result.potential_integral
        extra_name = "potential"
    else:
        states, extra = result.unwrapped(), None
        extra_name = None
    n_paths, n_times, dim = states.shape
    cols = ["path", "t"] + [f"y{i}" for i in range(dim)]
    if extra is not None:
        cols.append(extra_name)
    lines = [",".join(cols)]
    for p in range(n_paths):
        for k in range(n_times):
            row = [str(p), _fmt(result.times[k])]
            row += [_fmt(v) for v in states[p, k]]
            if extra is not None:
                row.append(_fmt(extra[p, k]))
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def measure_table_csv(measure) -> str:
    """Histogram measure as bin-center/probability rows."""
    centers = measure.cell_centers()
    probs = np.asarray(measure.probs, dtype=float).reshape(-1)
    dim = centers.shape[1]
    header = ",".join([f"center{i}" for i in range(dim)] + ["probability"]) \
        if dim > 1 else "center,probability"
    lines = [header]
    for c, p in zip(centers, probs):
        lines.append(",".join([_fmt(v) for v in c] + [_fmt(p)]))
    return "\n".join(lines) + "\n"


def field_table_csv(values, dim: int) -> str:
    """Uniform-grid field as grid-point/value rows."""
    values = np.asarray(values, dtype=float)
    if dim == 1:
        n = values.shape[0]
        xs = np.arange(n) / n
        lines = ["x,value"]
        for x, v in zip(xs, values):
            lines.append(f"{_fmt(x)},{_fmt(v)}")
    else:
        n = values.shape[0]
        xs = np.arange(n) / n
        lines = ["x0,x1,value"]
        for i in range(n):
            for j in range(n):
                lines.append(f"{_fmt(xs[i])},{_fmt(xs[j])},{_fmt(values[i, j])}")
    return "\n".join(lines) + "\n"


def write_text(path, text: str):
    with open(path, "w") as fh:
        fh.write(text)


def write_json(path, record: dict):
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- artifact cache -----------------------------------------------------------

class ArtifactCache:
    """Content-addressed store for expensive intermediates.

    Keys are hashes of a canonical JSON description of how the artifact
    was produced (model fingerprint plus sampling parameters), so a hit
    is guaranteed to reproduce the uncached computation bit for bit.
    """

    def __init__(self, root):
        self.root = str(root)

    def key(self, kind: str, **parts) -> str:
        return sha256_of(canonical_json({"kind": kind, "parts": parts}))[:32]

    def _paths(self, key: str):
        return (os.path.join(self.root, key + ".npz"),
                os.path.join(self.root, key + ".json"))

    def load(self, key: str):
        data_path, meta_path = self._paths(key)
        if not (os.path.exists(data_path) and os.path.exists(meta_path)):
            return None
        with open(meta_path) as fh:
            meta = json.load(fh)
        with np.load(data_path) as npz:
            arrays = {k: npz[k] for k in npz.files}
        return meta, arrays

    def store(self, key: str, meta: dict, arrays: dict):
        os.makedirs(self.root, exist_ok=True)
        data_path, meta_path = self._paths(key)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.savez(fh, **arrays)
            os.replace(tmp, data_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        write_json(meta_path, meta)
