"""Seeded generation of synchronization instances.

Phase mode observes ``X_jk = A_jk (z_j conj(z_k) + sigma W_jk)`` for ``j < k``
with standard complex Gaussian ``W``; orthogonal mode observes the d x d blocks
``A_jk (Z_j Z_k^T + sigma W_jk)`` with standard matrix Gaussian ``W_jk``.
Both are stored as dense Hermitian/symmetric matrices with zero diagonal.

Randomness comes from a Philox (counter-based) bit generator keyed by
``(seed, stream_id)``; within one instance the draws happen in the fixed order
truth -> mask -> noise.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "GENERATOR_VERSION",
    "RngStream",
    "SyncInstance",
    "sample_phase_truth",
    "haar_orthogonal",
    "sample_orthogonal_truth",
    "sample_mask",
    "assemble_phase_instance",
    "assemble_orthogonal_instance",
    "stack_blocks",
    "unstack_blocks",
    "block_mask",
    "validate_instance",
    "dump_instance",
    "load_instance",
]

GENERATOR_VERSION = f"groupsync-{__version__}/numpy-{np.__version__}/Philox4x64-10/ziggurat"

PHASE_TRUTHS = ("uniform", "fixed_ones")
ORTHOGONAL_TRUTHS = ("haar", "fixed_identity")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class SyncInstance:
    """One generated problem.

    ``truth`` is an (n,) complex array in phase mode and an (n, d, d) array in
    orthogonal mode.  ``noise`` is the full (Hermitian/symmetric, zero-diagonal)
    noise matrix before masking, so auditors can recompute any derived norm.
    """

    mode: str
    n: int
    d: int
    p: float
    sigma: float
    A: np.ndarray
    noise: np.ndarray
    data: np.ndarray
    truth: np.ndarray
    truth_kind: str
    seed: int
    stream_id: int = 0
    generator_version: str = field(default=GENERATOR_VERSION)

    def metadata(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "d": self.d,
            "p": self.p,
            "sigma": self.sigma,
            "truth_kind": self.truth_kind,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "generator_version": self.generator_version,
        }


def _as_stream(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator()


def sample_phase_truth(n: int, rng, kind: str = "uniform") -> np.ndarray:
    if n < 2:
        raise ValueError("n must be at least 2")
    gen = _as_stream(rng)
    if kind == "uniform":
        theta = gen.uniform(0.0, 2 * np.pi, size=n)
        return np.exp(1j * theta)
    if kind == "fixed_ones":
        return np.ones(n, dtype=complex)
    raise ValueError(f"unknown phase truth kind {kind!r}; expected one of {PHASE_TRUTHS}")


def haar_orthogonal(d: int, rng, size: int | None = None) -> np.ndarray:
    """Haar-distributed element(s) of O(d): QR of a Gaussian matrix with the
    signs of diag(R) folded into Q."""
    gen = _as_stream(rng)
    shape = (d, d) if size is None else (size, d, d)
    G = gen.standard_normal(shape)
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return Q * signs[..., None, :]


def sample_orthogonal_truth(n: int, d: int, rng, kind: str = "haar") -> np.ndarray:
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    gen = _as_stream(rng)
    if kind == "haar":
        return haar_orthogonal(d, gen, size=n)
    if kind == "fixed_identity":
        return np.broadcast_to(np.eye(d), (n, d, d)).copy()
    raise ValueError(
        f"unknown orthogonal truth kind {kind!r}; expected one of {ORTHOGONAL_TRUTHS}"
    )


def sample_mask(n: int, p: float, rng) -> np.ndarray:
    """Erdos-Renyi adjacency: iid Bernoulli(p) upper triangle, mirrored, zero diagonal."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    gen = _as_stream(rng)
    upper = np.triu(gen.random((n, n)) < p, 1)
    return (upper | upper.T).astype(np.float64)


def stack_blocks(Z: np.ndarray) -> np.ndarray:
    """(n, d, d) -> (n*d, d), block j occupying rows j*d:(j+1)*d."""
    n, d, _ = Z.shape
    return Z.reshape(n * d, d)


def unstack_blocks(U: np.ndarray, d: int) -> np.ndarray:
    """(n*d, d) -> (n, d, d)."""
    nd = U.shape[0]
    if nd % d:
        raise ValueError(f"row count {nd} not divisible by d={d}")
    return U.reshape(nd // d, d, U.shape[1])


def block_mask(A: np.ndarray, d: int) -> np.ndarray:
    """``A kron J_d``."""
    return np.kron(A, np.ones((d, d)))


def _check_params(n: int, p: float, sigma: float) -> None:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")


def assemble_phase_instance(
    n: int, p: float, sigma: float, rng: RngStream, truth_kind: str = "uniform",
    truth: np.ndarray | None = None,
) -> SyncInstance:
    """Phase instance; a given ``truth`` replaces the sampled one (the truth
    draw is still consumed so mask and noise do not depend on it)."""
    _check_params(n, p, sigma)
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    gen = stream.generator()
    z = sample_phase_truth(n, gen, truth_kind)
    if truth is not None:
        z = np.asarray(truth, dtype=complex).copy()
    A = sample_mask(n, p, gen)
    scale = np.sqrt(0.5)
    W = gen.standard_normal((n, n)) * scale + 1j * (gen.standard_normal((n, n)) * scale)
    W = np.triu(W, 1)
    W = W + W.conj().T
    X = np.triu(A * (np.outer(z, z.conj()) + sigma * W), 1)
    X = X + X.conj().T
    inst = SyncInstance("phase", n, 1, float(p), float(sigma), A, W, X, z,
                        truth_kind, stream.seed, stream.stream_id)
    if __debug__:
        validate_instance(inst)
    return inst


def assemble_orthogonal_instance(
    n: int, d: int, p: float, sigma: float, rng: RngStream, truth_kind: str = "haar",
    truth: np.ndarray | None = None,
) -> SyncInstance:
    _check_params(n, p, sigma)
    if d < 2:
        raise ValueError("orthogonal mode needs d >= 2")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    gen = stream.generator()
    Z = sample_orthogonal_truth(n, d, gen, truth_kind)
    if truth is not None:
        Z = np.asarray(truth, dtype=float).copy()
    A = sample_mask(n, p, gen)
    G = gen.standard_normal((n, n, d, d))
    upper = np.triu(np.ones((n, n)), 1)[:, :, None, None]
    G = G * upper
    G = G + G.transpose(1, 0, 3, 2)
    W = G.transpose(0, 2, 1, 3).reshape(n * d, n * d)
    Zs = stack_blocks(Z)
    S = Zs @ Zs.T
    S = np.triu(S) + np.triu(S, 1).T
    X = block_mask(A, d) * (S + sigma * W)
    inst = SyncInstance("orthogonal", n, d, float(p), float(sigma), A, W, X, Z,
                        truth_kind, stream.seed, stream.stream_id)
    if __debug__:
        validate_instance(inst)
    return inst


def validate_instance(inst: SyncInstance) -> None:
    """Mask symmetry/zero diagonal/binary, data symmetry, data support within mask."""
    A = inst.A
    if not np.array_equal(A, A.T):
        raise AssertionError("mask is not symmetric")
    if np.any(np.diag(A) != 0):
        raise AssertionError("mask diagonal is not zero")
    if not np.all((A == 0) | (A == 1)):
        raise AssertionError("mask is not 0/1")
    X = inst.data
    if not np.array_equal(X, X.conj().T):
        raise AssertionError("data matrix is not Hermitian/symmetric")
    support = block_mask(A, inst.d) if inst.mode == "orthogonal" else A
    if np.any(X[support == 0] != 0):
        raise AssertionError("data has entries outside the mask support")


def _encode(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr)
    le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    return {
        "dtype": arr.dtype.str.lstrip("<>|="),
        "shape": list(arr.shape),
        "base64": base64.b64encode(le.tobytes()).decode("ascii"),
    }


def _decode(obj: dict) -> np.ndarray:
    dtype = np.dtype("<" + obj["dtype"]) if obj["dtype"][0] in "fci" else np.dtype(obj["dtype"])
    raw = base64.b64decode(obj["base64"])
    return np.frombuffer(raw, dtype=dtype).reshape(obj["shape"]).astype(dtype.newbyteorder("="))


def dump_instance(inst: SyncInstance, path) -> Path:
    """Write an instance as self-describing JSON; arrays are base64 IEEE-754 bytes."""
    path = Path(path)
    doc = {
        "format": "groupsync-instance",
        "format_version": 1,
        "metadata": inst.metadata(),
        "arrays": {
            "A": _encode(inst.A),
            "noise": _encode(inst.noise),
            "data": _encode(inst.data),
            "truth": _encode(inst.truth),
        },
    }
    path.write_text(json.dumps(doc))
    return path


def load_instance(path) -> SyncInstance:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "groupsync-instance":
        raise ValueError(f"{path}: not a groupsync instance file")
    meta = doc["metadata"]
    arr = {k: _decode(v) for k, v in doc["arrays"].items()}
    return SyncInstance(
        mode=meta["mode"], n=meta["n"], d=meta["d"], p=meta["p"], sigma=meta["sigma"],
        A=arr["A"], noise=arr["noise"], data=arr["data"], truth=arr["truth"],
        truth_kind=meta["truth_kind"], seed=meta["seed"], stream_id=meta["stream_id"],
        generator_version=meta["generator_version"],
    )
