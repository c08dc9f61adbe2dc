"""Cover-file mixing: publish XORs of every k-subset of cover and legitimate blocks.

Blocks are indexed [c_1..c_beta, l_1..l_alpha] (covers first). A requester who
knows the covers reduces each codeword to an equation over the legitimate
blocks and recovers them by Gaussian elimination once the fetched set has rank
alpha.

Block stream: 8-byte big-endian content length, the content, zero padding up
to a multiple of block_size.

Meta file: UTF-8 ``key: value`` lines, in this order::

    content_hash: <sha256 hex of the content>
    length_blocks: <alpha>
    alpha: <alpha>
    beta: <beta>
    k: <k>
    block_size: <bytes>
    seed: <hex naming seed>
    cover: <index> <sha256 hex of cover block>   (one line per cover, 1-based)
"""
from __future__ import annotations

import hashlib
import hmac
import logging
import math
import struct
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..errors import CorruptionError, CoverParamsError, UnsolvableError
from ..net.names import Name
from . import gf2

logger = logging.getLogger("conlab")

LENGTH_HEADER = struct.Struct(">Q")
MIN_BLOCK_SIZE = 16
COVER_PREFIX = "cover"


@dataclass(frozen=True)
class CoverParams:
    alpha: int
    beta: int
    k: int
    block_size: int
    seed: bytes = b""

    def __post_init__(self):
        if self.alpha < 1 or self.beta < 1:
            raise CoverParamsError("alpha and beta must be at least 1")
        if not 2 <= self.k <= self.alpha + self.beta:
            raise CoverParamsError(f"k must lie in [2, {self.alpha + self.beta}], got {self.k}")
        if self.block_size < MIN_BLOCK_SIZE:
            raise CoverParamsError(f"block_size must be >= {MIN_BLOCK_SIZE}")


@dataclass(frozen=True)
class Codeword:
    subset: Tuple[int, ...]
    payload: bytes
    name: Name


@dataclass
class CoverMeta:
    content_hash: str
    alpha: int
    beta: int
    k: int
    block_size: int
    seed: bytes
    cover_hashes: List[str] = field(default_factory=list)

    @property
    def length_blocks(self) -> int:
        return self.alpha

    @property
    def params(self) -> CoverParams:
        return CoverParams(self.alpha, self.beta, self.k, self.block_size, self.seed)


# ----------------- blocks -----------------

def split_blocks(content: bytes, block_size: int) -> List[bytes]:
    if block_size < MIN_BLOCK_SIZE:
        raise CoverParamsError(f"block_size must be >= {MIN_BLOCK_SIZE}, got {block_size}")
    stream = LENGTH_HEADER.pack(len(content)) + content
    padded = -(-len(stream) // block_size) * block_size
    stream += b"\x00" * (padded - len(stream))
    return [stream[i:i + block_size] for i in range(0, len(stream), block_size)]


def join_blocks(blocks: Sequence[bytes]) -> bytes:
    stream = b"".join(blocks)
    if len(stream) < LENGTH_HEADER.size:
        raise CorruptionError("block stream shorter than its length header")
    (length,) = LENGTH_HEADER.unpack_from(stream)
    if length > len(stream) - LENGTH_HEADER.size:
        raise CorruptionError(f"declared length {length} exceeds block stream")
    return stream[LENGTH_HEADER.size:LENGTH_HEADER.size + length]


def _as_rows(blocks: Sequence[bytes]) -> np.ndarray:
    sizes = {len(b) for b in blocks}
    if len(sizes) > 1:
        raise CoverParamsError("all blocks must have the same length")
    return np.frombuffer(b"".join(blocks), dtype=np.uint8).reshape(len(blocks), -1)


# ----------------- encode -----------------

def name_codeword(meta: CoverMeta | bytes, subset: Iterable[int]) -> Name:
    seed = meta.seed if isinstance(meta, CoverMeta) else meta
    message = b",".join(str(i).encode("ascii") for i in sorted(subset))
    tag = hmac.new(seed, message, hashlib.sha256).hexdigest()
    return Name.of(COVER_PREFIX, tag)


def encode(legit: Sequence[bytes], covers: Sequence[bytes], k: int, seed: bytes) -> List[Codeword]:
    """One codeword per k-subset of [covers..., legit...], in lexicographic subset order."""
    blocks = list(covers) + list(legit)
    if not legit or not covers:
        raise CoverParamsError("need at least one legitimate and one cover block")
    if not 2 <= k <= len(blocks):
        raise CoverParamsError(f"k must lie in [2, {len(blocks)}], got {k}")
    rows = _as_rows(blocks)
    out = []
    for subset in combinations(range(len(blocks)), k):
        payload = np.bitwise_xor.reduce(rows[list(subset)], axis=0)
        out.append(Codeword(subset, payload.tobytes(), name_codeword(seed, subset)))
    logger.info("Encoded %d codewords", len(out), extra={"alpha": len(legit), "beta": len(covers), "k": k})
    return out


def encode_content(content: bytes, covers: Sequence[bytes], params: CoverParams) -> Tuple[List[Codeword], CoverMeta]:
    legit = split_blocks(content, params.block_size)
    if len(legit) != params.alpha:
        raise CoverParamsError(f"content splits into {len(legit)} blocks, params declare alpha={params.alpha}")
    if len(covers) != params.beta:
        raise CoverParamsError(f"expected {params.beta} cover blocks, got {len(covers)}")
    meta = CoverMeta(
        content_hash=hashlib.sha256(content).hexdigest(),
        alpha=params.alpha,
        beta=params.beta,
        k=params.k,
        block_size=params.block_size,
        seed=params.seed,
        cover_hashes=[hashlib.sha256(c).hexdigest() for c in covers],
    )
    return encode(legit, covers, params.k, params.seed), meta


def encode_cost(alpha: int, beta: int, k: int) -> int:
    """Number of codeword XORs; never above the (alpha+beta)^k bound."""
    count = math.comb(alpha + beta, k)
    if count > (alpha + beta) ** k:
        raise AssertionError("codeword count exceeds (alpha+beta)^k")
    return count


# ----------------- decode -----------------

def _legit_vector(subset: Iterable[int], beta: int, alpha: int) -> np.ndarray:
    v = np.zeros(alpha, dtype=np.uint8)
    for i in subset:
        if i >= beta:
            v[i - beta] = 1
    return v


def solvable(subsets: Sequence[Iterable[int]], cover_indices: Iterable[int], alpha: int) -> bool:
    """True iff the legitimate-index indicator vectors reach rank alpha."""
    known = set(cover_indices)
    if not subsets:
        return False
    beta = len(known)
    rows = [_legit_vector([i for i in s if i not in known], beta, alpha) for s in subsets]
    return gf2.rank(rows) == alpha


def plan_fetch(codewords: Sequence[Codeword], cover_count: int, alpha: int) -> List[Codeword]:
    """Greedy pick of codewords that raise the legitimate rank, stopping at alpha."""
    basis = gf2.IncrementalBasis(alpha)
    chosen = []
    for cw in codewords:
        if basis.rank == alpha:
            break
        if basis.add(_legit_vector(cw.subset, cover_count, alpha)):
            chosen.append(cw)
    return chosen


def decode(codewords: Sequence[Codeword], covers: Sequence[bytes], meta: CoverMeta) -> bytes:
    alpha, beta = meta.alpha, meta.beta
    if len(covers) != beta:
        raise CoverParamsError(f"expected {beta} cover blocks, got {len(covers)}")
    if not codewords:
        raise UnsolvableError("no codewords")
    cover_rows = _as_rows(covers)
    coeffs = np.zeros((len(codewords), alpha), dtype=np.uint8)
    rhs = np.zeros((len(codewords), meta.block_size), dtype=np.uint8)
    for r, cw in enumerate(codewords):
        if len(cw.payload) != meta.block_size:
            raise CorruptionError(f"codeword {cw.name} has {len(cw.payload)} bytes, expected {meta.block_size}")
        acc = np.frombuffer(cw.payload, dtype=np.uint8).copy()
        for i in cw.subset:
            if i < beta:
                acc ^= cover_rows[i]
            else:
                coeffs[r, i - beta] = 1
        rhs[r] = acc
    legit = gf2.solve(coeffs, rhs)
    try:
        content = join_blocks([row.tobytes() for row in legit])
    except CorruptionError as e:
        raise CorruptionError(f"reconstruction failed: {e}") from e
    if hashlib.sha256(content).hexdigest() != meta.content_hash:
        raise CorruptionError("content hash mismatch after decoding")
    return content


# ----------------- meta file -----------------

def write_meta(meta: CoverMeta, path: Path | str) -> Path:
    lines = [
        f"content_hash: {meta.content_hash}",
        f"length_blocks: {meta.length_blocks}",
        f"alpha: {meta.alpha}",
        f"beta: {meta.beta}",
        f"k: {meta.k}",
        f"block_size: {meta.block_size}",
        f"seed: {meta.seed.hex()}",
    ]
    lines += [f"cover: {i + 1} {h}" for i, h in enumerate(meta.cover_hashes)]
    p = Path(path)
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def read_meta(path: Path | str) -> CoverMeta:
    fields: Dict[str, str] = {}
    covers: Dict[int, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise CorruptionError(f"meta line {lineno}: expected 'key: value'")
        key, value = key.strip(), value.strip()
        if key == "cover":
            idx, _, digest = value.partition(" ")
            covers[int(idx)] = digest.strip()
        else:
            fields[key] = value
    try:
        meta = CoverMeta(
            content_hash=fields["content_hash"],
            alpha=int(fields["alpha"]),
            beta=int(fields["beta"]),
            k=int(fields["k"]),
            block_size=int(fields["block_size"]),
            seed=bytes.fromhex(fields.get("seed", "")),
            cover_hashes=[covers[i] for i in sorted(covers)],
        )
    except (KeyError, ValueError) as e:
        raise CorruptionError(f"incomplete meta file: {e}") from e
    if len(meta.cover_hashes) != meta.beta:
        raise CorruptionError(f"meta lists {len(meta.cover_hashes)} covers, beta={meta.beta}")
    return meta


def check_covers(meta: CoverMeta, covers: Sequence[bytes]) -> None:
    for i, (c, h) in enumerate(zip(covers, meta.cover_hashes), start=1):
        if hashlib.sha256(c).hexdigest() != h:
            raise CorruptionError(f"cover block {i} does not match the meta file")


# ----------------- directory layout used by the CLI -----------------

def write_codewords(codewords: Sequence[Codeword], outdir: Path | str) -> Path:
    d = Path(outdir) / "codewords"
    d.mkdir(parents=True, exist_ok=True)
    for cw in codewords:
        (d / f"{cw.name.components[-1].decode('ascii')}.bin").write_bytes(cw.payload)
    return d


def load_codewords(meta: CoverMeta, outdir: Path | str) -> List[Codeword]:
    """Read whichever codewords are present, matching files to subsets by name."""
    d = Path(outdir) / "codewords"
    out = []
    for subset in combinations(range(meta.alpha + meta.beta), meta.k):
        name = name_codeword(meta, subset)
        f = d / f"{name.components[-1].decode('ascii')}.bin"
        if f.exists():
            out.append(Codeword(subset, f.read_bytes(), name))
    return out


def write_covers(covers: Sequence[bytes], coverdir: Path | str) -> Path:
    d = Path(coverdir)
    d.mkdir(parents=True, exist_ok=True)
    for i, c in enumerate(covers, start=1):
        (d / f"cover_{i:03d}.bin").write_bytes(c)
    return d


def load_covers(coverdir: Path | str) -> List[bytes]:
    return [p.read_bytes() for p in sorted(Path(coverdir).glob("cover_*.bin"))]


def make_covers(beta: int, block_size: int, seed: int) -> List[bytes]:
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, block_size, dtype=np.uint8).tobytes() for _ in range(beta)]
