"""Fixed-width byte algebra underlying every protocol equation.

Every value in the scheme (digests, nonces, masks, identities, keys) is a
32-byte :class:`Block`, so XOR is always well typed and concatenation of
blocks needs no length framing.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence, Union

BLOCK_SIZE = 32
HASH_NAME = "sha256"

BytesLike = Union[bytes, bytearray, "Block"]


@dataclass(frozen=True)
class Block:
    """An opaque 32-byte value."""

    data: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.data, (bytes, bytearray)):
            raise TypeError(f"Block requires bytes, got {type(self.data).__name__}")
        if len(self.data) != BLOCK_SIZE:
            raise ValueError(f"Block must be exactly {BLOCK_SIZE} bytes, got {len(self.data)}")
        object.__setattr__(self, "data", bytes(self.data))

    @classmethod
    def zero(cls) -> Block:
        return cls(bytes(BLOCK_SIZE))

    @classmethod
    def from_hex(cls, text: str) -> Block:
        if len(text) != 2 * BLOCK_SIZE:
            raise ValueError(f"expected {2 * BLOCK_SIZE} hex characters, got {len(text)}")
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.data.hex()

    def __bytes__(self) -> bytes:
        return self.data

    def __xor__(self, other: Block) -> Block:
        return xor(self, other)

    def __repr__(self) -> str:
        return f"Block({self.data.hex()[:16]}...)"


def _pad(raw: bytes, what: str) -> bytes:
    if not 1 <= len(raw) <= BLOCK_SIZE:
        raise ValueError(f"{what} must be 1-{BLOCK_SIZE} bytes, got {len(raw)}")
    return raw.ljust(BLOCK_SIZE, b"\x00")


@dataclass(frozen=True)
class Identity:
    """A user or server label, canonically encoded as a zero-padded Block.

    Equality is decided on the encoded block alone.
    """

    label: str

    def __post_init__(self) -> None:
        raw = self.label.encode("utf-8")
        if raw.endswith(b"\x00"):
            raise ValueError("identity label must not end with a NUL byte")
        _pad(raw, "identity label")

    @property
    def block(self) -> Block:
        return Block(_pad(self.label.encode("utf-8"), "identity label"))

    @classmethod
    def from_block(cls, block: Block) -> Identity:
        raw = block.data.rstrip(b"\x00")
        return cls(raw.decode("utf-8"))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Identity):
            return NotImplemented
        return self.block == other.block

    def __hash__(self) -> int:
        return hash(self.block)

    def __str__(self) -> str:
        return self.label


def _raw(data: BytesLike) -> bytes:
    return data.data if isinstance(data, Block) else bytes(data)


def digest(data: BytesLike) -> Block:
    """One-way function of the scheme (SHA-256)."""
    return Block(hashlib.sha256(_raw(data)).digest())


def digest2(data: BytesLike) -> Block:
    """Iterated digest: ``digest(digest(data))``."""
    return digest(digest(data))


def xor(a: Block, b: Block) -> Block:
    return Block(bytes(x ^ y for x, y in zip(a.data, b.data)))


def concat(parts: Sequence[Block]) -> bytes:
    if not parts:
        raise ValueError("concat needs at least one block")
    return b"".join(p.data for p in parts)


def make_rng(seed: int) -> random.Random:
    """Deterministic generator for all nonces; seed is an unsigned 64-bit int."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return random.Random(seed)


def random_block(rng: random.Random) -> Block:
    return Block(rng.randbytes(BLOCK_SIZE))


def encode_password(pw: bytes | str) -> Block:
    if isinstance(pw, str):
        pw = pw.encode("utf-8")
    return Block(_pad(pw, "password"))


def mask_password(pw: bytes | str, bio: Block) -> Block:
    """Digest of the zero-padded password XORed with the biometric template."""
    return digest(xor(encode_password(pw), bio))
