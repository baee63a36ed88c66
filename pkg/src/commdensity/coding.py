"""Elias gamma codes and the transcript wire format.

Bitstrings are plain ``str`` objects over ``"0"``/``"1"``; they stay short
(a few thousand bits per session) and are trivially inspectable.

Wire format of a serialized transcript::

    uint16 LE   r, number of rounds
    uint32 LE   n, block length
    bytes       concatenated gamma codewords, MSB first, zero padded to a byte
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

_HEADER = struct.Struct("<HI")


class MalformedTranscriptError(ValueError):
    pass


def gamma_length(j: int) -> int:
    """Length ``2 floor(log2 j) + 1`` of the gamma codeword for ``j``."""
    if j < 1:
        raise ValueError(f"gamma code needs a positive integer, got {j}")
    return 2 * j.bit_length() - 1


def elias_gamma_encode(j: int) -> str:
    if j < 1:
        raise ValueError(f"gamma code needs a positive integer, got {j}")
    body = format(j, "b")
    return "0" * (len(body) - 1) + body


def elias_gamma_decode(bits: str, pos: int = 0) -> tuple[int, int]:
    """Decode one codeword starting at ``pos``; returns ``(j, bits consumed)``."""
    zeros = 0
    end = len(bits)
    while pos + zeros < end and bits[pos + zeros] == "0":
        zeros += 1
    stop = pos + 2 * zeros + 1
    if stop > end:
        raise MalformedTranscriptError(f"truncated codeword at bit {pos}")
    body = bits[pos + zeros:stop]
    if body[0] != "1" or any(c not in "01" for c in body):
        raise MalformedTranscriptError(f"invalid codeword at bit {pos}")
    return int(body, 2), 2 * zeros + 1


@dataclass(frozen=True)
class Transcript:
    """The messages of one session: one codeword index per round."""

    round_indices: tuple[int, ...]
    n: int = 0

    @property
    def r(self) -> int:
        return len(self.round_indices)

    @property
    def round_bits(self) -> list[int]:
        return [gamma_length(j) for j in self.round_indices]

    @property
    def bit_count(self) -> int:
        return sum(self.round_bits)

    @property
    def bits(self) -> str:
        return "".join(elias_gamma_encode(j) for j in self.round_indices)

    def to_bytes(self) -> bytes:
        bits = self.bits
        pad = (-len(bits)) % 8
        payload = int(bits + "0" * pad, 2).to_bytes((len(bits) + pad) // 8, "big") if bits else b""
        return _HEADER.pack(self.r, self.n) + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transcript":
        if len(data) < _HEADER.size:
            raise MalformedTranscriptError("missing header")
        r, n = _HEADER.unpack_from(data)
        payload = data[_HEADER.size:]
        bits = format(int.from_bytes(payload, "big"), f"0{8 * len(payload)}b") if payload else ""
        pos, indices = 0, []
        for _ in range(r):
            j, used = elias_gamma_decode(bits, pos)
            indices.append(j)
            pos += used
        if len(bits) - pos >= 8 or "1" in bits[pos:]:
            raise MalformedTranscriptError("bad padding after last codeword")
        return cls(tuple(indices), n)
