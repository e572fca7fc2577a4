"""Byte <-> printable-unicode codec used by byte-level BPE tokenizers.

Byte-level BPE vocabularies store token surfaces as strings over a 256-char
alphabet of printable unicode characters; this is the standard reversible
mapping (the GPT-2 convention) between raw bytes and that alphabet.
"""

from functools import lru_cache


@lru_cache(maxsize=1)
def byte_encoder() -> dict[int, str]:
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


@lru_cache(maxsize=1)
def byte_decoder() -> dict[str, int]:
    return {c: b for b, c in byte_encoder().items()}


def token_to_bytes(token: str) -> bytes:
    """Decode one vocabulary surface string back to raw bytes.

    Characters outside the codec alphabet (special-token markup like
    ``<|endoftext|>`` stores its name literally) pass through as UTF-8.
    """
    dec = byte_decoder()
    out = bytearray()
    for ch in token:
        b = dec.get(ch)
        if b is None:
            out += ch.encode("utf-8")
        else:
            out.append(b)
    return bytes(out)
