"""Text normalization and token-level multi-pattern matching.

Thesaurus terms and documents are reduced to sequences of lowercase
alphanumeric tokens. Hyphens and apostrophes are deleted so that their
neighbours fuse ("C-reactive" -> "creactive"); every other
non-alphanumeric character separates tokens.

Matching runs an Aho-Corasick automaton whose alphabet is the set of
tokens occurring in any pattern. Document tokens outside that set map to
id 0, which has no outgoing edge anywhere, so the automaton falls back to
the root. The scan loop is compiled with numba and works on flat CSR
arrays; construction happens once in Python.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import re
import struct
import time
import unicodedata
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import Diagnostic, ValidationError

logger = logging.getLogger(__name__)

_JOINERS = re.compile("[-'‐‑’ʼ]")
_TOKEN = re.compile(r"[^\W_]+")


def normalize_text(
    raw: str | bytes,
    *,
    strip_accents: bool = False,
    diagnostics: list[Diagnostic] | None = None,
    source: str = "<text>",
) -> list[str]:
    """Lowercase ``raw`` and split it into alphanumeric tokens.

    Bytes input is decoded as UTF-8; undecodable sequences are dropped and
    reported through ``diagnostics`` when a list is supplied.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError:
            raw = raw.decode("utf-8", errors="ignore")
            msg = "invalid UTF-8 byte sequence dropped"
            if diagnostics is not None:
                diagnostics.append(Diagnostic(source, None, msg))
            else:
                logger.warning("%s: %s", source, msg)
    text = raw.lower()
    if strip_accents:
        text = "".join(
            c for c in unicodedata.normalize("NFKD", text) if not unicodedata.combining(c)
        )
    return _TOKEN.findall(_JOINERS.sub("", text))


# --------------------------------------------------------------------------
# compiled scan kernel


@njit(cache=True, nogil=True)
def _step(state, tok, root_next, edge_off, edge_tok, edge_tgt, fail):
    while True:
        if state == 0:
            return root_next[tok]
        lo = edge_off[state]
        hi = edge_off[state + 1]
        while lo < hi:
            mid = (lo + hi) >> 1
            t = edge_tok[mid]
            if t < tok:
                lo = mid + 1
            elif t > tok:
                hi = mid
            else:
                return edge_tgt[mid]
        state = fail[state]


@njit(cache=True, nogil=True)
def _scan_kernel(ids, doc_off, root_next, edge_off, edge_tok, edge_tgt, fail, out_off, out_terms, n_terms):
    n_docs = doc_off.shape[0] - 1
    seen = np.full(n_terms, -1, np.int64)
    cap = max(16, ids.shape[0] // 4)
    res = np.empty(cap, np.int32)
    res_off = np.zeros(n_docs + 1, np.int64)
    n = 0
    for d in range(n_docs):
        state = 0
        start = n
        for i in range(doc_off[d], doc_off[d + 1]):
            tok = ids[i]
            if tok == 0:
                state = 0
                continue
            state = _step(state, tok, root_next, edge_off, edge_tok, edge_tgt, fail)
            for j in range(out_off[state], out_off[state + 1]):
                term = out_terms[j]
                if seen[term] != d:
                    seen[term] = d
                    if n == cap:
                        cap *= 2
                        grown = np.empty(cap, np.int32)
                        grown[:n] = res[:n]
                        res = grown
                    res[n] = term
                    n += 1
        res[start:n] = np.sort(res[start:n])
        res_off[d + 1] = n
    return res[:n].copy(), res_off


# --------------------------------------------------------------------------
# automaton


@dataclass(eq=False)
class DictionaryMatcher:
    """Immutable token-level Aho-Corasick index over thesaurus terms.

    ``term_ids[k]`` is the term recognised by output ordinal ``k``.
    """

    term_ids: tuple[str, ...]
    patterns: tuple[tuple[str, ...], ...]
    token_ids: dict[str, int]
    strip_accents: bool = False
    _root_next: np.ndarray = field(repr=False, default=None)
    _edge_off: np.ndarray = field(repr=False, default=None)
    _edge_tok: np.ndarray = field(repr=False, default=None)
    _edge_tgt: np.ndarray = field(repr=False, default=None)
    _fail: np.ndarray = field(repr=False, default=None)
    _out_off: np.ndarray = field(repr=False, default=None)
    _out_terms: np.ndarray = field(repr=False, default=None)

    @property
    def n_states(self) -> int:
        return len(self._fail)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        get = self.token_ids.get
        return np.fromiter((get(t, 0) for t in tokens), dtype=np.int32, count=len(tokens))

    def scan_ids(self, docs: Sequence[Sequence[str]]) -> list[np.ndarray]:
        """Match a batch of token sequences; returns sorted ordinal arrays."""
        get = self.token_ids.get
        lengths = np.fromiter((len(d) for d in docs), dtype=np.int64, count=len(docs))
        doc_off = np.zeros(len(docs) + 1, np.int64)
        np.cumsum(lengths, out=doc_off[1:])
        ids = np.fromiter(
            (get(t, 0) for d in docs for t in d), dtype=np.int32, count=int(doc_off[-1])
        )
        res, res_off = _scan_kernel(
            ids, doc_off, self._root_next, self._edge_off, self._edge_tok,
            self._edge_tgt, self._fail, self._out_off, self._out_terms, len(self.term_ids),
        )
        return [res[res_off[i]:res_off[i + 1]] for i in range(len(docs))]

    def find_ordinals(self, doc: Sequence[str]) -> np.ndarray:
        return self.scan_ids([doc])[0]

    def find(self, doc: Sequence[str]) -> set[str]:
        return {self.term_ids[k] for k in self.find_ordinals(doc)}


def build_matcher_from_patterns(
    patterns: Iterable[tuple[str, Sequence[str]]], *, strip_accents: bool = False
) -> DictionaryMatcher:
    """Build an automaton from ``(term_id, tokens)`` pairs.

    Construction is deterministic: states and token ids are numbered in
    pattern order.
    """
    term_ids: list[str] = []
    pats: list[tuple[str, ...]] = []
    token_ids: dict[str, int] = {}
    goto: list[dict[int, int]] = [{}]
    own: list[list[int]] = [[]]
    for term_id, tokens in patterns:
        tokens = tuple(tokens)
        if not tokens:
            raise ValidationError(f"term {term_id!r} has no tokens")
        ordinal = len(term_ids)
        term_ids.append(term_id)
        pats.append(tokens)
        s = 0
        for tok in tokens:
            tid = token_ids.setdefault(tok, len(token_ids) + 1)
            nxt = goto[s].get(tid)
            if nxt is None:
                nxt = len(goto)
                goto.append({})
                own.append([])
                goto[s][tid] = nxt
            s = nxt
        own[s].append(ordinal)

    n_states = len(goto)
    fail = [0] * n_states
    outputs: list[list[int]] = [[] for _ in range(n_states)]
    queue = deque(sorted(goto[0].values()))
    while queue:
        s = queue.popleft()
        outputs[s] = own[s] + outputs[fail[s]]
        for tid, nxt in sorted(goto[s].items()):
            f = fail[s]
            while f and tid not in goto[f]:
                f = fail[f]
            target = goto[f].get(tid, 0)
            fail[nxt] = target if target != nxt else 0
            queue.append(nxt)

    root_next = np.zeros(len(token_ids) + 1, np.int32)
    for tid, nxt in goto[0].items():
        root_next[tid] = nxt
    edge_off = np.zeros(n_states + 1, np.int64)
    edge_tok: list[int] = []
    edge_tgt: list[int] = []
    out_off = np.zeros(n_states + 1, np.int64)
    out_terms: list[int] = []
    for s in range(n_states):
        if s:
            for tid, nxt in sorted(goto[s].items()):
                edge_tok.append(tid)
                edge_tgt.append(nxt)
        edge_off[s + 1] = len(edge_tok)
        out_terms.extend(outputs[s])
        out_off[s + 1] = len(out_terms)

    return DictionaryMatcher(
        term_ids=tuple(term_ids),
        patterns=tuple(pats),
        token_ids=token_ids,
        strip_accents=strip_accents,
        _root_next=root_next,
        _edge_off=edge_off,
        _edge_tok=np.asarray(edge_tok, np.int32),
        _edge_tgt=np.asarray(edge_tgt, np.int32),
        _fail=np.asarray(fail, np.int32),
        _out_off=out_off,
        _out_terms=np.asarray(out_terms, np.int32),
    )


def build_matcher(thesaurus) -> DictionaryMatcher:
    """Build the matcher for every term of a loaded thesaurus."""
    return build_matcher_from_patterns(
        ((t.term_id, t.tokens) for t in thesaurus.terms),
        strip_accents=thesaurus.strip_accents,
    )


def find_terms(matcher: DictionaryMatcher, doc: Sequence[str]) -> set[str]:
    """Set of term ids whose token sequence occurs contiguously in ``doc``."""
    return matcher.find(doc)


# --------------------------------------------------------------------------
# batch scanning

_WORKER_MATCHER: DictionaryMatcher | None = None


def _init_worker(matcher: DictionaryMatcher) -> None:
    global _WORKER_MATCHER
    _WORKER_MATCHER = matcher


def _scan_texts(matcher: DictionaryMatcher, texts: Sequence[str]) -> tuple[list[np.ndarray], int]:
    docs = [normalize_text(t, strip_accents=matcher.strip_accents) for t in texts]
    return matcher.scan_ids(docs), sum(len(d) for d in docs)


def _worker_scan(texts: Sequence[str]) -> tuple[list[np.ndarray], int]:
    return _scan_texts(_WORKER_MATCHER, texts)


@dataclass
class ScanResult:
    matches: list[np.ndarray]
    n_tokens: int
    seconds: float

    @property
    def n_matches(self) -> int:
        return int(sum(len(m) for m in self.matches))

    @property
    def tokens_per_second(self) -> float:
        return self.n_tokens / self.seconds if self.seconds > 0 else float("inf")

    @property
    def matches_per_second(self) -> float:
        return self.n_matches / self.seconds if self.seconds > 0 else float("inf")


def scan_texts(
    matcher: DictionaryMatcher,
    texts: Sequence[str],
    *,
    workers: int = 1,
    batch_size: int = 2000,
) -> ScanResult:
    """Normalize and match raw texts, optionally across worker processes.

    Results are returned in input order whatever the worker count.
    """
    t0 = time.perf_counter()
    batches = [texts[i:i + batch_size] for i in range(0, len(texts), batch_size)]
    matches: list[np.ndarray] = []
    n_tokens = 0
    if workers <= 1 or len(batches) <= 1:
        for batch in batches:
            m, n = _scan_texts(matcher, batch)
            matches.extend(m)
            n_tokens += n
    else:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_init_worker, initargs=(matcher,)) as pool:
            for m, n in pool.imap(_worker_scan, batches):
                matches.extend(m)
                n_tokens += n
    return ScanResult(matches, n_tokens, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# match table files

_MAGIC = b"EFMATCH1"


def _put_str(buf: bytearray, s: str) -> None:
    b = s.encode("utf-8")
    buf += struct.pack("<H", len(b))
    buf += b


def write_matches(
    path: str | Path,
    term_ids: Sequence[str],
    paper_ids: Sequence[str],
    matches: Sequence[np.ndarray],
) -> None:
    """Write the binary paper -> sorted term-ordinal table."""
    buf = bytearray(_MAGIC)
    buf += struct.pack("<I", len(term_ids))
    for t in term_ids:
        _put_str(buf, t)
    buf += struct.pack("<I", len(paper_ids))
    for pid, m in zip(paper_ids, matches, strict=True):
        _put_str(buf, pid)
        arr = np.asarray(m, dtype="<u4")
        buf += struct.pack("<I", len(arr))
        buf += arr.tobytes()
    Path(path).write_bytes(bytes(buf))


def read_matches(path: str | Path) -> tuple[list[str], list[str], list[np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:len(_MAGIC)] != _MAGIC:
        raise ValidationError(f"{path}: not a match table")
    pos = len(_MAGIC)

    def get_u32() -> int:
        nonlocal pos
        (v,) = struct.unpack_from("<I", data, pos)
        pos += 4
        return v

    def get_str() -> str:
        nonlocal pos
        (n,) = struct.unpack_from("<H", data, pos)
        pos += 2
        s = data[pos:pos + n].decode("utf-8")
        pos += n
        return s

    term_ids = [get_str() for _ in range(get_u32())]
    paper_ids: list[str] = []
    matches: list[np.ndarray] = []
    for _ in range(get_u32()):
        paper_ids.append(get_str())
        k = get_u32()
        matches.append(np.frombuffer(data, dtype="<u4", count=k, offset=pos).astype(np.int32))
        pos += 4 * k
    return term_ids, paper_ids, matches


def write_matches_csv(
    path: str | Path,
    term_ids: Sequence[str],
    paper_ids: Sequence[str],
    matches: Sequence[np.ndarray],
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("paper_id,term_ids\n")
        for pid, m in zip(paper_ids, matches, strict=True):
            fh.write(f"{pid},{' '.join(term_ids[k] for k in m)}\n")
