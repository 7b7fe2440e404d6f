"""Finite relational structures over a fixed universe {0..n-1}.

Representation, induced substructures, (partial) isomorphism testing,
canonical forms by pruned permutation search, and exhaustive enumeration
of structures up to isomorphism via an orbit sweep over raw bit tables.

The canonical bit layout used throughout is "staged": bit positions are
grouped by the maximum element occurring in the tuple, so that fixing the
images of elements 0..d decides a prefix of the encoding. This is what
makes the branch-and-bound canonical search and the orbit sweep cheap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .errors import CapExceeded, InputError

DEFAULT_CANON_CAP = 8
DEFAULT_ENUM_BITS = 24


@dataclass(frozen=True)
class Vocabulary:
    """Ordered relation symbols with arities; max_arity is the arity bound k."""

    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.symbols:
            raise InputError("vocabulary must contain at least one symbol")
        names = [name for name, _ in self.symbols]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate symbol names in vocabulary: {names}")
        for name, arity in self.symbols:
            if not name or not isinstance(name, str):
                raise InputError("symbol names must be nonempty strings")
            if arity < 1:
                raise InputError(f"symbol {name} has arity {arity}; arities must be >= 1")

    @property
    def max_arity(self) -> int:
        return max(arity for _, arity in self.symbols)

    def index_of(self, name: str) -> int:
        for i, (sym, _) in enumerate(self.symbols):
            if sym == name:
                return i
        raise InputError(f"unknown relation symbol {name!r}")

    def spec(self) -> str:
        return " ".join(f"{name}/{arity}" for name, arity in self.symbols)


GRAPH_VOCAB = Vocabulary((("E", 2),))


class Structure:
    """Immutable finite structure: universe {0..order-1} plus one tuple set
    per relation symbol (tuple present <=> relation value 1)."""

    __slots__ = ("vocab", "order", "tables", "_hash", "_row_cache")

    def __init__(self, vocab: Vocabulary, order: int, tables):
        if order < 1:
            raise InputError(f"structures must have order >= 1, got {order}")
        tables = tuple(frozenset(map(tuple, t)) for t in tables)
        if len(tables) != len(vocab.symbols):
            raise InputError("one table per vocabulary symbol is required")
        for (name, arity), table in zip(vocab.symbols, tables):
            for tup in table:
                if len(tup) != arity:
                    raise InputError(f"tuple {tup} has wrong length for {name}/{arity}")
                if any(not (0 <= e < order) for e in tup):
                    raise InputError(f"tuple {tup} of {name} out of range for order {order}")
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "_hash", hash((vocab, order, tables)))
        object.__setattr__(self, "_row_cache", {})

    def __setattr__(self, *args):
        raise AttributeError("Structure is immutable")

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Structure):
            return NotImplemented
        return (self._hash == other._hash and self.order == other.order
                and self.vocab == other.vocab and self.tables == other.tables)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        sizes = ", ".join(f"{name}:{len(t)}" for (name, _), t in zip(self.vocab.symbols, self.tables))
        return f"Structure(order={self.order}, {sizes})"

    def holds(self, sym_idx: int, tup: tuple[int, ...]) -> bool:
        return tup in self.tables[sym_idx]

    def universe(self) -> range:
        return range(self.order)

    def binary_rows(self, sym_idx: int):
        """(out_rows, in_rows) bitmask adjacency for an arity-2 symbol."""
        cached = self._row_cache.get(sym_idx)
        if cached is None:
            out = [0] * self.order
            inn = [0] * self.order
            for a, b in self.tables[sym_idx]:
                out[a] |= 1 << b
                inn[b] |= 1 << a
            cached = (tuple(out), tuple(inn))
            self._row_cache[sym_idx] = cached
        return cached

    def is_graph(self) -> bool:
        """Single binary symbol, symmetric, irreflexive."""
        if len(self.vocab.symbols) != 1 or self.vocab.symbols[0][1] != 2:
            return False
        table = self.tables[0]
        return all(a != b and (b, a) in table for a, b in table)


def relabel(struct: Structure, perm) -> Structure:
    """Apply a universe permutation; perm[v] is the new label of v."""
    tables = [
        [tuple(perm[e] for e in tup) for tup in table]
        for table in struct.tables
    ]
    return Structure(struct.vocab, struct.order, tables)


def graph_complement(struct: Structure) -> Structure:
    """Complement of a graph: same vertices, exactly the missing edges."""
    if not struct.is_graph():
        raise InputError("complement is defined for graphs only")
    n = struct.order
    table = {(i, j) for i in range(n) for j in range(n) if i != j} - struct.tables[0]
    return Structure(struct.vocab, n, [table])


def induced(struct: Structure, elements) -> tuple[Structure, dict[int, int]]:
    """Substructure induced on `elements`, relabeled to {0..m-1} preserving
    ascending element order. Also returns the relabeling map old -> new."""
    elems = sorted(set(elements))
    if not elems:
        raise InputError("induced substructure needs a nonempty element set")
    if any(not (0 <= e < struct.order) for e in elems):
        raise InputError(f"elements {elems} out of range for order {struct.order}")
    remap = {e: i for i, e in enumerate(elems)}
    keep = set(elems)
    tables = [
        [tuple(remap[e] for e in tup) for tup in table if keep.issuperset(tup)]
        for table in struct.tables
    ]
    return Structure(struct.vocab, len(elems), tables), remap


def is_partial_isomorphism(a: Structure, b: Structure, mapping: dict[int, int]) -> bool:
    """True iff `mapping` (an injective finite map) preserves every relation on
    every tuple over its domain, in both truth values."""
    if a.vocab != b.vocab:
        raise InputError("partial isomorphism requires equal vocabularies")
    dom = list(mapping)
    if any(not (0 <= e < a.order) for e in dom):
        raise InputError("domain element out of range")
    if any(not (0 <= e < b.order) for e in mapping.values()):
        raise InputError("range element out of range")
    if len(set(mapping.values())) != len(dom):
        return False
    for idx, (_, arity) in enumerate(a.vocab.symbols):
        ta, tb = a.tables[idx], b.tables[idx]
        for tup in itertools.product(dom, repeat=arity):
            if (tup in ta) != (tuple(mapping[e] for e in tup) in tb):
                return False
    return True


def _profile(struct: Structure, v: int):
    sig = []
    for table in struct.tables:
        cnt = sum(1 for tup in table if v in tup)
        self_cnt = sum(1 for tup in table if all(e == v for e in tup))
        sig.append((cnt, self_cnt))
    return tuple(sig)


def _extension_consistent(a, b, mapping, new_src):
    """Check all tuples over dom(mapping) that involve new_src, both directions."""
    dom = list(mapping)
    for idx, (_, arity) in enumerate(a.vocab.symbols):
        ta, tb = a.tables[idx], b.tables[idx]
        if arity == 1:
            if ((new_src,) in ta) != ((mapping[new_src],) in tb):
                return False
            continue
        for tup in itertools.product(dom, repeat=arity):
            if new_src not in tup:
                continue
            if (tup in ta) != (tuple(mapping[e] for e in tup) in tb):
                return False
    return True


def find_isomorphism(a: Structure, b: Structure) -> dict[int, int] | None:
    """Total isomorphism a -> b, or None. Deterministic: the backtracking maps
    0,1,2,... in order and always tries the least feasible image first."""
    if a.vocab != b.vocab:
        raise InputError("isomorphism requires equal vocabularies")
    if a.order != b.order:
        return None
    if any(len(ta) != len(tb) for ta, tb in zip(a.tables, b.tables)):
        return None
    n = a.order
    prof_a = [_profile(a, v) for v in range(n)]
    prof_b = [_profile(b, v) for v in range(n)]
    if sorted(prof_a) != sorted(prof_b):
        return None

    mapping: dict[int, int] = {}
    used = [False] * n

    def backtrack(src: int) -> bool:
        if src == n:
            return True
        for img in range(n):
            if used[img] or prof_a[src] != prof_b[img]:
                continue
            mapping[src] = img
            if _extension_consistent(a, b, mapping, src):
                used[img] = True
                if backtrack(src + 1):
                    return True
                used[img] = False
            del mapping[src]
        return False

    return dict(mapping) if backtrack(0) else None


# ---------------------------------------------------------------------------
# Staged bit layout, canonical forms, enumeration.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bit_layout(vocab: Vocabulary, n: int, graph_mode: bool):
    """Tuple of (sym_idx, tup) positions, staged by max element, then symbol,
    then lexicographic tuple order. Graph mode uses unordered loop-free pairs."""
    positions = []
    stage_start = []
    for d in range(n):
        stage_start.append(len(positions))
        if graph_mode:
            positions.extend((0, (i, d)) for i in range(d))
        else:
            for idx, (_, arity) in enumerate(vocab.symbols):
                for tup in itertools.product(range(d + 1), repeat=arity):
                    if max(tup) == d:
                        positions.append((idx, tup))
    stage_start.append(len(positions))
    return tuple(positions), tuple(stage_start)


def _mask_of(struct: Structure, graph_mode: bool = False) -> int:
    positions, _ = _bit_layout(struct.vocab, struct.order, graph_mode)
    mask = 0
    for i, (sym, tup) in enumerate(positions):
        if struct.holds(sym, tup):
            mask |= 1 << i
    return mask


def _structure_from_mask(vocab: Vocabulary, n: int, mask: int, graph_mode: bool) -> Structure:
    positions, _ = _bit_layout(vocab, n, graph_mode)
    tables = [[] for _ in vocab.symbols]
    for i, (sym, tup) in enumerate(positions):
        if mask >> i & 1:
            tables[sym].append(tup)
            if graph_mode:
                tables[sym].append((tup[1], tup[0]))
    return Structure(vocab, n, tables)


def canonical_key(struct: Structure, cap: int = DEFAULT_CANON_CAP) -> int:
    """Minimum staged bit encoding over all universe permutations, found by
    stage-prefix branch-and-bound. Equal keys <=> isomorphic structures."""
    n = struct.order
    if n > cap:
        raise CapExceeded(f"canonicalization is capped at order {cap}, got {n}")
    positions, stage_start = _bit_layout(struct.vocab, n, False)
    stages = [positions[stage_start[d]:stage_start[d + 1]] for d in range(n)]
    tables = struct.tables

    pos_to_src = [0] * n
    used = [False] * n

    def stage_bits(d: int) -> tuple[int, ...]:
        return tuple(
            1 if tuple(pos_to_src[x] for x in tup) in tables[sym] else 0
            for sym, tup in stages[d]
        )

    best_full: list[tuple[int, ...]] = []

    def dfs(d: int, acc: list[tuple[int, ...]], less: bool):
        nonlocal best_full
        if d == n:
            if less or not best_full:
                best_full = list(acc)
            return
        for src in range(n):
            if used[src]:
                continue
            pos_to_src[d] = src
            bits = stage_bits(d)
            sub_less = less
            if not less and best_full:
                ref = best_full[d]
                if bits > ref:
                    continue
                sub_less = bits < ref
            used[src] = True
            acc.append(bits)
            dfs(d + 1, acc, sub_less)
            acc.pop()
            used[src] = False

    dfs(0, [], False)
    mask = 0
    i = 0
    for bits in best_full:
        for bit in bits:
            mask |= bit << i
            i += 1
    return mask


def canonical_form(struct: Structure, cap: int = DEFAULT_CANON_CAP) -> bytes:
    """Byte encoding of the canonical key, prefixed with order and vocabulary."""
    key = canonical_key(struct, cap)
    return f"{struct.vocab.spec()}|{struct.order}|{key:x}".encode()


def isomorphic(a: Structure, b: Structure, cap: int = DEFAULT_CANON_CAP) -> bool:
    if a.vocab != b.vocab or a.order != b.order:
        return False
    if max(a.order, b.order) <= cap:
        return canonical_key(a, cap) == canonical_key(b, cap)
    return find_isomorphism(a, b) is not None


def _perm_chunk_tables(perm_maps: list[tuple[int, ...]], width: int):
    """Per-permutation chunked lookup tables: applying a bit permutation to a
    mask becomes a handful of byte-table lookups."""
    n_chunks = (width + 7) // 8
    all_tables = []
    for pm in perm_maps:
        dest_of = [0] * width
        for dest, src in enumerate(pm):
            dest_of[src] = dest
        chunks = []
        for c in range(n_chunks):
            base = c * 8
            hi = min(8, width - base)
            table = [0] * (1 << hi)
            for v in range(1, 1 << hi):
                low = v & -v
                table[v] = table[v ^ low] | (1 << dest_of[base + low.bit_length() - 1])
            chunks.append(table)
        all_tables.append(chunks)
    return all_tables


def enumerate_structures(vocab: Vocabulary, n: int, graph_mode: bool = False,
                         max_bits: int = DEFAULT_ENUM_BITS):
    """Yield exactly one representative per isomorphism class, in ascending
    order of the staged bit encoding (each representative is the minimum
    encoding of its class)."""
    if n < 1:
        raise InputError("enumeration needs order >= 1")
    if graph_mode and (len(vocab.symbols) != 1 or vocab.symbols[0][1] != 2):
        raise InputError("graph mode requires a single binary symbol")
    positions, _ = _bit_layout(vocab, n, graph_mode)
    width = len(positions)
    if width > max_bits:
        raise CapExceeded(
            f"enumeration would sweep 2^{width} raw tables (cap 2^{max_bits})")

    index_of = {pos: i for i, pos in enumerate(positions)}
    perm_maps = []
    for perm in itertools.permutations(range(n)):
        inv = [0] * n
        for i, p in enumerate(perm):
            inv[p] = i
        pm = []
        for sym, tup in positions:
            pre = tuple(inv[e] for e in tup)
            if graph_mode and pre[0] > pre[1]:
                pre = (pre[1], pre[0])
            pm.append(index_of[(sym, pre)])
        perm_maps.append(tuple(pm))

    seen = bytearray(1 << width)
    use_chunks = width > 16
    chunk_tables = _perm_chunk_tables(perm_maps, width) if use_chunks else None

    for mask in range(1 << width):
        if seen[mask]:
            continue
        if use_chunks:
            m0 = mask & 0xFF
            m1 = (mask >> 8) & 0xFF
            m2 = mask >> 16
            for chunks in chunk_tables:
                seen[chunks[0][m0] | chunks[1][m1] | chunks[2][m2]] = 1
        else:
            for pm in perm_maps:
                img = 0
                for b, src in enumerate(pm):
                    if mask >> src & 1:
                        img |= 1 << b
                seen[img] = 1
        yield _structure_from_mask(vocab, n, mask, graph_mode)


def count_structures(vocab: Vocabulary, n: int, graph_mode: bool = False) -> int:
    return sum(1 for _ in enumerate_structures(vocab, n, graph_mode))


# ---------------------------------------------------------------------------
# .fos text format.
# ---------------------------------------------------------------------------

def parse_vocab_spec(spec: str) -> Vocabulary:
    """Parse a vocabulary spec like "E/2" or "E/2 P/1"."""
    symbols = []
    for part in spec.split():
        if "/" not in part:
            raise InputError(f"bad vocabulary item {part!r}; expected NAME/ARITY")
        name, _, arity_s = part.partition("/")
        try:
            arity = int(arity_s)
        except ValueError:
            raise InputError(f"bad arity in vocabulary item {part!r}") from None
        symbols.append((name, arity))
    return Vocabulary(tuple(symbols))


def parse_fos(text: str) -> tuple[Structure, bool]:
    """Parse the line-oriented structure format. Returns (structure, graph_flag).

    Strict: unknown symbols, arity mismatches, out-of-range elements, loops in
    graph mode, and missing headers are all fatal input errors."""
    vocab = None
    order = None
    graph = False
    tuples: list[tuple[str, tuple[int, ...]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "vocab":
            if vocab is not None:
                raise InputError(f"line {lineno}: duplicate vocab line")
            vocab = parse_vocab_spec(" ".join(fields[1:]))
        elif fields[0] == "order":
            if vocab is None:
                raise InputError(f"line {lineno}: order before vocab")
            if order is not None:
                raise InputError(f"line {lineno}: duplicate order line")
            try:
                order = int(fields[1])
            except (IndexError, ValueError):
                raise InputError(f"line {lineno}: bad order line {line!r}") from None
        elif fields[0] == "graph":
            if order is None:
                raise InputError(f"line {lineno}: graph directive before order")
            if len(vocab.symbols) != 1 or vocab.symbols[0][1] != 2:
                raise InputError("graph directive requires a single binary symbol")
            graph = True
        else:
            if vocab is None or order is None:
                raise InputError(f"line {lineno}: tuple line before headers")
            name = fields[0]
            idx = vocab.index_of(name)
            arity = vocab.symbols[idx][1]
            if len(fields) - 1 != arity:
                raise InputError(
                    f"line {lineno}: {name} expects {arity} elements, got {len(fields) - 1}")
            try:
                tup = tuple(int(x) for x in fields[1:])
            except ValueError:
                raise InputError(f"line {lineno}: non-integer element in {line!r}") from None
            if any(not (0 <= e < order) for e in tup):
                raise InputError(f"line {lineno}: element out of range in {line!r}")
            tuples.append((name, tup))
    if vocab is None or order is None:
        raise InputError("structure file must contain vocab and order lines")

    tables = [set() for _ in vocab.symbols]
    for name, tup in tuples:
        idx = vocab.index_of(name)
        if graph:
            if tup[0] == tup[1]:
                raise InputError(f"loop {tup} not allowed in graph mode")
            tables[idx].add((tup[1], tup[0]))
        tables[idx].add(tup)
    return Structure(vocab, order, tables), graph


def format_fos(struct: Structure, graph: bool = False) -> str:
    lines = [f"vocab {struct.vocab.spec()}", f"order {struct.order}"]
    if graph:
        lines.append("graph")
    for idx, (name, _) in enumerate(struct.vocab.symbols):
        for tup in sorted(struct.tables[idx]):
            if graph and tup[0] > tup[1]:
                continue
            lines.append(name + " " + " ".join(map(str, tup)))
    return "\n".join(lines) + "\n"
