"""Deterministic finite automata over edge labels.

All constructions return *canonical* automata: states are the ones reachable
from the initial state that can still reach acceptance (the initial state is
always kept), numbered in breadth-first order with labels visited in alphabet
order.  Missing transitions reject.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import islice
from typing import Iterable, Iterator, Mapping, Sequence

Word = tuple[str, ...]


class AlphabetMismatch(ValueError):
    pass


class AutomatonFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteAbstraction:
    alphabet: tuple[str, ...]
    num_states: int
    initial: int
    accepting: frozenset[int]
    transitions: Mapping[tuple[int, str], int]

    def __post_init__(self):
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("duplicate label in alphabet")
        if not 0 <= self.initial < self.num_states:
            raise ValueError("initial state out of range")
        labels = set(self.alphabet)
        for (s, a), t in self.transitions.items():
            if a not in labels or not (0 <= s < self.num_states and 0 <= t < self.num_states):
                raise ValueError(f"bad transition {s} {a} -> {t}")
        if any(not 0 <= s < self.num_states for s in self.accepting):
            raise ValueError("accepting state out of range")

    def __eq__(self, other):
        if not isinstance(other, FiniteAbstraction):
            return NotImplemented
        return (self.alphabet, self.num_states, self.initial, self.accepting, dict(self.transitions)) == \
            (other.alphabet, other.num_states, other.initial, other.accepting, dict(other.transitions))

    __hash__ = None

    def step(self, state: int | None, label: str) -> int | None:
        if state is None:
            return None
        return self.transitions.get((state, label))

    def accepts(self, word: Iterable[str]) -> bool:
        s = self.initial
        for a in word:
            s = self.transitions.get((s, a))
            if s is None:
                return False
        return s in self.accepting

    def serialize(self) -> str:
        lines = [
            "automaton 1",
            "alphabet " + " ".join(self.alphabet),
            f"states {self.num_states}",
            f"initial {self.initial}",
            "accepting " + " ".join(str(s) for s in sorted(self.accepting)),
        ]
        order = {a: i for i, a in enumerate(self.alphabet)}
        for (s, a), t in sorted(self.transitions.items(), key=lambda kv: (kv[0][0], order[kv[0][1]])):
            lines.append(f"{s} {a} -> {t}")
        lines.append("end")
        return "\n".join(line.rstrip() for line in lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "FiniteAbstraction":
        lines = text.splitlines()
        try:
            if lines[0] != "automaton 1" or lines[-1] != "end":
                raise AutomatonFormatError("missing automaton header or end marker")
            alphabet = tuple(lines[1].split()[1:])
            num = int(lines[2].split()[1])
            init = int(lines[3].split()[1])
            acc = frozenset(int(x) for x in lines[4].split()[1:])
            trans = {}
            for ln in lines[5:-1]:
                s, a, arrow, t = ln.split()
                if arrow != "->":
                    raise AutomatonFormatError(f"bad transition line {ln!r}")
                trans[(int(s), a)] = int(t)
            return cls(alphabet, num, init, acc, trans)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, AutomatonFormatError):
                raise
            raise AutomatonFormatError(str(exc)) from None


def canonical(alphabet: Sequence[str], initial, accepting: set, delta: Mapping) -> FiniteAbstraction:
    """Trim and renumber an automaton given over arbitrary hashable states."""
    alphabet = tuple(alphabet)
    reach = [initial]
    seen = {initial}
    i = 0
    while i < len(reach):
        s = reach[i]
        i += 1
        for a in alphabet:
            t = delta.get((s, a))
            if t is not None and t not in seen:
                seen.add(t)
                reach.append(t)
    preds: dict = {}
    for s in reach:
        for a in alphabet:
            t = delta.get((s, a))
            if t is not None:
                preds.setdefault(t, []).append(s)
    live = {s for s in reach if s in accepting}
    work = list(live)
    while work:
        t = work.pop()
        for s in preds.get(t, ()):
            if s not in live:
                live.add(s)
                work.append(s)
    # breadth-first renumbering through live states only
    number = {initial: 0}
    order = [initial]
    i = 0
    while i < len(order):
        s = order[i]
        i += 1
        for a in alphabet:
            t = delta.get((s, a))
            if t is not None and t in live and t not in number:
                number[t] = len(order)
                order.append(t)
    trans = {}
    for s in order:
        for a in alphabet:
            t = delta.get((s, a))
            if t is not None and t in number:
                trans[(number[s], a)] = number[t]
    acc = frozenset(number[s] for s in order if s in accepting)
    return FiniteAbstraction(alphabet, len(order), 0, acc, trans)


def sigma_star(alphabet: Sequence[str]) -> FiniteAbstraction:
    # over an empty alphabet this is the language {epsilon}
    return FiniteAbstraction(tuple(alphabet), 1, 0, frozenset({0}), {(0, a): 0 for a in alphabet})


def _check_alphabets(a: FiniteAbstraction, b: FiniteAbstraction):
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch(f"alphabets differ: {a.alphabet} vs {b.alphabet}")


def intersect(a: FiniteAbstraction, b: FiniteAbstraction) -> FiniteAbstraction:
    _check_alphabets(a, b)
    start = (a.initial, b.initial)
    delta = {}
    seen = {start}
    queue = deque([start])
    while queue:
        p, q = queue.popleft()
        for lab in a.alphabet:
            p2 = a.transitions.get((p, lab))
            if p2 is None:
                continue
            q2 = b.transitions.get((q, lab))
            if q2 is None:
                continue
            nxt = (p2, q2)
            delta[((p, q), lab)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    accepting = {s for s in seen if s[0] in a.accepting and s[1] in b.accepting}
    return canonical(a.alphabet, start, accepting, delta)


def intersect_all(automata: Iterable[FiniteAbstraction]) -> FiniteAbstraction:
    it = iter(automata)
    acc = next(it)
    for x in it:
        acc = intersect(acc, x)
    return acc


_OFF = -1


def subtract_words(a: FiniteAbstraction, words: Iterable[Sequence[str]]) -> FiniteAbstraction:
    """Remove a finite set of words from the language (product with a trie)."""
    children: dict[tuple[int, str], int] = {}
    ends: set[int] = set()
    nodes = 1
    labels = set(a.alphabet)
    for w in words:
        node = 0
        for lab in w:
            if lab not in labels:
                raise AlphabetMismatch(f"label {lab!r} not in alphabet")
            nxt = children.get((node, lab))
            if nxt is None:
                nxt = children[(node, lab)] = nodes
                nodes += 1
            node = nxt
        ends.add(node)
    if not ends:
        return a
    start = (a.initial, 0)
    delta = {}
    seen = {start}
    queue = deque([start])
    while queue:
        p, t = queue.popleft()
        for lab in a.alphabet:
            p2 = a.transitions.get((p, lab))
            if p2 is None:
                continue
            t2 = children.get((t, lab), _OFF) if t != _OFF else _OFF
            nxt = (p2, t2)
            delta[((p, t), lab)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    accepting = {s for s in seen if s[0] in a.accepting and s[1] not in ends}
    return canonical(a.alphabet, start, accepting, delta)


def subtract_word(a: FiniteAbstraction, word: Sequence[str]) -> FiniteAbstraction:
    return subtract_words(a, [word])


def is_empty(a: FiniteAbstraction) -> bool:
    seen = {a.initial}
    stack = [a.initial]
    while stack:
        s = stack.pop()
        if s in a.accepting:
            return False
        for lab in a.alphabet:
            t = a.transitions.get((s, lab))
            if t is not None and t not in seen:
                seen.add(t)
                stack.append(t)
    return True


def iter_words(a: FiniteAbstraction) -> Iterator[Word]:
    """Accepted words in length-lexicographic order (label order = alphabet order)."""
    a = canonical(a.alphabet, a.initial, set(a.accepting), a.transitions)
    if not a.accepting:
        return
    preds: dict[int, set[int]] = {}
    for (s, _), t in a.transitions.items():
        preds.setdefault(t, set()).add(s)
    # trimmed automaton: finite language iff acyclic, then no word exceeds n-1 labels
    finite = _acyclic(a)
    max_len = a.num_states - 1 if finite else None
    can = [frozenset(a.accepting)]

    def level(r: int) -> frozenset[int]:
        while len(can) <= r:
            prev = can[-1]
            can.append(frozenset(s for t in prev for s in preds.get(t, ())))
        return can[r]

    length = 0
    while max_len is None or length <= max_len:
        if a.initial in level(length):
            stack = [(a.initial, length, ())]
            while stack:
                q, r, prefix = stack.pop()
                if r == 0:
                    yield prefix
                    continue
                below = level(r - 1)
                for lab in reversed(a.alphabet):
                    t = a.transitions.get((q, lab))
                    if t is not None and t in below:
                        stack.append((t, r - 1, prefix + (lab,)))
        length += 1


def _acyclic(a: FiniteAbstraction) -> bool:
    indeg = [0] * a.num_states
    succ: dict[int, list[int]] = {}
    for (s, _), t in a.transitions.items():
        succ.setdefault(s, []).append(t)
        indeg[t] += 1
    queue = [s for s in range(a.num_states) if indeg[s] == 0]
    removed = 0
    while queue:
        s = queue.pop()
        removed += 1
        for t in succ.get(s, ()):
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    return removed == a.num_states


def enumerate_words(a: FiniteAbstraction, m: int) -> list[Word]:
    if m < 1:
        raise ValueError("m must be at least 1")
    return list(islice(iter_words(a), m))
