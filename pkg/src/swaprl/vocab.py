"""SMILES token vocabulary, greedy tokenizer, and empirical token priors."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

BOS = "[BOS]"
EOS = "[EOS]"
PAD = "[PAD]"
SPECIALS = (BOS, EOS, PAD)


class TokenizeError(ValueError):
    """No vocabulary token matches at a character position."""

    def __init__(self, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(f"no token matches at position {position} in {text!r}")


class VocabError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    symbol: str
    index: int


class Vocabulary:
    """Ordered token set with BOS/EOS/PAD pinned at indices 0-2.

    Multi-character tokens are two-letter elements ("Cl", "Br") and complete
    bracket expressions ("[nH]", "[N+]", ...).
    """

    def __init__(self, symbols: Sequence[str]):
        if len(symbols) != len(set(symbols)):
            raise VocabError("duplicate symbols")
        if tuple(symbols[:3]) != SPECIALS:
            raise VocabError(f"first three symbols must be {SPECIALS}")
        self.tokens = [Token(s, i) for i, s in enumerate(symbols)]
        self.symbols = list(symbols)
        self.index = {s: i for i, s in enumerate(symbols)}
        self.bos = self.index[BOS]
        self.eos = self.index[EOS]
        self.pad = self.index[PAD]
        # longest-match order for the non-bracket scan
        self._plain_by_len = sorted(
            (s for s in symbols if not s.startswith("[")), key=len, reverse=True
        )

    def __len__(self) -> int:
        return len(self.symbols)

    def is_special(self, idx: int) -> bool:
        return idx < 3

    @property
    def special_indices(self) -> tuple[int, int, int]:
        return (self.bos, self.eos, self.pad)

    def tokenize(self, s: str) -> list[int]:
        """Greedy longest-match scan; bracket expressions are one token.

        Returns indices of non-special tokens only. Raises TokenizeError with
        the offending character position when nothing matches.
        """
        out: list[int] = []
        i, n = 0, len(s)
        while i < n:
            if s[i] == "[":
                j = s.find("]", i)
                if j < 0:
                    raise TokenizeError(s, i)
                sym = s[i : j + 1]
                idx = self.index.get(sym)
                if idx is None:
                    raise TokenizeError(s, i)
                if idx >= 3:
                    out.append(idx)
                i = j + 1
                continue
            for sym in self._plain_by_len:
                if s.startswith(sym, i):
                    out.append(self.index[sym])
                    i += len(sym)
                    break
            else:
                raise TokenizeError(s, i)
        return out

    def detokenize(self, indices: Iterable[int]) -> str:
        """Inverse of tokenize for special-free index lists; specials are skipped."""
        return "".join(self.symbols[i] for i in indices if i >= 3)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.symbols) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln for ln in lines if ln])

    def content_hash(self) -> int:
        """Stable 64-bit FNV-1a over the symbol list; embedded in checkpoints."""
        h = 0xCBF29CE484222325
        for s in self.symbols:
            for b in s.encode("utf-8") + b"\n":
                h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
        return h


def lex_smiles(s: str) -> list[str]:
    """Base lexer used during vocabulary construction: bracket expressions,
    two-letter elements, then single characters."""
    out: list[str] = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if c == "[":
            j = s.find("]", i)
            if j < 0:
                raise TokenizeError(s, i)
            out.append(s[i : j + 1])
            i = j + 1
        elif c in "CB" and i + 1 < n and s[i : i + 2] in ("Cl", "Br"):
            out.append(s[i : i + 2])
            i += 2
        else:
            out.append(c)
            i += 1
    return out


def build_vocabulary(corpus: Iterable[str]) -> Vocabulary:
    """Union of all tokens in the corpus plus specials; specials first,
    then lexicographic. Raises VocabError for an empty corpus and
    TokenizeError (with line number) for an untokenizable line."""
    seen: set[str] = set()
    n_lines = 0
    for lineno, line in enumerate(corpus, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        n_lines += 1
        try:
            seen.update(lex_smiles(line))
        except TokenizeError as e:
            raise VocabError(f"line {lineno}: cannot lex at position {e.position}") from e
    if n_lines == 0:
        raise VocabError("empty corpus")
    seen.difference_update(SPECIALS)
    return Vocabulary(list(SPECIALS) + sorted(seen))


class TokenPriors:
    """Empirical token frequencies over a corpus; specials carry zero mass."""

    def __init__(self, probs: dict[int, float], size: int):
        self.size = size
        self.probs = {i: probs.get(i, 0.0) for i in range(size)}
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-12:
            raise VocabError(f"priors sum to {total!r}, expected 1")
        if any(p < 0 for p in self.probs.values()):
            raise VocabError("negative prior")
        if any(self.probs[i] != 0.0 for i in range(3)):
            raise VocabError("special tokens must have zero prior")

    def prob(self, idx: int) -> float:
        return self.probs[idx]

    def as_list(self) -> list[float]:
        return [self.probs[i] for i in range(self.size)]

    def save(self, path: str | Path, v: Vocabulary) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i in range(self.size):
                f.write(f"{v.symbols[i]}\t{self.probs[i]:.17g}\n")

    @classmethod
    def load(cls, path: str | Path, v: Vocabulary) -> "TokenPriors":
        probs: dict[int, float] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            sym, p = line.split("\t")
            probs[v.index[sym]] = float(p)
        return cls(probs, len(v))


def compute_priors(corpus: Iterable[str], v: Vocabulary) -> TokenPriors:
    """probs[t] = count(t) / total over non-special tokens. Counts stay exact
    integers until the one final division."""
    counts: Counter[int] = Counter()
    for lineno, line in enumerate(corpus, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        try:
            counts.update(v.tokenize(line))
        except TokenizeError as e:
            raise VocabError(f"line {lineno}: cannot tokenize at position {e.position}") from e
    total = sum(counts.values())
    if total == 0:
        raise VocabError("zero token count")
    return TokenPriors({i: c / total for i, c in counts.items()}, len(v))
