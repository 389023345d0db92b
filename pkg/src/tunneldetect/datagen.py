"""Synthetic corpus generation: tunneling-domain emulators for the common
DNS tunneling tools, word-like normal domains, and balanced corpus assembly
with a stratified train/test split.

The tunneling generators are lexical emulators only: they reproduce the
query-name encodings the tools emit (base32, hex, base64url payload labels
under an attacker apex), not the tools or any network traffic. `tuns` and
`dns2tcp` never get past the handshake in practice, so they feed the
"notspecified" failed-attempt pool instead of their own classes.
"""

from __future__ import annotations

import base64
import csv
import importlib.resources
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .hostnames import MAX_LABEL_LEN, MAX_NAME_LEN, is_plausible_hostname, strip_trailing_dot

LABEL_NORMAL = "normal"
LABEL_TUNNELING = "tunneling"

TOOL_NONE = "none"
TOOL_IODINE = "iodine"
TOOL_DNSCAT2 = "dnscat2"
TOOL_DNSEXFILTRATOR = "dnsexfiltrator"
TOOL_NOTSPECIFIED = "notspecified"

ORIGIN_SYNTHETIC = "synthetic"
ORIGIN_ALEXA = "alexa-like"
ORIGIN_BAMBENEK = "bambenek-like"
ORIGIN_CZ = "cz-like"

# Two attacker-controlled apex domains; tunneling names are generated
# under both, mirroring a registered .com / .online pair.
DEFAULT_APEXES = ("exfiltest.com", "covertcheck.online")

# Class distribution the synthetic corpus is scaled from: per-tool counts
# for tunneling and per-source counts for normal traffic.
TUNNELING_WEIGHTS = {
    TOOL_DNSCAT2: 23,
    TOOL_DNSEXFILTRATOR: 78,
    TOOL_IODINE: 346,
    TOOL_NOTSPECIFIED: 7553,
}
NORMAL_WEIGHTS = {
    ORIGIN_CZ: 511,
    ORIGIN_BAMBENEK: 3000,
    ORIGIN_ALEXA: 5000,
}

_FEED_FILES = {
    ORIGIN_ALEXA: "alexa_like.txt",
    ORIGIN_BAMBENEK: "bambenek_like.txt",
}

_ALNUM = "abcdefghijklmnopqrstuvwxyz0123456789"


@dataclass(frozen=True)
class DomainSample:
    """One labeled domain name, with the generating tool for tunneling
    samples and the source pool for normal ones."""

    name: str
    label: str
    tool: str = TOOL_NONE
    origin: str = ORIGIN_SYNTHETIC

    def __post_init__(self):
        if self.label not in (LABEL_NORMAL, LABEL_TUNNELING):
            raise ValueError(f"unknown label {self.label!r}")
        if self.label == LABEL_NORMAL and self.tool != TOOL_NONE:
            raise ValueError(f"normal sample cannot carry tool tag {self.tool!r}")
        if self.label == LABEL_TUNNELING and self.tool == TOOL_NONE:
            raise ValueError("tunneling sample requires a tool tag")
        if not self.name or len(self.name) > MAX_NAME_LEN:
            raise ValueError(f"bad domain name length: {self.name!r}")
        if any(len(lbl) > MAX_LABEL_LEN or not lbl for lbl in self.name.split(".")):
            raise ValueError(f"bad label in domain name: {self.name!r}")


@dataclass(frozen=True)
class CorpusSpec:
    """Counts per tunneling tool and normal origin, plus the apex pair and
    the seed the whole corpus derives from."""

    tunneling_counts: Mapping[str, int]
    normal_counts: Mapping[str, int]
    apexes: tuple[str, ...] = DEFAULT_APEXES
    seed: int = 0

    def __post_init__(self):
        for group in (self.tunneling_counts, self.normal_counts):
            for key, n in group.items():
                if n < 0:
                    raise ValueError(f"negative count for {key!r}: {n}")
        if not self.apexes:
            raise ValueError("at least one apex domain is required")

    @property
    def total_tunneling(self) -> int:
        return sum(self.tunneling_counts.values())

    @property
    def total_normal(self) -> int:
        return sum(self.normal_counts.values())


def scale_counts(weights: Mapping[str, int], total: int) -> dict[str, int]:
    """Scale integer weights to sum to `total` (largest-remainder rounding,
    ties broken by insertion order)."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    wsum = sum(weights.values())
    if wsum <= 0:
        raise ValueError("weights must have a positive sum")
    exact = {k: w * total / wsum for k, w in weights.items()}
    counts = {k: int(v) for k, v in exact.items()}
    short = total - sum(counts.values())
    by_remainder = sorted(
        weights, key=lambda k: exact[k] - counts[k], reverse=True
    )
    for k in by_remainder[:short]:
        counts[k] += 1
    return counts


def desk_scale_spec(seed: int = 0, per_class: int = 2000,
                    apexes: tuple[str, ...] = DEFAULT_APEXES) -> CorpusSpec:
    """Balanced desk-scale corpus: `per_class` samples per class, category
    counts proportional to the reference distribution."""
    return CorpusSpec(
        tunneling_counts=scale_counts(TUNNELING_WEIGHTS, per_class),
        normal_counts=scale_counts(NORMAL_WEIGHTS, per_class),
        apexes=apexes,
        seed=seed,
    )


def full_scale_spec(seed: int = 0, apexes: tuple[str, ...] = DEFAULT_APEXES) -> CorpusSpec:
    """Full-size balanced corpus (8000 per class)."""
    return desk_scale_spec(seed=seed, per_class=8000, apexes=apexes)


def _derive_seed(seed: int, *stream) -> int:
    """Stable child seed for an independent generator stream."""
    entropy = [int(seed) & 0xFFFFFFFF] + [s & 0xFFFFFFFF for s in stream]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _split_labels(payload: str, chunk: int = MAX_LABEL_LEN) -> list[str]:
    return [payload[i : i + chunk] for i in range(0, len(payload), chunk)]


def _pick_chars(rng: np.random.Generator, alphabet: str, k: int) -> str:
    return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=k))


def gen_iodine(n: int, apex: str, seed: int) -> list[DomainSample]:
    """Upstream-data queries in the iodine style: one header character then
    a base32(lowercase) payload split across labels under the apex."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        nbytes = int(rng.integers(20, 61))
        data = rng.bytes(nbytes)
        payload = base64.b32encode(data).decode("ascii").lower().rstrip("=")
        payload = _pick_chars(rng, _ALNUM, 1) + payload
        name = ".".join(_split_labels(payload) + [apex])
        out.append(DomainSample(name, LABEL_TUNNELING, TOOL_IODINE))
    return out


def gen_dnscat2(n: int, apex: str, seed: int) -> list[DomainSample]:
    """C&C-style queries: lowercase hex payload (even length) in fixed
    63-character labels under the apex."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        nbytes = int(rng.integers(15, 61))  # 30-120 hex chars
        payload = rng.bytes(nbytes).hex()
        name = ".".join(_split_labels(payload) + [apex])
        out.append(DomainSample(name, LABEL_TUNNELING, TOOL_DNSCAT2))
    return out


def gen_dnsexfiltrator(n: int, apex: str, seed: int) -> list[DomainSample]:
    """Low-throughput file exfiltration: a chunk-index label followed by
    base64url payload labels (case preserved here; the tokenizer folds it)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        nbytes = int(rng.integers(10, 51))
        data = rng.bytes(nbytes)
        payload = base64.urlsafe_b64encode(data).decode("ascii").rstrip("=")
        name = ".".join([str(i)] + _split_labels(payload) + [apex])
        out.append(DomainSample(name, LABEL_TUNNELING, TOOL_DNSEXFILTRATOR))
    return out


def gen_failed_attempts(n: int, apex: str, seed: int) -> list[DomainSample]:
    """Short handshake-like queries from tools that never established a
    tunnel (tuns, dns2tcp); tagged as unspecified-tool tunneling."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.integers(4, 17))
        name = f"{_pick_chars(rng, _ALNUM, k)}.{apex}"
        out.append(DomainSample(name, LABEL_TUNNELING, TOOL_NOTSPECIFIED))
    return out


_GENERATORS = {
    TOOL_DNSCAT2: gen_dnscat2,
    TOOL_DNSEXFILTRATOR: gen_dnsexfiltrator,
    TOOL_IODINE: gen_iodine,
    TOOL_NOTSPECIFIED: gen_failed_attempts,
}


# ---------------------------------------------------------------------------
# Normal-domain synthesis. These produced the bundled feed files and act as
# the fallback when no feed file is supplied for an origin.

_ONSETS = [
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s",
    "t", "v", "w", "z", "br", "ch", "cl", "cr", "dr", "fl", "fr", "gr",
    "pl", "pr", "sh", "sl", "sp", "st", "th", "tr",
]
_VOWELS = ["a", "e", "i", "o", "u", "a", "e", "i", "o", "ai", "ea", "ee", "oo", "ou"]
_CODAS = ["", "", "", "", "n", "r", "s", "t", "l", "m", "k", "nd", "ng", "st", "x"]

_ALEXA_TLDS = [".com"] * 10 + [".net", ".net", ".org", ".org", ".io", ".co", ".info", ".tv", ".me", ".app"]
_BAMBENEK_TLDS = [".com"] * 6 + [".net", ".org", ".ru", ".pl", ".de", ".eu", ".us", ".cc", ".top", ".biz"]

_CZ_ONSETS = [
    "st", "str", "skr", "zdr", "chr", "vr", "hr", "br", "tr", "pr", "kr",
    "dr", "sv", "dv", "tv", "hl", "ml", "vl", "sl", "zl", "sm", "zn", "ct",
]
_CZ_NUCLEI = ["a", "e", "i", "o", "u", "y", "r", "l", "e", "o"]
_CZ_CODAS = ["", "c", "k", "s", "z", "ch", "st", "sk", "n", "m", "v", "t"]


def _word(rng: np.random.Generator, lo: int = 2, hi: int = 4) -> str:
    syllables = int(rng.integers(lo, hi + 1))
    parts = []
    for _ in range(syllables):
        parts.append(_ONSETS[rng.integers(0, len(_ONSETS))])
        parts.append(_VOWELS[rng.integers(0, len(_VOWELS))])
    parts.append(_CODAS[rng.integers(0, len(_CODAS))])
    return "".join(parts)


def _unique_names(make, n: int) -> list[str]:
    seen: set[str] = set()
    names = []
    while len(names) < n:
        name = make()
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


def alexa_like_names(n: int, seed: int) -> list[str]:
    """Pronounceable brand-style domains on popular TLDs."""
    rng = np.random.default_rng(seed)

    def make():
        word = _word(rng)
        if rng.random() < 0.15:
            word += _word(rng, 1, 2)
        return word + _ALEXA_TLDS[rng.integers(0, len(_ALEXA_TLDS))]

    return _unique_names(make, n)


def bambenek_like_names(n: int, seed: int) -> list[str]:
    """Feed-style domains: word pairs, hyphenations and digit suffixes on a
    broader TLD mix."""
    rng = np.random.default_rng(seed)

    def make():
        style = rng.random()
        if style < 0.4:
            word = _word(rng) + _word(rng, 1, 2)
        elif style < 0.7:
            word = f"{_word(rng)}-{_word(rng, 1, 2)}"
        else:
            word = _word(rng) + str(rng.integers(0, 100))
        return word + _BAMBENEK_TLDS[rng.integers(0, len(_BAMBENEK_TLDS))]

    return _unique_names(make, n)


def cz_like_names(n: int, seed: int) -> list[str]:
    """Consonant-heavy Czech-flavored domains under .cz (low vowel ratio
    makes these the hardest normal pool)."""
    rng = np.random.default_rng(seed)

    def make():
        syllables = int(rng.integers(2, 5))
        parts = []
        for _ in range(syllables):
            parts.append(_CZ_ONSETS[rng.integers(0, len(_CZ_ONSETS))])
            parts.append(_CZ_NUCLEI[rng.integers(0, len(_CZ_NUCLEI))])
        parts.append(_CZ_CODAS[rng.integers(0, len(_CZ_CODAS))])
        return "".join(parts) + ".cz"

    return _unique_names(make, n)


_NORMAL_FALLBACKS = {
    ORIGIN_ALEXA: alexa_like_names,
    ORIGIN_BAMBENEK: bambenek_like_names,
    ORIGIN_CZ: cz_like_names,
}


# ---------------------------------------------------------------------------
# Feed loading and corpus assembly.

def _parse_feed_lines(lines: Iterable[str]) -> tuple[list[str], int]:
    names, skipped = [], 0
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name = strip_trailing_dot(line)
        if is_plausible_hostname(name):
            names.append(name)
        else:
            skipped += 1
    return names, skipped


def load_normal(path, origin_tag: str) -> tuple[list[DomainSample], int]:
    """Load normal domains from a one-per-line feed file.

    Returns (samples, skipped_line_count); lines starting with '#' are
    comments, invalid hostnames are counted but never fatal.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        names, skipped = _parse_feed_lines(fh)
    samples = [DomainSample(n, LABEL_NORMAL, TOOL_NONE, origin_tag) for n in names]
    return samples, skipped


def bundled_feed_names(origin: str) -> list[str]:
    """Names from the feed file shipped with the package."""
    try:
        fname = _FEED_FILES[origin]
    except KeyError:
        raise ValueError(f"no bundled feed for origin {origin!r}") from None
    text = importlib.resources.files("tunneldetect").joinpath("data", fname).read_text("utf-8")
    names, _ = _parse_feed_lines(text.splitlines())
    return names


def default_normal_pools() -> dict[str, list[str]]:
    """Bundled alexa-like and bambenek-like pools; cz-like intentionally
    absent so it falls back to its generator."""
    return {origin: bundled_feed_names(origin) for origin in _FEED_FILES}


def build_corpus(spec: CorpusSpec, normal_pools: Mapping[str, list[str]] | None = None) -> list[DomainSample]:
    """Assemble a labeled corpus per the spec counts and shuffle it.

    Tunneling samples come from the tool emulators, split across apexes.
    Normal samples are drawn without replacement from the given pools;
    origins missing from the pools fall back to their synthesizer.
    Deterministic for a given spec.
    """
    if normal_pools is None:
        normal_pools = default_normal_pools()

    samples: list[DomainSample] = []
    stream = 0

    for tool, count in spec.tunneling_counts.items():
        if tool not in _GENERATORS:
            raise ValueError(f"unknown tunneling tool {tool!r}")
        gen = _GENERATORS[tool]
        per_apex = [count // len(spec.apexes)] * len(spec.apexes)
        for i in range(count % len(spec.apexes)):
            per_apex[i] += 1
        for apex, n in zip(spec.apexes, per_apex):
            stream += 1
            samples.extend(gen(n, apex, _derive_seed(spec.seed, stream)))

    for origin, count in spec.normal_counts.items():
        stream += 1
        child = _derive_seed(spec.seed, stream)
        if origin in normal_pools:
            pool = normal_pools[origin]
            if count > len(pool):
                raise ValueError(
                    f"normal pool {origin!r} has {len(pool)} domains, {count} requested"
                )
            rng = np.random.default_rng(child)
            picks = rng.permutation(len(pool))[:count]
            names = [pool[i] for i in picks]
        elif origin in _NORMAL_FALLBACKS:
            names = _NORMAL_FALLBACKS[origin](count, child)
        else:
            raise ValueError(f"no pool or generator for normal origin {origin!r}")
        samples.extend(DomainSample(n, LABEL_NORMAL, TOOL_NONE, origin) for n in names)

    order = np.random.default_rng(_derive_seed(spec.seed, 0)).permutation(len(samples))
    return [samples[i] for i in order]


def split_train_test(
    corpus: list[DomainSample], train_fraction: float = 0.8, seed: int = 0
) -> tuple[list[DomainSample], list[DomainSample]]:
    """Stratified-by-label split; disjoint, union is the corpus."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in (LABEL_NORMAL, LABEL_TUNNELING):
        idx = [i for i, s in enumerate(corpus) if s.label == label]
        perm = rng.permutation(len(idx))
        n_train = int(round(train_fraction * len(idx)))
        train_idx.extend(idx[perm[i]] for i in range(n_train))
        test_idx.extend(idx[perm[i]] for i in range(n_train, len(idx)))
    rng.shuffle(train_idx)
    rng.shuffle(test_idx)
    return [corpus[i] for i in train_idx], [corpus[i] for i in test_idx]


# ---------------------------------------------------------------------------
# Corpus CSV format: UTF-8, header `name,label,tool,origin`.

CSV_HEADER = ["name", "label", "tool", "origin"]


def write_corpus(samples: Iterable[DomainSample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in samples:
            writer.writerow([s.name, s.label, s.tool, s.origin])


def read_corpus(path) -> list[DomainSample]:
    samples = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"bad corpus header in {path}: {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            name, label, tool, origin = (f.strip() for f in row)
            try:
                samples.append(DomainSample(name, label.lower(), tool.lower(), origin.lower()))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return samples
