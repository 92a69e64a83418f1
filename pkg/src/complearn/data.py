"""Datasets, complementary-label generation and per-class binary decomposition.

Class indices are 0-based everywhere in memory. CSV files use 1-based
labels, and the conversion happens only in the readers and writers below.
"""

from __future__ import annotations

import csv
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "OrdinaryDataset",
    "ComplementaryDataset",
    "Uniform",
    "Biased",
    "ScarIndependent",
    "ScarSingle",
    "ClassPriors",
    "BinaryDecomposition",
    "BIASED_A",
    "BIASED_B",
    "SCAR_A",
    "SCAR_B",
    "rng_stream",
    "make_gaussian_mixture",
    "gen_complementary",
    "builtin_transition",
    "complementary_priors",
    "class_frequencies",
    "decompose",
    "corrupt_priors",
    "split",
    "read_ordinary_csv",
    "write_ordinary_csv",
    "read_complementary_csv",
    "write_complementary_csv",
    "CsvFormatError",
]

MAX_REJECTION_ATTEMPTS = 10**6


def rng_stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for the named sub-stream of ``seed``.

    Changing the draws of one stage ("data", "labels", "init", "shuffle", ...)
    never perturbs another stage that uses the same seed.
    """
    key = (zlib.crc32(name.encode()),) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class OrdinaryDataset:
    features: np.ndarray
    labels: np.ndarray
    q: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a nonempty n x d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must have one entry per row")
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if y.min() < 0 or y.max() >= self.q:
            raise ValueError(f"labels must lie in 0..{self.q - 1}")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ComplementaryDataset:
    """Features plus an n x q bit matrix; bit k set means "not class k"."""

    features: np.ndarray
    comp_labels: np.ndarray
    q: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        Y = np.asarray(self.comp_labels)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError(f"features must be an n x d matrix, got shape {X.shape}")
        if Y.shape != (X.shape[0], self.q):
            raise ValueError(f"comp_labels must have shape {(X.shape[0], self.q)}, got {Y.shape}")
        if not np.isin(Y, (0, 1)).all():
            raise ValueError("comp_labels entries must be 0 or 1")
        Y = Y.astype(bool)
        if Y.all(axis=1).any():
            raise ValueError("a row cannot exclude every class")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "comp_labels", Y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "ComplementaryDataset":
        rows = np.asarray(rows)
        return ComplementaryDataset(self.features[rows], self.comp_labels[rows], self.q)


# -- transition specs --------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    """One complementary label drawn uniformly among the q - 1 wrong classes."""


@dataclass(frozen=True)
class Biased:
    """One complementary label drawn from row ``y`` of a transition matrix.

    Rows are normalized on construction, so matrices printed to three decimals
    (rows summing to 0.999) are accepted.
    """

    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("transition matrix must be square")
        if (M < 0).any():
            raise ValueError("transition probabilities must be nonnegative")
        if np.any(np.diag(M) != 0):
            raise ValueError("transition matrix must have a zero diagonal")
        sums = M.sum(axis=1)
        if (sums <= 0).any():
            raise ValueError("every transition row needs positive mass")
        M = M / sums[:, None]
        object.__setattr__(self, "matrix", M)


def _check_flag_probs(c) -> np.ndarray:
    c = np.array(c, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError("flag_probs must be a vector")
    if (c < 0).any() or (c >= 1).any():
        raise ValueError("flag_probs must lie in [0, 1)")
    return c


@dataclass(frozen=True)
class ScarIndependent:
    """Flag each wrong class k independently with probability ``flag_probs[k]``."""

    flag_probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flag_probs", _check_flag_probs(self.flag_probs))


@dataclass(frozen=True)
class ScarSingle:
    """Independent flags, redrawn per row until exactly one flag is set."""

    flag_probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flag_probs", _check_flag_probs(self.flag_probs))


_A = (0.250, 0.043, 0.040)
_B = (0.220, 0.080, 0.033)


def _circulant_pattern(vals):
    hi, mid, lo = vals
    first = [0, hi, mid, lo, mid, lo, hi, lo, hi, mid]
    # each row is the previous one rotated right by one position
    return np.array([np.roll(first, i) for i in range(10)], dtype=np.float64)


BIASED_A = _circulant_pattern(_A)
BIASED_B = _circulant_pattern(_B)
SCAR_A = np.array([0.05, 0.05, 0.2, 0.2, 0.1, 0.1, 0.05, 0.05, 0.1, 0.1])
SCAR_B = np.array([0.1, 0.1, 0.2, 0.05, 0.05, 0.1, 0.1, 0.2, 0.05, 0.05])


def builtin_transition(name: str, q: int, class_priors=None):
    """Transition spec by name: uniform, biased-a, biased-b, scar-a, scar-b.

    The SCAR presets list complementary-label marginals; they are turned into
    flag probabilities with ``c_k = pi_bar_k / (1 - pi_k)`` using
    ``class_priors`` (uniform truth priors when omitted).
    """
    if name == "uniform":
        return Uniform()
    if name in ("biased-a", "biased-b"):
        if q != 10:
            raise ValueError(f"{name} is defined for q = 10, got q = {q}")
        return Biased(BIASED_A if name == "biased-a" else BIASED_B)
    if name in ("scar-a", "scar-b"):
        if q != 10:
            raise ValueError(f"{name} is defined for q = 10, got q = {q}")
        pi = np.full(q, 1.0 / q) if class_priors is None else np.asarray(class_priors, float)
        pi_bar = SCAR_A if name == "scar-a" else SCAR_B
        return ScarSingle(pi_bar / (1.0 - pi))
    raise ValueError(f"unknown transition {name!r}")


# -- generation --------------------------------------------------------------

def _class_centers(q: int, d: int, separation: float) -> np.ndarray:
    if d >= q:
        centers = np.eye(q, d)
    elif d == 1:
        centers = np.linspace(-1.0, 1.0, q)[:, None]
    else:
        angles = 2 * np.pi * np.arange(q) / q
        centers = np.zeros((q, d))
        centers[:, 0] = np.cos(angles)
        centers[:, 1] = np.sin(angles)
    return separation * centers


def make_gaussian_mixture(q: int, n_per_class: int, d: int, separation: float, seed) -> OrdinaryDataset:
    """Balanced isotropic unit-variance Gaussian classes.

    Centers sit at ``separation`` times the k-th coordinate axis when
    ``d >= q``, on a circle in the first two coordinates otherwise, and
    evenly on ``[-separation, separation]`` when ``d == 1``.
    """
    if q < 2 or d < 1 or n_per_class < 1:
        raise ValueError("need q >= 2, d >= 1 and n_per_class >= 1")
    if separation < 0:
        raise ValueError("separation must be nonnegative")
    rng = _as_rng(seed)
    centers = _class_centers(q, d, separation)
    labels = np.repeat(np.arange(q), n_per_class)
    X = centers[labels] + rng.standard_normal((labels.size, d))
    return OrdinaryDataset(X, labels, q)


def gen_complementary(ds: OrdinaryDataset, spec, seed) -> ComplementaryDataset:
    """Attach complementary labels to ``ds`` under the given transition spec."""
    rng = _as_rng(seed)
    n, q, y = ds.n, ds.q, ds.labels
    Y = np.zeros((n, q), dtype=bool)

    if isinstance(spec, Uniform):
        # draw among q - 1 wrong classes, then skip over the true one
        r = rng.integers(0, q - 1, size=n)
        r = r + (r >= y)
        Y[np.arange(n), r] = True
    elif isinstance(spec, Biased):
        if spec.matrix.shape[0] != q:
            raise ValueError(f"transition matrix is {spec.matrix.shape[0]}x{spec.matrix.shape[0]}, data has q = {q}")
        cdf = np.cumsum(spec.matrix[y], axis=1)
        u = rng.random(n) * cdf[:, -1]
        r = (u[:, None] >= cdf).sum(axis=1)
        r = np.minimum(r, q - 1)
        Y[np.arange(n), r] = True
    elif isinstance(spec, ScarIndependent):
        c = _flags_for(spec, q)
        Y = rng.random((n, q)) < c
        Y[np.arange(n), y] = False
    elif isinstance(spec, ScarSingle):
        c = _flags_for(spec, q)
        if not (c > 0).any():
            raise ValueError("ScarSingle needs at least one positive flag probability")
        allowed = np.broadcast_to(c > 0, (n, q)).copy()
        allowed[np.arange(n), y] = False
        bad = ~allowed.any(axis=1)
        if bad.any():
            raise ValueError(f"row {int(np.argmax(bad))} (class {int(y[bad][0]) + 1}) can never receive a complementary label")
        pending = np.arange(n)
        for _ in range(MAX_REJECTION_ATTEMPTS):
            draw = rng.random((pending.size, q)) < c
            draw[np.arange(pending.size), y[pending]] = False
            ok = draw.sum(axis=1) == 1
            Y[pending[ok]] = draw[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
        else:
            raise RuntimeError(f"rejection sampling did not finish after {MAX_REJECTION_ATTEMPTS} attempts")
    else:
        raise TypeError(f"unknown transition spec {spec!r}")
    return ComplementaryDataset(ds.features, Y, q)


def _flags_for(spec, q: int) -> np.ndarray:
    if spec.flag_probs.shape != (q,):
        raise ValueError(f"flag_probs has length {spec.flag_probs.size}, data has q = {q}")
    return spec.flag_probs


# -- priors and decomposition -------------------------------------------------

@dataclass(frozen=True)
class ClassPriors:
    """Class priors ``pi`` and complementary-label marginals ``pi_bar``.

    Under the SCAR model ``pi_bar_k + pi_k <= 1``. Violations (which can come
    from estimated or perturbed priors) only warn, since the risks stay
    well defined.
    """

    pi: np.ndarray
    pi_bar: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=np.float64)
        pi_bar = np.array(self.pi_bar, dtype=np.float64)
        if pi.ndim != 1 or pi.shape != pi_bar.shape:
            raise ValueError("pi and pi_bar must be vectors of equal length")
        if (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError(f"pi must lie on the simplex, got {pi}")
        if (pi_bar < 0).any() or (pi_bar >= 1).any():
            raise ValueError(f"pi_bar entries must lie in [0, 1), got {pi_bar}")
        if (pi + pi_bar > 1 + 1e-9).any():
            warnings.warn("pi_k + pi_bar_k exceeds 1 for some class; priors are inconsistent with SCAR", stacklevel=2)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "pi_bar", pi_bar)

    @property
    def q(self) -> int:
        return self.pi.size


@dataclass(frozen=True)
class BinaryDecomposition:
    """Per-class split of rows into flagged (negative) and unflagged (unlabeled)."""

    neg_indices: list
    unl_indices: list
    mask: np.ndarray = field(repr=False)

    @property
    def n_neg(self) -> np.ndarray:
        return np.array([idx.size for idx in self.neg_indices])

    @property
    def n_unl(self) -> np.ndarray:
        return np.array([idx.size for idx in self.unl_indices])


def complementary_priors(cds: ComplementaryDataset) -> np.ndarray:
    """Empirical ``pi_bar_k = n_k^N / n``."""
    return cds.comp_labels.mean(axis=0)


def class_frequencies(labels, q: int) -> np.ndarray:
    return np.bincount(np.asarray(labels), minlength=q) / len(labels)


def decompose(cds) -> BinaryDecomposition:
    """Rows flagged with class k form its negative set, all others its unlabeled set.

    Accepts a ComplementaryDataset or a bare n x q bit matrix.
    """
    mask = cds.comp_labels if isinstance(cds, ComplementaryDataset) else np.asarray(cds, dtype=bool)
    neg = [np.flatnonzero(mask[:, k]) for k in range(mask.shape[1])]
    unl = [np.flatnonzero(~mask[:, k]) for k in range(mask.shape[1])]
    return BinaryDecomposition(neg, unl, mask)


def corrupt_priors(priors: ClassPriors, sigma: float, seed=None, eps=None) -> ClassPriors:
    """Multiply each ``pi_k`` by ``eps_k ~ N(1, sigma^2)``, clamp at 0, renormalize.

    ``eps`` may be passed explicitly to bypass sampling. ``pi_bar`` is kept.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = _as_rng(seed)
    for _ in range(10_000):
        e = np.asarray(eps, dtype=np.float64) if eps is not None else rng.normal(1.0, sigma, priors.q)
        pi = np.clip(e * priors.pi, 0.0, None)
        total = pi.sum()
        if total > 0:
            return ClassPriors(pi / total, priors.pi_bar)
        if eps is not None:
            raise ValueError("injected eps zeroes every prior")
    raise RuntimeError("could not draw a non-degenerate prior perturbation")


def split(cds: ComplementaryDataset, fraction: float, seed):
    """Shuffle rows and cut into ``(first, second)`` with ``round(fraction * n)`` rows first."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    n_first = int(round(fraction * cds.n))
    if n_first < 1 or n_first >= cds.n:
        raise ValueError(f"split of {cds.n} rows at {fraction} leaves an empty part")
    perm = _as_rng(seed).permutation(cds.n)
    return cds.subset(np.sort(perm[:n_first])), cds.subset(np.sort(perm[n_first:]))


# -- CSV files -----------------------------------------------------------------

class CsvFormatError(ValueError):
    """Malformed dataset file; the message carries the 1-based line number."""


def _read_rows(path, last_col: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}:1: empty file") from None
        d = len(header) - 1
        expected = [f"f{i}" for i in range(d)] + [last_col]
        if d < 1 or [h.strip() for h in header] != expected:
            raise CsvFormatError(f"{path}:1: expected header {','.join(expected) if d >= 1 else 'f0,...,' + last_col}")
        feats, tails = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise CsvFormatError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                feats.append([float(v) for v in row[:d]])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
            tails.append((lineno, row[d].strip()))
    if not feats:
        raise CsvFormatError(f"{path}:2: no data rows")
    return np.array(feats), tails


def read_ordinary_csv(path, q: int | None = None) -> OrdinaryDataset:
    X, tails = _read_rows(path, "y")
    labels = []
    for lineno, v in tails:
        try:
            lab = int(v)
        except ValueError:
            raise CsvFormatError(f"{path}:{lineno}: label {v!r} is not an integer") from None
        if lab < 1 or (q is not None and lab > q):
            raise CsvFormatError(f"{path}:{lineno}: label {lab} out of range")
        labels.append(lab - 1)
    labels = np.array(labels)
    return OrdinaryDataset(X, labels, q if q is not None else max(int(labels.max()) + 1, 2))


def read_complementary_csv(path, q: int) -> ComplementaryDataset:
    X, tails = _read_rows(path, "cl")
    Y = np.zeros((X.shape[0], q), dtype=bool)
    for i, (lineno, v) in enumerate(tails):
        for tok in filter(None, (t.strip() for t in v.split(";"))):
            try:
                k = int(tok)
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: complementary label {tok!r} is not an integer") from None
            if not 1 <= k <= q:
                raise CsvFormatError(f"{path}:{lineno}: complementary label {k} outside 1..{q}")
            Y[i, k - 1] = True
        if Y[i].all():
            raise CsvFormatError(f"{path}:{lineno}: row excludes every class")
    return ComplementaryDataset(X, Y, q)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_ordinary_csv(ds: OrdinaryDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(ds.d)] + ["y"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([_fmt(v) for v in x] + [int(y) + 1])


def write_complementary_csv(cds: ComplementaryDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(cds.d)] + ["cl"])
        for x, bits in zip(cds.features, cds.comp_labels):
            w.writerow([_fmt(v) for v in x] + [";".join(str(k + 1) for k in np.flatnonzero(bits))])
