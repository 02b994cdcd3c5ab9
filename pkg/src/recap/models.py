"""Model specifications and the colon-separated model string mini-language.

=============  ===================================================
string         model
=============  ===================================================
m0             constant capture probability
mt             one probability per occasion
mb             first capture vs recapture
mc:k / mck     Markov chain of order k
mcb:k / mckb   Markov order k with a separate first-capture class
ml2            vanishing-effect bipartition (needs t >= 4)
mcount         classes by number of previous captures
mz             linear logistic in g
mzgn           linear logistic in g_n
mzf            linear logistic in f
mzgt           linear logistic in g-tilde
mzgaug:k       linear logistic in zero-augmented g
linear:q       linear logistic in quantifier q
cut:q:e1,e2    step function of q with the given cutpoints
cutsearch:q:A  best A cutpoints of q by AIC
=============  ===================================================
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .glm import Design
from .histories import Quantifier, parse_quantifier
from .partitions import CutRecipe, cut_partition, named_partition

__all__ = ["ModelSpec", "parse_model", "parse_models", "STUDY_CANDIDATES"]

MODEL_KINDS = ("M0", "Mt", "Mb", "Mc", "Mcb", "ML2", "Mcount", "linear", "cut", "cutsearch")

_Q_SUFFIX = {"g": "", "gn": "_gn", "f": "_f", "gtilde": "_gt"}


def _q_suffix(q: Quantifier) -> str:
    if q.kind == "gaug":
        return f"_gaug{q.k}"
    return _Q_SUFFIX[q.kind]


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    k: int | None = None
    quantifier: Quantifier | None = None
    cutpoints: tuple[Fraction, ...] = ()
    n_cuts: int | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind in ("Mc", "Mcb") and (self.k is None or self.k < 1):
            raise ValueError(f"{self.kind} needs an order k >= 1")
        if self.kind in ("linear", "cut", "cutsearch") and self.quantifier is None:
            raise ValueError(f"{self.kind} model needs a quantifier")
        if self.kind == "cut":
            CutRecipe(self.quantifier, self.cutpoints)
            object.__setattr__(self, "cutpoints", tuple(Fraction(c) for c in self.cutpoints))
        if self.kind == "cutsearch" and (self.n_cuts is None or self.n_cuts < 1):
            raise ValueError("cutsearch needs n_cuts >= 1")

    @property
    def label(self) -> str:
        kind = self.kind
        if kind == "Mc":
            return f"Mc{self.k}"
        if kind == "Mcb":
            return f"Mc{self.k}b"
        if kind == "linear":
            return "Mz" + _q_suffix(self.quantifier)
        if kind == "cut":
            return f"Mz{_q_suffix(self.quantifier)}.cut({len(self.cutpoints)})"
        if kind == "cutsearch":
            return f"Mz{_q_suffix(self.quantifier)}.cut({self.n_cuts})"
        return kind

    def n_params(self, t: int) -> int:
        """Parameters including N."""
        if self.kind == "cutsearch":
            return self.n_cuts + 2
        return self.design(t).d + 1

    def design(self, t: int) -> Design:
        kind = self.kind
        if kind == "M0":
            return Design("constant", t)
        if kind == "Mt":
            return Design("time", t)
        if kind in ("Mb", "ML2", "Mcount"):
            return Design("factor", t, partition=named_partition(kind, t))
        if kind in ("Mc", "Mcb"):
            return Design("factor", t, partition=named_partition(kind, t, self.k))
        if kind == "linear":
            return Design("linear", t, quantifier=self.quantifier.with_t(t))
        if kind == "cut":
            recipe = CutRecipe(self.quantifier.with_t(t), self.cutpoints)
            return Design("factor", t, partition=cut_partition(recipe, t, label=self.label))
        raise ValueError("cutsearch models have no fixed design; use selection.cut_search")

    def to_string(self) -> str:
        kind = self.kind
        if kind in ("Mc", "Mcb"):
            return f"{kind.lower()}:{self.k}"
        if kind == "linear":
            return f"linear:{self.quantifier.label}"
        if kind == "cut":
            return f"cut:{self.quantifier.label}:" + ",".join(str(c) for c in self.cutpoints)
        if kind == "cutsearch":
            return f"cutsearch:{self.quantifier.label}:{self.n_cuts}"
        return kind.lower()


_SIMPLE = {"m0": "M0", "mt": "Mt", "mb": "Mb", "ml2": "ML2", "mcount": "Mcount"}
_LINEAR = {"mz": "g", "mzg": "g", "mzgn": "gn", "mzf": "f", "mzgt": "gtilde", "mzgtilde": "gtilde"}


def parse_model(text: str) -> ModelSpec:
    """Parse one model string (see the module docstring)."""
    raw = text.strip()
    s = raw.lower()
    if s in _SIMPLE:
        return ModelSpec(_SIMPLE[s])
    if s in _LINEAR:
        return ModelSpec("linear", quantifier=parse_quantifier(_LINEAR[s]))
    m = re.fullmatch(r"mc(b?):?(\d+)(b?)", s)
    if m and not (m.group(1) and m.group(3)):
        is_b = bool(m.group(1) or m.group(3))
        return ModelSpec("Mcb" if is_b else "Mc", k=int(m.group(2)))
    m = re.fullmatch(r"mzgaug:?(\d+)", s)
    if m:
        return ModelSpec("linear", quantifier=Quantifier("gaug", k=int(m.group(1))))
    parts = s.split(":")
    head = parts[0]
    if head == "linear" and len(parts) in (2, 3):
        return ModelSpec("linear", quantifier=parse_quantifier(":".join(parts[1:])))
    if head in ("cut", "cutsearch") and len(parts) >= 3:
        qtext = ":".join(parts[1:-1])
        q = parse_quantifier(qtext)
        if head == "cutsearch":
            if not parts[-1].isdigit():
                raise ValueError(f"cutsearch needs a number of cuts, got {raw!r}")
            return ModelSpec("cutsearch", quantifier=q, n_cuts=int(parts[-1]))
        try:
            cuts = tuple(Fraction(c.strip()) for c in parts[-1].split(",") if c.strip())
        except ValueError:
            raise ValueError(f"bad cutpoints in {raw!r}") from None
        return ModelSpec("cut", quantifier=q, cutpoints=cuts)
    raise ValueError(f"unrecognized model string {raw!r}")


def parse_models(text: str) -> list[ModelSpec]:
    """Split on whitespace or semicolons (commas too when no cut model is listed).

    ``standard`` expands to the candidate set of the simulation study.
    """
    sep = r"[;\s]+" if "cut" in text.lower() else r"[;,\s]+"
    out = []
    for tok in re.split(sep, text.strip()):
        if not tok:
            continue
        if tok.lower() == "standard":
            out.extend(parse_model(m) for m in STUDY_CANDIDATES)
        else:
            out.append(parse_model(tok))
    return out


# candidate set of the simulation study
STUDY_CANDIDATES = ("mz", "mzgn", "mzf", "mzgt", "m0", "mb", "mc:1", "mcb:1", "mc:2", "mcb:2", "mt")
