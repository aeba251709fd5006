"""Grounding high-scoring axioms and labeling the inferred triples.

An axiom whose normalized score clears the threshold is grounded over the
graph: every body instantiation found in the triple set proposes a head
triple not yet present.  Heads touching at least one sparse entity survive,
duplicates across axioms merge onto the best contributing score, and each
surviving triple receives a truth value derived through product t-norm
fuzzy logic: solving pi(body => head) = s_axiom with unit body truths gives
pi(head) = s_axiom exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .axioms import Axiom, AxiomType, ScoredAxiom
from .kg import KnowledgeGraph, Triple, Vocabulary

Expr = Union["Atom", "Not", "And", "Or", "Implies"]


@dataclass(frozen=True)
class Atom:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"truth value {self.value} outside [0, 1]")


@dataclass(frozen=True)
class Not:
    a: Expr


@dataclass(frozen=True)
class And:
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Or:
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Implies:
    a: Expr
    b: Expr


def truth_value(expr: Expr) -> float:
    """Recursive product/probabilistic-sum truth composition.

    and: a*b; or: a + b - a*b; not: 1 - a; implication: not-a or b.
    """
    if isinstance(expr, Atom):
        return expr.value
    if isinstance(expr, Not):
        return 1.0 - truth_value(expr.a)
    if isinstance(expr, And):
        return truth_value(expr.a) * truth_value(expr.b)
    if isinstance(expr, Or):
        a, b = truth_value(expr.a), truth_value(expr.b)
        return a + b - a * b
    if isinstance(expr, Implies):
        return truth_value(Or(Not(expr.a), expr.b))
    raise TypeError(f"not a truth expression: {expr!r}")


def solve_head_truth(body_truths: Sequence[float], grounding_truth: float) -> float:
    """Invert pi(body => head) = grounding_truth for the head truth.

    With product conjunction over the body (truth P) the implication equals
    1 - P + P * head, so head = (grounding_truth - 1 + P) / P, clamped to
    [0, 1].  Graph triples have truth 1, making the head truth equal the
    grounding truth exactly.
    """
    p = 1.0
    for bt in body_truths:
        if not 0.0 <= bt <= 1.0:
            raise ValueError(f"body truth {bt} outside [0, 1]")
        p *= bt
    if not 0.0 <= grounding_truth <= 1.0:
        raise ValueError(f"grounding truth {grounding_truth} outside [0, 1]")
    if p == 0.0:
        raise ValueError("head truth undefined: body truth product is zero")
    return min(1.0, max(0.0, (grounding_truth - 1.0 + p) / p))


@dataclass(frozen=True)
class Grounding:
    head: Triple               # proposed triple, absent from the graph
    body: tuple[Triple, ...]   # instantiated rule body, all present
    axiom: Axiom


@dataclass(frozen=True)
class InferredTriple:
    triple: Triple
    truth: float
    sources: tuple[Axiom, ...]


@dataclass
class InjectionConfig:
    score_threshold: float = 0.9       # axioms must score strictly above this
    max_inferred_per_axiom: int = 1000  # skip axioms inferring more heads than this
    sparsity_threshold: float = 0.995

    def __post_init__(self):
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in [0, 1]")
        if self.max_inferred_per_axiom < 1:
            raise ValueError("max_inferred_per_axiom must be >= 1")
        if not 0.0 <= self.sparsity_threshold <= 1.0:
            raise ValueError("sparsity_threshold must lie in [0, 1]")


def ground_axiom(kg: KnowledgeGraph, axiom: Axiom) -> list[Grounding]:
    """All rule instantiations whose body lies in the graph and head does not.

    One grounding per variable assignment: a transitive or chain head
    reachable through several intermediates appears once per path.  Bodies
    range over original graph triples only; inferred triples are never
    chained within one injection round.
    """
    t = axiom.type
    rels = axiom.relations
    out: list[Grounding] = []

    def emit(head: Triple, body: tuple[Triple, ...]) -> None:
        if not kg.contains(*head):
            out.append(Grounding(head, body, axiom))

    if t is AxiomType.REFLEXIVE:
        r = rels[0]
        for e in kg.entity_occurs_with(r):
            emit(Triple(e, r, e), ())
    elif t is AxiomType.SYMMETRIC:
        r = rels[0]
        for b in kg.triples_of(r):
            emit(Triple(b.object, r, b.subject), (b,))
    elif t is AxiomType.TRANSITIVE:
        r = rels[0]
        for b1 in kg.triples_of(r):
            for z in kg.objects_of(b1.object, r):
                emit(Triple(b1.subject, r, z), (b1, Triple(b1.object, r, z)))
    elif t in (AxiomType.EQUIVALENT, AxiomType.SUB_PROPERTY):
        body_rel, head_rel = rels
        for b in kg.triples_of(body_rel):
            emit(Triple(b.subject, head_rel, b.object), (b,))
    elif t is AxiomType.INVERSE:
        head_rel, body_rel = rels
        for b in kg.triples_of(body_rel):
            emit(Triple(b.object, head_rel, b.subject), (b,))
    elif t is AxiomType.SUB_PROPERTY_CHAIN:
        b1_rel, b2_rel, head_rel = rels
        for b1 in kg.triples_of(b1_rel):
            for y2 in kg.objects_of(b1.object, b2_rel):
                emit(Triple(b1.subject, head_rel, y2), (b1, Triple(b1.object, b2_rel, y2)))
    else:  # pragma: no cover
        raise ValueError(f"unhandled axiom type {t}")
    return out


def inject_triples(
    kg: KnowledgeGraph,
    scored_axioms: Sequence[ScoredAxiom],
    sparse: set[int],
    config: InjectionConfig,
    restrict_sparse: bool = True,
) -> list[InferredTriple]:
    """Infer soft-labeled triples from axioms above the score threshold.

    An axiom whose full grounding proposes more than ``max_inferred_per_axiom``
    distinct heads is skipped outright rather than truncated: a single axiom
    flooding the input would skew the training distribution.  Heads are then
    filtered to those touching a sparse entity (disable via
    ``restrict_sparse`` to inspect the unfiltered inference), merged across
    axioms keeping the maximum score, and labeled through solve_head_truth.
    Output is sorted by triple ids.
    """
    best: dict[Triple, ScoredAxiom] = {}
    sources: dict[Triple, list[Axiom]] = {}
    for sa in scored_axioms:
        if sa.score <= config.score_threshold:
            continue
        groundings = ground_axiom(kg, sa.axiom)
        heads = {g.head for g in groundings}
        if len(heads) > config.max_inferred_per_axiom:
            continue
        if restrict_sparse:
            heads = {h for h in heads if h.subject in sparse or h.object in sparse}
        for h in heads:
            if h not in best or sa.score > best[h].score:
                best[h] = sa
            sources.setdefault(h, []).append(sa.axiom)
    out = []
    for triple in sorted(best):
        sa = best[triple]
        truth = solve_head_truth([1.0] * _body_arity(sa.axiom), sa.score)
        out.append(InferredTriple(triple, truth, tuple(sources[triple])))
    return out


def _body_arity(axiom: Axiom) -> int:
    if axiom.type is AxiomType.REFLEXIVE:
        return 0
    if axiom.type in (AxiomType.TRANSITIVE, AxiomType.SUB_PROPERTY_CHAIN):
        return 2
    return 1


def write_injected_tsv(
    path: str,
    inferred: Sequence[InferredTriple],
    entities: Vocabulary,
    relations: Vocabulary,
) -> None:
    """Audit dump: subject, relation, object, truth, source-axiom-count."""
    with open(path, "w", encoding="utf-8") as fh:
        for it in inferred:
            s, r, o = it.triple
            fh.write(
                f"{entities.name_of(s)}\t{relations.name_of(r)}\t{entities.name_of(o)}"
                f"\t{it.truth!r}\t{len(it.sources)}\n"
            )


def read_injected_tsv(
    path: str, entities: Vocabulary, relations: Vocabulary
) -> list[tuple[Triple, float, int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            s, r, o = entities.id_of(fields[0]), relations.id_of(fields[1]), entities.id_of(fields[2])
            out.append((Triple(s, r, o), float(fields[3]), int(fields[4])))
    return out
