import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel

from ..models.errors import UsageError
from ..models.field import FieldSpec
from ..models.hierarchy import LocalDistributionFamily, MomentMatrix
from ..models.pydantic_models import PredicateKind, format_rational, parse_rational
from ..models.schemas import (
    AtomDistribution, Constraint, CosetPredicate, CspInstance, Hypergraph, LinearProgram, ParityCheckGraph,
)

PathLike = Union[str, Path]


# JSON files
def write_json(path: PathLike, payload: Union[BaseModel, Dict[str, Any], List[Any]]) -> Path:
    path = Path(path)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, default=_default)
    path.write_text(text + "\n")
    return path


def read_json(path: PathLike) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}")


def _default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


# Parity-check graphs
def graph_to_alist(g: ParityCheckGraph) -> str:
    """MacKay's alist layout with 1-based indices and zero padding"""
    columns = g.variable_neighbors()
    col_weights = [len(c) for c in columns]
    row_weights = [len(r) for r in g.checks]
    max_col = max(col_weights, default=0)
    max_row = max(row_weights, default=0)
    lines = [f"{g.n} {g.m}", f"{max_col} {max_row}",
             " ".join(map(str, col_weights)), " ".join(map(str, row_weights))]
    for col in columns:
        lines.append(" ".join(str(j + 1) for j in col) + " 0" * (max_col - len(col)))
    for row in g.checks:
        lines.append(" ".join(str(v + 1) for v in row) + " 0" * (max_row - len(row)))
    return "\n".join(line.strip() for line in lines) + "\n"


def graph_from_alist(text: str, d_v: Optional[int] = None, d_c: Optional[int] = None,
                     seed: Optional[int] = None) -> ParityCheckGraph:
    """
    Parse an alist file; rows and columns must describe the same matrix

    Raises:
        UsageError: malformed file
    """
    try:
        tokens = [[int(x) for x in line.split()] for line in text.strip().splitlines() if line.strip()]
        n, m = tokens[0]
        max_col, max_row = tokens[1]
        col_weights, row_weights = tokens[2], tokens[3]
        if len(col_weights) != n or len(row_weights) != m or len(tokens) != 4 + n + m:
            raise UsageError("alist header does not match its body")
        columns = [[j - 1 for j in row if j] for row in tokens[4:4 + n]]
        checks = [[v - 1 for v in row if v] for row in tokens[4 + n:4 + n + m]]
    except (ValueError, IndexError) as exc:
        raise UsageError(f"malformed alist file: {exc}")
    for weights, lists in ((col_weights, columns), (row_weights, checks)):
        if [len(x) for x in lists] != weights:
            raise UsageError("alist weights disagree with the listed indices")
    if any(not 0 <= v < n for row in checks for v in row) or any(not 0 <= j < m for col in columns for j in col):
        raise UsageError("alist index out of range")
    from_rows = sorted((j, v) for j, row in enumerate(checks) for v in row)
    from_cols = sorted((j, v) for v, col in enumerate(columns) for j in col)
    if from_rows != from_cols:
        raise UsageError("alist row and column lists describe different matrices")
    return ParityCheckGraph(n=n, d_v=d_v or max_col, d_c=d_c or max_row,
                            checks=tuple(tuple(sorted(row)) for row in checks), seed=seed)


def graph_to_dict(g: ParityCheckGraph) -> Dict[str, Any]:
    return {"n": g.n, "m": g.m, "d_v": g.d_v, "d_c": g.d_c, "seed": g.seed,
            "checks": [list(c) for c in g.checks]}


def graph_from_dict(data: Dict[str, Any]) -> ParityCheckGraph:
    return ParityCheckGraph(n=data["n"], d_v=data["d_v"], d_c=data["d_c"],
                            checks=tuple(tuple(sorted(c)) for c in data["checks"]), seed=data.get("seed"))


def load_graph(path: PathLike) -> ParityCheckGraph:
    """A code from an alist file, or from JSON carrying a `checks` list"""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    if path.suffix == ".json":
        data = read_json(path)
        try:
            return graph_from_dict(data)
        except (KeyError, TypeError) as exc:
            raise UsageError(f"{path} is not a code description: {exc}")
    meta = path.with_suffix(".json")
    extra = read_json(meta) if meta.exists() else {}
    return graph_from_alist(path.read_text(), extra.get("d_v"), extra.get("d_c"), extra.get("seed"))


# Hypergraphs
def hypergraph_to_dict(h: Hypergraph) -> Dict[str, Any]:
    return {"n": h.n, "k": h.k, "seed": h.seed, "edges": [list(e) for e in h.edges]}


def hypergraph_from_dict(data: Dict[str, Any]) -> Hypergraph:
    try:
        return Hypergraph(n=data["n"], k=data["k"], edges=tuple(tuple(e) for e in data["edges"]),
                          seed=data.get("seed"))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"not a hypergraph description: {exc}")


# Linear programs and payloads
def lp_to_dict(lp: LinearProgram) -> Dict[str, Any]:
    def bound(b: Optional[Fraction]) -> Optional[str]:
        return None if b is None else format_rational(b)

    return {
        "variables": [{"name": name, "lower": bound(lo), "upper": bound(hi),
                       "cost": format_rational(lp.objective.get(j, 0))}
                      for j, (name, lo, hi) in enumerate(zip(lp.variables, lp.lower, lp.upper))],
        "constraints": [{"name": c.name, "relation": c.relation, "rhs": format_rational(c.rhs),
                         "coeffs": {lp.variables[j]: format_rational(a) for j, a in sorted(c.coeffs.items())}}
                        for c in lp.constraints],
    }


def distribution_to_dict(dist: AtomDistribution) -> Dict[str, Any]:
    data: Dict[str, Any] = {"q": dist.q, "k": dist.k}
    if dist.weight_classes is not None:
        data["weights_by_zeros"] = {str(r): format_rational(w)
                                    for r, w in sorted(dist.weight_classes.weights.items())}
    if dist.atoms is not None:
        data["atoms"] = [{"tuple": list(t), "prob": format_rational(p)} for t, p in sorted(dist.atoms.items()) if p]
    return data


def field_from_dict(data: Dict[str, Any]) -> FieldSpec:
    return FieldSpec(p=data["p"], m=data["m"], modulus=tuple(data["modulus"]))


def coset_to_dict(c: CosetPredicate) -> Dict[str, Any]:
    return {"label": c.label, "kind": c.kind.value, "k": c.k, "field": c.spec.to_json(),
            "shift": list(c.shift), "generators": [list(g) for g in c.generators],
            "blocks": [list(b) for b in c.summand_blocks]}


# Instances and solutions
def instance_to_dict(instance: CspInstance) -> Dict[str, Any]:
    return {"n": instance.n, "alphabet": instance.alphabet, "stretched": instance.stretched,
            "received": None if instance.received is None else list(instance.received),
            "constraints": [{"kind": c.kind.value, "variables": list(c.variables)} for c in instance.constraints]}


def instance_from_dict(data: Dict[str, Any]) -> CspInstance:
    constraints = tuple(Constraint(kind=PredicateKind(c["kind"]), variables=tuple(c["variables"]))
                        for c in data["constraints"])
    received = data.get("received")
    return CspInstance(n=data["n"], alphabet=data["alphabet"], constraints=constraints,
                       stretched=data.get("stretched", False),
                       received=None if received is None else tuple(received))


def family_to_dict(family: LocalDistributionFamily) -> Dict[str, Any]:
    return {
        "q": family.q, "t": family.t, "n": family.n,
        "entries": [{"S": list(S), "alpha": list(alpha), "prob": format_rational(p)}
                    for S in family.sets() for alpha, p in sorted(family.entries[S].items())],
        "sets": [list(S) for S in family.sets()],
    }


def family_from_dict(data: Dict[str, Any]) -> LocalDistributionFamily:
    family = LocalDistributionFamily(q=data["q"], t=data["t"], n=data["n"])
    tables: Dict[tuple, Dict[tuple, Fraction]] = {tuple(S): {} for S in data.get("sets", [])}
    for row in data["entries"]:
        table = tables.setdefault(tuple(row["S"]), {})
        table[tuple(row["alpha"])] = parse_rational(row["prob"])
    for S, table in tables.items():
        family.add(S, table)
    return family


def moment_to_dict(mm: MomentMatrix) -> Dict[str, Any]:
    """Nonzero upper-triangle entries as [i, j, "num/den"]"""
    entries = [[i, j, format_rational(v)] for i, row in enumerate(mm.entries)
               for j, v in enumerate(row) if j >= i and v]
    return {
        "q": mm.q, "t": mm.t, "size": mm.size,
        "field": None if mm.spec is None else mm.spec.to_json(),
        "index": [{"S": list(S), "alpha": list(alpha)} for S, alpha in mm.index],
        "entries": entries,
        "family": family_to_dict(mm.local),
        "instance": None if mm.instance is None else instance_to_dict(mm.instance),
    }


def moment_from_dict(data: Dict[str, Any]) -> MomentMatrix:
    size = data["size"]
    zero = Fraction(0)
    rows = [[zero] * size for _ in range(size)]
    for i, j, value in data["entries"]:
        rows[i][j] = rows[j][i] = parse_rational(value)
    return MomentMatrix(
        q=data["q"], t=data["t"],
        index=[(tuple(r["S"]), tuple(r["alpha"])) for r in data["index"]],
        entries=rows, local=family_from_dict(data["family"]),
        spec=None if data.get("field") is None else field_from_dict(data["field"]),
        instance=None if data.get("instance") is None else instance_from_dict(data["instance"]),
    )
