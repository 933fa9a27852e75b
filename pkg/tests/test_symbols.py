import dataclasses
import importlib
import re
from pathlib import Path

import pytest

from tesplan import domain, synth
from tesplan.pipeline import prepare
from tesplan.tsreduce import ReducedSeries

TABLE = Path(__file__).resolve().parents[1] / "docs" / "symbols.md"
ROW = re.compile(r"^\| `([^`]+)` \| [^|]+ \| `([^`]+)` \|$")

# every symbol the formulation uses
REQUIRED = {
    "z, Z", "y, G^th", "G^coal, G^gas", "G^res", "O^lib", "O^tes", "T", "t_0",
    "I^th", "F^th", "P̄^size", "Ω^exist", "γ", "ΔP^up", "ΔP^down", "π^vom", "π^fuel",
    "I^res", "F^res", "P̄^exist (res)", "α^res", "I^dis (lib)", "I^en (lib)", "F^dis (lib)", "P̄^exist (lib)",
    "I^ch", "I^retro", "I^en (tes)", "F^dis (tes)", "π^vom,dis", "η^ch", "η^dis", "η^self", "d^min", "d^max",
    "D^dc", "λ", "H", "π^unmet", "r", "k", "ω_t", "Δt",
    "Ω^inv", "Ω^retire", "Ω^retro", "P̄^inv (res)", "P̄^dis (lib)", "Ē^inv (lib)", "P̄^ch", "P̄^dis (tes)",
    "Ē^tes", "P^dis (th)", "P^dis (sto)", "P^ch", "E_t", "r^unmet",
    "Ω^net", "h", "E_0", "CRF",
}


def _entries():
    out = []
    for line in TABLE.read_text(encoding="utf-8").splitlines():
        m = ROW.match(line.strip())
        if m:
            out.append(m.groups())
    return out


@pytest.fixture(scope="module")
def toy3_families():
    model = prepare(synth.toy3(), k=1)[2]
    return ({n.split("[")[0] for n in model.var_names}, {n.split("[")[0] for n in model.row_registry})


def _resolves(target, var_families, row_families):
    kind, _, rest = target.partition(":")
    if kind == "var":
        return rest in var_families
    if kind == "row":
        return rest in row_families
    if kind == "func":
        module, _, attr = rest.rpartition(".")
        try:
            obj = importlib.import_module(module)
        except ImportError:
            # method of a class: module.Class.name
            module, _, owner = module.rpartition(".")
            obj = getattr(importlib.import_module(module), owner)
        return callable(getattr(obj, attr, None))
    cls_name, _, field = target.partition(".")
    cls = ReducedSeries if cls_name == "ReducedSeries" else getattr(domain, cls_name)
    return field in {f.name for f in dataclasses.fields(cls)} or hasattr(cls, field)


def test_every_symbol_listed_once():
    symbols = [s for s, _ in _entries()]
    assert len(symbols) == len(set(symbols))
    assert set(symbols) == REQUIRED


def test_targets_resolve(toy3_families):
    bad = [(s, t) for s, t in _entries() if not _resolves(t, *toy3_families)]
    assert bad == []


def test_model_targets_distinct():
    targets = [t for _, t in _entries() if t.startswith(("var:", "row:", "func:"))]
    assert len(targets) == len(set(targets))
