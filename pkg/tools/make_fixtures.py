#!/usr/bin/env python3
"""Regenerate the bundled benchmark fixtures.

s27 is the canonical public ISCAS-89 netlist. The four larger fixtures are
deterministic synthetic stand-ins that reproduce the official circuits'
PI/PO/DFF/gate counts; the official BENCH files are not redistributable
from this environment, and every check in this repository is relative or
structural, so stand-ins with matching statistics serve the same purpose.

Run from the repository root:  python3 tools/make_fixtures.py
"""

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from scanlock.netlist import Netlist, parse_bench, serialize_bench  # noqa: E402

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "scanlock" / "benchmarks"

S27 = """\
# s27 (canonical ISCAS-89 netlist)
INPUT(G0)
INPUT(G1)
INPUT(G2)
INPUT(G3)
OUTPUT(G17)
G5 = DFF(G10)
G6 = DFF(G11)
G7 = DFF(G13)
G14 = NOT(G0)
G17 = NOT(G11)
G8 = AND(G14, G6)
G15 = OR(G12, G8)
G16 = OR(G3, G8)
G9 = NAND(G16, G15)
G10 = NOR(G14, G11)
G11 = NOR(G5, G9)
G12 = NOR(G1, G7)
G13 = NOR(G2, G12)
"""

# (name, PIs, POs, DFFs, gates, seed) -- counts match the official circuits
PROFILES = [
    ("s298", 3, 6, 14, 119, 2981),
    ("s344", 9, 11, 15, 160, 3442),
    ("s1196", 14, 14, 18, 529, 11961),
    ("s1488", 8, 19, 6, 653, 14884),
]

KIND_WEIGHTS = [
    ("NAND", 22),
    ("NOR", 14),
    ("AND", 16),
    ("OR", 14),
    ("NOT", 18),
    ("BUF", 3),
    ("XOR", 8),
    ("XNOR", 5),
]


def _pick_kind(rng: random.Random) -> str:
    total = sum(w for _, w in KIND_WEIGHTS)
    roll = rng.randrange(total)
    for kind, w in KIND_WEIGHTS:
        roll -= w
        if roll < 0:
            return kind
    return "NAND"


def generate(name: str, n_pi: int, n_po: int, n_dff: int, n_gates: int, seed: int) -> Netlist:
    rng = random.Random(seed)
    pis = [f"I{i}" for i in range(n_pi)]
    qs = [f"S{i}" for i in range(n_dff)]
    avail = pis + qs
    unused = list(avail)
    gates = []
    consumers: dict[str, int] = {net: 0 for net in avail}

    def pick_input(out_index: int) -> str:
        # drain not-yet-consumed nets first, otherwise bias toward recent ones
        if unused and rng.random() < 0.6:
            net = unused[rng.randrange(len(unused))]
        else:
            window = max(8, len(avail) // 4)
            lo = max(0, len(avail) - window)
            net = avail[rng.randrange(lo, len(avail))]
        return net

    for k in range(n_gates):
        kind = _pick_kind(rng)
        arity = 1 if kind in ("NOT", "BUF") else 2
        ins = []
        for _ in range(arity):
            net = pick_input(k)
            while arity == 2 and len(ins) == 1 and net == ins[0]:
                net = avail[rng.randrange(len(avail))]
            ins.append(net)
        for net in ins:
            consumers[net] = consumers.get(net, 0) + 1
            if net in unused:
                unused.remove(net)
        out = f"N{k}"
        gates.append((out, kind, tuple(ins)))
        avail.append(out)
        consumers[out] = 0
        unused.append(out)

    # dangling gate outputs make the best POs and next-state nets
    dangling = [g[0] for g in gates if consumers[g[0]] == 0]
    late = [g[0] for g in gates[n_gates // 3 :] if g[0] not in dangling]
    rng.shuffle(dangling)
    rng.shuffle(late)
    picks = (dangling + late)[: n_po + n_dff]
    if len(picks) < n_po + n_dff:
        raise RuntimeError("not enough distinct output nets; adjust the seed")
    po_nets = sorted(picks[:n_po], key=lambda s: int(s[1:]))
    d_nets = picks[n_po : n_po + n_dff]
    dffs = tuple((q, d) for q, d in zip(qs, d_nets))
    n = Netlist(tuple(gates), tuple(pis), tuple(po_nets), dffs, name)
    for src in pis + qs:  # every input and state bit must feed logic
        if consumers[src] == 0:
            raise RuntimeError(f"{name}: {src} is unused; adjust the seed")
    return n


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    (OUT_DIR / "s27.bench").write_text(S27)
    parsed = parse_bench(S27, "s27")
    assert (len(parsed.primary_inputs), len(parsed.primary_outputs),
            len(parsed.dffs), len(parsed.gates)) == (4, 1, 3, 10)
    for name, n_pi, n_po, n_dff, n_gates, seed in PROFILES:
        n = generate(name, n_pi, n_po, n_dff, n_gates, seed)
        header = (
            f"# {name} (synthetic stand-in; PI/PO/DFF/gate counts match the "
            f"official circuit: {n_pi}/{n_po}/{n_dff}/{n_gates}; seed {seed})\n"
        )
        text = header + serialize_bench(n).split("\n", 1)[1]
        (OUT_DIR / f"{name}.bench").write_text(text)
        print(f"wrote {name}: {n_pi} PI, {n_po} PO, {n_dff} DFF, {n_gates} gates")


if __name__ == "__main__":
    main()
