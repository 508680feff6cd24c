"""Key-gate insertion and verification for combinational logic locking.

Key gates are in-line XOR/XNOR gates on internal nets: an XNOR pairs with
secret bit 1 and an XOR with secret bit 0, so applying the correct key
reduces every key gate to a buffer and restores the original function.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .cnf import miter, solve_cnf
from .errors import KeyLengthMismatch, SignatureMismatch, TooManyKeys
from .netlist import Netlist, eval_packed, parse_bench, serialize_bench, transitive_fanin_sets

KEY_PREFIX = "keyinput_"


@dataclass(frozen=True)
class Key:
    bits: tuple[int, ...]

    def __len__(self):
        return len(self.bits)

    def to_hex(self) -> str:
        """Hex with bit 0 (keyinput_0) as the most significant bit."""
        if not self.bits:
            return ""
        value = int("".join(str(b) for b in self.bits), 2)
        return f"{value:0{(len(self.bits) + 3) // 4}x}"

    @classmethod
    def from_hex(cls, text: str, size: int) -> "Key":
        if size == 0:
            return cls(())
        value = int(text, 16)
        bits = tuple((value >> (size - 1 - i)) & 1 for i in range(size))
        return cls(bits)

    @classmethod
    def random(cls, size: int, rng: random.Random) -> "Key":
        return cls(tuple(rng.randrange(2) for _ in range(size)))


@dataclass(eq=False)
class LockedDesign:
    netlist: Netlist  # original netlist plus key gates and keyinput_* PIs
    secret_key: Key
    placements: tuple[tuple[str, str, int], ...]  # (original net, XOR|XNOR, key index)
    strategy_tag: str = "RLL"
    seed: int = 0

    @property
    def key_size(self) -> int:
        return len(self.secret_key)

    @property
    def key_inputs(self) -> tuple[str, ...]:
        return tuple(f"{KEY_PREFIX}{i}" for i in range(self.key_size))


def _keyed_net(net: str, index: int) -> str:
    return f"{net}__keyed{index}"


def _candidate_nets(n: Netlist) -> list[str]:
    """Nets eligible for a key gate: anything driven except PO-driving nets."""
    pos = set(n.primary_outputs)
    out: list[str] = []
    for net in n.comb_inputs:
        if net not in pos:
            out.append(net)
    for gate_out, _k, _i in n.gates:
        if gate_out not in pos:
            out.append(gate_out)
    return out


def _sll_like_order(n: Netlist, candidates: list[str], k: int) -> list[str]:
    """Greedy max-interference selection.

    Two candidates interfere when one lies in the other's transitive fan-in.
    Start from the globally best-connected net and grow the set by the
    candidate with the most edges into it, tie-broken by net name.
    """
    fanin = transitive_fanin_sets(n)
    cand = sorted(candidates)
    interferes = {
        c: {d for d in cand if d != c and (d in fanin[c] or c in fanin[d])}
        for c in cand
    }
    chosen: list[str] = []
    chosen_set: set[str] = set()
    first = max(cand, key=lambda c: (len(interferes[c]), c))
    chosen.append(first)
    chosen_set.add(first)
    while len(chosen) < k:
        best = max(
            (c for c in cand if c not in chosen_set),
            key=lambda c: (len(interferes[c] & chosen_set), len(interferes[c]), c),
        )
        chosen.append(best)
        chosen_set.add(best)
    return chosen


def insert_key_gates(n: Netlist, k: int, strategy: str = "RLL", seed: int = 0) -> LockedDesign:
    """Insert `k` in-line XOR/XNOR key gates, returning a LockedDesign.

    `strategy` is "RLL" (seeded random net choice) or "SLL_LIKE" (greedy
    interference heuristic). Deterministic for a fixed seed.
    """
    if strategy not in ("RLL", "SLL_LIKE"):
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = random.Random(seed)
    candidates = _candidate_nets(n)
    if k > len(n.gates) or k > len(candidates):
        raise TooManyKeys(f"{k} keys requested, {min(len(n.gates), len(candidates))} insertable")
    secret = Key.random(k, rng)
    if k == 0:
        return LockedDesign(n, secret, (), strategy, seed)
    if strategy == "RLL":
        nets = rng.sample(candidates, k)
    else:
        nets = _sll_like_order(n, candidates, k)

    placements = tuple(
        (net, "XNOR" if secret.bits[i] else "XOR", i) for i, net in enumerate(nets)
    )
    renamed = {net: _keyed_net(net, i) for net, _kind, i in placements}

    def remap(name: str) -> str:
        return renamed.get(name, name)

    gates = [(out, kind, tuple(remap(i) for i in ins)) for out, kind, ins in n.gates]
    for net, kind, i in placements:
        gates.append((renamed[net], kind, (net, f"{KEY_PREFIX}{i}")))
    dffs = tuple((q, remap(d)) for q, d in n.dffs)
    pis = n.primary_inputs + tuple(f"{KEY_PREFIX}{i}" for i in range(k))
    locked = Netlist(tuple(gates), pis, n.primary_outputs, dffs, f"{n.name}.locked")
    return LockedDesign(locked, secret, placements, strategy, seed)


def apply_key(ld: LockedDesign, key: Key) -> Netlist:
    """Hardwire key inputs to `key` and constant-propagate the key gates away.

    A key gate whose bit matches its polarity vanishes; a mismatched bit
    leaves a NOT in its place. The result has the original PI/PO signature.
    """
    if len(key) != ld.key_size:
        raise KeyLengthMismatch(f"expected {ld.key_size} bits, got {len(key)}")
    by_keyed_net = {
        _keyed_net(net, i): (net, kind, i) for net, kind, i in ld.placements
    }
    drop = {}  # keyed net -> replacement source net
    keep_not = set()
    for net, kind, i in ld.placements:
        inverted = key.bits[i] != (1 if kind == "XNOR" else 0)
        if inverted:
            keep_not.add(_keyed_net(net, i))
        else:
            drop[_keyed_net(net, i)] = net

    def remap(name: str) -> str:
        return drop.get(name, name)

    gates = []
    for out, kind, ins in ld.netlist.gates:
        if out in drop:
            continue
        if out in keep_not:
            gates.append((out, "NOT", (by_keyed_net[out][0],)))
        else:
            gates.append((out, kind, tuple(remap(i) for i in ins)))
    pis = tuple(p for p in ld.netlist.primary_inputs if not p.startswith(KEY_PREFIX))
    dffs = tuple((q, remap(d)) for q, d in ld.netlist.dffs)
    name = ld.netlist.name.removesuffix(".locked")
    return Netlist(tuple(gates), pis, ld.netlist.primary_outputs, dffs, name)


def verify_lock(ld: LockedDesign, original: Netlist) -> bool:
    """True iff the design under its secret key is equivalent to `original`.

    Structural equality is tried first (the correct key folds every key gate
    away, restoring the original gate list); otherwise exhaustion for up to
    20 combinational inputs, and a miter-UNSAT check beyond that.
    """
    unlocked = apply_key(ld, ld.secret_key)
    if set(unlocked.primary_inputs) != set(original.primary_inputs) or set(
        unlocked.primary_outputs
    ) != set(original.primary_outputs):
        raise SignatureMismatch(
            f"{unlocked.name} vs {original.name}: PI/PO sets differ"
        )
    if unlocked == original:
        return True
    n_in = len(original.comb_inputs)
    if n_in <= 20:
        return _exhaustive_equal(unlocked, original)
    return solve_cnf(miter(unlocked, original)) is None


def _exhaustive_equal(a: Netlist, b: Netlist, chunk_bits: int = 16) -> bool:
    names = a.comb_inputs
    n = len(names)
    step = min(n, chunk_bits)
    width = 1 << step
    base = {}
    for i in range(step):  # walking-bit patterns for the low input bits
        v = 0
        for p in range(width):
            v |= ((p >> i) & 1) << p
        base[names[i]] = v
    mask = (1 << width) - 1
    for high in range(1 << (n - step)):
        assign = dict(base)
        for i in range(step, n):
            assign[names[i]] = mask if (high >> (i - step)) & 1 else 0
        va = eval_packed(a, assign, width)
        vb = eval_packed(b, assign, width)
        if any(va[o] != vb[o] for o in a.comb_outputs):
            return False
    return True


# ---------------------------------------------------------------------------
# Serialization: locked BENCH plus a JSON sidecar with the secret

def save_locked(ld: LockedDesign, bench_path, sidecar_path) -> None:
    with open(bench_path, "w") as fh:
        fh.write(serialize_bench(ld.netlist))
    sidecar = {
        "key_size": ld.key_size,
        "secret_key_hex": ld.secret_key.to_hex(),
        "placements": [list(p) for p in ld.placements],
        "strategy": ld.strategy_tag,
        "seed": ld.seed,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_locked(bench_path, sidecar_path) -> LockedDesign:
    with open(bench_path) as fh:
        netlist = parse_bench(fh.read(), name=str(bench_path))
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    key = Key.from_hex(sidecar["secret_key_hex"], sidecar["key_size"])
    placements = tuple((p[0], p[1], p[2]) for p in sidecar["placements"])
    return LockedDesign(netlist, key, placements, sidecar["strategy"], sidecar["seed"])
