"""Secure scan-chain architectures over logic-locked netlists.

Library layout:

- ``netlist``   gate-level netlists, BENCH I/O, 2/3-valued evaluation, area
- ``cnf``/``sat``  Tseitin encoding, DIMACS, in-repo SAT solver
- ``locking``   key-gate insertion, key application, lock verification
- ``scanarch``  scan stitching and cycle-accurate chip state machines
- ``timingsim`` event-driven inertial-delay simulation of control circuitry
- ``oracle``    the adversary-visible chip surface
- ``attacks``   SAT attack, shift-and-leak, cone-SAT, glitch-and-leak
- ``testharness`` structural/functional test flows, fault coverage, cost
- ``cli``       batch campaign front end (``scanlock`` command)
"""

__version__ = "0.1.0"

from .netlist import Netlist, Tri, parse_bench, serialize_bench, eval_comb, eval3, extract_cone, gate_equivalents
from .locking import Key, LockedDesign, insert_key_gates, apply_key, verify_lock
from .scanarch import ArchKind, ScanDesign, ModePins, ChipState, build_scan_design, power_on, clock_step, sys_rst, area_overhead, MASKED
from .oracle import Oracle
from .timingsim import DelayModel, build_mssd, simulate, glitch_window

__all__ = [
    "Netlist", "Tri", "parse_bench", "serialize_bench", "eval_comb", "eval3",
    "extract_cone", "gate_equivalents", "Key", "LockedDesign",
    "insert_key_gates", "apply_key", "verify_lock", "ArchKind", "ScanDesign",
    "ModePins", "ChipState", "build_scan_design", "power_on", "clock_step",
    "sys_rst", "area_overhead", "MASKED", "Oracle", "DelayModel",
    "build_mssd", "simulate", "glitch_window",
]
