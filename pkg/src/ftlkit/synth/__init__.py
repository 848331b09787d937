"""Netlist flow: BLIF I/O, cut enumeration, threshold-cell mapping,
equivalence checking, PPA accounting and timing repair."""

from .netlist import Netlist, Gate, Dff, FtlCell, NetlistError, parse_blif, emit_blif
from .cuts import Cut, enumerate_cuts, cone_function, is_valid_cut
from .mapping import FtlCellRef, map_to_ftl, inverters_added, check_matching
from .equiv import EquivalenceResult, verify_equivalence
from .ppa import TechTable, ReplacementReport, ppa_report, totals
from .timing import Stage, TimingFix, fix_timing, check_stage
