"""Falsification harness: fuzz the solver against the exact oracle.

Every trial builds an instance, runs the full pipeline, runs the oracle,
and classifies any disagreement:

  UnsoundNo               pipeline said No, oracle found a homomorphism
  InternalInvariantBroken pipeline tripped one of its own claim checks
  Other                   anything else that should never happen

Discrepancies are serialized one JSON document per line so a report file
can be replayed later.  Reports carry no timing data; a rerun with the same
seed and profile produces byte-identical lines.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional

from .common import sha256_hex
from .config import SolveConfig
from .digraph import (
    Digraph,
    LevelMismatchError,
    NotBalancedError,
    apex_join,
    apex_join_instance,
    dump_digraph_text,
    gen_balanced,
    gen_random_digraph,
    load_digraph_text,
)
from .oracle import BUDGET_EXHAUSTED as ORACLE_BUDGET
from .oracle import solve_exact
from .oracle import verify as oracle_verify
from .pipeline import FALSIFIED_VERDICT, NO, YES, run_pipeline
from .polymorphism import (
    BUDGET_EXHAUSTED,
    dump_table_text,
    find_weak_nu,
    load_table_text,
)

UNSOUND_NO = "UnsoundNo"
INVARIANT_BROKEN = "InternalInvariantBroken"
OTHER = "Other"

_WNU_CACHE: dict = {}


class GenerationFailedError(RuntimeError):
    pass


@dataclass(frozen=True)
class FuzzProfile:
    name: str
    modes: tuple
    max_g: int = 7
    max_h: int = 4
    min_g: int = 1
    min_h: int = 1
    arc_prob_lo: float = 0.1
    arc_prob_hi: float = 0.7


PROFILES = {
    "random": FuzzProfile("random", ("random",)),
    "mixed": FuzzProfile(
        "mixed", ("random", "random", "balanced", "counterexample")
    ),
    "counterexample": FuzzProfile("counterexample", ("counterexample",)),
    "loop": FuzzProfile("loop", ("loop",)),
}


@dataclass(frozen=True)
class FamilyParams:
    """Layered two-sided targets joined under one apex, with cores built to
    map into the first side; the structure the elimination loop mishandles."""

    levels: int = 3
    comp_vertices: int = 5
    comp_arc_prob: float = 0.55
    instance_vertices: int = 4
    instance_arc_prob: float = 0.7
    walk_count: int = 3
    walk_steps: int = 6
    retry_budget: int = 80


def _walk_closed_subgraph(h: Digraph, rng: random.Random, walks: int, steps: int):
    """Arcs touched by a few random oriented walks, plus their endpoints."""
    verts = set()
    arcs = set()
    if h.n == 0:
        return verts, arcs
    for _ in range(walks):
        v = rng.randrange(h.n)
        verts.add(v)
        for _ in range(steps):
            moves = [("f", u) for u in h.out_sorted(v)]
            moves += [("b", u) for u in h.in_sorted(v)]
            if not moves:
                break
            direction, u = moves[rng.randrange(len(moves))]
            arcs.add((v, u) if direction == "f" else (u, v))
            verts.add(u)
            v = u
    return verts, arcs


def gen_counterexample_family(params: FamilyParams, seed: int):
    """An instance over a two-sided apex target.

    The core is a homomorphic preimage of a walk-closed subgraph of the
    first side, so it maps into that side by construction (and the oracle
    re-confirms it).  Whether the full instance maps into the target, and
    whether the core avoids the second side, are recorded in metadata
    rather than enforced; no recipe for forcing both is known."""
    rng = random.Random(f"family:{seed}")
    for attempt in range(params.retry_budget):
        s1, s2 = rng.randrange(2**31), rng.randrange(2**31)
        try:
            side_a = gen_balanced(
                params.comp_vertices, params.levels, params.comp_arc_prob, s1
            )
            side_b = gen_balanced(
                params.comp_vertices, params.levels, params.comp_arc_prob, s2
            )
            h = apex_join(side_a.base, side_b.base)
        except (NotBalancedError, LevelMismatchError, ValueError):
            continue
        sub_verts, sub_arcs = _walk_closed_subgraph(
            side_a.base, rng, params.walk_count, params.walk_steps
        )
        if not sub_arcs:
            continue
        anchors = sorted(sub_verts)
        image = [
            anchors[rng.randrange(len(anchors))]
            for _ in range(params.instance_vertices)
        ]
        core_arcs = [
            (u, v)
            for u in range(params.instance_vertices)
            for v in range(params.instance_vertices)
            if (image[u], image[v]) in sub_arcs
            and rng.random() < params.instance_arc_prob
        ]
        core = Digraph(params.instance_vertices, core_arcs)
        ok, _witness = oracle_verify(core, side_a.base, image)
        if not ok:
            continue
        try:
            g = apex_join_instance(core)
        except NotBalancedError:
            continue
        meta = {
            "attempt": attempt,
            "levels": params.levels,
            "g_n": g.n,
            "h_n": h.n,
            "core_maps_first_side": True,
            "hom_g_h": solve_exact(g, h) is not None,
            "core_avoids_second_side": solve_exact(core, side_b.base) is None,
        }
        return g, h, meta
    raise GenerationFailedError(
        f"no family instance within {params.retry_budget} attempts (seed {seed})"
    )


# -- payloads ------------------------------------------------------------------


def payload_from(g, h, phi, config: SolveConfig) -> dict:
    return {
        "g": dump_digraph_text(g),
        "h": dump_digraph_text(h),
        "phi": dump_table_text(phi),
        "config": json.loads(config.to_json()),
    }


def instance_from_payload(payload: dict):
    g = load_digraph_text(payload["g"])
    h = load_digraph_text(payload["h"])
    phi = load_table_text(payload["phi"])
    config = SolveConfig(**payload["config"])
    return g, h, phi, config


@dataclass(frozen=True)
class DiscrepancyReport:
    classification: str
    trial: int
    seed: int
    payload: dict
    pipeline_verdict: str
    falsification: Optional[dict]
    oracle_verdict: str
    trace_tail: tuple

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "kind": "discrepancy",
                "classification": self.classification,
                "trial": self.trial,
                "seed": self.seed,
                "payload": self.payload,
                "pipeline_verdict": self.pipeline_verdict,
                "falsification": self.falsification,
                "oracle_verdict": self.oracle_verdict,
                "trace_tail": [list(e) for e in self.trace_tail],
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json_line(line: str) -> "DiscrepancyReport":
        data = json.loads(line)
        return DiscrepancyReport(
            classification=data["classification"],
            trial=data["trial"],
            seed=data["seed"],
            payload=data["payload"],
            pipeline_verdict=data["pipeline_verdict"],
            falsification=data["falsification"],
            oracle_verdict=data["oracle_verdict"],
            trace_tail=tuple(tuple(e) for e in data["trace_tail"]),
        )


@dataclass
class FuzzSummary:
    trials: int
    counts: dict
    discrepancies: list
    lines: list = field(default_factory=list)

    @property
    def digest(self) -> str:
        return sha256_hex("\n".join(self.lines).encode("utf-8"))


def _cached_wnu(h: Digraph, k: int, budget: int):
    key = (h.digest(), k, budget)
    if key not in _WNU_CACHE:
        _WNU_CACHE[key] = find_weak_nu(h, k=k, node_budget=budget)
    return _WNU_CACHE[key]


def _trial_instance(mode: str, profile: FuzzProfile, rng: random.Random):
    if mode == "loop":
        # target with a loop on its single vertex: everything maps to it
        n_g = rng.randrange(profile.min_g, profile.max_g + 1)
        p_g = rng.uniform(profile.arc_prob_lo, profile.arc_prob_hi)
        g = gen_random_digraph(n_g, p_g, rng.randrange(2**31))
        return g, Digraph(1, [(0, 0)])
    if mode == "counterexample":
        levels = rng.randrange(2, 4)
        params = FamilyParams(
            levels=levels,
            comp_vertices=max(levels, rng.randrange(3, max(4, profile.max_h))),
            instance_vertices=rng.randrange(2, max(3, profile.max_g)),
        )
        g, h, _meta = gen_counterexample_family(params, rng.randrange(2**31))
        return g, h
    n_g = rng.randrange(profile.min_g, profile.max_g + 1)
    n_h = rng.randrange(profile.min_h, profile.max_h + 1)
    p_g = rng.uniform(profile.arc_prob_lo, profile.arc_prob_hi)
    p_h = rng.uniform(profile.arc_prob_lo, profile.arc_prob_hi)
    if mode == "balanced":
        levels = rng.randrange(1, 4)
        n_g = max(n_g, levels)
        n_h = max(n_h, levels)
        g = gen_balanced(n_g, levels, p_g, rng.randrange(2**31)).base
        h = gen_balanced(n_h, levels, p_h, rng.randrange(2**31)).base
        return g, h
    g = gen_random_digraph(n_g, p_g, rng.randrange(2**31))
    h = gen_random_digraph(n_h, p_h, rng.randrange(2**31))
    return g, h


def classify(pipeline_verdict: str, oracle_verdict: str) -> Optional[str]:
    if pipeline_verdict == FALSIFIED_VERDICT:
        return INVARIANT_BROKEN
    if oracle_verdict == "budget":
        return None
    if pipeline_verdict == NO and oracle_verdict == "hom":
        return UNSOUND_NO
    if pipeline_verdict == YES and oracle_verdict == "none":
        return OTHER
    return None


def _oracle_verdict(oracle_result) -> str:
    if oracle_result is ORACLE_BUDGET:
        return "budget"
    return "hom" if oracle_result is not None else "none"


def fuzz(
    trials: int,
    seed: int,
    profile="mixed",
    config: Optional[SolveConfig] = None,
    report_path: Optional[str] = None,
) -> FuzzSummary:
    """Run trials and collect discrepancy lines plus a trailing summary line.

    profile is a PROFILES key or a FuzzProfile value.  Trials whose target
    admits no suitable table layer (refuted or budget exhausted) are counted
    and skipped; the pipeline does not apply there.
    """
    config = config or SolveConfig()
    prof = profile if isinstance(profile, FuzzProfile) else PROFILES[profile]
    counts = {
        "trials": trials,
        "ran": 0,
        "yes": 0,
        "no": 0,
        "falsified": 0,
        "skipped_no_wnu": 0,
        "skipped_wnu_budget": 0,
        "skipped_generation": 0,
        "oracle_budget": 0,
        "discrepancies": 0,
    }
    discrepancies = []
    lines = []
    for trial in range(trials):
        rng = random.Random(f"fuzz:{seed}:{trial}")
        mode = rng.choice(prof.modes)
        try:
            g, h = _trial_instance(mode, prof, rng)
        except GenerationFailedError:
            counts["skipped_generation"] += 1
            continue
        phi = _cached_wnu(h, config.k, config.wnu_node_budget)
        if phi is BUDGET_EXHAUSTED:
            counts["skipped_wnu_budget"] += 1
            continue
        if phi is None:
            counts["skipped_no_wnu"] += 1
            continue
        result = run_pipeline(g, h, phi, config)
        counts["ran"] += 1
        counts[result.verdict if result.verdict in ("yes", "no") else "falsified"] += 1
        oracle_result = solve_exact(g, h, node_budget=config.oracle_node_budget)
        oracle_verdict = _oracle_verdict(oracle_result)
        if oracle_verdict == "budget":
            counts["oracle_budget"] += 1
        label = classify(result.verdict, oracle_verdict)
        if label is not None:
            counts["discrepancies"] += 1
            report = DiscrepancyReport(
                classification=label,
                trial=trial,
                seed=seed,
                payload=payload_from(g, h, phi, config),
                pipeline_verdict=result.verdict,
                falsification=(
                    result.falsification.to_json()
                    if result.falsification
                    else None
                ),
                oracle_verdict=oracle_verdict,
                trace_tail=tuple(result.trace.events[-20:]),
            )
            discrepancies.append(report)
            lines.append(report.to_json_line())
    lines.append(
        json.dumps(
            {"version": 1, "kind": "summary", "counts": counts},
            sort_keys=True,
            separators=(",", ":"),
        )
    )
    summary = FuzzSummary(trials, counts, discrepancies, lines)
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return summary


@dataclass
class ReplaySummary:
    total: int
    matched: int
    mismatches: list


def replay(report_path: str) -> ReplaySummary:
    """Re-run every discrepancy line of a report and compare verdict pairs."""
    with open(report_path, "r", encoding="utf-8") as fh:
        raw_lines = [line for line in fh.read().splitlines() if line.strip()]
    total = 0
    matched = 0
    mismatches = []
    for idx, line in enumerate(raw_lines):
        data = json.loads(line)
        if data.get("kind") != "discrepancy":
            continue
        total += 1
        report = DiscrepancyReport.from_json_line(line)
        g, h, phi, config = instance_from_payload(report.payload)
        result = run_pipeline(g, h, phi, config)
        oracle_verdict = _oracle_verdict(
            solve_exact(g, h, node_budget=config.oracle_node_budget)
        )
        if (
            result.verdict == report.pipeline_verdict
            and oracle_verdict == report.oracle_verdict
        ):
            matched += 1
        else:
            mismatches.append(idx)
    return ReplaySummary(total, matched, mismatches)
