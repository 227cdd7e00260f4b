"""Command-line front end: validate, amalgamate, threads, generate and oracle.

Every command writes a JSON report with the keys command, inputs, verdicts,
witnesses and timing.  The timing block holds work counters rather than wall
time so that reports are byte-reproducible; ``--verbose`` prints wall time.
Exit codes: 0 success, 1 verdict failure, 2 input error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import random
import sys
import time
from pathlib import Path
from typing import Sequence

from . import oracles
from .amal import amalgamated_limit, build_condition_set, canonical, degenerate_identifications, verify_embeddability
from .balg import BAElement, regular_open_completion
from .diagram import (
    BASystem,
    grid_coordinate_system,
    random_coordinate_system,
    two_factor_system,
    validate_system,
)
from .order import InvalidOrder, check_almost_lattice, closure, poset_from_json
from .stone_topo import (
    DiscreteSystem,
    box_image,
    dualize,
    duality_bridge,
    system_violations,
    thread_space,
    threads_by_extension,
)

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3
FAULTS = ("order", "completion", "threads", "box", "projection", "identification")


class InputError(Exception):
    pass


class BudgetError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    command: str
    inputs: list
    seed: int
    max_index_size: int
    max_fiber: int
    product_budget: int
    max_atoms: int
    output: Path | None
    verbose: bool


# ---------------------------------------------------------------------------
# loading


def read_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if not text.strip():
        raise InputError(f"{path} is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data, hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_kind(data) -> str:
    if "index" in data and "algebras" in data:
        return "algebras"
    if "index" in data and "spaces" in data:
        return "spaces"
    if "elements" in data:
        return "poset"
    raise InputError("expected a poset (elements, leq) or a system (index, algebras or spaces)")


def check_index(data):
    """Order and axiom verdicts for a poset description; returns (verdicts, witnesses)."""
    try:
        P = poset_from_json(data)
    except InvalidOrder as exc:
        return {"poset": False, "almost_lattice": False}, [v.to_json() for v in exc.violations]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed poset: {exc!r}") from exc
    report = check_almost_lattice(P)
    witnesses = [{"law": f"axiom ({a})", "witness": list(report.witnesses.get(a, ()))} for a in report.failed()]
    return {"poset": True, "almost_lattice": report.verdict, "axioms": report.to_json()["axioms"]}, witnesses


def _structure(loader, data):
    try:
        return loader(data)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"malformed system: {exc!r}") from exc


def load_system(data):
    """A validated BASystem, or InputError naming the first problem."""
    if file_kind(data) != "algebras":
        raise InputError("expected a system of algebras")
    verdicts, witnesses = check_index(data["index"])
    if not verdicts["almost_lattice"]:
        raise InputError(f"index is not a distributive almost-lattice: {witnesses[0]}")
    S = _structure(BASystem.from_json, data)
    report = validate_system(S)
    if not report.valid:
        raise InputError(f"invalid system: {report.violations[0]}")
    return S


def load_discrete(data):
    """(DiscreteSystem, BASystem or None) from either kind of system file."""
    kind = file_kind(data)
    if kind == "algebras":
        S = load_system(data)
        return dualize(S), S
    if kind != "spaces":
        raise InputError("expected a system file")
    verdicts, witnesses = check_index(data["index"])
    if not verdicts["almost_lattice"]:
        raise InputError(f"index is not a distributive almost-lattice: {witnesses[0]}")
    DS = _structure(DiscreteSystem.from_json, data)
    bad = system_violations(DS)
    if bad:
        raise InputError(f"invalid system: {bad[0]}")
    return DS, None


# ---------------------------------------------------------------------------
# reports


def make_report(config: RunConfig, inputs: dict, verdicts: dict, witnesses: list, timing: dict) -> dict:
    return {
        "command": config.command,
        "inputs": inputs,
        "verdicts": verdicts,
        "witnesses": witnesses,
        "timing": timing,
    }


def dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def input_block(config: RunConfig, digests: list) -> dict:
    return {
        "files": [{"path": p, "sha256": d} for p, d in zip(config.inputs, digests)],
        "seed": config.seed,
        "budgets": {
            "max_index_size": config.max_index_size,
            "max_fiber": config.max_fiber,
            "product_budget": config.product_budget,
            "max_atoms": config.max_atoms,
        },
    }


def _single_input(config: RunConfig):
    if len(config.inputs) != 1:
        raise InputError(f"{config.command} takes exactly one --input")
    return read_json(config.inputs[0])


# ---------------------------------------------------------------------------
# commands


def cmd_validate(config: RunConfig, args):
    data, digest = _single_input(config)
    kind = file_kind(data)
    index_data = data if kind == "poset" else data["index"]
    verdicts, witnesses = check_index(index_data)
    timing = {}
    if kind != "poset":
        if verdicts["almost_lattice"]:
            if kind == "algebras":
                S = _structure(BASystem.from_json, data)
                report = validate_system(S, fail_fast=False)
                witnesses.extend(v.to_json() for v in report.violations)
                verdicts["system"] = report.valid
                timing = {"indices": len(S.index), "join_squares": len(S.join_squares())}
            else:
                DS = _structure(DiscreteSystem.from_json, data)
                bad = system_violations(DS)
                witnesses.extend({"law": v[0], "witness": list(v[1:])} for v in bad)
                verdicts["system"] = not bad
                timing = {"indices": len(DS.index)}
        else:
            verdicts["system"] = False
    verdicts["valid"] = all(v for k, v in verdicts.items() if k != "axioms")
    verdicts["kind"] = kind
    inputs = input_block(config, [digest])
    code = EXIT_OK if verdicts["valid"] else EXIT_VERDICT
    summary = f"validate: {kind} {'valid' if verdicts['valid'] else 'invalid'} ({len(witnesses)} violations)"
    return make_report(config, inputs, verdicts, witnesses, timing), code, summary


def cmd_amalgamate(config: RunConfig, args):
    data, digest = _single_input(config)
    S = load_system(data)
    Lm = amalgamated_limit(S, validate=False)
    report = verify_embeddability(Lm)
    degenerate = degenerate_identifications(Lm)
    degenerate_ok = all(
        v.get("isomorphic", True) and v.get("isomorphic_to_product", True) and v.get("isomorphic_to_direct_limit", True)
        for v in degenerate.values()
    )
    ext = report.extended
    verdicts = {
        "limit_atoms": len(Lm.algebra),
        "conditions": len(Lm.conditions),
        "embeddings": report.per_index,
        "meet_identity": report.meet_identity,
        "density": report.density,
        "extended_correctness": ext["valid"],
        "degenerate": degenerate,
        "ok": report.ok and degenerate_ok,
    }
    witnesses = list(report.defects) + ext.get("violations", [])
    timing = {
        "indices": len(S.index),
        "universe": len(Lm.conditions.elements),
        "conditions": len(Lm.conditions),
        "order_entries": len(Lm.conditions) ** 2,
        "extended_join_squares": len(S.join_squares()) + len(S.index) - 1,
    }
    code = EXIT_OK if verdicts["ok"] else EXIT_VERDICT
    summary = f"amalgamate: |D| = {len(Lm.conditions)}, {len(Lm.algebra)} limit atoms, {'ok' if verdicts['ok'] else 'DEFECTS'}"
    return make_report(config, input_block(config, [digest]), verdicts, witnesses, timing), code, summary


def _random_box(rng: random.Random, DS: DiscreteSystem):
    els = DS.index.elements
    F = closure(DS.index, rng.sample(els, rng.randint(1, len(els))))
    boxes = {}
    for i in sorted(F):
        pts = DS.spaces[i]
        boxes[i] = sorted(rng.sample(pts, rng.randint(0, len(pts))))
    return F, boxes


def _check_budget(DS: DiscreteSystem, budget: int):
    if DS.product_size() > budget:
        raise BudgetError(f"product of space sizes {DS.product_size()} exceeds budget {budget}")


def cmd_threads(config: RunConfig, args):
    data, digest = _single_input(config)
    DS, S = load_discrete(data)
    _check_budget(DS, config.product_budget)
    X, rep = thread_space(DS)
    witnesses = list(rep.witnesses)
    rng = random.Random(config.seed)
    box_failures = 0
    for draw in range(args.boxes):
        F, boxes = _random_box(rng, DS)
        failure = _compare_box(DS, X, F, boxes)
        if failure:
            box_failures += 1
            witnesses.append({"box_image": failure, "draw": draw})
    bridge = None
    if S is not None:
        b = duality_bridge(amalgamated_limit(S, validate=False), X)
        bridge = b.to_json()["verdict"]
        witnesses.extend(b.witnesses)
    verdicts = {
        "threads": len(X),
        "agrees_with_filtration": rep.agrees_with_filtration,
        "surjective": rep.surjective,
        "singleton_extensions": rep.singleton_extensions,
        "commutativity": rep.commutativity,
        "correctness": rep.correctness,
        "bridge": bridge,
        "box_images": {"draws": args.boxes, "failures": box_failures},
    }
    ok = rep.ok and box_failures == 0 and bridge in (None, "bijective")
    verdicts["ok"] = ok
    timing = {"product_size": DS.product_size(), "threads": len(X), "box_draws": args.boxes}
    summary = f"threads: |X| = {len(X)}, bridge {bridge}, {box_failures} box failures, {'ok' if ok else 'FAILED'}"
    return make_report(config, input_block(config, [digest]), verdicts, witnesses, timing), EXIT_OK if ok else EXIT_VERDICT, summary


def cmd_generate(config: RunConfig, args):
    try:
        if args.grid:
            S = grid_coordinate_system(*args.grid, fiber=args.fiber, seed=config.seed)
            shape = {"grid": list(args.grid), "fiber": args.fiber}
        elif args.factors:
            S = two_factor_system(*args.factors)
            shape = {"factors": list(args.factors)}
        else:
            G = random_coordinate_system(
                config.seed,
                max_index_size=config.max_index_size,
                max_fiber=config.max_fiber,
                product_budget=config.product_budget,
                max_atoms=config.max_atoms,
            )
            S = G.system
            shape = {"random": True}
    except ValueError as exc:
        raise BudgetError(str(exc)) from exc
    if S.product_size() > config.product_budget:
        raise BudgetError(f"product of atom counts {S.product_size()} exceeds budget {config.product_budget}")
    summary = f"generate: {len(S.index)} indices, atom counts {sorted(S.atom_counts().values())}"
    return S.to_json(), EXIT_OK, summary, shape


# -- oracle -------------------------------------------------------------------


def _compare_box(DS, X, F, boxes, fault=False):
    V = box_image(DS, F, boxes)
    if fault:
        i = min(V)
        V[i] = V[i] ^ {DS.spaces[i][0]}
    A, images = oracles.box_image_bruteforce(X, F, boxes)
    trimmed = {t for t in X.threads if all(X.value(t, i) in V[i] for i in F)}
    for i in sorted(F):
        if V[i] != images[i]:
            return {"F": sorted(F), "boxes": boxes, "index": i, "recipe": sorted(V[i]), "brute_force": sorted(images[i])}
    if trimmed != A:
        return {"F": sorted(F), "boxes": boxes, "box_mismatch": [list(t) for t in sorted(trimmed ^ A)[:3]]}
    return None


def _oracle_projection(S, fault):
    for (i, j), e in sorted(S.maps.items()):
        for m in range(e.source.full + 1):
            fast = e.project_mask(m)
            if fault:
                fast ^= 1
                fault = False
            slow = oracles.projection_by_infimum(e, BAElement(e.source, m)).mask
            if fast != slow:
                return {
                    "map": f"{i}<{j}",
                    "element": e.source.atom_ids(m),
                    "fast": e.target.atom_ids(fast),
                    "oracle": e.target.atom_ids(slow),
                }
    return None


def _oracle_identification(S, cs, fault):
    classes = oracles.identification_classes(S)
    key_of = {}
    for x, root in sorted(classes.items()):
        key = canonical(S, *x)
        if fault:
            key, fault = (key[0], key[1] ^ 1), False
        if key_of.setdefault(root, key) != key or cs.uindex.get(key) is None:
            return {"element": [x[0], S.algebras[x[0]].atom_ids(x[1])], "canonical": [key[0], key[1]]}
    if len(set(key_of.values())) != len(key_of):
        return {"reason": "distinct classes share a canonical form"}
    return None


def _oracle_order(cs, fault):
    fast = cs.order.copy()
    if fault:
        fast[0, -1] = not fast[0, -1]
    slow = oracles.existential_order(cs)
    diff = fast != slow
    if diff.any():
        a, b = (int(v) for v in next(iter(zip(*diff.nonzero()))))
        return {"d1": cs.label(a), "d2": cs.label(b), "canonical": bool(fast[a, b]), "existential": bool(slow[a, b])}
    if not fast.diagonal().all():
        return {"reflexivity": cs.label(int((~fast.diagonal()).nonzero()[0][0]))}
    bad = oracles.transitivity_failures(fast)
    if len(bad):
        a, c = (int(v) for v in bad[0])
        return {"transitivity": [cs.label(a), cs.label(c)]}
    return None


def _oracle_completion(cs, fault, limit):
    P = cs.preorder()
    comp = regular_open_completion(P)
    if fault:
        dense = list(comp.dense)
        dense[0] ^= 1
        comp = dataclasses.replace(comp, dense=tuple(dense))
    try:
        problems = oracles.compare_completion(P, comp, limit=limit)
    except oracles.OracleBudget as exc:
        raise BudgetError(str(exc)) from exc
    return {"problems": problems} if problems else None


def _oracle_threads(DS, fault):
    X = threads_by_extension(DS)
    fast = set(X.threads)
    if fault:
        fast.discard(min(fast))
    slow = set(oracles.threads_by_filtration(DS))
    if fast != slow:
        t = min(fast ^ slow)
        return {"thread": list(t), "in_constructive": t in fast, "in_filtration": t in slow}, X
    return None, X


def cmd_oracle(config: RunConfig, args):
    data, digest = _single_input(config)
    DS, S = load_discrete(data)
    fault = args.inject_fault
    _check_budget(DS, config.product_budget)
    results, witnesses = {}, []
    timing = {"product_size": DS.product_size()}
    if S is not None:
        cs = build_condition_set(S, validate=False)
        if len(cs) > args.max_conditions:
            raise BudgetError(f"{len(cs)} conditions exceed the brute-force budget {args.max_conditions}")
        timing["conditions"] = len(cs)
        checks = [
            ("projection", lambda: _oracle_projection(S, fault == "projection")),
            ("identification", lambda: _oracle_identification(S, cs, fault == "identification")),
            ("order", lambda: _oracle_order(cs, fault == "order")),
            ("completion", lambda: _oracle_completion(cs, fault == "completion", args.max_regular_open)),
        ]
        for name, check in checks:
            cex = check()
            results[name] = cex is None
            if cex is not None:
                witnesses.append({"oracle": name, "counterexample": cex})
    cex, X = _oracle_threads(DS, fault == "threads")
    results["threads"] = cex is None
    if cex is not None:
        witnesses.append({"oracle": "threads", "counterexample": cex})
    rng = random.Random(config.seed)
    results["box"] = True
    for draw in range(args.boxes):
        F, boxes = _random_box(rng, DS)
        cex = _compare_box(DS, X, F, boxes, fault=(fault == "box" and draw == 0))
        if cex is not None:
            results["box"] = False
            witnesses.append({"oracle": "box", "counterexample": cex, "draw": draw})
            break
    timing.update({"threads": len(X), "box_draws": args.boxes})
    ok = all(results.values())
    verdicts = {"oracles": results, "agree": ok, "fault_injected": fault}
    failed = sorted(k for k, v in results.items() if not v)
    summary = "oracle: all fast paths agree" if ok else f"oracle: disagreement in {', '.join(failed)}"
    return make_report(config, input_block(config, [digest]), verdicts, witnesses, timing), EXIT_OK if ok else EXIT_VERDICT, summary


# ---------------------------------------------------------------------------
# argument handling


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from exc
    if value < 1:
        raise argparse.ArgumentTypeError("budgets must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", default=[], help="Input JSON file (poset or system)")
    common.add_argument("--output", type=Path, help="Write the JSON report here instead of stdout")
    common.add_argument("--seed", type=int, help="Random seed (fallback: AMALGAM_SEED, then 0)")
    common.add_argument("--max-index-size", type=positive_int, default=6, help="Largest index set to generate")
    common.add_argument("--max-fiber", type=positive_int, default=3, help="Largest coordinate fiber")
    common.add_argument("--product-budget", type=positive_int, default=10**6, help="Bound on the product of algebra sizes")
    common.add_argument("--max-atoms", type=positive_int, default=8, help="Largest algebra to generate (atoms)")
    common.add_argument("--verbose", action="store_true", help="Print wall time and progress")

    parser = argparse.ArgumentParser(prog="amalgam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="Check a poset or system file")
    sub.add_parser("amalgamate", parents=[common], help="Build the amalgamated limit and verify it")
    p = sub.add_parser("threads", parents=[common], help="Thread space of the dual system")
    p.add_argument("--boxes", type=int, default=200, help="Random box-image spot checks")
    p = sub.add_parser("generate", parents=[common], help="Emit a system file")
    shape = p.add_mutually_exclusive_group()
    shape.add_argument("--grid", type=positive_int, nargs=2, metavar=("BETA", "DELTA"), help="Coordinate system on a grid index")
    shape.add_argument("--factors", type=positive_int, nargs=2, metavar=("M", "N"), help="Two free factors over the trivial algebra")
    p.add_argument("--fiber", type=positive_int, default=2, help="Fiber size for --grid")
    p = sub.add_parser("oracle", parents=[common], help="Compare fast paths with brute-force oracles")
    p.add_argument("--boxes", type=int, default=200, help="Random box-image draws")
    p.add_argument("--max-conditions", type=positive_int, default=200, help="Largest condition set for brute force")
    p.add_argument("--max-regular-open", type=positive_int, default=1 << 16, help="Cap on enumerated regular open sets")
    p.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    return parser


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get("AMALGAM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"AMALGAM_SEED={env!r} is not an integer") from exc


COMMANDS = {
    "validate": cmd_validate,
    "amalgamate": cmd_amalgamate,
    "threads": cmd_threads,
    "generate": cmd_generate,
    "oracle": cmd_oracle,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        config = RunConfig(
            command=args.command,
            inputs=list(args.input),
            seed=resolve_seed(args.seed),
            max_index_size=args.max_index_size,
            max_fiber=args.max_fiber,
            product_budget=args.product_budget,
            max_atoms=args.max_atoms,
            output=args.output,
            verbose=args.verbose,
        )
        if args.command == "generate":
            payload, code, summary, shape = cmd_generate(config, args)
            if args.verbose:
                summary += f" [{shape}]"
        else:
            payload, code, summary = COMMANDS[args.command](config, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    text = dump(payload)
    info = sys.stdout
    if config.output is None:
        sys.stdout.write(text)
        info = sys.stderr
    else:
        config.output.parent.mkdir(parents=True, exist_ok=True)
        config.output.write_text(text, encoding="utf-8")
    print(summary, file=info)
    if config.verbose:
        print(f"wall time {time.perf_counter() - start:.3f} s", file=info)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
