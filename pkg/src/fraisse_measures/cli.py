"""Command line interface.

Every command prints one JSON report to stdout.  Reports are deterministic
for a given command line and library version: keys are sorted and nothing
besides the top-level "timing_seconds" field depends on the run (exclude
that one field when comparing reports byte for byte).

Exit codes: 0 success, 2 precondition or input problem, 3 a scan or
verification found a counterexample, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time
import traceback
from pathlib import Path

import yaml

from .amalgamation import (
    NotAMemberError,
    SeparationQuery,
    amalgamation_property_scan,
    enumerate_amalgamations,
    is_separated,
    oddness_scan,
    strong_amalgamation_scan,
)
from .marked import enumerate_minimal_marked, fmm_certificate
from .measures import (
    MeasureAssignment,
    PreconditionError,
    build_relation_system,
    count_measures,
    domain_from_name,
    export_relations,
    regular_filter,
    sign_measure,
    solve,
    verify_assignment,
)
from .structures import (
    CanonicalStructure,
    ClassDefinition,
    ClassFileError,
    Embedding,
    FraisseError,
    SignatureMismatchError,
    Structure,
    aut_check,
    colored,
    colored_linear_orders,
    enumerate_structures,
    finite_sets,
    join,
    linear_orders,
    load_class_file,
    s_permutations,
    structure_from_dict,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_PRECONDITION = 2
EXIT_COUNTEREXAMPLE = 3

CACHE_ENV = "FRAISSE_MEASURES_CACHE"


class SelectorError(FraisseError):
    """A class selector string could not be understood."""


# ---------------------------------------------------------------------------
# class selectors


def _split_top_level(text: str):
    """Split on commas that are not nested inside parentheses."""
    parts = []
    depth = 0
    current = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise SelectorError(f"unbalanced parentheses in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise SelectorError(f"unbalanced parentheses in {text!r}")
    parts.append("".join(current))
    return [p.strip() for p in parts]


def _positive_int(text: str, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise SelectorError(f"{what} must be an integer, got {text!r}") from None
    if value < 1:
        raise SelectorError(f"{what} must be positive, got {value}")
    return value


def parse_class(selector: str) -> ClassDefinition:
    """Resolve a class selector.

    Built-ins: finite-sets, linear-orders, s-permutations:<s>,
    colored-linear-orders:<s>.  Combinators: join(<a>,<b>) and
    colored(<a>,<s>).  Anything containing a path separator or ending in
    .yaml/.yml/.json is loaded as a class file.
    """
    text = selector.strip()
    if not text:
        raise SelectorError("empty class selector")
    if text.startswith("join(") and text.endswith(")"):
        parts = _split_top_level(text[len("join(") : -1])
        if len(parts) != 2:
            raise SelectorError("join takes exactly two classes")
        return join(parse_class(parts[0]), parse_class(parts[1]))
    if text.startswith("colored(") and text.endswith(")"):
        parts = _split_top_level(text[len("colored(") : -1])
        if len(parts) != 2:
            raise SelectorError("colored takes a class and a color count")
        return colored(parse_class(parts[0]), _positive_int(parts[1], "color count"))
    if os.sep in text or text.endswith((".yaml", ".yml", ".json")):
        if not os.path.exists(text):
            raise SelectorError(f"class file not found: {text}")
        return load_class_file(text)
    if text == "finite-sets":
        return finite_sets()
    if text == "linear-orders":
        return linear_orders()
    if ":" in text:
        head, _, arg = text.partition(":")
        if head == "s-permutations":
            return s_permutations(_positive_int(arg, "order count"))
        if head == "colored-linear-orders":
            return colored_linear_orders(_positive_int(arg, "color count"))
    raise SelectorError(f"unknown class selector {selector!r}")


# ---------------------------------------------------------------------------
# disk cache


class CacheStore:
    """Per-class JSON cache of enumeration levels and minimal inventories.

    Layout: <root>/<class-certificate>/meta.json plus levels/<n>.json and
    minimal/<bound>.json.  A format mismatch discards the stale class
    directory with a warning on stderr.
    """

    FORMAT = 1

    def __init__(self, root):
        self.root = Path(root)
        self._checked = set()

    def _class_dir(self, cls: ClassDefinition) -> Path:
        directory = self.root / cls.certificate
        if cls.certificate not in self._checked:
            self._checked.add(cls.certificate)
            meta_path = directory / "meta.json"
            if directory.exists():
                stale = True
                try:
                    with open(meta_path, "r", encoding="utf-8") as handle:
                        stale = json.load(handle).get("format") != self.FORMAT
                except (OSError, ValueError):
                    stale = True
                if stale:
                    print(
                        f"cache: discarding stale entry for {cls.name}",
                        file=sys.stderr,
                    )
                    shutil.rmtree(directory)
            if not directory.exists():
                (directory / "levels").mkdir(parents=True)
                (directory / "minimal").mkdir()
                self._write(meta_path, {"format": self.FORMAT, "class": cls.name})
        return directory

    @staticmethod
    def _write(path: Path, payload) -> None:
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True)
        tmp.replace(path)

    @staticmethod
    def _read(path: Path):
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return json.load(handle)
        except OSError:
            return None
        except ValueError:
            print(f"cache: ignoring unreadable file {path}", file=sys.stderr)
            return None

    def load_level(self, cls: ClassDefinition, size: int):
        payload = self._read(self._class_dir(cls) / "levels" / f"{size}.json")
        if payload is None:
            return None
        return [
            CanonicalStructure(
                structure=Structure.raw(
                    cls.signature, size, [int(m, 16) for m in entry["masks"]]
                ),
                certificate=entry["certificate"].encode("ascii"),
                aut_order=entry["aut_order"],
            )
            for entry in payload["entries"]
        ]

    def save_level(self, cls: ClassDefinition, size: int, level) -> None:
        self._write(
            self._class_dir(cls) / "levels" / f"{size}.json",
            {
                "entries": [
                    {
                        "certificate": item.certificate.decode("ascii"),
                        "aut_order": item.aut_order,
                        "masks": [hex(m) for m in item.structure.masks],
                    }
                    for item in level
                ]
            },
        )

    def load_minimal(self, cls: ClassDefinition, bound: int):
        payload = self._read(self._class_dir(cls) / "minimal" / f"{bound}.json")
        if payload is None:
            return None
        pairs = tuple(
            (
                entry["certificate"].encode("ascii"),
                Structure.raw(
                    cls.signature,
                    entry["size"],
                    [int(m, 16) for m in entry["masks"]],
                ),
            )
            for entry in payload["entries"]
        )
        return pairs, payload["complete"]

    def save_minimal(self, cls: ClassDefinition, bound: int, cached) -> None:
        pairs, complete = cached
        self._write(
            self._class_dir(cls) / "minimal" / f"{bound}.json",
            {
                "complete": complete,
                "entries": [
                    {
                        "certificate": certificate.decode("ascii"),
                        "size": structure.size,
                        "masks": [hex(m) for m in structure.masks],
                    }
                    for certificate, structure in pairs
                ],
            },
        )


# ---------------------------------------------------------------------------
# shared helpers


def _resolve_class(args) -> ClassDefinition:
    cls = parse_class(args.class_selector)
    cache_dir = getattr(args, "cache_dir", None) or os.environ.get(CACHE_ENV)
    if cache_dir:
        cls.context().cache_store = CacheStore(cache_dir)
    return cls


def _load_payload_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            if path.endswith((".yaml", ".yml")):
                return yaml.safe_load(handle)
            return json.load(handle)
    except OSError as exc:
        raise ClassFileError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ClassFileError(f"cannot parse {path}: {exc}") from exc


def _structure_for(cls: ClassDefinition, payload, what: str) -> Structure:
    if not isinstance(payload, dict):
        raise ClassFileError(f"{what} must be a structure mapping")
    structure = structure_from_dict(payload)
    if structure.signature != cls.signature:
        raise ClassFileError(f"{what} signature does not match the class")
    return structure


def _class_summary(cls: ClassDefinition) -> dict:
    return {
        "name": cls.name,
        "signature": [[n, a] for n, a in cls.signature.relations],
        "certificate": cls.certificate,
        "automorphism_base": cls.aut_base,
    }


def _assignment_payload(assignment: MeasureAssignment) -> dict:
    return assignment.as_dict()


def _violation_payload(report) -> list:
    return [dict(v) for v in report.violations]


# ---------------------------------------------------------------------------
# command handlers: each returns (result dict, exit code)


def _cmd_classes(args):
    builtins = [
        {
            "selector": "finite-sets",
            "summary": _class_summary(finite_sets()),
        },
        {
            "selector": "linear-orders",
            "summary": _class_summary(linear_orders()),
        },
        {
            "selector": "s-permutations:2",
            "summary": _class_summary(s_permutations(2)),
        },
        {
            "selector": "colored-linear-orders:2",
            "summary": _class_summary(colored_linear_orders(2)),
        },
    ]
    combinators = [
        "join(<class>,<class>)",
        "colored(<class>,<colors>)",
        "<path to .yaml/.yml/.json class file>",
    ]
    return {"builtins": builtins, "combinators": combinators}, EXIT_OK


def _cmd_enumerate(args):
    cls = _resolve_class(args)
    counts = []
    for size in range(args.size + 1):
        level = enumerate_structures(cls, size)
        counts.append({"size": size, "count": len(level)})
    result = {"class": _class_summary(cls), "counts": counts}
    if args.list:
        result["structures"] = [
            {
                "certificate": item.certificate.decode("ascii"),
                "aut_order": item.aut_order,
                "structure": item.structure.to_dict(),
            }
            for item in enumerate_structures(cls, args.size)
        ]
    return result, EXIT_OK


def _cmd_minimal_marked(args):
    cls = _resolve_class(args)
    classes, complete = enumerate_minimal_marked(cls, args.bound, jobs=args.jobs)
    summary = fmm_certificate(cls, args.bound, jobs=args.jobs)
    result = {
        "class": _class_summary(cls),
        "bound": args.bound,
        "complete": complete,
        "count": len(classes),
        "max_size": summary.max_size,
        "by_size": {str(k): len(v) for k, v in summary.by_size.items()},
        "classes": [
            {
                "id": item.var_id,
                "size": item.size,
                "certificate": item.certificate.decode("ascii"),
                "structure": item.structure.to_dict(),
                "mark": item.mark,
            }
            for item in classes
        ],
    }
    return result, EXIT_OK


def _cmd_amalgamate(args):
    cls = _resolve_class(args)
    payload = _load_payload_file(args.input)
    if not isinstance(payload, dict):
        raise ClassFileError("amalgamation input must be a mapping")
    for key in ("base", "left", "right"):
        if key not in payload:
            raise ClassFileError(f"amalgamation input needs a {key!r} structure")
    base = _structure_for(cls, payload["base"], "base")
    left = _structure_for(cls, payload["left"], "left")
    right = _structure_for(cls, payload["right"], "right")
    left_map = tuple(payload.get("left_map", range(base.size)))
    right_map = tuple(payload.get("right_map", range(base.size)))
    try:
        left_arrow = Embedding(base, left, left_map)
        right_arrow = Embedding(base, right, right_map)
    except (ValueError, SignatureMismatchError) as exc:
        raise ClassFileError(f"bad embedding in amalgamation input: {exc}") from exc
    diagrams = enumerate_amalgamations(cls, left_arrow, right_arrow)
    result = {
        "class": _class_summary(cls),
        "count": len(diagrams),
        "diagrams": [
            {
                "result": d.result.to_dict(),
                "identified": d.identified_count,
                "left_leg": list(d.left_leg.map),
                "right_leg": list(d.right_leg.map),
            }
            for d in diagrams
        ],
    }
    return result, EXIT_OK


def _cmd_separated(args):
    cls = _resolve_class(args)
    payload = _load_payload_file(args.input)
    if not isinstance(payload, dict) or "structure" not in payload:
        raise ClassFileError("separation input needs a 'structure' mapping")
    structure = _structure_for(cls, payload["structure"], "structure")
    query = SeparationQuery(
        structure,
        tuple(payload.get("group_a", ())),
        tuple(payload.get("group_b", ())),
    )
    result = {
        "class": _class_summary(cls),
        "group_a": list(query.group_a),
        "group_b": list(query.group_b),
        "separated": is_separated(cls, query),
    }
    return result, EXIT_OK


def _cmd_oddness(args):
    cls = _resolve_class(args)
    report = oddness_scan(cls, args.bound, mode=args.mode, jobs=args.jobs)
    result = {
        "class": _class_summary(cls),
        "bound": report.bound,
        "mode": report.mode,
        "checked": report.checked,
        "passed": report.passed,
        "counterexample": report.counterexample,
    }
    return result, EXIT_OK if report.passed else EXIT_COUNTEREXAMPLE


def _cmd_scan(args):
    cls = _resolve_class(args)
    if args.kind == "amalgamation":
        report = amalgamation_property_scan(cls, args.bound)
    elif args.kind == "strong-amalgamation":
        report = strong_amalgamation_scan(cls, args.bound)
    else:
        report = aut_check(cls, args.base, args.bound)
        result = {
            "class": _class_summary(cls),
            "kind": "automorphism-base",
            "base": report.base,
            "bound": report.bound,
            "checked": report.checked,
            "passed": report.passed,
            "violation": report.violation,
        }
        return result, EXIT_OK if report.passed else EXIT_COUNTEREXAMPLE
    result = {
        "class": _class_summary(cls),
        "kind": args.kind,
        "bound": report.bound,
        "checked": report.checked,
        "passed": report.passed,
        "counterexample": report.counterexample,
    }
    return result, EXIT_OK if report.passed else EXIT_COUNTEREXAMPLE


def _cmd_relations(args):
    cls = _resolve_class(args)
    system = build_relation_system(cls, args.bound, jobs=args.jobs)
    text = export_relations(system)
    if args.export == "-":
        sys.stdout.write(text)
        return None, EXIT_OK
    result = {
        "class": _class_summary(cls),
        "bound": system.bound,
        "variable_count": len(system.variables),
        "linear_count": len(system.linear),
        "quadratic_count": len(system.quadratic),
        "variables": [
            {
                "id": item.var_id,
                "size": item.size,
                "certificate": item.certificate.decode("ascii"),
            }
            for item in system.variables
        ],
    }
    if args.export:
        with open(args.export, "w", encoding="utf-8") as handle:
            handle.write(text)
        result["export_path"] = args.export
    return result, EXIT_OK


def _cmd_solve(args):
    cls = _resolve_class(args)
    domain = domain_from_name(args.domain)
    assignments, report = count_measures(cls, args.bound, domain, jobs=args.jobs)
    regular = regular_filter(assignments)
    regular_values = {a.values for a in regular}
    result = {
        "class": _class_summary(cls),
        "bound": args.bound,
        "domain": domain.name,
        "variable_count": report.variable_count,
        "count": report.count,
        "regular_count": report.regular_count,
        "assignments": [
            {
                "values": _assignment_payload(a),
                "regular": a.values in regular_values,
            }
            for a in assignments
        ],
        "bound_report": {
            "prime": report.prime,
            "count_bound": report.count_bound,
            "count_ok": report.count_ok,
            "regular_bound": report.regular_bound,
            "regular_ok": report.regular_ok,
        },
    }
    return result, EXIT_OK


def _cmd_verify(args):
    cls = _resolve_class(args)
    domain = domain_from_name(args.domain)
    check_bound = args.check_bound or args.bound
    if args.sign:
        assignment = sign_measure(cls, args.bound, jobs=args.jobs)
        if not isinstance(domain, type(assignment.domain)):
            raise PreconditionError("the sign measure lives over domain z")
    else:
        if not args.assignment:
            raise PreconditionError("verify needs --assignment FILE or --sign")
        payload = _load_payload_file(args.assignment)
        if isinstance(payload, dict) and isinstance(payload.get("values"), dict):
            payload = payload["values"]
        if not isinstance(payload, dict):
            raise ClassFileError("assignment file must map certificates to values")
        classes, complete = enumerate_minimal_marked(cls, args.bound, jobs=args.jobs)
        if not complete:
            raise PreconditionError(
                f"{cls.name}: minimal marked inventory incomplete at bound {args.bound}"
            )
        expected = {item.certificate.decode("ascii") for item in classes}
        if set(payload) != expected:
            missing = sorted(expected - set(payload))[:3]
            extra = sorted(set(payload) - expected)[:3]
            raise PreconditionError(
                f"assignment keys do not match the minimal marked classes "
                f"(missing {missing}, unexpected {extra})"
            )
        values = []
        for item in classes:
            value = payload[item.certificate.decode("ascii")]
            if isinstance(value, bool) or value not in domain.values:
                raise PreconditionError(
                    f"value {value!r} for {item.certificate.decode('ascii')} "
                    f"is not in domain {domain.name}"
                )
            values.append(value)
        assignment = MeasureAssignment(cls, domain, classes, values)
    report = verify_assignment(cls, assignment, check_bound)
    result = {
        "class": _class_summary(cls),
        "bound": args.bound,
        "check_bound": check_bound,
        "domain": assignment.domain.name,
        "values": _assignment_payload(assignment),
        "passed": report.passed,
        "checked": report.checked,
        "violations": _violation_payload(report),
    }
    return result, EXIT_OK if report.passed else EXIT_COUNTEREXAMPLE


def _cmd_sign(args):
    cls = _resolve_class(args)
    assignment = sign_measure(cls, args.bound, oddness_mode=args.mode, jobs=args.jobs)
    result = {
        "class": _class_summary(cls),
        "bound": args.bound,
        "domain": assignment.domain.name,
        "values": _assignment_payload(assignment),
        "regular": assignment.is_regular(),
    }
    return result, EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point


def _add_common(parser, jobs=True, cache=True):
    if jobs:
        parser.add_argument(
            "--jobs", type=int, default=1, help="worker processes (default 1)"
        )
    if cache:
        parser.add_argument(
            "--cache-dir",
            default=None,
            help=f"directory for the disk cache (or set {CACHE_ENV})",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraisse-measures",
        description=(
            "Enumerate minimal marked structures of a hereditary class, build "
            "the relation system of its measure ring, and solve for measures."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classes", help="list built-in classes and combinators")
    p.set_defaults(handler=_cmd_classes)

    p = sub.add_parser("enumerate", help="count members by size")
    p.add_argument("class_selector")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--list", action="store_true", help="include structures at --size")
    _add_common(p, jobs=False)
    p.set_defaults(handler=_cmd_enumerate)

    p = sub.add_parser("minimal-marked", help="enumerate minimal marked classes")
    p.add_argument("class_selector")
    p.add_argument("--bound", type=int, required=True)
    _add_common(p)
    p.set_defaults(handler=_cmd_minimal_marked)

    p = sub.add_parser("amalgamate", help="list amalgamations from an input file")
    p.add_argument("class_selector")
    p.add_argument("--input", required=True, help="JSON/YAML diagram description")
    _add_common(p, jobs=False)
    p.set_defaults(handler=_cmd_amalgamate)

    p = sub.add_parser("separated", help="test separation of two point groups")
    p.add_argument("class_selector")
    p.add_argument("--input", required=True, help="JSON/YAML query description")
    _add_common(p, jobs=False)
    p.set_defaults(handler=_cmd_separated)

    p = sub.add_parser("oddness", help="scan amalgamation counts for evenness")
    p.add_argument("class_selector")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--mode", choices=["one-point", "exhaustive"], default="one-point")
    _add_common(p)
    p.set_defaults(handler=_cmd_oddness)

    p = sub.add_parser("scan", help="amalgamation and automorphism scans")
    p.add_argument("class_selector")
    p.add_argument(
        "kind", choices=["amalgamation", "strong-amalgamation", "automorphism-base"]
    )
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--base", type=int, default=1, help="base for automorphism-base")
    _add_common(p, jobs=False)
    p.set_defaults(handler=_cmd_scan)

    p = sub.add_parser("relations", help="build the relation system")
    p.add_argument("class_selector")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument(
        "--export",
        default=None,
        help="write the plain text system to this path ('-' for raw stdout)",
    )
    _add_common(p)
    p.set_defaults(handler=_cmd_relations)

    p = sub.add_parser("solve", help="solve for all measures over a domain")
    p.add_argument("class_selector")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--domain", default="z", help="z or fp:<prime> (default z)")
    _add_common(p)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("verify", help="check an assignment against the sum rule")
    p.add_argument("class_selector")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--check-bound", type=int, default=None)
    p.add_argument("--domain", default="z")
    p.add_argument("--assignment", default=None, help="JSON file mapping certificates to values")
    p.add_argument("--sign", action="store_true", help="verify the closed-form sign measure")
    _add_common(p)
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("sign", help="the closed-form regular measure of an odd class")
    p.add_argument("class_selector")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--mode", choices=["one-point", "exhaustive"], default="one-point")
    _add_common(p)
    p.set_defaults(handler=_cmd_sign)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        result, code = args.handler(args)
    except (PreconditionError, NotAMemberError, ClassFileError, SelectorError) as exc:
        report = {
            "command": args.command,
            "error": {"kind": "precondition", "message": str(exc)},
            "timing_seconds": time.perf_counter() - started,
        }
        print(json.dumps(report, sort_keys=True, indent=2))
        return EXIT_PRECONDITION
    except FraisseError as exc:
        report = {
            "command": args.command,
            "error": {"kind": "input", "message": str(exc)},
            "timing_seconds": time.perf_counter() - started,
        }
        print(json.dumps(report, sort_keys=True, indent=2))
        return EXIT_PRECONDITION
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    if result is None:
        return code
    report = dict(result)
    report["command"] = args.command
    report["timing_seconds"] = time.perf_counter() - started
    print(json.dumps(report, sort_keys=True, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
