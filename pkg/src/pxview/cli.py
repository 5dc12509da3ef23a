"""Command-line surface and the randomized end-to-end verifier.

Machine-readable JSON goes to stdout, diagnostics to stderr.  Exit codes:
0 on success, 1 when a rewrite subcommand finds no plan, 2 on input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .cindep import cindep, cindep_falsify
from .generate import GenParams, Instance, gen_instance
from .model import (
    ModelError,
    enumerate_worlds,
    format_prob,
    parse_doc,
    parse_pdoc,
)
from .pattern import (
    IntersectionPattern,
    PatternError,
    parse_pattern,
    parse_tp,
    to_query,
)
from .probeval import oracle_peval, peval, peval_cap, prob_answer_to_json
from .rewrite_tp import (
    EventCapExceeded,
    derive_parts,
    exec_tp_plan,
    find_tp_rewritings_detailed,
    make_tp_plan,
)
from .rewrite_cap import (
    CapPlan,
    ProductMode,
    SystemMode,
    exec_plan,
    find_product_rewriting,
    tprewrite_cap,
)
from .views import ViewDef, ViewExtension, compensated_view, materialize_det, materialize_prob


class InputError(ValueError):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError("cannot read %s: %s" % (path, exc))


def _load_views(path: str) -> list[ViewDef]:
    try:
        raw = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InputError("views file %s: %s" % (path, exc))
    views = []
    for entry in raw:
        if "name" not in entry or "query" not in entry:
            raise InputError("view entries need 'name' and 'query'")
        views.append(ViewDef(entry["name"], parse_tp(entry["query"])))
    return views


def _emit(obj, fmt: str = "json"):
    if fmt == "tsv" and isinstance(obj, list):
        for row in obj:
            print("\t".join(str(row[k]) for k in sorted(row)))
        return
    print(json.dumps(obj, indent=2, sort_keys=False))


# ---------------------------------------------------------------------------
# Randomized end-to-end verification
# ---------------------------------------------------------------------------


@dataclass
class VerifyReport:
    trials: int
    agreements: int
    disagreements: list = field(default_factory=list)
    falsified_independent: int = 0
    skipped: int = 0
    seconds: float = 0.0
    per_trial_seconds: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.disagreements and self.falsified_independent == 0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "agreements": self.agreements,
            "disagreements": self.disagreements[:1],
            "disagreement_count": len(self.disagreements),
            "falsified_independent": self.falsified_independent,
            "skipped": self.skipped,
            "seconds": round(self.seconds, 3),
        }


def _compare(report: VerifyReport, inst: Instance, label: str, got, want) -> bool:
    if got == want:
        return True
    report.disagreements.append(
        {
            "seed": inst.seed,
            "stage": label,
            "query": to_query(inst.query),
            "views": {v.name: to_query(v.pattern) for v in inst.views},
            "pdoc": inst.pdoc.to_json(),
            "got": {n: format_prob(p) for n, p in sorted(got.items())},
            "want": {n: format_prob(p) for n, p in sorted(want.items())},
        }
    )
    return False


def verify(seed: int, trials: int, params: GenParams = GenParams(),
           falsifier_trials: int = 20) -> VerifyReport:
    """Generate random instances; check the evaluator against the world
    oracle, every emitted plan against the true answer probabilities, and
    every Independent verdict used by the gates against the falsifier."""
    report = VerifyReport(trials=trials, agreements=0)
    start = time.monotonic()
    for t in range(trials):
        t0 = time.monotonic()
        inst = gen_instance(seed * 1000003 + t, params)
        ok = True
        truth = peval(inst.query, inst.pdoc)
        ok &= _compare(report, inst, "peval-vs-oracle", truth,
                       oracle_peval(inst.query, inst.pdoc))
        extensions: dict[str, ViewExtension] = {}

        def ext_for(view: ViewDef) -> ViewExtension:
            src = view.extension_source()
            if src.name not in extensions:
                extensions[src.name] = materialize_prob(src, inst.pdoc)
            return extensions[src.name]

        checked_pairs = []
        plans, _rejections = find_tp_rewritings_detailed(inst.query, inst.views)
        for plan in plans:
            view = next(v for v in inst.views if v.name == plan.view)
            parts = derive_parts(inst.query, view)
            checked_pairs.append((parts.v_prime, parts.q_dprime))
            try:
                got = exec_tp_plan(plan, ext_for(view))
            except EventCapExceeded:
                report.skipped += 1
                continue
            ok &= _compare(report, inst, "tp-plan:%s" % plan.view, got, truth)
        cap_plans = []
        outcome = tprewrite_cap(inst.query, inst.views)
        if outcome.found:
            cap_plans.append(("cap-plan", outcome.plan))
        product = find_product_rewriting(inst.query, inst.views)
        if product is not None:
            cap_plans.append(("product-plan", product))
        for label, plan in cap_plans:
            for member in plan.members:
                ext_for(member)
            if isinstance(plan.mode, ProductMode) and plan.mode.appearance_view:
                src = plan.mode.appearance_view
                if src not in extensions:
                    ext_for(next(v for v in inst.views if v.name == src))
            try:
                got = exec_plan(plan, extensions)
            except EventCapExceeded:
                report.skipped += 1
            else:
                ok &= _compare(report, inst, label, got, truth)
        for q1, q2 in checked_pairs:
            verdict = cindep(q1, q2)
            if verdict.independent:
                outcome2 = cindep_falsify(q1, q2, seed=inst.seed, trials=falsifier_trials)
                if not outcome2.independent:
                    report.falsified_independent += 1
                    ok = False
        if ok:
            report.agreements += 1
        report.per_trial_seconds.append(time.monotonic() - t0)
    report.seconds = time.monotonic() - start
    return report


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_parse(args) -> int:
    if args.query:
        q = parse_pattern(args.query)
        _emit({"query": to_query(q)})
    elif args.pdoc:
        _emit(parse_pdoc(_read(args.pdoc)).to_json())
    elif args.doc:
        _emit(parse_doc(_read(args.doc)).to_json())
    else:
        raise InputError("parse needs --query, --pdoc, or --doc")
    return 0


def _cmd_eval(args) -> int:
    from .pattern import eval_doc

    doc = parse_doc(_read(args.doc))
    q = parse_pattern(args.query)
    _emit(sorted(eval_doc(q, doc)))
    return 0


def _cmd_peval(args) -> int:
    p = parse_pdoc(_read(args.pdoc))
    q = parse_pattern(args.query)
    if isinstance(q, IntersectionPattern):
        ans = peval_cap(q, p)
    else:
        ans = peval(q, p)
    _emit(prob_answer_to_json(ans), args.format)
    return 0


def _cmd_worlds(args) -> int:
    p = parse_pdoc(_read(args.pdoc))
    worlds = enumerate_worlds(p)
    _emit(
        [
            {"p": format_prob(w.probability), "ids": sorted(w.document.ids())}
            for w in worlds
        ],
        args.format,
    )
    return 0


def _cmd_materialize(args) -> int:
    views = _load_views(args.views)
    if args.name:
        views = [v for v in views if v.name == args.name]
        if not views:
            raise InputError("no view named %r in %s" % (args.name, args.views))
    if args.pdoc:
        p = parse_pdoc(_read(args.pdoc))
        extensions = {v.name: materialize_prob(v, p).to_json() for v in views}
    else:
        d = parse_doc(_read(args.doc))
        extensions = {v.name: materialize_det(v, d).to_json() for v in views}
    if args.extensions:
        outdir = Path(args.extensions)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, obj in extensions.items():
            (outdir / ("%s.json" % name)).write_text(json.dumps(obj, indent=2))
        _emit({"written": sorted(extensions)})
    else:
        _emit(extensions)
    return 0


def _cmd_cindep(args) -> int:
    q1, q2 = parse_tp(args.q1), parse_tp(args.q2)
    verdict = cindep(q1, q2)
    counterexample = None
    if args.falsify and verdict.independent:
        verdict = cindep_falsify(q1, q2, seed=args.seed, trials=args.falsify)
    if verdict.counterexample is not None:
        pdoc, node = verdict.counterexample
        counterexample = {"pdoc": pdoc.to_json(), "node": node}
    _emit({
        "verdict": verdict.verdict,
        "rule": verdict.rule,
        "counterexample": counterexample,
    })
    return 0


def _cmd_rewrite_tp(args) -> int:
    q = parse_tp(args.query)
    views = _load_views(args.views)
    plans, rejections = find_tp_rewritings_detailed(q, views)
    _emit({
        "plans": [p.to_json() for p in plans],
        "rejections": [
            {"view": r.view, "stage": r.stage, "detail": r.detail} for r in rejections
        ],
    })
    if not plans:
        print("no plan: %s" % "; ".join(
            "%s (%s gate)" % (r.view, r.stage) for r in rejections
        ), file=sys.stderr)
        return 1
    return 0


def _cmd_rewrite_cap(args) -> int:
    q = parse_tp(args.query)
    views = _load_views(args.views)
    if args.product:
        plan = find_product_rewriting(q, views)
        if plan is None:
            _emit({"status": "none"})
            print("no product rewriting", file=sys.stderr)
            return 1
        _emit({"status": "found", "plan": plan.to_json()})
        return 0
    outcome = tprewrite_cap(q, views)
    result = {"status": outcome.status}
    if outcome.plan is not None:
        result["plan"] = outcome.plan.to_json()
    _emit(result)
    if not outcome.found:
        print("no rewriting (%s)" % outcome.status, file=sys.stderr)
        return 1
    return 0


def _load_extension(path: Path) -> ViewExtension:
    from .model import PDocument, pdoc_from_json
    from .pattern import doc_label_name
    from .views import Occurrence

    obj = json.loads(path.read_text())
    occ_table = obj.pop("occurrences", [])
    pdoc = pdoc_from_json(obj, validate=False)
    node_orig = {e["ext"]: e["orig"] for e in occ_table}
    view = doc_label_name(pdoc.root.label)
    ind = pdoc.root.children[0]
    occurrences = []
    for index, (beta, node) in enumerate(ind.children):
        contained = frozenset(
            node_orig[n.id]
            for n in PDocument(node).ordinary_nodes()
            if n.id in node_orig
        )
        occurrences.append(
            Occurrence(
                index=index,
                ext_root_id=node.id,
                orig_root_id=node_orig[node.id],
                beta=beta,
                contained_orig_ids=contained,
            )
        )
    return ViewExtension(view, pdoc, occurrences, node_orig)


def _cmd_exec(args) -> int:
    plan_obj = json.loads(_read(args.plan))
    views = {v.name: v for v in _load_views(args.views)}
    ext_dir = Path(args.extensions)
    extensions: dict[str, ViewExtension] = {}
    for path in sorted(ext_dir.glob("*.json")):
        ext = _load_extension(path)
        extensions[ext.view] = ext
    if plan_obj.get("kind") == "tp":
        view = views[plan_obj["view"]]
        plan = make_tp_plan(view, parse_tp(plan_obj["compensation"]))
        ans = exec_tp_plan(plan, extensions[view.name])
    elif plan_obj.get("kind") == "cap":
        members = []
        for entry in plan_obj["members"]:
            base = views[entry["view"]]
            if entry.get("compensation"):
                members.append(
                    compensated_view(
                        "%s+c%d" % (base.name, len(members)),
                        base,
                        parse_tp(entry["compensation"]),
                    )
                )
            else:
                members.append(base)
        mode_obj = plan_obj["mode"]
        if "product" in mode_obj:
            mode = ProductMode(mode_obj["product"].get("appearance_view"))
        else:
            from .model import parse_prob

            mode = SystemMode(
                [parse_prob(c) for c in mode_obj["system"]["coefficients"]]
            )
        ans = exec_plan(CapPlan(members, mode), extensions)
    else:
        raise InputError("plan file must have kind 'tp' or 'cap'")
    _emit(prob_answer_to_json(ans), args.format)
    return 0


def _cmd_verify(args) -> int:
    params = GenParams(
        max_dist_nodes=args.max_dist,
        query_depth=args.query_depth,
        n_views=args.views_per_instance,
    )
    report = verify(args.seed, args.trials, params,
                    falsifier_trials=args.falsifier_trials)
    _emit(report.to_json())
    return 0


def _cmd_gen(args) -> int:
    params = GenParams(
        max_dist_nodes=args.max_dist,
        query_depth=args.query_depth,
        n_views=args.views_per_instance,
    )
    inst = gen_instance(args.seed, params)
    _emit({
        "pdoc": inst.pdoc.to_json(),
        "query": to_query(inst.query),
        "views": [{"name": v.name, "query": to_query(v.pattern)} for v in inst.views],
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pxview",
        description="Tree-pattern query answering over probabilistic XML using views",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, query=False, pdoc=False, doc=False, views=False, fmt=True):
        if query:
            p.add_argument("--query", required=query == "required")
        if pdoc:
            p.add_argument("--pdoc", required=pdoc == "required")
        if doc:
            p.add_argument("--doc", required=doc == "required")
        if views:
            p.add_argument("--views", required=views == "required",
                           help="JSON list of {name, query}")
        if fmt:
            p.add_argument("--format", choices=["json", "tsv"], default="json")

    p = sub.add_parser("parse", help="validate and canonicalize inputs")
    common(p, query=True, pdoc=True, doc=True)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("eval", help="evaluate a pattern on a document")
    common(p, query="required", doc="required")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("peval", help="probabilistic evaluation on a p-document")
    common(p, query="required", pdoc="required")
    p.set_defaults(func=_cmd_peval)

    p = sub.add_parser("worlds", help="enumerate the worlds of a p-document")
    common(p, pdoc="required")
    p.set_defaults(func=_cmd_worlds)

    p = sub.add_parser("materialize", help="materialize view extensions")
    common(p, pdoc=True, doc=True, views="required")
    p.add_argument("--name", help="materialize only this view")
    p.add_argument("--extensions", help="directory to write <view>.json files")
    p.set_defaults(func=_cmd_materialize)

    p = sub.add_parser("cindep", help="condition-independence verdict")
    p.add_argument("--q1", required=True)
    p.add_argument("--q2", required=True)
    p.add_argument("--falsify", type=int, default=0,
                   help="also run the semantic falsifier with this many trials")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_cindep)

    p = sub.add_parser("rewrite", help="find rewrite plans")
    rsub = p.add_subparsers(dest="mode", required=True)
    rp = rsub.add_parser("tp", help="single-view plans")
    common(rp, query="required", views="required", fmt=False)
    rp.set_defaults(func=_cmd_rewrite_tp)
    rc = rsub.add_parser("cap", help="multi-view plans")
    common(rc, query="required", views="required", fmt=False)
    rc.add_argument("--product", action="store_true",
                    help="search pairwise-independent product rewritings only")
    rc.set_defaults(func=_cmd_rewrite_cap)

    p = sub.add_parser("exec", help="execute a plan over extensions")
    common(p, views="required")
    p.add_argument("--plan", required=True)
    p.add_argument("--extensions", required=True, help="directory of <view>.json")
    p.set_defaults(func=_cmd_exec)

    p = sub.add_parser("verify", help="randomized end-to-end verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-dist", type=int, default=8)
    p.add_argument("--query-depth", type=int, default=3)
    p.add_argument("--views-per-instance", type=int, default=3)
    p.add_argument("--falsifier-trials", type=int, default=20)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-dist", type=int, default=8)
    p.add_argument("--query-depth", type=int, default=3)
    p.add_argument("--views-per-instance", type=int, default=3)
    p.set_defaults(func=_cmd_gen)

    return parser


def dispatch(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (InputError, ModelError, PatternError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
