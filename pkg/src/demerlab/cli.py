"""Experiment runner: seeded sweeps over every module with bound audits.

Reports are byte-reproducible for a fixed seed: one root seed sequence is
split hierarchically per trial, floats are serialized with repr round-trip
formatting, and JSON keys are sorted. The process exits nonzero iff any
audited bound failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from .advice import (
    j_fold_decision,
    ma_fix_advice,
    qcma_train,
    qma_fix_advice,
    true_advice_wrong_probability,
)
from .amplify import desk_plan, plan_amplification
from .demerlin import demerlinize, evaluate_demerlinized, resource_report, sample_demerlinized
from .qcore import RegisterLayout, StateVector, TwoOutcomeMeasurement
from .qlemmas import (
    agrees_within_sigma,
    good_as_new_check,
    monte_carlo_any_outcome1,
    or_bound_run,
    projector_or_instance,
    random_or_instance,
    random_union_instance,
    union_bound_run,
)
from .rac import (
    audit_reduced,
    build_code,
    cheat_detection_profile,
    check_fingerprint,
    draw_scheme,
    fingerprint,
    rac_round,
    rounds_for_soundness,
    tight_reduction,
    wrapped_code_protocol,
)
from .toys import DEMERLIN_TOYS, demerlin_toy, parity_ma_verifier, parity_qma_verifier, table_qcma_verifier

ENV_PREFIX = "DEMERLAB_"


def _env_default(name: str, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return fallback
    return type(fallback)(raw) if fallback is not None else raw


def _child_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def _emit(report: dict, args) -> None:
    if args.format == "json":
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        rows = report.get("results", [])
        columns = report.get("csv_columns") or (sorted(rows[0]) if rows else [])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(c, "") for c in columns])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_report(args, command: str, params: dict) -> dict:
    return {"version": __version__, "command": command, "seed": args.seed,
            "params": params, "results": [], "pass": True}


# ---------------------------------------------------------------------------
# lemma subcommands


def _run_good_as_new(args) -> dict:
    report = _base_report(args, "lemma good-as-new", {"instances": args.instances})
    layout = RegisterLayout.of(("q", 1))
    plus_state = StateVector(np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0), layout)
    proj1 = TwoOutcomeMeasurement(np.array([[0, 0], [0, 1]], dtype=complex), layout)
    eq = good_as_new_check(plus_state, proj1)
    report["results"].append({"case": "projector-equality", **eq.to_json_dict()})
    rng_seeds = _child_seeds(args.seed, args.instances)
    for i, ss in enumerate(rng_seeds):
        rng = np.random.default_rng(ss)
        rho, seq = random_union_instance(rng, max_qubits=2, max_steps=1)
        r = good_as_new_check(rho, seq[0])
        report["results"].append({"case": f"random-{i}", **r.to_json_dict()})
    report["pass"] = all(r["pass"] for r in report["results"])
    report["csv_columns"] = ["case", "lemma", "bound", "pass"]
    return report


def _union_trial(ss) -> dict:
    rng = np.random.default_rng(ss)
    rho, seq = random_union_instance(rng)
    return union_bound_run(rho, seq).to_json_dict()


def _run_union(args) -> dict:
    report = _base_report(args, "lemma union", {"instances": args.instances})
    seeds = _child_seeds(args.seed, args.instances)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_union_trial, seeds))
    else:
        rows = [_union_trial(ss) for ss in seeds]
    report["results"] = rows
    report["pass"] = all(r["pass"] for r in rows)
    report["csv_columns"] = ["lemma", "exact", "bound", "drift", "pass"]
    return report


def _run_or_bound(args) -> dict:
    params = {"witness_qubits": args.witness_qubits, "instances": args.instances,
              "shots": args.shots}
    report = _base_report(args, "lemma or-bound", params)
    seeds = _child_seeds(args.seed, args.instances + 1)
    rho, sigma, joint, t = projector_or_instance(args.witness_qubits)
    pinned = or_bound_run(rho, sigma, joint, t)
    row = pinned.to_json_dict()
    row["case"] = "eta-two-thirds"
    row["meets_one_ninth"] = pinned.p_any_one >= 1.0 / 9.0 - 1e-9
    if args.shots:
        from .qlemmas import induced_effects
        effects = induced_effects(joint, rho.dim, sigma.dim)
        rng = np.random.default_rng(seeds[0])
        est, err = monte_carlo_any_outcome1(rho, [m.m0 for m in effects], t,
                                            args.shots, rng)
        row["monte_carlo"] = {"estimate": est, "stderr": err,
                              "within_3_sigma": agrees_within_sigma(est, pinned.p_any_one,
                                                                    args.shots)}
    report["results"].append(row)

    def trial(item):
        i, ss = item
        rng = np.random.default_rng(ss)
        rho_i, sigma_i, joint_i, t_i = random_or_instance(rng, args.witness_qubits)
        r = or_bound_run(rho_i, sigma_i, joint_i, t_i).to_json_dict()
        r["case"] = f"random-{i}"
        return r

    items = list(enumerate(seeds[1:]))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            report["results"].extend(pool.map(trial, items))
    else:
        report["results"].extend(trial(item) for item in items)
    report["pass"] = all(r["pass"] for r in report["results"])
    report["csv_columns"] = ["case", "lemma", "exact", "bound", "pass"]
    return report


# ---------------------------------------------------------------------------
# amplify / demerlin subcommands


def _run_amplify_plan(args) -> dict:
    params = {"alice_qubits": args.alice, "witness_qubits": args.witness,
              "desk": args.desk}
    report = _base_report(args, "amplify plan", params)
    if args.desk:
        plan = desk_plan(args.alice, args.witness)
    else:
        plan = plan_amplification(args.alice, args.witness,
                                  c_ell=args.c_ell, c_u=args.c_u)
    row = plan.to_json_dict()
    row["pass"] = plan.soundness_cert_log10 <= plan.soundness_target_log10 + 1e-12
    report["results"].append(row)
    report["pass"] = row["pass"]
    return report


def _demerlinized_from_toy(name: str):
    from .amplify import identity_plan

    p, f = demerlin_toy(name)
    plan = identity_plan(p.alice_qubits, p.witness_qubits)
    return demerlinize(p, plan, f=f), f


def _run_demerlin_build(args) -> dict:
    report = _base_report(args, "demerlin build", {"toy": args.toy})
    d, _ = _demerlinized_from_toy(args.toy)
    row = resource_report(d).to_json_dict()
    row["W"] = d.witness_qubits
    row["T"] = d.t_rounds
    row["pass"] = True
    report["results"].append(row)
    return report


def _run_demerlin_run(args) -> dict:
    report = _base_report(args, "demerlin run", {"toy": args.toy, "shots": args.shots})
    d, f = _demerlinized_from_toy(args.toy)
    yes_vals, no_vals, rows = [], [], []
    for (x, y), v in f.pairs():
        r = evaluate_demerlinized(d, x, y)
        rows.append(r.to_json_dict())
        (yes_vals if v == 1 else no_vals).append(r.p_accept)
    res = resource_report(d)
    summary = {
        "W": d.witness_qubits,
        "T": d.t_rounds,
        "p_accept_yes_min": min(yes_vals) if yes_vals else None,
        "p_accept_no_max": max(no_vals) if no_vals else None,
        "gates": res.gates,
        "qubits": res.qubits,
        "bounds": {"yes_floor": 1.0 / 9.0, "no_ceiling": d.soundness_ceiling},
        "pass": all(r["pass"] for r in rows),
    }
    if args.shots:
        x, y = next((pair for pair, v in f.pairs() if v == 1))
        est, err = sample_demerlinized(d, x, y, args.shots, _child_seeds(args.seed, 1)[0])
        exact = next(r["p_accept"] for r in rows if r["x"] == x and r["y"] == y)
        summary["monte_carlo"] = {"x": x, "y": y, "estimate": est, "stderr": err,
                                  "within_3_sigma": agrees_within_sigma(est, exact, args.shots)}
        summary["pass"] = summary["pass"] and summary["monte_carlo"]["within_3_sigma"]
    if getattr(args, "final_vote", False):
        from .demerlin import final_vote_acceptance, plan_final_vote

        # plan from the exact measured spread: at least as tight as the
        # loop's formal (1/9, T * sqrt(5^-W)) guarantee whenever that holds
        no_ceiling = summary["p_accept_no_max"] if no_vals else 0.0
        vote = plan_final_vote(yes_floor=summary["p_accept_yes_min"],
                               no_ceiling=no_ceiling)
        summary["final_vote"] = vote.to_json_dict()
        summary["final_vote"]["voted_yes_min"] = final_vote_acceptance(
            summary["p_accept_yes_min"], vote)
        if no_vals:
            summary["final_vote"]["voted_no_max"] = final_vote_acceptance(
                summary["p_accept_no_max"], vote)
    report["results"] = rows
    report["summary"] = summary
    report["pass"] = summary["pass"]
    report["csv_columns"] = ["x", "y", "f", "p_accept", "pass"]
    return report


# ---------------------------------------------------------------------------
# rac subcommands


def _run_rac_audit(args) -> dict:
    if args.n % args.w:
        raise SystemExit("--n must be a multiple of --w")
    a = args.n // args.w
    if args.a is not None and args.a != a:
        raise SystemExit(f"--a must equal n/w = {a}")
    params = {"n": args.n, "w": args.w, "a": a}
    report = _base_report(args, "rac audit", params)
    code = build_code(args.w, seed=args.seed)
    rounds = rounds_for_soundness(code)
    completeness_failures = 0
    min_detection = 1.0
    rng = np.random.default_rng(_child_seeds(args.seed, 1)[0])
    for xv in range(2 ** args.n):
        x = format(xv, f"0{args.n}b")
        for i in range(args.n):
            t = rac_round(x, i, code, rng=rng)
            if not (t.accepted and t.output == int(x[i])):
                completeness_failures += 1
            profile = cheat_detection_profile(x, i, code)
            min_detection = min(min_detection, float(profile.min_flipping))
    soundness = float((Fraction(1) - code.distance_ratio) ** rounds)
    row = {
        "n": args.n, "w": args.w, "a": a, "seed": args.seed,
        "block_length": code.block_length,
        "min_distance": code.verified_min_distance,
        "completeness": 1.0 if completeness_failures == 0 else 0.0,
        "min_detection": min_detection,
        "rounds": rounds,
        "soundness_after_rounds": soundness,
        "pass": (completeness_failures == 0
                 and min_detection >= float(code.distance_ratio) - 1e-12
                 and soundness <= 1.0 / 3.0 + 1e-12),
    }
    report["results"].append(row)
    report["pass"] = row["pass"]
    report["csv_columns"] = ["n", "w", "a", "seed", "block_length", "min_distance",
                             "completeness", "min_detection", "rounds",
                             "soundness_after_rounds", "pass"]
    return report


def _run_rac_reduce(args) -> dict:
    n = args.n if args.n is not None else 2 * args.w
    params = {"n": n, "w": args.w}
    report = _base_report(args, "rac reduce", params)
    code = build_code(args.w, seed=args.seed)
    base = wrapped_code_protocol(code, n)
    reduced = tight_reduction(base)
    inputs = [format(v, f"0{n}b") for v in range(2 ** n)]
    records = audit_reduced(reduced, lambda x, i: int(x[i]), inputs)
    worst = max(r.error_bound for r in records)
    row = {"n": n, "w": args.w, "copies": reduced.copies,
           "per_claim_error": reduced.per_claim_error,
           "worst_error_bound": worst, "pass": worst <= 1.0 / 3.0 + 1e-12}
    report["results"].append(row)
    report["pass"] = row["pass"]
    return report


def _run_rac_fingerprint(args) -> dict:
    params = {"bits": args.bits, "m_bits": args.m_bits, "trials": args.trials}
    report = _base_report(args, "rac fingerprint", params)
    rng = np.random.default_rng(_child_seeds(args.seed, 1)[0])
    collisions = 0

    def random_bits() -> str:
        return "".join(str(b) for b in rng.integers(0, 2, size=args.bits))

    for _ in range(args.trials):
        scheme = draw_scheme(rng, output_bits=args.m_bits)
        x = random_bits()
        y = x
        while y == x:
            y = random_bits()
        if not check_fingerprint(x, fingerprint(x, scheme), scheme):
            raise SystemExit("self-check failed")
        if fingerprint(x, scheme) == fingerprint(y, scheme):
            collisions += 1
    rate = collisions / args.trials
    bound = 2.0 ** (1 - args.m_bits)
    sigma = max((bound * (1 - bound) / args.trials) ** 0.5, 1e-9)
    row = {"collision_rate": rate, "bound": bound,
           "pass": rate <= bound + 3 * sigma}
    report["results"].append(row)
    report["pass"] = row["pass"]
    return report


# ---------------------------------------------------------------------------
# advice subcommands


def _run_advice_ma_fix(args) -> dict:
    report = _base_report(args, "advice ma-fix", {"n": args.n})
    v = parity_ma_verifier(args.n)
    fixed = ma_fix_advice(v, seed=args.seed)
    row = fixed.to_json_dict()
    row["pass"] = True
    report["results"].append(row)
    return report


def _run_advice_qma_fix(args) -> dict:
    report = _base_report(args, "advice qma-fix", {"n": args.n,
                                                   "witness_bits": args.witness_bits})
    if args.witness_bits != 1:
        raise SystemExit("the shipped quantum-witness toy uses a 1-qubit witness")
    v = parity_qma_verifier(args.n)
    fixed = qma_fix_advice(v, seed=args.seed)
    row = fixed.to_json_dict()
    row["pass"] = True
    report["results"].append(row)
    return report


def _run_advice_qcma_train(args) -> dict:
    report = _base_report(args, "advice qcma-train",
                          {"n": args.n, "adv_qubits": args.adv_qubits})
    if args.adv_qubits is not None and args.adv_qubits != 2 ** args.n:
        raise SystemExit(f"the table toy at n={args.n} uses {2 ** args.n} advice qubits")
    v = table_qcma_verifier(args.n)
    training, decider = qcma_train(v)
    a_total = decider.amplified.alice_qubits
    t = training.size
    p_t = training.survivals[-1]
    floor = 2.0 ** (-a_total) * (1.0 - t / a_total ** 2) if a_total else 0.0
    correct = all(decider.decide(x).verdict == v.language[x] for x in v.inputs())
    wrong = true_advice_wrong_probability(v, training, decider)
    jfold = {x: j_fold_decision(decider, x).verdict == v.language[x] for x in v.inputs()}
    row = {
        "training": training.to_json_dict(),
        "advice_qubits_total": a_total,
        "survival_floor": floor,
        "survival_ceiling": (2.0 / 3.0) ** t,
        "true_advice_wrong_prob": wrong,
        "decisions_correct": correct,
        "j_fold_correct": all(jfold.values()),
        "pass": (correct and p_t >= floor - 1e-9 and p_t <= (2.0 / 3.0) ** t + 1e-9),
    }
    report["results"].append(row)
    report["pass"] = row["pass"]
    return report


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_env_default("seed", 0))
    common.add_argument("--out", default=_env_default("out", None))
    common.add_argument("--format", choices=("json", "csv"),
                        default=_env_default("format", "json"))
    common.add_argument("--shots", type=int, default=_env_default("shots", 0))
    common.add_argument("--jobs", type=int, default=_env_default("jobs", 1))

    parser = argparse.ArgumentParser(prog="demerlab",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="group", required=True)

    lemma = sub.add_parser("lemma").add_subparsers(dest="sub", required=True)
    g = lemma.add_parser("good-as-new", parents=[common])
    g.add_argument("--instances", type=int, default=25)
    g.set_defaults(handler=_run_good_as_new)
    u = lemma.add_parser("union", parents=[common])
    u.add_argument("--instances", type=int, default=100)
    u.set_defaults(handler=_run_union)
    o = lemma.add_parser("or-bound", parents=[common])
    o.add_argument("--witness-qubits", type=int, default=1)
    o.add_argument("--instances", type=int, default=25)
    o.set_defaults(handler=_run_or_bound)

    amp = sub.add_parser("amplify").add_subparsers(dest="sub", required=True)
    ap = amp.add_parser("plan", parents=[common])
    ap.add_argument("--alice", type=int, required=True)
    ap.add_argument("--witness", type=int, required=True)
    ap.add_argument("--desk", action="store_true")
    ap.add_argument("--c-ell", type=float, default=None)
    ap.add_argument("--c-u", type=float, default=None)
    ap.set_defaults(handler=_run_amplify_plan)

    dem = sub.add_parser("demerlin").add_subparsers(dest="sub", required=True)
    db = dem.add_parser("build", parents=[common])
    db.add_argument("--toy", choices=DEMERLIN_TOYS, required=True)
    db.set_defaults(handler=_run_demerlin_build)
    dr = dem.add_parser("run", parents=[common])
    dr.add_argument("--toy", choices=DEMERLIN_TOYS, required=True)
    dr.add_argument("--final-vote", action="store_true",
                    help="append a threshold-vote post-pass restoring 2/3 vs 1/3")
    dr.set_defaults(handler=_run_demerlin_run)

    rac = sub.add_parser("rac").add_subparsers(dest="sub", required=True)
    ra = rac.add_parser("audit", parents=[common])
    ra.add_argument("--n", type=int, default=8)
    ra.add_argument("--w", type=int, default=4)
    ra.add_argument("--a", type=int, default=None)
    ra.set_defaults(handler=_run_rac_audit)
    rr = rac.add_parser("reduce", parents=[common])
    rr.add_argument("--w", type=int, default=1)
    rr.add_argument("--n", type=int, default=None)
    rr.set_defaults(handler=_run_rac_reduce)
    rf = rac.add_parser("fingerprint", parents=[common])
    rf.add_argument("--bits", type=int, default=8)
    rf.add_argument("--m-bits", type=int, default=6)
    rf.add_argument("--trials", type=int, default=10_000)
    rf.set_defaults(handler=_run_rac_fingerprint)

    adv = sub.add_parser("advice").add_subparsers(dest="sub", required=True)
    am = adv.add_parser("ma-fix", parents=[common])
    am.add_argument("--n", type=int, default=2)
    am.set_defaults(handler=_run_advice_ma_fix)
    aq = adv.add_parser("qma-fix", parents=[common])
    aq.add_argument("--n", type=int, default=2)
    aq.add_argument("--witness-bits", type=int, default=1)
    aq.set_defaults(handler=_run_advice_qma_fix)
    at = adv.add_parser("qcma-train", parents=[common])
    at.add_argument("--n", type=int, default=1)
    at.add_argument("--adv-qubits", type=int, default=None)
    at.set_defaults(handler=_run_advice_qcma_train)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    report = args.handler(args)
    _emit(report, args)
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
