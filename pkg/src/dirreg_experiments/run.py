import logging
import math
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import hydra
import numpy as np
import yaml
from joblib import Parallel, delayed
from omegaconf import OmegaConf

from dirreg_algorithms.determine import (
    NotDetermining,
    annihilator_order_shift,
    greedy_select,
    is_determining,
    select_well_conditioned,
    stability_constant,
)
from dirreg_algorithms.errors import SingularMatrixError
from dirreg_algorithms.momentmatrix import DirectionSet, build_moment_matrix
from dirreg_algorithms.multiindex import monomial_count, monomial_eval
from dirreg_algorithms.polynomial import random_polynomial_map
from dirreg_algorithms.rank1 import (
    NotDetermining1,
    WeightSequence,
    epsilon_constant,
    is_rank1_determining,
    propagation_inequality_check,
    validate_weight_sequence,
    witness_vanishes,
)
from dirreg_algorithms.reconstruct import (
    FunctionOracle,
    reconstruct_partials,
    verify_stability,
)
from dirreg_algorithms.sharpness import (
    HomogeneousMap,
    verify_blowup,
    verify_directional_tameness,
)

from .instances import (
    coordinate_pairs,
    instance_rng,
    partition_oracle,
    random_direction_set,
    random_sweep_instance,
    random_unit_samples,
    undersized_direction_set,
)

logger = logging.getLogger("dirreg_experiments.run")

MAX_SHIFT_ORDER = 4


def _set_seeds(seed):
    random.seed(seed)
    np.random.seed(seed)


def _parallel(args, function, count, *extra):
    return Parallel(n_jobs=args.n_jobs)(
        delayed(function)(args.seed, index, *extra) for index in range(count)
    )


def _write_summary(summary: dict) -> None:
    with open("summary.yaml", "w") as outfile:
        yaml.dump(summary, outfile)
    logger.info(f"Summary:\n{yaml.dump(summary)}")


def _verdict_instance(seed, index, dims, orders, max_size):
    lam = random_sweep_instance(instance_rng(seed, index), dims, orders, max_size)
    tested = is_determining(lam)
    greedy = greedy_select(lam)
    result = {
        "determining": tested.determining,
        "agree": tested.determining == greedy.determining,
        "certificate_ok": True,
        "shift_ok": True,
    }
    for verdict in (tested, greedy):
        if isinstance(verdict, NotDetermining):
            certificate = verdict.certificate
            vanishes = bool(certificate.coeffs) and certificate.vanishes_on(lam)
            result["certificate_ok"] &= vanishes
    if isinstance(tested, NotDetermining):
        for k_target in range(lam.k + 1, MAX_SHIFT_ORDER + 1):
            shifted = annihilator_order_shift(tested.certificate, k_target)
            result["shift_ok"] &= shifted.vanishes_on(lam.with_order(k_target))
    return result


def _undersized_instance(seed, index, dims, orders):
    rng = instance_rng(seed, 10**6 + index)
    n, m, k = (int(rng.choice(dims)), int(rng.choice(dims)), int(rng.choice(orders)))
    if m * monomial_count(n, k) < 2:
        return True
    return not is_determining(undersized_direction_set(rng, n, m, k)).determining


def run_verdict_equivalence(args):
    config = args.experiment
    start = time.time()
    results = _parallel(
        args,
        _verdict_instance,
        config.instances,
        list(config.dims),
        list(config.orders),
        config.max_size,
    )
    undersized = _parallel(
        args,
        _undersized_instance,
        config.size_bound_instances,
        list(config.dims),
        list(config.orders),
    )
    summary = {
        "instances": len(results),
        "determining": sum(r["determining"] for r in results),
        "disagreements": sum(not r["agree"] for r in results),
        "bad_certificates": sum(not r["certificate_ok"] for r in results),
        "order_shift_failures": sum(not r["shift_ok"] for r in results),
        "size_bound_failures": sum(not ok for ok in undersized),
        "seconds": round(time.time() - start, 3),
    }
    summary["passed"] = (
        summary["disagreements"]
        + summary["bad_certificates"]
        + summary["order_shift_failures"]
        + summary["size_bound_failures"]
        == 0
    )
    _write_summary(summary)


def _exponential_oracle(A: np.ndarray) -> FunctionOracle:
    """f_j(x) = exp(<a_j, x>), so d^alpha f_j(x) = a_j^alpha f_j(x)."""

    def evaluate(x):
        return tuple(float(v) for v in np.exp(A @ np.array([float(c) for c in x])))

    return FunctionOracle(evaluator=evaluate, m=A.shape[0])


def _selection_quality(lam, verdict, rng, samples):
    """Share of random full-rank selections at least as unstable as the chosen one."""
    chosen = float(verdict.stability_B) * (1 - 1e-9)
    constants = []
    for _ in range(samples):
        ids = sorted(int(i) for i in rng.choice(len(lam), lam.dimension, replace=False))
        points = [lam.pairs[i] for i in ids]
        try:
            matrix = build_moment_matrix(points, lam.n, lam.m, lam.k, mode="float")
            constants.append(float(stability_constant(matrix)))
        except SingularMatrixError:
            continue
    if not constants:
        return 1.0
    return sum(b >= chosen for b in constants) / len(constants)


def _reconstruction_instance(seed, index, dims, orders, extra_points, selection_samples):
    rng = instance_rng(seed, index)
    n, m, k = int(rng.choice(dims)), int(rng.choice(dims)), int(rng.choice(orders))
    lam = random_direction_set(rng, n, m, k, m * monomial_count(n, k) + extra_points)
    verdict = greedy_select(lam)
    if isinstance(verdict, NotDetermining):
        return {"skipped": True}
    poly = random_polynomial_map(rng, n, m, k)
    point = [
        Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4))) for _ in range(n)
    ]
    oracle = poly.as_oracle(exact=True)
    tensor = reconstruct_partials(oracle, point, verdict, n_jobs=1)
    exact = all(
        value == poly.partial_value(alpha, j, point)
        for (alpha, j), value in tensor.values.items()
    )
    stability = verify_stability(oracle, point, verdict, lam)

    float_lam = DirectionSet.from_vectors(
        [p.xi for p in lam], [p.eta for p in lam], k, mode="float", n=n, m=m
    )
    float_verdict = select_well_conditioned(float_lam)
    A = rng.uniform(-1.0, 1.0, size=(m, n))
    x = rng.uniform(-0.5, 0.5, size=n)
    smooth = _exponential_oracle(A)
    approx = reconstruct_partials(smooth, list(x), float_verdict, n_jobs=1)
    f_x = np.exp(A @ x)
    errors, scale = [], 0.0
    for (alpha, j), value in approx.values.items():
        truth = monomial_eval(list(A[j - 1]), alpha) * f_x[j - 1]
        errors.append(abs(float(value) - truth))
        scale = max(scale, abs(truth))
    relative = max(errors) / scale if scale > 0 else max(errors)
    return {
        "skipped": False,
        "exact": exact,
        "stability": stability.holds,
        "relative_error": float(relative),
        "selection_quality": _selection_quality(
            float_lam, float_verdict, rng, selection_samples
        ),
    }


def run_reconstruction(args):
    config = args.experiment
    start = time.time()
    results = _parallel(
        args,
        _reconstruction_instance,
        config.instances,
        list(config.dims),
        list(config.orders),
        config.extra_points,
        config.selection_samples,
    )
    done = [r for r in results if not r["skipped"]]
    worst = max((r["relative_error"] for r in done), default=0.0)
    summary = {
        "instances": len(done),
        "skipped": len(results) - len(done),
        "inexact": sum(not r["exact"] for r in done),
        "stability_violations": sum(not r["stability"] for r in done),
        "float_failures": sum(r["relative_error"] > config.float_tolerance for r in done),
        "worst_relative_error": float(worst),
        "selection_quality_failures": sum(
            r["selection_quality"] < config.selection_quality for r in done
        ),
        "seconds": round(time.time() - start, 3),
    }
    summary["passed"] = (
        summary["inexact"]
        + summary["stability_violations"]
        + summary["float_failures"]
        + summary["selection_quality_failures"]
        == 0
    )
    _write_summary(summary)


def _sharpness_instance(seed, index, dims, orders, max_size):
    rng = instance_rng(seed, index)
    while True:
        n, m, k = int(rng.choice(dims)), int(rng.choice(dims)), int(rng.choice(orders))
        size = int(rng.integers(1, max_size + 1))
        lam = random_direction_set(rng, n, m, k, size, degenerate=True)
        verdict = is_determining(lam)
        if isinstance(verdict, NotDetermining):
            break
    phi = HomogeneousMap.from_annihilator(verdict.certificate)
    tameness = verify_directional_tameness(phi, lam)
    blowup = verify_blowup(phi)
    return {"tameness": tameness.passed, "blowup": blowup.passed}


def run_sharpness(args):
    config = args.experiment
    start = time.time()
    results = _parallel(
        args,
        _sharpness_instance,
        config.instances,
        list(config.dims),
        list(config.orders),
        config.max_size,
    )
    summary = {
        "instances": len(results),
        "tameness_failures": sum(not r["tameness"] for r in results),
        "blowup_failures": sum(not r["blowup"] for r in results),
        "seconds": round(time.time() - start, 3),
    }
    summary["passed"] = summary["tameness_failures"] + summary["blowup_failures"] == 0
    _write_summary(summary)


def _rank1_instance(seed, index, dims, max_size):
    lam = random_sweep_instance(instance_rng(seed, index), dims, [1], max_size)
    verdict = is_rank1_determining(lam)
    witness_ok = True
    if isinstance(verdict, NotDetermining1):
        witness_ok = (
            any(verdict.u)
            and any(verdict.v)
            and witness_vanishes(lam, verdict.u, verdict.v)
        )
    return {
        "agree": verdict.determining == partition_oracle(lam),
        "witness_ok": witness_ok,
    }


def run_rank1_oracle(args):
    config = args.experiment
    start = time.time()
    results = _parallel(
        args, _rank1_instance, config.instances, list(config.dims), config.max_size
    )
    summary = {
        "instances": len(results),
        "disagreements": sum(not r["agree"] for r in results),
        "bad_witnesses": sum(not r["witness_ok"] for r in results),
        "seconds": round(time.time() - start, 3),
    }
    summary["passed"] = summary["disagreements"] + summary["bad_witnesses"] == 0
    _write_summary(summary)


def _propagation_instance(seed, index, dims, l, samples):
    rng = instance_rng(seed, index)
    while True:
        n, m = int(rng.choice(dims)), int(rng.choice(dims))
        lam = random_direction_set(rng, n, m, 1, n * m + int(rng.integers(0, 4)))
        if is_rank1_determining(lam).determining:
            break
    report = propagation_inequality_check(lam, l, random_unit_samples(rng, n, m, samples))
    return {"passed": report.passed, "epsilon": report.epsilon}


def run_epsilon(args):
    config = args.experiment
    start = time.time()
    estimate = epsilon_constant(coordinate_pairs(2, 2), config.l, grid=config.grid)
    low, high = config.coordinate_range
    results = _parallel(
        args,
        _propagation_instance,
        config.instances,
        list(config.dims),
        config.l,
        config.samples,
    )
    summary = {
        "coordinate_epsilon": float(estimate.epsilon),
        "coordinate_gap": float(estimate.gap),
        "instances": len(results),
        "propagation_failures": sum(not r["passed"] for r in results),
        "seconds": round(time.time() - start, 3),
    }
    summary["passed"] = (
        low <= estimate.epsilon <= high and summary["propagation_failures"] == 0
    )
    _write_summary(summary)


def run_weights(args):
    config = args.experiment
    start = time.time()
    families = {}
    for nu in config.nus:
        report = validate_weight_sequence(WeightSequence.gevrey(nu, config.K))
        families[report.sequence] = {
            "admissible": report.admissible,
            "C": float(report.C),
        }
    ones = validate_weight_sequence(WeightSequence.custom([Fraction(1)] * (config.K + 1)))
    first_failure = ones.conditions["lower_bound"].first_failure
    summary = {
        "families": families,
        "ones_first_failure": first_failure,
        "seconds": round(time.time() - start, 3),
    }
    summary["passed"] = (
        all(f["admissible"] and math.isfinite(f["C"]) for f in families.values())
        and first_failure == 2
    )
    _write_summary(summary)


@hydra.main(config_path="configs", config_name="run", version_base="1.2")
def run(args):
    # Print arguments to stderr (useful on cluster)
    sys.stderr.write(f"{' '.join(sys.argv)}\n")
    sys.stderr.write(f"args = {args}\n\n")
    sys.stderr.flush()

    _set_seeds(args.seed)
    working_directory = Path().cwd()

    logger.info(f"Using working_directory={working_directory}")
    logger.info(f"Arguments:\n{OmegaConf.to_yaml(args)}")

    hydra.utils.call(args.experiment.run_function, args)
    logger.info("Run finished")


if __name__ == "__main__":
    run()  # pylint: disable=no-value-for-parameter
