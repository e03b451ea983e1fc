"""
命令行子命令的执行逻辑

每个子命令返回 CommandResult：一个可直接序列化的文档（标量、表格）以及内部交叉校验结果。
写输出和退出码由 retrodict_cli 负责。
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from src.device_file import DeviceFile
from src.device_model import (
    BiasReport,
    DeviceOperatorSet,
    a_priori_distribution,
    classify_bias,
)
from src.errors import CrossCheckFailed, SchemaError
from src.evolution import (
    collapse_time_deviation,
    identity_context,
    retrodictive_backward,
    retrodictive_evolved,
)
from src.experiment_sim import discard_z, expected_discard_fraction, run_experiment, tabulate
from src.probability_engine import (
    bayes_deviation,
    joint,
    marginal_meas,
    marginal_meas_direct,
    marginal_prep,
    marginal_prep_direct,
    predictive,
    predictive_bayes,
    retrodictive,
    retrodictive_bayes,
)
from src.scenarios import (
    appendix_equivalence,
    appendix_extend,
    belinfante_build,
    belinfante_closed_form,
    belinfante_iff_check,
    conventional_joint,
    null_outcome_mass,
)
from utils.allure_logger import log_step
from utils.config import Tolerances, resolve_tol
from utils.logger import logger


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    deviation: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.limit)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "deviation": self.deviation,
            "limit": self.limit,
            "passed": self.passed,
        }


@dataclass
class CommandResult:
    command: str
    sections: Dict[str, Any] = field(default_factory=dict)
    checks: List[CheckOutcome] = field(default_factory=list)

    @property
    def failed(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def document(self) -> Dict[str, Any]:
        doc = {"command": self.command, **self.sections}
        if self.checks:
            doc["checks"] = [c.as_dict() for c in self.checks]
        return doc

    def raise_for_checks(self) -> None:
        if self.failed:
            raise CrossCheckFailed(self.failed)


@dataclass(frozen=True)
class RunOptions:
    tol: Optional[Tolerances] = None
    trials: int = 100_000
    seed: int = 1
    chunks: Optional[int] = None
    include_log: bool = False


def _check(name: str, deviation: float, limit: float) -> CheckOutcome:
    outcome = CheckOutcome(name, float(deviation), float(limit))
    log = logger.info if outcome.passed else logger.error
    log(f"交叉校验 {name}: 偏差 {deviation:.3g}, 上限 {limit:.3g}")
    return outcome


def _bias_row(report: BiasReport) -> Dict[str, Any]:
    return {
        "role": report.role.value,
        "unbiased": report.is_unbiased,
        "gamma": report.gamma,
        "defect": report.defect,
    }


def _series_deviation(a: pd.Series, b: pd.Series) -> float:
    return float(np.max(np.abs(a.to_numpy() - b.to_numpy())))


# ---------------------------------------------------------------- 各子命令
@log_step("校验装置文件")
def run_validate(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    ctx = df.evolution_context(tol)
    scenario = df.belinfante(tol)
    return CommandResult(
        "validate",
        {
            "dimension": df.dimension,
            "preparation_events": len(prep),
            "measurement_events": len(meas),
            "measurement_normalization": meas.normalization_factor,
            "has_evolution": ctx is not None,
            "has_scenario": scenario is not None,
        },
    )


@log_step("偏置分类")
def run_classify(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    frame = pd.DataFrame([_bias_row(classify_bias(prep, tol)), _bias_row(classify_bias(meas, tol))])
    return CommandResult(
        "classify",
        {"bias": frame, "a_priori": a_priori_distribution(prep, tol)},
    )


def _joint_sections(prep: DeviceOperatorSet, meas: DeviceOperatorSet, tol: Tolerances):
    jd = joint(prep, meas, tol)
    p_i, p_j = marginal_prep(jd), marginal_meas(jd)
    checks = [
        _check(
            "marginal paths",
            max(
                _series_deviation(p_i, marginal_prep_direct(prep, meas, tol)),
                _series_deviation(p_j, marginal_meas_direct(prep, meas, tol)),
            ),
            tol.cross_check,
        )
    ]
    sections = {"joint": jd.to_frame(), "marginal_prep": p_i, "marginal_meas": p_j}
    return jd, sections, checks


@log_step("联合分布")
def run_joint(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    _, sections, checks = _joint_sections(prep, meas, tol)
    return CommandResult("joint", sections, checks)


@log_step("预测条件概率")
def run_predict(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    jd = joint(prep, meas, tol)
    table = predictive(jd, tol)
    checks = [_check("bayes", bayes_deviation(jd, tol), tol.cross_check)]
    if classify_bias(prep, tol).is_unbiased:
        checks.append(
            _check("predictive via unbiased preparation",
                   table.max_deviation(predictive_bayes(prep, meas, tol)), tol.cross_check)
        )
    return CommandResult("predict", {"predictive": table.to_frame()}, checks)


@log_step("回溯条件概率")
def run_retrodict(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    jd = joint(prep, meas, tol)
    table = retrodictive(jd, tol)
    checks = [_check("bayes", bayes_deviation(jd, tol), tol.cross_check)]
    if classify_bias(meas, tol).is_unbiased:
        checks.append(
            _check("retrodictive via detection postulate",
                   table.max_deviation(retrodictive_bayes(prep, meas, tol)), tol.cross_check)
        )
    return CommandResult("retrodict", {"retrodictive": table.to_frame()}, checks)


@log_step("演化后的回溯概率")
def run_evolve_retrodict(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    ctx = df.evolution_context(tol)
    if ctx is None:
        logger.warning("装置文件没有 evolution 段，按恒等演化处理")
        ctx = identity_context(prep.dim)
    forward = retrodictive_evolved(ctx, prep, meas, tol)
    backward = retrodictive_backward(ctx, prep, meas, tol)
    checks = [_check("collapse time", collapse_time_deviation(ctx, prep, meas, tol), tol.cross_check)]
    return CommandResult(
        "evolve-retrodict",
        {
            "t_p": ctx.t_p,
            "t_m": ctx.t_m,
            "forward_evolved": forward.to_frame(),
            "backward_evolved": backward.to_frame(),
        },
        checks,
    )


@log_step("Belinfante 场景")
def run_belinfante(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    scenario = df.belinfante(tol)
    if scenario is None:
        raise SchemaError("scenario", "required by the belinfante command")
    prep, meas = belinfante_build(scenario, tol)
    generic = retrodictive(joint(prep, meas, tol), tol)
    closed = belinfante_closed_form(scenario, tol)
    checks = [_check("belinfante closed form", generic.max_deviation(closed), tol.cross_check)]
    report = belinfante_iff_check(scenario, tol)
    overlaps = pd.DataFrame(
        scenario.overlaps(),
        index=pd.Index(scenario.a_labels, name="i"),
        columns=pd.Index(scenario.b_labels, name="j"),
    )
    return CommandResult(
        "belinfante",
        {
            "deviation_from_overlaps": report.deviation,
            "rho_g_proportional_to_identity": report.rho_g_proportional,
            "preparation_unbiased": report.prep_unbiased,
            "iff_consistent": report.consistent,
            "retrodictive": generic.to_frame(),
            "overlaps": overlaps,
        },
        checks,
    )


@log_step("扩展 POM 等价性")
def run_appendix_check(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    extended = appendix_extend(meas, tol)
    conventional = pd.DataFrame(
        conventional_joint(prep, meas, tol),
        index=pd.Index(prep.labels, name="i"),
        columns=pd.Index(meas.labels, name="j"),
    )
    checks = [_check("appendix equivalence", appendix_equivalence(prep, meas, tol), tol.cross_check)]
    return CommandResult(
        "appendix-check",
        {
            "extended_labels": " ".join(extended.pom.labels),
            "null_outcome_mass": null_outcome_mass(prep, meas, tol),
            "conventional_joint": conventional,
        },
        checks,
    )


@log_step("蒙特卡洛模拟")
def run_simulate(df: DeviceFile, opts: RunOptions) -> CommandResult:
    tol = resolve_tol(opts.tol)
    prep, meas = df.devices(tol)
    log = run_experiment(prep, meas, opts.trials, opts.seed, chunks=opts.chunks, tol=tol)
    freq = tabulate(log, prep, meas, tol)
    sections: Dict[str, Any] = {
        "n_trials": log.n_trials,
        "seed": log.seed.seed,
        "kept_total": freq.kept_total,
        "n_discarded": log.n_discarded,
        "expected_discard_fraction": expected_discard_fraction(prep, meas, tol),
        "discard_z": float(discard_z(log, prep, meas, tol)),
        "max_abs_error": freq.max_abs_error,
        "max_abs_z": freq.max_abs_z,
        "frequencies": freq.to_frame(),
    }
    if opts.include_log:
        sections["log"] = log.to_frame()
    return CommandResult("simulate", sections)


COMMANDS: Dict[str, Callable[[DeviceFile, RunOptions], CommandResult]] = {
    "validate": run_validate,
    "classify": run_classify,
    "joint": run_joint,
    "predict": run_predict,
    "retrodict": run_retrodict,
    "evolve-retrodict": run_evolve_retrodict,
    "belinfante": run_belinfante,
    "appendix-check": run_appendix_check,
    "simulate": run_simulate,
}


def run_report(df: DeviceFile, opts: RunOptions) -> CommandResult:
    """依次执行全部子命令；没有 scenario 段时跳过 belinfante"""
    sections: Dict[str, Any] = {}
    checks: List[CheckOutcome] = []
    for name, command in COMMANDS.items():
        if name == "belinfante" and df.scenario is None:
            continue
        result = command(df, opts)
        sections[name] = result.document()
        checks.extend(
            CheckOutcome(f"{name}: {c.name}", c.deviation, c.limit) for c in result.checks
        )
    return CommandResult("report", sections, checks)


def execute(name: str, df: DeviceFile, opts: RunOptions) -> CommandResult:
    if name == "report":
        return run_report(df, opts)
    return COMMANDS[name](df, opts)
