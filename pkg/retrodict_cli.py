import sys
from pathlib import Path
from typing import Annotated, Optional

import typer
from rich.console import Console
from rich.table import Table

from constants import EXIT_OK, EXIT_UNEXPECTED
from src.commands import CommandResult, RunOptions, execute
from src.device_file import emit_device_file, parse_device_file
from src.errors import RetrodictError
from utils.config import Config, OutputFormat, Tolerances
from utils.logger import logger, set_console_level
from utils.report_handler import ReportHandler, frame_to_csv

console = Console(stderr=True)
app = typer.Typer(add_completion=False, help="制备 / 测量装置的预测与回溯概率工具")

DeviceArg = Annotated[Path, typer.Argument(help="装置定义文件（JSON）")]
OutOpt = Annotated[Optional[Path], typer.Option("--out", help="输出目录，缺省写到 stdout")]
FormatOpt = Annotated[Optional[OutputFormat], typer.Option("--format", help="输出格式")]
LenientOpt = Annotated[bool, typer.Option("--lenient", help="未知字段只告警不报错")]
TolHerm = Annotated[Optional[float], typer.Option("--tol-herm", help="Hermitian 容差")]
TolPsd = Annotated[Optional[float], typer.Option("--tol-psd", help="非负定容差")]
TolUnitary = Annotated[Optional[float], typer.Option("--tol-unitary", help="幺正容差")]
TolProp = Annotated[Optional[float], typer.Option("--tol-prop", help="正比于单位算符的容差")]
TolDenom = Annotated[Optional[float], typer.Option("--tol-denom", help="分母退化阈值")]
TrialsOpt = Annotated[int, typer.Option("--trials", help="试验次数")]
SeedOpt = Annotated[int, typer.Option("--seed", help="64 位随机种子")]
ChunksOpt = Annotated[Optional[int], typer.Option("--chunks", help="分片数，不影响结果")]


def build_tolerances(**overrides: Optional[float]) -> Tolerances:
    """在配置容差上叠加命令行 --tol-* 参数"""
    base = Config().tolerances
    update = {key: value for key, value in overrides.items() if value is not None}
    return Tolerances(**{**base.model_dump(), **update}) if update else base


def show_check_summary(result: CommandResult) -> None:
    """交叉校验摘要打印到 stderr"""
    if not result.checks:
        return
    table = Table(title=f"{result.command} 交叉校验")
    table.add_column("校验项", style="cyan")
    table.add_column("偏差", style="magenta")
    table.add_column("上限")
    table.add_column("结果")
    for check in result.checks:
        table.add_row(
            check.name,
            f"{check.deviation:.3g}",
            f"{check.limit:.3g}",
            "[green]通过[/green]" if check.passed else "[red]失败[/red]",
        )
    console.print(table)


def run_command(
    name: str,
    device: Path,
    out: Optional[Path],
    output_format: Optional[OutputFormat],
    lenient: bool,
    tol: Tolerances,
    trials: int = 100_000,
    seed: int = 1,
    chunks: Optional[int] = None,
    log_csv: Optional[Path] = None,
) -> None:
    config = Config()
    set_console_level(config.log_level)
    output_format = output_format or config.output_format
    logger.info(f"执行 {name}: {device}")
    try:
        device_file = parse_device_file(device, lenient=lenient or config.lenient)
        opts = RunOptions(tol=tol, trials=trials, seed=seed, chunks=chunks, include_log=log_csv is not None)
        result = execute(name, device_file, opts)
        document = result.document()
        if log_csv is not None:
            log_frame = document.pop("log")
            log_csv.parent.mkdir(parents=True, exist_ok=True)
            log_csv.write_text(frame_to_csv(log_frame), encoding="utf-8", newline="\n")
        text = ReportHandler(output_format).write(document, out)
        if text is not None:
            sys.stdout.write(text)
            sys.stdout.flush()
        show_check_summary(result)
        result.raise_for_checks()
    except RetrodictError as e:
        logger.error(f"{type(e).__name__}: {e}")
        console.print(f"[red]error[/red] {type(e).__name__}: {e}")
        raise typer.Exit(e.exit_code)
    except typer.Exit:
        raise
    except Exception as e:
        logger.exception(f"运行出错: {e}")
        raise typer.Exit(EXIT_UNEXPECTED)
    logger.info(f"{name} 完成")
    raise typer.Exit(EXIT_OK)


def _simple(name: str, doc: str):
    def command(
        device: DeviceArg,
        out: OutOpt = None,
        output_format: FormatOpt = None,
        lenient: LenientOpt = False,
        tol_herm: TolHerm = None,
        tol_psd: TolPsd = None,
        tol_unitary: TolUnitary = None,
        tol_prop: TolProp = None,
        tol_denom: TolDenom = None,
    ):
        tol = build_tolerances(
            herm=tol_herm, psd=tol_psd, unitary=tol_unitary, prop=tol_prop, denom=tol_denom
        )
        run_command(name, device, out, output_format, lenient, tol)

    command.__doc__ = doc
    app.command(name)(command)


_simple("validate", "校验装置文件")
_simple("classify", "判定装置是否有偏，并给出先验分布")
_simple("joint", "联合分布 P(i,j) 及边缘分布")
_simple("predict", "预测条件概率 P(j|i)")
_simple("retrodict", "回溯条件概率 P(i|j)")
_simple("evolve-retrodict", "含幺正演化的回溯概率，正向与反向两条路径")
_simple("belinfante", "Belinfante 场景的回溯概率与判定")
_simple("appendix-check", "用扩展 POM 的常规公设复核联合分布")


@app.command("simulate")
def simulate(
    device: DeviceArg,
    trials: TrialsOpt = 100_000,
    seed: SeedOpt = 1,
    chunks: ChunksOpt = None,
    log_csv: Annotated[
        Optional[Path], typer.Option("--log-csv", help="逐次试验记录写到该 CSV 文件")
    ] = None,
    out: OutOpt = None,
    output_format: FormatOpt = None,
    lenient: LenientOpt = False,
    tol_herm: TolHerm = None,
    tol_psd: TolPsd = None,
    tol_unitary: TolUnitary = None,
    tol_prop: TolProp = None,
    tol_denom: TolDenom = None,
):
    """蒙特卡洛模拟并与联合分布比较"""
    tol = build_tolerances(
        herm=tol_herm, psd=tol_psd, unitary=tol_unitary, prop=tol_prop, denom=tol_denom
    )
    run_command(
        "simulate", device, out, output_format, lenient, tol,
        trials=trials, seed=seed, chunks=chunks, log_csv=log_csv,
    )


@app.command("report")
def report(
    device: DeviceArg,
    trials: TrialsOpt = 100_000,
    seed: SeedOpt = 1,
    chunks: ChunksOpt = None,
    out: OutOpt = None,
    output_format: FormatOpt = None,
    lenient: LenientOpt = False,
    tol_herm: TolHerm = None,
    tol_psd: TolPsd = None,
    tol_unitary: TolUnitary = None,
    tol_prop: TolProp = None,
    tol_denom: TolDenom = None,
):
    """全部子命令的结果汇总成一份文档"""
    tol = build_tolerances(
        herm=tol_herm, psd=tol_psd, unitary=tol_unitary, prop=tol_prop, denom=tol_denom
    )
    run_command(
        "report", device, out, output_format, lenient, tol,
        trials=trials, seed=seed, chunks=chunks,
    )


@app.command("emit")
def emit(device: DeviceArg, lenient: LenientOpt = False):
    """解析后按规范格式重新输出装置文件"""
    try:
        device_file = parse_device_file(device, lenient=lenient or Config().lenient)
    except RetrodictError as e:
        console.print(f"[red]error[/red] {type(e).__name__}: {e}")
        raise typer.Exit(e.exit_code)
    sys.stdout.write(emit_device_file(device_file))


if __name__ == "__main__":
    app()
