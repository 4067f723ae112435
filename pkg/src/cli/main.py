"""
命令行入口：train / eval / infer / ablate / gradcheck / synth。

退出码：0 成功；1 运行时错误（配置、数据、训练、检查点等 TerrainError 或文件系统错误）；
2 用法错误（未知参数或子命令、覆盖项格式错误），用法说明输出到 stderr。
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from src.core.base.errors import ConfigValueError, TerrainError
from src.data.datasets import scan_dataset
from src.data.synthetic import generate_synthetic
from src.engine.ablation import parse_variants, run_ablation
from src.engine.checkpoint import load_checkpoint
from src.engine.config import VARIANTS, TrainConfig, load_train_config, parse_override
from src.engine.evaluator import evaluate, predict_image
from src.engine.gradcheck import COMPONENTS, gradient_check_report
from src.engine.trainer import resolve_data_root, train
from src.utils.config.manager import get_config, resolve_path
from src.utils.log.manager import get_logger, log_exception, set_global_log_level, setup_logging

PROG = "eot-terrain"
DEFAULT_TOLERANCE = 1e-4

logger = get_logger(__name__)


def _override(text: str) -> str:
    try:
        parse_override(text)
    except ConfigValueError as e:
        raise argparse.ArgumentTypeError(e.message) from e
    return text


def _int_list(text: str) -> List[int]:
    try:
        values = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"应为逗号分隔的整数列表: {text!r}") from e
    if not values:
        raise argparse.ArgumentTypeError("列表为空")
    return values


def _components(text: str) -> List[str]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    unknown = [item for item in items if item not in COMPONENTS]
    if unknown or not items:
        raise argparse.ArgumentTypeError(f"未知的梯度检查组件: {unknown or text!r}，可选 {','.join(COMPONENTS)}")
    return items


def _experiment_flags(parser: argparse.ArgumentParser, device: str) -> None:
    parser.add_argument("--config", metavar="PATH", help="实验配置文件（key=value）")
    parser.add_argument("--override", metavar="KEY=VALUE", action="append", default=[], type=_override,
                        help="覆盖配置项，可重复；优先级高于配置文件和 EOT_TRAIN__* 环境变量")
    parser.add_argument("--seed", type=int, help="随机种子（等价于 --override seed=N）")
    parser.add_argument("--device", default=device, help=f"运行设备（默认 {device}）")
    parser.add_argument("--output", metavar="DIR", help="输出目录")


def build_parser(settings: Optional[Dict[str, Any]] = None) -> argparse.ArgumentParser:
    settings = settings if settings is not None else get_config()
    device = str(settings.get("runtime", {}).get("device") or "cpu")
    parser = argparse.ArgumentParser(prog=PROG, description="纹理程度引导的地形/纹理识别：训练、评估、推理与消融")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出 DEBUG 级别日志")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    train_parser = subparsers.add_parser("train", help="训练一个模型变体")
    _experiment_flags(train_parser, device)
    train_parser.add_argument("--resume", metavar="DIR", help="从检查点目录续训（通常是 checkpoint_last/）")
    train_parser.add_argument("--progress", action="store_true", help="显示批进度条")
    train_parser.set_defaults(handler=_train)

    eval_parser = subparsers.add_parser("eval", help="评估检查点的整体与逐类准确率")
    eval_parser.add_argument("--checkpoint", metavar="DIR", required=True, help="检查点目录")
    eval_parser.add_argument("--split", choices=("train", "test"), default="test", help="评估的数据集划分")
    eval_parser.add_argument("--override", metavar="KEY=VALUE", action="append", default=[], type=_override,
                             help="覆盖检查点配置快照中的数据项（如 data.root=...）")
    eval_parser.add_argument("--device", default=device, help=f"运行设备（默认 {device}）")
    eval_parser.set_defaults(handler=_eval)

    infer_parser = subparsers.add_parser("infer", help="单图推理，输出 top-k 类别概率")
    infer_parser.add_argument("--checkpoint", metavar="DIR", required=True, help="检查点目录")
    infer_parser.add_argument("--image", metavar="PATH", required=True, help="图像路径")
    infer_parser.add_argument("--top", type=int, default=5, help="输出的类别数（默认 5）")
    infer_parser.add_argument("--device", default=device, help=f"运行设备（默认 {device}）")
    infer_parser.set_defaults(handler=_infer)

    ablate_parser = subparsers.add_parser("ablate", help="依次训练多个变体并输出对比表")
    _experiment_flags(ablate_parser, device)
    ablate_parser.add_argument("--variants", default=",".join(VARIANTS),
                               help=f"逗号分隔的变体列表（默认 {','.join(VARIANTS)}）")
    ablate_parser.add_argument("--seeds", type=_int_list, help="逗号分隔的种子列表（默认使用配置中的 seed）")
    ablate_parser.set_defaults(handler=_ablate)

    grad_parser = subparsers.add_parser("gradcheck", help="有限差分梯度检查")
    grad_parser.add_argument("--components", type=_components, default=list(COMPONENTS),
                             help=f"逗号分隔的组件列表（默认 {','.join(COMPONENTS)}）")
    grad_parser.add_argument("--epsilon", type=float, help="差分步长（默认按组件取 1e-3 或 1e-4）")
    grad_parser.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                             help=f"允许的最大相对误差（默认 {DEFAULT_TOLERANCE}）")
    grad_parser.add_argument("--seed", type=int, default=0, help="随机种子")
    grad_parser.set_defaults(handler=_gradcheck)

    synth_parser = subparsers.add_parser("synth", help="生成合成纹理数据集")
    synth_parser.add_argument("--classes", type=int, default=4, help="类别数（默认 4）")
    synth_parser.add_argument("--per-class", type=int, default=32, help="每类图像数（默认 32）")
    synth_parser.add_argument("--split", choices=("train", "test", "both"), default="both",
                              help="生成的划分（默认 both）")
    synth_parser.add_argument("--seed", type=int, default=0, help="随机种子")
    synth_parser.add_argument("--output", metavar="DIR", help="输出根目录（默认 paths.cache/synthetic）")
    synth_parser.add_argument("--progress", action="store_true", help="显示进度条")
    synth_parser.set_defaults(handler=_synth)
    return parser


def _experiment_config(args: argparse.Namespace) -> TrainConfig:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    overrides.append(f"device={args.device}")
    return load_train_config(args.config, overrides)


def _train(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    output = args.output or resolve_path(f"{config.variant}_seed{config.seed}")
    result = train(config, output, resume_from=args.resume, progress=args.progress)
    final = result.final
    test = "-" if final.test_acc is None else f"{final.test_acc:.4f}"
    print(f"epoch={final.epoch} train_loss={final.train_loss:.4f} train_acc={final.train_acc:.4f} test_acc={test}")
    print(f"best_epoch={result.best_epoch} output={result.output_dir}")
    return 0


def _eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    if args.override:
        flat = checkpoint.config.to_flat()
        flat.update(parse_override(item) for item in args.override)
        checkpoint.config = TrainConfig.from_flat(flat)
    data = checkpoint.config.data
    index = scan_dataset(resolve_data_root(data.root), data.layout, args.split, data.fold)
    report = evaluate(checkpoint, index, device=args.device)
    print(report.format())
    return 0


def _infer(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    for name, probability in predict_image(checkpoint, args.image, top=args.top, device=args.device):
        print(f"{name}\t{probability:.4f}")
    return 0


def _ablate(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    variants = parse_variants(args.variants)
    seeds = args.seeds or [config.seed]
    output = args.output or resolve_path("ablation")
    table = run_ablation(config, variants, seeds, output)
    print(table.format(), end="")
    return 0


def _gradcheck(args: argparse.Namespace) -> int:
    failed = 0
    width = max(len(component) for component in args.components)
    for component in args.components:
        result = gradient_check_report(component, epsilon=args.epsilon, seed=args.seed)
        status = "ok" if result.max_error < args.tolerance else "FAIL"
        failed += status == "FAIL"
        print(f"{component:<{width}}  {result.max_error:.3e}  skipped={result.skipped}  {status}")
    return 1 if failed else 0


def _synth(args: argparse.Namespace) -> int:
    output = args.output or resolve_path("synthetic", key="cache")
    splits = ("train", "test") if args.split == "both" else (args.split,)
    for split in splits:
        index = generate_synthetic(args.classes, args.per_class, args.seed, output, split=split,
                                   progress=args.progress)
        print(f"{split}: {len(index)} images -> {os.path.join(output, split)}")
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    """执行一次命令行调用并返回退出码。"""
    settings = get_config()
    setup_logging(settings)
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 2
    if args.verbose:
        set_global_log_level(logging.DEBUG)
    try:
        return int(args.handler(args))
    except TerrainError as e:
        log_exception(logger, f"{args.command} 失败")
        print(f"错误: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        log_exception(logger, f"{args.command} 失败（文件系统）")
        print(f"错误: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
